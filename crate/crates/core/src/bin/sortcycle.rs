fn main() {
    std::process::exit(sortcycle::cli::run(std::env::args_os()));
}
