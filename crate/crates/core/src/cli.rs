//! Command-line front end.
//!
//! Exit codes: 0 success, 1 model/domain error, 2 usage error, 3 failed
//! verification. Every random draw is derived from `--seed`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::calibrate::{self, Bounds, FixedParams, SearchConfig, SimConfig, TargetSet};
use crate::dynamics::{self, GridSpec, IRFResult, PeriodRecord};
use crate::error::ModelError;
use crate::firms::{self, FirmOutcome};
use crate::params::{AggregateShockState, MarkovChain2, ModelParams, ParamsFile, ValidatedParams};
use crate::statics::{self, StaticEquilibrium};
use crate::verify::{self, VerifyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Model(_) => EXIT_DOMAIN,
            CliError::Verification(_) => EXIT_VERIFY,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "sortcycle", version, about = "Worker-firm sorting business-cycle model")]
pub struct Cli {
    /// Parameter file (JSON); the built-in calibration when omitted.
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Static equilibrium at one aggregate state and capital stock.
    Solve(StateArgs),
    /// Cross-sectional moments, analytic and optionally from a firm panel.
    Moments(MomentsArgs),
    /// Simulate the stochastic economy.
    Simulate(SimulateArgs),
    /// Generalized impulse response to a crisis.
    Irf(IrfArgs),
    /// Simulated-method-of-moments calibration.
    Calibrate(CalibrateArgs),
    /// Run the numerical oracles.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct StateArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub z: f64,
    #[arg(long = "K", alias = "k", default_value_t = 1.0)]
    pub k: f64,
    #[arg(long = "A", alias = "a", default_value_t = 1.0)]
    pub a: f64,
}

#[derive(Debug, Clone, Args)]
pub struct MomentsArgs {
    #[command(flatten)]
    pub state: StateArgs,
    /// Firms in the Monte-Carlo panel; 0 skips the panel.
    #[arg(long, default_value_t = 0)]
    pub n_firms: usize,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 400)]
    pub grid_nodes: usize,
}

impl GridArgs {
    fn spec(&self) -> CliResult<GridSpec> {
        if self.grid_nodes < 4 {
            return Err(CliError::Usage(format!("--grid-nodes {} must be at least 4", self.grid_nodes)));
        }
        Ok(GridSpec {
            n_nodes: self.grid_nodes,
            ..GridSpec::default()
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long = "T", alias = "t", default_value_t = 10_000)]
    pub t_len: usize,
    #[arg(long, default_value_t = 100)]
    pub burn_in: usize,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Args)]
pub struct IrfArgs {
    #[arg(long, default_value_t = 40)]
    pub horizon: usize,
    #[arg(long, default_value_t = 2000)]
    pub n_sims: usize,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    /// Target file (JSON); the empirical targets when omitted.
    #[arg(long)]
    pub targets: Option<PathBuf>,
    /// Stationary-weighted analytic moments instead of simulated paths.
    #[arg(long)]
    pub fast: bool,
    #[arg(long = "T", alias = "t", default_value_t = 10_000)]
    pub t_len: usize,
    #[arg(long, default_value_t = 100)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    #[arg(long, default_value_t = 1500)]
    pub max_evals: usize,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    #[arg(long, default_value_t = 20)]
    pub grid: usize,
    #[arg(long, default_value_t = 100_000)]
    pub theta_firms: usize,
    #[arg(long, default_value_t = 50)]
    pub theta_periods: usize,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            println!("{summary}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command inside a thread pool of the requested size and
/// returns the one-line summary.
pub fn execute(cli: &Cli) -> CliResult<String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("--threads {}: {e}", cli.threads)))?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: &Cli) -> CliResult<String> {
    let (model, chain) = load_params(cli.params.as_deref())?;
    match &cli.command {
        Command::Solve(a) => cmd_solve(cli, model, a),
        Command::Moments(a) => cmd_moments(cli, model, a),
        Command::Simulate(a) => cmd_simulate(cli, model, chain, a),
        Command::Irf(a) => cmd_irf(cli, model, chain, a),
        Command::Calibrate(a) => cmd_calibrate(cli, model, chain, a),
        Command::Verify(a) => cmd_verify(cli, model, chain, a),
    }
}

fn load_params(path: Option<&Path>) -> CliResult<(ModelParams, MarkovChain2)> {
    match path {
        None => Ok((ModelParams::baseline(), MarkovChain2::baseline())),
        Some(p) => {
            let file = ParamsFile::load(p).map_err(|e| CliError::Usage(format!("--params {e}")))?;
            Ok((file.model(), file.chain.unwrap_or_else(MarkovChain2::baseline)))
        }
    }
}

fn validated(model: ModelParams) -> CliResult<ValidatedParams> {
    Ok(model.validate()?)
}

fn out_path(cli: &Cli, name: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(&cli.out).map_err(|e| CliError::Usage(format!("--out {}: {e}", cli.out.display())))?;
    Ok(cli.out.join(name))
}

fn write_file(cli: &Cli, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
    let path = out_path(cli, name)?;
    fs::write(&path, bytes).map_err(|e| CliError::Usage(format!("--out {}: {e}", path.display())))?;
    Ok(path)
}

fn write_json<T: Serialize>(cli: &Cli, name: &str, value: &T) -> CliResult<PathBuf> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable output");
    text.push('\n');
    write_file(cli, name, text.as_bytes())
}

/// Seventeen significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(cli: &Cli, name: &str, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> CliResult<PathBuf> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Usage(format!("--out {name}: {e}"));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Usage(format!("--out {name}: {e}")))?;
    write_file(cli, name, &bytes)
}

fn state_equilibrium(params: &ValidatedParams, a: &StateArgs) -> CliResult<StaticEquilibrium> {
    let shock = AggregateShockState::baseline(params, a.z).with_a(a.a);
    Ok(statics::solve_static(params, &shock, a.k)?)
}

#[derive(Serialize)]
struct SolveOutput {
    equilibrium: StaticEquilibrium,
    measured_tfp: f64,
    labor_share: f64,
    income: f64,
}

fn cmd_solve(cli: &Cli, model: ModelParams, a: &StateArgs) -> CliResult<String> {
    let p = validated(model)?;
    let eq = state_equilibrium(&p, a)?;
    let out = SolveOutput {
        measured_tfp: statics::measured_tfp(&p, &eq),
        labor_share: eq.labor_share(),
        income: eq.income(),
        equilibrium: eq,
    };
    let path = write_json(cli, "equilibrium.json", &out)?;
    Ok(format!(
        "solve: lambda_t={} Y={} R={} -> {}",
        fmt_f64(eq.lambda_t),
        fmt_f64(eq.y),
        fmt_f64(eq.r),
        path.display()
    ))
}

#[derive(Serialize)]
struct MomentsOutput {
    z: f64,
    lambda_t: f64,
    analytic: firms::DispersionMoments,
    population_shares: firms::RevenueShares,
    labor_share: f64,
    measured_tfp: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    panel: Option<firms::CrossSectionMoments>,
}

const PANEL_HEADER: [&str; 16] = [
    "theta",
    "eps1",
    "eps2",
    "Q",
    "k",
    "l",
    "chi",
    "P",
    "tau1",
    "tau2",
    "revenue",
    "wage_bill",
    "log_tfpq",
    "log_tfpr",
    "matched_x",
    "log_wage",
];

fn panel_row(f: &FirmOutcome) -> Vec<String> {
    [
        f.theta,
        f.eps1,
        f.eps2,
        f.q,
        f.k,
        f.l,
        f.chi,
        f.p,
        f.tau1,
        f.tau2,
        f.revenue,
        f.wage_bill,
        f.log_tfpq,
        f.log_tfpr,
        f.matched_x,
        f.log_wage,
    ]
    .iter()
    .map(|&v| fmt_f64(v))
    .collect()
}

fn cmd_moments(cli: &Cli, model: ModelParams, a: &MomentsArgs) -> CliResult<String> {
    let p = validated(model)?;
    let eq = state_equilibrium(&p, &a.state)?;
    let mut out = MomentsOutput {
        z: a.state.z,
        lambda_t: eq.lambda_t,
        analytic: firms::analytic_moments(&p, &eq),
        population_shares: firms::population_revenue_shares(&p, &eq)?,
        labor_share: eq.labor_share(),
        measured_tfp: statics::measured_tfp(&p, &eq),
        panel: None,
    };
    let mut extra = String::new();
    if a.n_firms > 0 {
        let panel = firms::sample_cross_section(&p, &eq, a.n_firms, cli.seed)?;
        out.panel = Some(firms::cross_section_moments(&panel, &eq)?);
        let path = write_csv(cli, "panel.csv", &PANEL_HEADER, panel.firms.iter().map(panel_row))?;
        extra = format!(", {}", path.display());
    }
    let path = write_json(cli, "moments.json", &out)?;
    Ok(format!(
        "moments: var_log_wage={} var_log_tfpq={} var_log_tfpr={} -> {}{extra}",
        fmt_f64(out.analytic.var_log_wage),
        fmt_f64(out.analytic.var_log_tfpq),
        fmt_f64(out.analytic.var_log_tfpr),
        path.display()
    ))
}

const PATH_HEADER: [&str; 18] = [
    "t",
    "state",
    "z",
    "K",
    "Y",
    "C",
    "measured_tfp",
    "lambda_t",
    "var_log_wage",
    "var_log_tfpq",
    "var_log_tfpr",
    "labor_share",
    "R",
    "w0",
    "rev_share_top10",
    "rev_share_p50_p90",
    "income",
    "K_next",
];

fn path_row(r: &PeriodRecord) -> Vec<String> {
    let mut row = vec![r.t.to_string(), r.state.to_string()];
    row.extend(
        [
            r.z,
            r.k,
            r.y,
            r.c,
            r.measured_tfp,
            r.lambda_t,
            r.var_log_wage,
            r.var_log_tfpq,
            r.var_log_tfpr,
            r.labor_share,
            r.r,
            r.w0,
            r.rev_share_top10,
            r.rev_share_p50_p90,
            r.income,
            r.k_next,
        ]
        .iter()
        .map(|&v| fmt_f64(v)),
    );
    row
}

#[derive(Serialize)]
struct SimulateOutput {
    seed: u64,
    t_len: usize,
    burn_in: usize,
    policy_iterations: usize,
    k_star: [f64; 2],
    moments: dynamics::PathMoments,
}

fn cmd_simulate(cli: &Cli, model: ModelParams, chain: MarkovChain2, a: &SimulateArgs) -> CliResult<String> {
    if a.t_len <= a.burn_in {
        return Err(CliError::Usage(format!("--T {} must exceed --burn-in {}", a.t_len, a.burn_in)));
    }
    let grid = a.grid.spec()?;
    let p = validated(model)?;
    chain.validate()?;
    let policy = dynamics::solve_policy(&p, &chain, 1.0, &grid)?;
    let path = dynamics::simulate(&policy, a.t_len, a.burn_in, cli.seed)?;
    let moments = dynamics::path_moments(&path)?;
    let csv_path = write_csv(cli, "path.csv", &PATH_HEADER, path.records.iter().map(path_row))?;
    let out = SimulateOutput {
        seed: cli.seed,
        t_len: a.t_len,
        burn_in: a.burn_in,
        policy_iterations: policy.iterations,
        k_star: policy.k_star,
        moments,
    };
    write_json(cli, "moments.json", &out)?;
    Ok(format!(
        "simulate: T={} labor_share={} wage_inequality={} std_tfp={} -> {}",
        a.t_len,
        fmt_f64(moments.labor_share),
        fmt_f64(moments.wage_inequality),
        fmt_f64(moments.std_tfp),
        csv_path.display()
    ))
}

const IRF_HEADER: [&str; 7] = [
    "h",
    "d_log_y",
    "d_measured_tfp",
    "d_log_k",
    "d_var_log_tfpq",
    "d_var_log_tfpr",
    "d_var_log_wage",
];

fn irf_rows(r: &IRFResult) -> impl Iterator<Item = Vec<String>> + '_ {
    (0..r.d_log_y.len()).map(move |h| {
        let mut row = vec![h.to_string()];
        row.extend(
            [
                r.d_log_y[h],
                r.d_measured_tfp[h],
                r.d_log_k[h],
                r.d_var_log_tfpq[h],
                r.d_var_log_tfpr[h],
                r.d_var_log_wage[h],
            ]
            .iter()
            .map(|&v| fmt_f64(v)),
        );
        row
    })
}

fn cmd_irf(cli: &Cli, model: ModelParams, chain: MarkovChain2, a: &IrfArgs) -> CliResult<String> {
    if a.n_sims == 0 {
        return Err(CliError::Usage("--n-sims must be positive".into()));
    }
    let grid = a.grid.spec()?;
    let p = validated(model)?;
    chain.validate()?;
    let policy = dynamics::solve_policy(&p, &chain, 1.0, &grid)?;
    let irf = dynamics::impulse_response(&policy, a.horizon, a.n_sims, cli.seed)?;
    let path = write_csv(cli, "irf.csv", &IRF_HEADER, irf_rows(&irf))?;
    Ok(format!(
        "irf: impact d_log_y={} d_measured_tfp={} -> {}",
        fmt_f64(irf.d_log_y[0]),
        fmt_f64(irf.d_measured_tfp[0]),
        path.display()
    ))
}

fn cmd_calibrate(cli: &Cli, model: ModelParams, chain: MarkovChain2, a: &CalibrateArgs) -> CliResult<String> {
    if !a.fast && a.t_len <= a.burn_in {
        return Err(CliError::Usage(format!("--T {} must exceed --burn-in {}", a.t_len, a.burn_in)));
    }
    if a.starts == 0 {
        return Err(CliError::Usage("--starts must be positive".into()));
    }
    let targets = match &a.targets {
        None => TargetSet::default(),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("--targets {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("--targets {}: {e}", path.display())))?
        }
    };
    validated(model)?;
    chain.validate()?;
    let fixed = FixedParams { model, chain };
    let sim = SimConfig {
        t_len: a.t_len,
        burn_in: a.burn_in,
        grid: a.grid.spec()?,
        fast: a.fast,
    };
    let search = SearchConfig {
        n_starts: a.starts,
        max_evals: a.max_evals,
        ..SearchConfig::default()
    };
    let result = calibrate::calibrate(&fixed, &targets, &Bounds::default(), &sim, &search, cli.seed)?;
    let path = write_json(cli, "calibration.json", &result)?;
    let b = result.best;
    Ok(format!(
        "calibrate: objective={} psi={} z_h={} lambda_theta={} lambda_x={} sigma1={} -> {}",
        fmt_f64(result.objective),
        fmt_f64(b.psi),
        fmt_f64(b.z_h),
        fmt_f64(b.lambda_theta),
        fmt_f64(b.lambda_x),
        fmt_f64(b.sigma1),
        path.display()
    ))
}

fn cmd_verify(cli: &Cli, model: ModelParams, chain: MarkovChain2, a: &VerifyArgs) -> CliResult<String> {
    if a.grid < 2 {
        return Err(CliError::Usage(format!("--grid {} must be at least 2", a.grid)));
    }
    let p = validated(model)?;
    chain.validate()?;
    let cfg = VerifyConfig {
        proposition_points: a.points,
        proposition_grid: a.grid,
        theta_firms: a.theta_firms,
        theta_periods: a.theta_periods,
        seed: cli.seed,
        ..VerifyConfig::default()
    };
    let report = verify::run_all(&p, chain.levels(), &cfg);
    let path = write_json(cli, "verify.json", &report)?;
    let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
    if !report.pass {
        return Err(CliError::Verification(format!("{} ({})", failed.join(", "), path.display())));
    }
    Ok(format!("verify: {} checks passed -> {}", report.checks.len(), path.display()))
}
