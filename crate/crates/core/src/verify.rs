//! Independent numerical checks of the closed forms: quadrature of the
//! market-clearing integrals, the job-type density, worker assignment, a
//! randomized comparative-statics harness and the firm-type redraw law.
//!
//! Exponents and constants are recomputed here from the raw parameters
//! rather than taken from `statics`/`firms`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::firms::FirmOutcome;
use crate::params::{AggregateShockState, ModelParams, ThetaRedrawProcess, ValidatedParams};
use crate::quad::{adaptive, GaussHermite};
use crate::rng::{Cursor, Stream};
use crate::statics::{solve_lambda, solve_static, StaticEquilibrium};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value <= tolerance`.
    pub fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }

    /// Passes when `value > tolerance` (negative controls).
    pub fn above(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            pass: value > tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl VerificationReport {
    pub fn new(mut checks: Vec<Check>) -> Self {
        checks.sort_by(|a, b| a.name.cmp(&b.name));
        let pass = checks.iter().all(|c| c.pass);
        VerificationReport { checks, pass }
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Exponents of the firm problem, from the raw parameters.
#[derive(Debug, Clone, Copy)]
struct Exponents {
    kappa: f64,
    eta_q: f64,
    eta_q_theta: f64,
    eta_l_theta: f64,
}

impl Exponents {
    fn new(p: &ModelParams, z: f64, lambda: f64) -> Self {
        let kappa = 1.0 - 1.0 / p.xi;
        let eta_q = p.xi / (1.0 + (1.0 - p.alpha - p.gamma) * (p.xi - 1.0));
        let loading = (lambda / p.lambda_x).powf(p.psi);
        let eta_q_theta = (1.0 - p.psi) * loading - p.gamma * z;
        let eta_l_theta = kappa * eta_q * eta_q_theta - z - p.psi * loading / p.gamma;
        Exponents {
            kappa,
            eta_q,
            eta_q_theta,
            eta_l_theta,
        }
    }
}

const THETA_SPAN: f64 = 40.0;
const HERMITE_ORDER: usize = 64;

/// E over (eps1, eps2) of exp(-c1 eps1 - c2 eps2), by Gauss-Hermite.
fn wedge_factor(gh: &GaussHermite, shock: &AggregateShockState, c1: f64, c2: f64) -> f64 {
    let e1: f64 = gh.normal_points(shock.sigma1_t).iter().map(|&(e, w)| w * (-c1 * e).exp()).sum();
    let e2: f64 = gh.normal_points(shock.sigma2_t).iter().map(|&(e, w)| w * (-c2 * e).exp()).sum();
    e1 * e2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JobDensityResiduals {
    /// |integral of the job density - 1|
    pub mass: f64,
    /// Coefficient of variation of f(h) exp(lambda h) over 20 points.
    pub shape_cv: f64,
}

/// Job-type density f(h) = lambda_theta e^{-lambda_theta h} E[l(h, eps)]
/// with the labor exponent built from `lambda`.
pub fn check_job_density_with(params: &ValidatedParams, eq: &StaticEquilibrium, lambda: f64) -> JobDensityResiduals {
    let p = params;
    let shock = &eq.shock;
    let ex = Exponents::new(p, shock.z, lambda);
    let gh = GaussHermite::new(HERMITE_ORDER);
    let c1 = ex.kappa * ex.eta_q * p.gamma + 1.0;
    let c2 = ex.kappa * ex.eta_q * p.alpha;
    let inner = wedge_factor(&gh, shock, c1, c2);
    let lt = shock.lambda_theta_t;
    let density = |h: f64| lt * eq.l_bar * inner * ((ex.eta_l_theta - lt) * h).exp();
    let span = THETA_SPAN / lambda;
    let mass = adaptive(density, 0.0, span, 0.0, 1e-13).value;
    let shape: Vec<f64> = (0..20)
        .map(|i| {
            let h = span * 0.5 * i as f64 / 19.0;
            density(h) * (lambda * h).exp()
        })
        .collect();
    let mean = shape.iter().sum::<f64>() / 20.0;
    let sd = (shape.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 20.0).sqrt();
    JobDensityResiduals {
        mass: (mass - 1.0).abs(),
        shape_cv: sd / mean.abs(),
    }
}

pub fn check_job_density(params: &ValidatedParams, eq: &StaticEquilibrium) -> JobDensityResiduals {
    check_job_density_with(params, eq, eq.lambda_t)
}

/// Integral of P^{1-xi} over firms with the marginal-cost scale implied by
/// `q_bar`; the target is one.
pub fn goods_market_integral(params: &ValidatedParams, eq: &StaticEquilibrium, q_bar: f64) -> f64 {
    let p = params;
    let shock = &eq.shock;
    let ex = Exponents::new(p, shock.z, eq.lambda_t);
    let gh = GaussHermite::new(HERMITE_ORDER);
    let chi_bar = ex.kappa * (eq.y / q_bar).powf(1.0 / p.xi);
    let price0 = chi_bar / ex.kappa;
    // P^{1-xi} = price0^{1-xi} exp(kappa eta_Q u), u = eta_Q_theta theta - gamma e1 - alpha e2
    let a = ex.kappa * ex.eta_q;
    let inner = wedge_factor(&gh, shock, a * p.gamma, a * p.alpha);
    let lt = shock.lambda_theta_t;
    let decay = lt - a * ex.eta_q_theta;
    let f = |t: f64| lt * (-decay * t).exp();
    let integral = adaptive(f, 0.0, THETA_SPAN / decay, 0.0, 1e-13).value;
    price0.powf(1.0 - p.xi) * inner * integral
}

pub fn check_goods_market(params: &ValidatedParams, eq: &StaticEquilibrium) -> f64 {
    (goods_market_integral(params, eq, eq.q_bar) - 1.0).abs()
}

/// Aggregate capital demand at rental rate `r`.
pub fn capital_demand_integral(params: &ValidatedParams, eq: &StaticEquilibrium, r: f64) -> f64 {
    let p = params;
    let shock = &eq.shock;
    let ex = Exponents::new(p, shock.z, eq.lambda_t);
    let gh = GaussHermite::new(HERMITE_ORDER);
    let k_bar = p.alpha * ex.kappa * eq.q_bar.powf(ex.kappa) * eq.y.powf(1.0 / p.xi) / r;
    let a = ex.kappa * ex.eta_q;
    // k = k_bar exp(kappa eta_Q u - e2)
    let inner = wedge_factor(&gh, shock, a * p.gamma, a * p.alpha + 1.0);
    let lt = shock.lambda_theta_t;
    let decay = lt - a * ex.eta_q_theta;
    let f = |t: f64| lt * (-decay * t).exp();
    k_bar * inner * adaptive(f, 0.0, THETA_SPAN / decay, 0.0, 1e-13).value
}

/// Relative capital-market gap |demand / K - 1|.
pub fn check_capital_market(params: &ValidatedParams, eq: &StaticEquilibrium, k: f64) -> f64 {
    (capital_demand_integral(params, eq, eq.r) / k - 1.0).abs()
}

/// Max over `xs` of |lambda_x e^{-lambda_x x} - lambda mu'(x) e^{-lambda mu(x)}|
/// for the linear assignment mu(x) = slope * x.
pub fn check_worker_clearing_with(params: &ValidatedParams, eq: &StaticEquilibrium, xs: &[f64], slope: f64) -> f64 {
    let (lx, l) = (params.lambda_x, eq.lambda_t);
    xs.iter()
        .map(|&x| (lx * (-lx * x).exp() - l * slope * (-l * slope * x).exp()).abs())
        .fold(0.0, f64::max)
}

pub fn check_worker_clearing(params: &ValidatedParams, eq: &StaticEquilibrium, xs: &[f64]) -> f64 {
    check_worker_clearing_with(params, eq, xs, params.lambda_x / eq.lambda_t)
}

pub fn job_residual(p: &ModelParams, z: f64, lambda_theta: f64, lambda: f64) -> f64 {
    let d0 = 1.0 + (1.0 - p.alpha - p.gamma) * (p.xi - 1.0);
    let b = ((p.xi - 1.0) * (p.gamma - p.psi * (1.0 - p.alpha)) - p.psi) / (p.gamma * d0);
    let d = (1.0 + (p.xi - 1.0) * (1.0 - p.alpha)) / d0;
    b * (lambda / p.lambda_x).powf(p.psi) + lambda - (d * z + lambda_theta)
}

/// Upper end of a sign-changing bracket [0, upper] for the job-distribution
/// residual, by doubling from max(1, z + lambda_theta).
pub fn residual_upper_bound(params: &ValidatedParams, shock: &AggregateShockState) -> f64 {
    let mut hi = (shock.z.abs() + shock.lambda_theta_t).max(1.0);
    for _ in 0..200 {
        if job_residual(params, shock.z, shock.lambda_theta_t, hi) > 0.0 {
            break;
        }
        hi *= 2.0;
    }
    hi
}

/// Number of sign changes of the job-distribution residual on an even
/// scan of [0, upper].
pub fn bracket_sign_changes(params: &ValidatedParams, shock: &AggregateShockState, upper: f64, points: usize) -> usize {
    let mut changes = 0;
    let mut prev = job_residual(params, shock.z, shock.lambda_theta_t, 0.0);
    for i in 1..=points {
        let v = job_residual(params, shock.z, shock.lambda_theta_t, upper * i as f64 / points as f64);
        if v != 0.0 && prev != 0.0 && (v > 0.0) != (prev > 0.0) {
            changes += 1;
        }
        if v != 0.0 {
            prev = v;
        }
    }
    changes
}

/// Relative residuals of the labor FOC, capital FOC, production identity
/// and demand-markup identity for one firm, with the wage schedule and the
/// worker assignment rebuilt from the primitives.
pub fn foc_residuals(params: &ValidatedParams, eq: &StaticEquilibrium, f: &FirmOutcome) -> [f64; 4] {
    let p = params;
    let ratio = p.lambda_x / eq.lambda_t;
    let x = f.theta / ratio;
    let slope = p.psi / p.gamma * ratio.powf(1.0 - p.psi);
    let wage = eq.w0 * (slope * x).exp();
    let rel = |a: f64, b: f64| (a / b - 1.0).abs();
    let tech = eq.shock.a * (x.powf(p.psi) * f.theta.powf(1.0 - p.psi)).exp() * f.k.powf(p.alpha) * f.l.powf(p.gamma);
    let markup = p.xi / (p.xi - 1.0) * f.chi;
    [
        rel(f.tau1 * wage * f.l, p.gamma * f.chi * f.q),
        rel(f.tau2 * eq.r * f.k, p.alpha * f.chi * f.q),
        rel(f.q, tech),
        rel(f.q, markup.powf(-p.xi) * eq.y).max(rel(f.p, markup)),
    ]
}

fn uniform_in(cur: &mut Cursor, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * cur.uniform()
}

/// Random structural parameters over a broad valid region.
pub fn random_params(cur: &mut Cursor) -> ModelParams {
    let alpha = uniform_in(cur, 0.05, 0.45);
    let gamma = uniform_in(cur, 0.3, 0.95 - alpha);
    ModelParams {
        alpha,
        gamma,
        delta: uniform_in(cur, 0.02, 0.2),
        beta: uniform_in(cur, 0.9, 0.99),
        xi: uniform_in(cur, 1.5, 12.0),
        psi: uniform_in(cur, 0.05, 0.8),
        lambda_x: uniform_in(cur, 0.2, 4.0),
        lambda_theta: uniform_in(cur, 0.5, 12.0),
        sigma1: uniform_in(cur, 0.0, 0.5),
        sigma2: uniform_in(cur, 0.0, 0.3),
    }
}

/// A random parameter point for which the capital-demand guard holds on the
/// whole z grid [0, z_max] and over the lambda_theta grid [lt, 2 lt].
fn random_admissible(cur: &mut Cursor) -> (ValidatedParams, f64) {
    loop {
        let mut p = random_params(cur);
        let z_max = uniform_in(cur, 0.1, 1.0);
        // the guard binds hardest at low lambda_theta and large z
        p.lambda_theta = uniform_in(cur, 1.0, 12.0);
        let Ok(v) = p.validate() else { continue };
        let ok = [0.0, z_max].iter().all(|&z| {
            [1.0, 2.0].iter().all(|&m| {
                let shock = AggregateShockState {
                    lambda_theta_t: p.lambda_theta * m,
                    ..AggregateShockState::baseline(&v, z)
                };
                solve_static(&v, &shock, 1.0).is_ok()
            })
        });
        if ok {
            return (v, z_max);
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
struct Violations {
    lambda_in_z: usize,
    wage_in_z: usize,
    tfpq_in_z: usize,
    tfpr_in_z: usize,
    tfpr_positivity: usize,
    a_neutrality: usize,
    sigma_neutrality: usize,
    tfpq_in_lambda_theta: usize,
    tfpr_in_lambda_theta: usize,
    wage_in_lambda_theta: usize,
    bracket_in_lambda_theta: usize,
    solve_failures: usize,
}

impl Violations {
    fn add(&mut self, o: &Violations) {
        self.lambda_in_z += o.lambda_in_z;
        self.wage_in_z += o.wage_in_z;
        self.tfpq_in_z += o.tfpq_in_z;
        self.tfpr_in_z += o.tfpr_in_z;
        self.tfpr_positivity += o.tfpr_positivity;
        self.a_neutrality += o.a_neutrality;
        self.sigma_neutrality += o.sigma_neutrality;
        self.tfpq_in_lambda_theta += o.tfpq_in_lambda_theta;
        self.tfpr_in_lambda_theta += o.tfpr_in_lambda_theta;
        self.wage_in_lambda_theta += o.wage_in_lambda_theta;
        self.bracket_in_lambda_theta += o.bracket_in_lambda_theta;
        self.solve_failures += o.solve_failures;
    }
}

/// Dispersion formulas written out from the raw parameters.
fn dispersions(p: &ModelParams, shock: &AggregateShockState, lambda: f64) -> (f64, f64, f64, f64) {
    let ex = Exponents::new(p, shock.z, lambda);
    let loading = (lambda / p.lambda_x).powf(p.psi);
    let lt = shock.lambda_theta_t;
    let wage = (p.psi / p.gamma).powi(2) * (p.lambda_x / lambda).powf(2.0 - 2.0 * p.psi) / p.lambda_x.powi(2);
    let tfpq = (loading / lt).powi(2);
    let bracket = loading - ex.eta_q * ex.eta_q_theta / p.xi;
    let noise = (ex.eta_q / p.xi).powi(2) * (p.gamma.powi(2) * shock.sigma1_t.powi(2) + p.alpha.powi(2) * shock.sigma2_t.powi(2));
    let tfpr = (bracket / lt).powi(2) + noise;
    (wage, tfpq, tfpr, bracket)
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn propositions_at(p: &ValidatedParams, z_max: f64, grid: usize) -> Violations {
    let mut v = Violations::default();
    let zs: Vec<f64> = (0..grid).map(|i| z_max * i as f64 / (grid - 1) as f64).collect();
    let mut lambdas = Vec::new();
    let (mut wage, mut tfpq, mut tfpr) = (Vec::new(), Vec::new(), Vec::new());
    for &z in &zs {
        let shock = AggregateShockState::baseline(p, z);
        let Ok(l) = solve_lambda(p, &shock) else {
            v.solve_failures += 1;
            return v;
        };
        let (w, q, r, bracket) = dispersions(p, &shock, l);
        if !(bracket > 0.0) {
            v.tfpr_positivity += 1;
        }
        for a in [0.5, 2.0] {
            if solve_lambda(p, &shock.with_a(a)).map(f64::to_bits) != Ok(l.to_bits()) {
                v.a_neutrality += 1;
            }
        }
        for s1 in [0.0, 0.3] {
            for s2 in [0.0, 0.3] {
                let s = AggregateShockState {
                    sigma1_t: s1,
                    sigma2_t: s2,
                    ..shock
                };
                if solve_lambda(p, &s).map(f64::to_bits) != Ok(l.to_bits()) {
                    v.sigma_neutrality += 1;
                }
            }
        }
        lambdas.push(l);
        wage.push(w);
        tfpq.push(q);
        tfpr.push(r);
    }
    v.lambda_in_z += usize::from(!strictly_increasing(&lambdas));
    v.wage_in_z += usize::from(!strictly_decreasing(&wage));
    v.tfpq_in_z += usize::from(!strictly_increasing(&tfpq));
    v.tfpr_in_z += usize::from(!strictly_increasing(&tfpr));

    // lambda_theta grid at a fixed interior z
    let z = 0.5 * z_max;
    let d0 = 1.0 + (1.0 - p.alpha - p.gamma) * (p.xi - 1.0);
    let (e, m) = (1.0 - (1.0 - p.psi) / d0, p.gamma / d0);
    let (mut wage, mut tfpq, mut tfpr, mut bracket_sq) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for i in 0..grid {
        let lt = p.lambda_theta * (1.0 + i as f64 / (grid - 1) as f64);
        let shock = AggregateShockState {
            lambda_theta_t: lt,
            ..AggregateShockState::baseline(p, z)
        };
        let Ok(l) = solve_lambda(p, &shock) else {
            v.solve_failures += 1;
            return v;
        };
        let (w, q, r, _) = dispersions(p, &shock, l);
        wage.push(w);
        tfpq.push(q);
        tfpr.push(r);
        bracket_sq.push(((e * (l / p.lambda_x).powf(p.psi) + m * z) / lt).powi(2));
    }
    v.tfpq_in_lambda_theta += usize::from(!strictly_decreasing(&tfpq));
    v.tfpr_in_lambda_theta += usize::from(!strictly_decreasing(&tfpr));
    v.wage_in_lambda_theta += usize::from(!strictly_decreasing(&wage));
    v.bracket_in_lambda_theta += usize::from(!strictly_decreasing(&bracket_sq));
    v
}

/// Comparative statics at `n_points` random parameter points with
/// `grid`-point shock grids.
pub fn proposition_suite(n_points: usize, grid: usize, seed: u64) -> VerificationReport {
    let total = (0..n_points as u64)
        .into_par_iter()
        .map(|i| {
            let mut cur = Stream::new(seed, "propositions", i).cursor();
            let (p, z_max) = random_admissible(&mut cur);
            propositions_at(&p, z_max, grid)
        })
        .reduce(Violations::default, |mut a, b| {
            a.add(&b);
            a
        });
    let named = [
        ("propositions.lambda_increasing_in_z", total.lambda_in_z),
        ("propositions.wage_dispersion_decreasing_in_z", total.wage_in_z),
        ("propositions.tfpq_dispersion_increasing_in_z", total.tfpq_in_z),
        ("propositions.tfpr_dispersion_increasing_in_z", total.tfpr_in_z),
        ("propositions.tfpr_loading_positive", total.tfpr_positivity),
        ("propositions.lambda_neutral_to_a", total.a_neutrality),
        ("propositions.lambda_neutral_to_sigma", total.sigma_neutrality),
        ("propositions.tfpq_dispersion_decreasing_in_lambda_theta", total.tfpq_in_lambda_theta),
        ("propositions.tfpr_dispersion_decreasing_in_lambda_theta", total.tfpr_in_lambda_theta),
        ("propositions.wage_dispersion_decreasing_in_lambda_theta", total.wage_in_lambda_theta),
        ("propositions.tfpr_bracket_decreasing_in_lambda_theta", total.bracket_in_lambda_theta),
        ("propositions.solve_failures", total.solve_failures),
    ];
    VerificationReport::new(named.iter().map(|&(n, c)| Check::below(n, c as f64, 0.0)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaProcessCheck {
    pub checkpoints: Vec<usize>,
    pub rates: Vec<f64>,
    /// sqrt(n) times the Kolmogorov-Smirnov distance at each checkpoint.
    pub scaled_ks: Vec<f64>,
    pub critical: f64,
    pub passed: usize,
    pub pass: bool,
}

pub const KS_CRITICAL: f64 = 1.95;

fn ks_exponential(sample: &mut [f64], rate: f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-rate * x).exp();
            f64::max((i as f64 + 1.0) / n - f, f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Simulates `n` firm types for `t_len` periods under theta' = rho theta,
/// plus an Exp(lambda_{t+1}) draw with probability 1 - rho lambda_{t+1} /
/// lambda_t, and compares the cross section with Exp(lambda_t) at five
/// checkpoints.
pub fn theta_process_check(process: &ThetaRedrawProcess, n: usize, t_len: usize, seed: u64) -> Result<ThetaProcessCheck> {
    process.validate()?;
    if n == 0 || t_len < 5 {
        return Err(crate::error::ModelError::domain("n, T", format!("need n > 0 and T >= 5, got n = {n}, T = {t_len}")));
    }
    let chain = process.chain();
    let rate_stream = Stream::new(seed, "theta-rate", 0);
    let mut states = vec![0usize];
    for t in 0..t_len {
        states.push(chain.step(states[t], rate_stream.uniform(t as u64)));
    }
    let mut keep = Vec::with_capacity(t_len);
    for t in 0..t_len {
        keep.push(process.keep_probability(process.rate(states[t]), process.rate(states[t + 1]))?);
    }
    let checkpoints: Vec<usize> = (1..=5).map(|j| (j * t_len / 5).max(1)).collect();
    let paths: Vec<Vec<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut cur = Stream::new(seed, "theta-firm", i).cursor();
            let mut theta = cur.exponential(process.rate(states[0]));
            let mut out = Vec::with_capacity(5);
            for t in 0..t_len {
                theta *= process.rho;
                if cur.uniform() >= keep[t] {
                    theta += cur.exponential(process.rate(states[t + 1]));
                }
                if checkpoints.contains(&(t + 1)) {
                    out.push(theta);
                }
            }
            out
        })
        .collect();
    let mut scaled_ks = Vec::new();
    let mut rates = Vec::new();
    for (j, &t) in checkpoints.iter().enumerate() {
        let mut sample: Vec<f64> = paths.iter().map(|p| p[j]).collect();
        let rate = process.rate(states[t]);
        rates.push(rate);
        scaled_ks.push(ks_exponential(&mut sample, rate) * (n as f64).sqrt());
    }
    let passed = scaled_ks.iter().filter(|&&k| k < KS_CRITICAL).count();
    Ok(ThetaProcessCheck {
        checkpoints,
        rates,
        scaled_ks,
        critical: KS_CRITICAL,
        passed,
        pass: passed >= 4,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub proposition_points: usize,
    pub proposition_grid: usize,
    pub theta_firms: usize,
    pub theta_periods: usize,
    pub bracket_draws: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            proposition_points: 100,
            proposition_grid: 20,
            theta_firms: 100_000,
            theta_periods: 50,
            bracket_draws: 200,
            seed: 0,
        }
    }
}

/// Default redraw process used by `run_all`.
pub fn example_theta_process() -> ThetaRedrawProcess {
    ThetaRedrawProcess {
        rho: 0.7,
        lambda_low: 2.0,
        lambda_high: 2.5,
        p_stay_low: 0.8,
        p_stay_high: 0.7,
    }
}

fn static_checks(params: &ValidatedParams, z: f64, k: f64, label: &str) -> Vec<Check> {
    let name = |s: &str| format!("{label}.{s}");
    let eq = match solve_static(params, &AggregateShockState::baseline(params, z), k) {
        Ok(eq) => eq,
        Err(e) => {
            return vec![Check {
                name: name(&format!("solve ({e})")),
                value: f64::NAN,
                tolerance: 0.0,
                pass: false,
            }]
        }
    };
    let jd = check_job_density(params, &eq);
    let wrong = check_job_density_with(params, &eq, 1.01 * eq.lambda_t);
    let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.25).collect();
    vec![
        Check::below(name("job_density.mass"), jd.mass, 1e-8),
        Check::below(name("job_density.shape_cv"), jd.shape_cv, 1e-8),
        Check::above(name("job_density.shape_cv.negative_control"), wrong.shape_cv, 1e-3),
        Check::below(name("goods_market"), check_goods_market(params, &eq), 1e-8),
        Check::above(
            name("goods_market.negative_control"),
            (goods_market_integral(params, &eq, 1.01 * eq.q_bar) - 1.0).abs(),
            1e-8,
        ),
        Check::below(name("capital_market"), check_capital_market(params, &eq, k), 1e-8),
        Check::above(
            name("capital_market.negative_control"),
            (capital_demand_integral(params, &eq, 1.01 * eq.r) / k - 1.0).abs(),
            1e-8,
        ),
        Check::below(name("worker_clearing"), check_worker_clearing(params, &eq, &xs), 1e-12),
        Check::above(
            name("worker_clearing.negative_control"),
            check_worker_clearing_with(params, &eq, &xs, 1.01 * params.lambda_x / eq.lambda_t),
            1e-12,
        ),
    ]
}

/// Every check at the given parameters and z levels.
pub fn run_all(params: &ValidatedParams, z_levels: [f64; 2], cfg: &VerifyConfig) -> VerificationReport {
    let mut checks = Vec::new();
    for (label, z) in ["boom", "crisis"].iter().zip(z_levels) {
        checks.extend(static_checks(params, z, 1.0, label));
    }
    checks.extend(proposition_suite(cfg.proposition_points, cfg.proposition_grid, cfg.seed).checks);

    let (worst, multi) = (0..cfg.bracket_draws as u64)
        .into_par_iter()
        .map(|i| {
            let mut cur = Stream::new(cfg.seed, "bracket", i).cursor();
            let p = random_params(&mut cur).validate().expect("random draws are valid");
            let shock = AggregateShockState::baseline(&p, uniform_in(&mut cur, 0.0, 2.0));
            let upper = residual_upper_bound(&p, &shock);
            let changes = bracket_sign_changes(&p, &shock, upper, 10_000);
            let residual = match solve_lambda(&p, &shock) {
                Ok(l) => job_residual(&p, shock.z, shock.lambda_theta_t, l).abs() / p.lambda_theta.max(1.0),
                Err(_) => f64::INFINITY,
            };
            (residual, usize::from(changes != 1))
        })
        .reduce(|| (0.0, 0), |a, b| (a.0.max(b.0), a.1 + b.1));
    checks.push(Check::below("fixed_point.scaled_residual", worst, 1e-12));
    checks.push(Check::below("fixed_point.brackets_without_unique_sign_change", multi as f64, 0.0));

    match theta_process_check(&example_theta_process(), cfg.theta_firms, cfg.theta_periods, cfg.seed) {
        Ok(t) => checks.push(Check::above("theta_process.checkpoints_passed", t.passed as f64, 3.5)),
        Err(e) => checks.push(Check {
            name: format!("theta_process ({e})"),
            value: f64::NAN,
            tolerance: 0.0,
            pass: false,
        }),
    }
    VerificationReport::new(checks)
}
