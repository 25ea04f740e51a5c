//! Moment-matching calibration of (psi, z_h, lambda_theta, lambda_x,
//! sigma1) with a bounded Nelder-Mead search from Latin-hypercube starts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{path_moments, simulate, solve_policy, GridSpec};
use crate::error::Result;
use crate::firms::{analytic_moments, population_revenue_shares};
use crate::params::{stationary_distribution, AggregateShockState, MarkovChain2, ModelParams, ValidatedParams};
use crate::rng::Stream;
use crate::statics::{measured_tfp, solve_static};

/// Objective value reported at infeasible points.
pub const SENTINEL: f64 = 1e10;

pub const FREE_NAMES: [&str; 5] = ["psi", "z_h", "lambda_theta", "lambda_x", "sigma1"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeParams {
    pub psi: f64,
    pub z_h: f64,
    pub lambda_theta: f64,
    pub lambda_x: f64,
    pub sigma1: f64,
}

impl FreeParams {
    pub fn baseline() -> Self {
        FreeParams {
            psi: 0.4022,
            z_h: 0.3984,
            lambda_theta: 2.616,
            lambda_x: 0.8681,
            sigma1: 0.2293,
        }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.psi, self.z_h, self.lambda_theta, self.lambda_x, self.sigma1]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        FreeParams {
            psi: v[0],
            z_h: v[1],
            lambda_theta: v[2],
            lambda_x: v[3],
            sigma1: v[4],
        }
    }
}

/// Parameters held fixed during calibration; the free block overwrites
/// psi, lambda_theta, lambda_x, sigma1 and the chain's z_high.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedParams {
    pub model: ModelParams,
    pub chain: MarkovChain2,
}

impl FixedParams {
    pub fn baseline() -> Self {
        FixedParams {
            model: ModelParams::baseline(),
            chain: MarkovChain2::baseline(),
        }
    }

    pub fn with(&self, free: FreeParams) -> Result<(ValidatedParams, MarkovChain2)> {
        let model = ModelParams {
            psi: free.psi,
            lambda_theta: free.lambda_theta,
            lambda_x: free.lambda_x,
            sigma1: free.sigma1,
            ..self.model
        }
        .validate()?;
        let chain = MarkovChain2 {
            z_high: free.z_h,
            ..self.chain
        };
        chain.validate()?;
        Ok((model, chain))
    }

    pub fn free(&self) -> FreeParams {
        FreeParams {
            psi: self.model.psi,
            z_h: self.chain.z_high,
            lambda_theta: self.model.lambda_theta,
            lambda_x: self.model.lambda_x,
            sigma1: self.model.sigma1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: [f64; 5],
    pub upper: [f64; 5],
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            lower: [0.01, 0.0, 0.1, 0.1, 0.0],
            upper: [0.99, 2.0, 20.0, 20.0, 2.0],
        }
    }
}

impl Bounds {
    fn to_point(self, u: &[f64; 5]) -> [f64; 5] {
        std::array::from_fn(|i| self.lower[i] + u[i].clamp(0.0, 1.0) * (self.upper[i] - self.lower[i]))
    }

    fn to_unit(self, x: &[f64; 5]) -> [f64; 5] {
        std::array::from_fn(|i| {
            let span = self.upper[i] - self.lower[i];
            if span > 0.0 {
                ((x[i] - self.lower[i]) / span).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub value: f64,
    #[serde(default = "one")]
    pub weight: f64,
}

impl Target {
    pub fn new(value: f64) -> Self {
        Target { value, weight: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSet {
    pub labor_share: Target,
    pub wage_inequality: Target,
    pub rev_share_top10: Target,
    pub rev_share_p50_p90: Target,
    pub std_tfp: Target,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var_log_tfpq: Option<Target>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var_log_tfpr: Option<Target>,
}

impl Default for TargetSet {
    fn default() -> Self {
        TargetSet::from_values(0.6097, 0.7666, 0.9074, 0.0842, 0.0090)
    }
}

impl TargetSet {
    pub fn from_values(labor_share: f64, wage_inequality: f64, top10: f64, p50_p90: f64, std_tfp: f64) -> Self {
        TargetSet {
            labor_share: Target::new(labor_share),
            wage_inequality: Target::new(wage_inequality),
            rev_share_top10: Target::new(top10),
            rev_share_p50_p90: Target::new(p50_p90),
            std_tfp: Target::new(std_tfp),
            var_log_tfpq: None,
            var_log_tfpr: None,
        }
    }

    /// Moments produced by the baseline parameters, as reported with them.
    pub fn baseline_fit() -> Self {
        TargetSet::from_values(0.6102, 0.7666, 0.8906, 0.0840, 0.0090)
    }

    /// Targets equal to the given model moments.
    pub fn matching(m: &ModelMoments) -> Self {
        TargetSet {
            var_log_tfpq: Some(Target::new(m.var_log_tfpq)),
            var_log_tfpr: Some(Target::new(m.var_log_tfpr)),
            ..TargetSet::from_values(m.labor_share, m.wage_inequality, m.rev_share_top10, m.rev_share_p50_p90, m.std_tfp)
        }
    }

    fn terms(&self, m: &ModelMoments) -> Vec<(f64, f64, f64)> {
        let mut out = vec![
            (self.labor_share.value, self.labor_share.weight, m.labor_share),
            (self.wage_inequality.value, self.wage_inequality.weight, m.wage_inequality),
            (self.rev_share_top10.value, self.rev_share_top10.weight, m.rev_share_top10),
            (self.rev_share_p50_p90.value, self.rev_share_p50_p90.weight, m.rev_share_p50_p90),
            (self.std_tfp.value, self.std_tfp.weight, m.std_tfp),
        ];
        if let Some(t) = self.var_log_tfpq {
            out.push((t.value, t.weight, m.var_log_tfpq));
        }
        if let Some(t) = self.var_log_tfpr {
            out.push((t.value, t.weight, m.var_log_tfpr));
        }
        out
    }

    /// Sum of weighted squared proportional deviations.
    pub fn loss(&self, m: &ModelMoments) -> f64 {
        let total: f64 = self
            .terms(m)
            .into_iter()
            .filter(|t| t.1 != 0.0)
            .map(|(target, w, model)| w * (model / target - 1.0).powi(2))
            .sum();
        if total.is_finite() {
            total
        } else {
            SENTINEL
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelMoments {
    pub labor_share: f64,
    pub wage_inequality: f64,
    pub rev_share_top10: f64,
    pub rev_share_p50_p90: f64,
    pub std_tfp: f64,
    pub var_log_tfpq: f64,
    pub var_log_tfpr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t_len: usize,
    pub burn_in: usize,
    pub grid: GridSpec,
    /// Stationary-weighted analytic moments instead of a simulated path.
    pub fast: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            t_len: 10_000,
            burn_in: 100,
            grid: GridSpec::default(),
            fast: false,
        }
    }
}

impl SimConfig {
    pub fn fast() -> Self {
        SimConfig {
            fast: true,
            ..SimConfig::default()
        }
    }
}

/// Ergodic moments from the two per-state cross sections. Every moment is
/// independent of capital, and measured TFP takes one value per state, so
/// its standard deviation is |tfp_h - tfp_l| sqrt(pi_l pi_h).
pub fn stationary_moments(params: &ValidatedParams, chain: &MarkovChain2) -> Result<ModelMoments> {
    let (pi_l, pi_h) = stationary_distribution(chain);
    let mut m = ModelMoments {
        labor_share: 0.0,
        wage_inequality: 0.0,
        rev_share_top10: 0.0,
        rev_share_p50_p90: 0.0,
        std_tfp: 0.0,
        var_log_tfpq: 0.0,
        var_log_tfpr: 0.0,
    };
    let mut tfp = [0.0; 2];
    for (s, (z, w)) in [(chain.z_low, pi_l), (chain.z_high, pi_h)].into_iter().enumerate() {
        let eq = solve_static(params, &AggregateShockState::baseline(params, z), 1.0)?;
        let d = analytic_moments(params, &eq);
        let shares = population_revenue_shares(params, &eq)?;
        m.labor_share += w * eq.labor_share();
        m.wage_inequality += w * d.var_log_wage;
        m.rev_share_top10 += w * shares.rev_share_top10;
        m.rev_share_p50_p90 += w * shares.rev_share_p50_p90;
        m.var_log_tfpq += w * d.var_log_tfpq;
        m.var_log_tfpr += w * d.var_log_tfpr;
        tfp[s] = measured_tfp(params, &eq);
    }
    m.std_tfp = (tfp[1] - tfp[0]).abs() * (pi_l * pi_h).sqrt();
    Ok(m)
}

/// Moments over the post-burn-in part of a simulated path.
pub fn simulated_moments(params: &ValidatedParams, chain: &MarkovChain2, sim: &SimConfig, seed: u64) -> Result<ModelMoments> {
    let policy = solve_policy(params, chain, 1.0, &sim.grid)?;
    let path = simulate(&policy, sim.t_len, sim.burn_in, seed)?;
    let pm = path_moments(&path)?;
    Ok(ModelMoments {
        labor_share: pm.labor_share,
        wage_inequality: pm.wage_inequality,
        rev_share_top10: pm.rev_share_top10,
        rev_share_p50_p90: pm.rev_share_p50_p90,
        std_tfp: pm.std_tfp,
        var_log_tfpq: pm.mean_var_log_tfpq,
        var_log_tfpr: pm.mean_var_log_tfpr,
    })
}

pub fn model_moments(free: FreeParams, fixed: &FixedParams, sim: &SimConfig, seed: u64) -> Result<ModelMoments> {
    let (params, chain) = fixed.with(free)?;
    if sim.fast {
        stationary_moments(&params, &chain)
    } else {
        simulated_moments(&params, &chain, sim, seed)
    }
}

/// Calibration loss at `free`; SENTINEL wherever the model cannot be solved.
pub fn objective(free: FreeParams, fixed: &FixedParams, targets: &TargetSet, sim: &SimConfig, seed: u64) -> f64 {
    match model_moments(free, fixed, sim, seed) {
        Ok(m) => targets.loss(&m),
        Err(_) => SENTINEL,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub n_starts: usize,
    pub max_evals: usize,
    /// Stop once the simplex objective spread and size fall below these.
    pub f_tol: f64,
    pub x_tol: f64,
    pub initial_step: f64,
    /// Which of the five parameters move; the rest stay at the fixed values.
    pub free_mask: [bool; 5],
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            n_starts: 8,
            max_evals: 1500,
            f_tol: 1e-14,
            x_tol: 1e-10,
            initial_step: 0.1,
            free_mask: [true; 5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub best: FreeParams,
    pub params: ModelParams,
    pub chain: MarkovChain2,
    pub objective: f64,
    pub moments: Option<ModelMoments>,
    pub targets: TargetSet,
    pub evaluations: usize,
    pub start_objectives: Vec<f64>,
    pub seed: u64,
    pub fast: bool,
}

struct Simplex {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

/// Bounded Nelder-Mead on the unit cube; points are clamped before each
/// evaluation.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, start: Vec<f64>, cfg: &SearchConfig) -> (Vec<f64>, f64, usize) {
    let dim = start.len();
    let clamp = |x: Vec<f64>| -> Vec<f64> { x.into_iter().map(|v| v.clamp(0.0, 1.0)).collect() };
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        f(x)
    };
    let mut s = Simplex {
        points: vec![start.clone()],
        values: vec![],
    };
    for i in 0..dim {
        let mut p = start.clone();
        p[i] = if p[i] + cfg.initial_step <= 1.0 {
            p[i] + cfg.initial_step
        } else {
            p[i] - cfg.initial_step
        };
        s.points.push(p);
    }
    s.values = s.points.iter().map(|p| eval(p)).collect();
    if dim == 0 {
        return (start, s.values[0], evals.get());
    }

    while evals.get() < cfg.max_evals {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| s.values[a].total_cmp(&s.values[b]));
        s.points = order.iter().map(|&i| s.points[i].clone()).collect();
        s.values = order.iter().map(|&i| s.values[i]).collect();

        let spread = s.values[dim] - s.values[0];
        let size = s.points[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&s.points[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread.abs() <= cfg.f_tol && size <= cfg.x_tol {
            break;
        }
        if size <= 1e-15 {
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|j| s.points[..dim].iter().map(|p| p[j]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            clamp(
                centroid
                    .iter()
                    .zip(&s.points[dim])
                    .map(|(c, w)| c + t * (w - c))
                    .collect(),
            )
        };
        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < s.values[0] {
            let xe = along(-2.0);
            let fe = eval(&xe);
            if fe < fr {
                s.points[dim] = xe;
                s.values[dim] = fe;
            } else {
                s.points[dim] = xr;
                s.values[dim] = fr;
            }
            continue;
        }
        if fr < s.values[dim - 1] {
            s.points[dim] = xr;
            s.values[dim] = fr;
            continue;
        }
        let (xc, fc) = if fr < s.values[dim] {
            let xc = along(-0.5);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < fr.min(s.values[dim]) {
            s.points[dim] = xc;
            s.values[dim] = fc;
            continue;
        }
        // shrink toward the best vertex
        let best = s.points[0].clone();
        for i in 1..=dim {
            let p: Vec<f64> = best.iter().zip(&s.points[i]).map(|(b, x)| b + 0.5 * (x - b)).collect();
            s.values[i] = eval(&p);
            s.points[i] = p;
        }
    }
    let (i, _) = s
        .values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("simplex is nonempty");
    (s.points[i].clone(), s.values[i], evals.get())
}

/// Latin-hypercube sample of `n` points in the unit cube of dimension `dim`.
pub fn latin_hypercube(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; dim]; n];
    for d in 0..dim {
        let mut cur = Stream::new(seed, "lhs", d as u64).cursor();
        let mut strata: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = cur.index(i + 1);
            strata.swap(i, j);
        }
        for (i, p) in pts.iter_mut().enumerate() {
            p[d] = (strata[i] as f64 + cur.uniform()) / n as f64;
        }
    }
    pts
}

pub fn calibrate(
    fixed: &FixedParams,
    targets: &TargetSet,
    bounds: &Bounds,
    sim: &SimConfig,
    search: &SearchConfig,
    seed: u64,
) -> Result<CalibrationResult> {
    let base = bounds.to_unit(&fixed.free().to_array());
    let active: Vec<usize> = (0..5).filter(|&i| search.free_mask[i]).collect();
    let embed = |u: &[f64]| -> FreeParams {
        let mut full = base;
        for (k, &i) in active.iter().enumerate() {
            full[i] = u[k];
        }
        FreeParams::from_array(bounds.to_point(&full))
    };
    let f = |u: &[f64]| objective(embed(u), fixed, targets, sim, seed);
    let starts = latin_hypercube(search.n_starts.max(1), active.len(), seed);
    let runs: Vec<(Vec<f64>, f64, usize, f64)> = starts
        .into_par_iter()
        .map(|start| {
            let f0 = f(&start);
            let (x, v, evals) = nelder_mead(f, start, search);
            (x, v, evals, f0)
        })
        .collect();
    let evaluations = runs.iter().map(|r| r.2 + 1).sum();
    let start_objectives = runs.iter().map(|r| r.3).collect();
    let best_run = runs
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one start");
    let best = embed(&best_run.0);
    let (params, chain) = fixed.with(best)?;
    Ok(CalibrationResult {
        best,
        params: params.into_inner(),
        chain,
        objective: best_run.1,
        moments: model_moments(best, fixed, sim, seed).ok(),
        targets: *targets,
        evaluations,
        start_objectives,
        seed,
        fast: sim.fast,
    })
}
