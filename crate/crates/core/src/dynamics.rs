//! Household consumption-savings problem under the two-state z chain:
//! steady states, time iteration on the Euler equation, simulation,
//! generalized impulse responses and exogenous shock paths.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::firms::{analytic_moments, population_revenue_shares, DispersionMoments, RevenueShares};
use crate::params::{AggregateShockState, LogVolProcess, MarkovChain2, ThetaRedrawProcess, ValidatedParams};
use crate::rng::Stream;
use crate::roots;
use crate::statics::{measured_tfp, StaticEquilibrium, StaticState};

/// Returned by the Euler residual where next-period capital or
/// consumption would be non-positive.
const INFEASIBLE: f64 = 1e10;

/// beta (R + 1 - delta) = 1 at the steady state.
pub fn target_rental_rate(params: &ValidatedParams) -> f64 {
    1.0 / params.beta - 1.0 + params.delta
}

/// Steady state (K*, C*) with z held fixed.
pub fn steady_state(params: &ValidatedParams, z_fixed: f64, a: f64) -> Result<(f64, f64)> {
    let state = StaticState::new(params, &AggregateShockState::baseline(params, z_fixed).with_a(a))?;
    let target = target_rental_rate(params);
    let gap = |ln_k: f64| -> f64 {
        match state.at(ln_k.exp()) {
            Ok(eq) => eq.r.ln() - target.ln(),
            Err(_) => f64::NAN,
        }
    };
    let lo = 1e-8f64.ln();
    if !(gap(lo) > 0.0) {
        return Err(ModelError::BracketFailure(format!(
            "R(1e-8) does not exceed the target rental rate {target}"
        )));
    }
    let mut hi = 0.0f64;
    let mut tries = 0;
    while !(gap(hi) < 0.0) {
        hi += 2.0;
        tries += 1;
        if tries > 200 {
            return Err(ModelError::BracketFailure("R does not fall below its steady-state value".into()));
        }
    }
    let ln_k = roots::brent(gap, lo, hi, 1e-15, 400)?;
    let k = ln_k.exp();
    let eq = state.at(k)?;
    let c = eq.income() - params.delta * k;
    if !(c > 0.0) {
        return Err(ModelError::domain("C_star", format!("steady-state consumption {c} is not positive")));
    }
    Ok((k, c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_nodes: usize,
    /// Log-spaced nodes on [lower * min K*, upper * max K*], plus the two
    /// steady states.
    pub lower: f64,
    pub upper: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_nodes: 400,
            lower: 0.2,
            upper: 1.5,
            tol: 1e-9,
            max_iter: 10_000,
        }
    }
}

/// Per-state quantities that do not depend on capital.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSummary {
    pub statics: StaticState,
    pub dispersion: DispersionMoments,
    pub shares: RevenueShares,
    /// Household income and rental rate at K = 1; both scale as powers of K.
    income_at_one: f64,
    rent_at_one: f64,
}

impl StateSummary {
    pub fn new(params: &ValidatedParams, shock: &AggregateShockState) -> Result<Self> {
        let statics = StaticState::new(params, shock)?;
        let unit = statics.at(1.0)?;
        Ok(StateSummary {
            statics,
            dispersion: analytic_moments(params, &unit),
            shares: population_revenue_shares(params, &unit)?,
            income_at_one: unit.income(),
            rent_at_one: unit.r,
        })
    }

    fn income(&self, k: f64, alpha: f64) -> f64 {
        self.income_at_one * k.powf(alpha)
    }

    fn rent(&self, k: f64, alpha: f64) -> f64 {
        self.rent_at_one * k.powf(alpha - 1.0)
    }
}

/// Consumption and savings rules on a capital grid for each z state.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub params: ValidatedParams,
    pub chain: MarkovChain2,
    pub a: f64,
    pub k_grid: Vec<f64>,
    pub z_states: [f64; 2],
    pub k_next: [Vec<f64>; 2],
    pub c: [Vec<f64>; 2],
    pub k_star: [f64; 2],
    pub states: [StateSummary; 2],
    pub iterations: usize,
    pub last_change: f64,
}

fn interp(grid: &[f64], values: &[f64], x: f64) -> f64 {
    let n = grid.len();
    let i = grid.partition_point(|&g| g <= x).clamp(1, n - 1);
    let (x0, x1) = (grid[i - 1], grid[i]);
    let t = (x - x0) / (x1 - x0);
    values[i - 1] + t * (values[i] - values[i - 1])
}

fn euler_gap(
    params: &ValidatedParams,
    states: &[StateSummary; 2],
    row: [f64; 2],
    grid: &[f64],
    c_rule: &[Vec<f64>; 2],
    c: f64,
    k_next: f64,
) -> f64 {
    if !(k_next > 0.0) {
        return INFEASIBLE;
    }
    let mut expectation = 0.0;
    for j in 0..2 {
        if row[j] == 0.0 {
            continue;
        }
        let c_next = interp(grid, &c_rule[j], k_next);
        if !(c_next > 0.0) {
            return INFEASIBLE;
        }
        let gross = states[j].rent(k_next, params.alpha) + 1.0 - params.delta;
        expectation += row[j] * gross / c_next;
    }
    params.beta * c * expectation - 1.0
}

fn solve_node(
    params: &ValidatedParams,
    states: &[StateSummary; 2],
    row: [f64; 2],
    grid: &[f64],
    c_rule: &[Vec<f64>; 2],
    state: usize,
    k: f64,
) -> Result<f64> {
    let wealth = (1.0 - params.delta) * k + states[state].income(k, params.alpha);
    let f = |c: f64| euler_gap(params, states, row, grid, c_rule, c, wealth - c);
    roots::brent(f, 1e-10 * wealth, wealth * (1.0 - 1e-12), 1e-14 * wealth, 200)
}

pub fn solve_policy(params: &ValidatedParams, chain: &MarkovChain2, a: f64, grid: &GridSpec) -> Result<Policy> {
    chain.validate()?;
    if grid.n_nodes < 2 || !(grid.lower > 0.0 && grid.upper > grid.lower) {
        return Err(ModelError::domain("grid", format!("invalid grid specification {grid:?}")));
    }
    let z_states = chain.levels();
    let states = [
        StateSummary::new(params, &AggregateShockState::baseline(params, z_states[0]).with_a(a))?,
        StateSummary::new(params, &AggregateShockState::baseline(params, z_states[1]).with_a(a))?,
    ];
    let k_star = [
        steady_state(params, z_states[0], a)?.0,
        steady_state(params, z_states[1], a)?.0,
    ];
    let k_lo = grid.lower * k_star[0].min(k_star[1]);
    let k_hi = grid.upper * k_star[0].max(k_star[1]);
    let n = grid.n_nodes;
    let mut k_grid: Vec<f64> = (0..n)
        .map(|i| (k_lo.ln() + (k_hi / k_lo).ln() * i as f64 / (n - 1) as f64).exp())
        .collect();
    // steady states as exact nodes keep them fixed points of the discrete rule
    k_grid.extend(k_star);
    k_grid.sort_by(f64::total_cmp);
    k_grid.dedup_by(|a, b| (*a / *b - 1.0).abs() < 1e-12);
    let n = k_grid.len();
    let transition = chain.transition();

    let mut c_rule: [Vec<f64>; 2] = [0, 1].map(|s| {
        k_grid
            .iter()
            .map(|&k| {
                let income = states[s].income(k, params.alpha);
                (income - params.delta * k).max(0.05 * (income + (1.0 - params.delta) * k))
            })
            .collect()
    });

    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    while last_change >= grid.tol {
        if iterations >= grid.max_iter {
            return Err(ModelError::NoConvergence {
                iterations,
                last_change,
            });
        }
        let updated: Vec<f64> = (0..2 * n)
            .into_par_iter()
            .map(|idx| {
                let (s, i) = (idx / n, idx % n);
                solve_node(params, &states, transition[s], &k_grid, &c_rule, s, k_grid[i])
            })
            .collect::<Result<_>>()?;
        last_change = 0.0;
        for s in 0..2 {
            for i in 0..n {
                let v = updated[s * n + i];
                last_change = f64::max(last_change, (v - c_rule[s][i]).abs());
                c_rule[s][i] = v;
            }
        }
        iterations += 1;
    }

    let k_next = [0, 1].map(|s| {
        k_grid
            .iter()
            .zip(&c_rule[s])
            .map(|(&k, &c)| (1.0 - params.delta) * k + states[s].income(k, params.alpha) - c)
            .collect()
    });
    Ok(Policy {
        params: *params,
        chain: *chain,
        a,
        k_grid,
        z_states,
        k_next,
        c: c_rule,
        k_star,
        states,
        iterations,
        last_change,
    })
}

impl Policy {
    pub fn consumption(&self, state: usize, k: f64) -> f64 {
        interp(&self.k_grid, &self.c[state], k)
    }

    pub fn k_bounds(&self) -> (f64, f64) {
        (self.k_grid[0], self.k_grid[self.k_grid.len() - 1])
    }

    /// Unit-free Euler residual |beta E[(C/C')(R' + 1 - delta)] - 1| with
    /// today's consumption read off the interpolated rule.
    pub fn euler_residual(&self, state: usize, k: f64) -> f64 {
        let p = &self.params;
        let c = self.consumption(state, k);
        let wealth = (1.0 - p.delta) * k + self.states[state].income(k, p.alpha);
        let row = self.chain.transition()[state];
        euler_gap(p, &self.states, row, &self.k_grid, &self.c, c, wealth - c).abs()
    }

    /// Euler residuals at `n` seeded random interior states.
    pub fn random_euler_residuals(&self, n: usize, seed: u64) -> Vec<f64> {
        let stream = Stream::new(seed, "euler-check", 0);
        let (lo, hi) = self.k_bounds();
        (0..n as u64)
            .into_par_iter()
            .map(|i| {
                let state = usize::from(stream.uniform(2 * i) >= 0.5);
                let k = lo + (hi - lo) * stream.uniform(2 * i + 1);
                self.euler_residual(state, k)
            })
            .collect()
    }

    /// One period: the static equilibrium, consumption and next capital.
    pub fn step(&self, state: usize, k: f64, period: usize) -> Result<(StaticEquilibrium, f64, f64)> {
        let eq = self.states[state].statics.at(k)?;
        let c = self.consumption(state, k);
        let k_next = (1.0 - self.params.delta) * k + eq.income() - c;
        let (lo, hi) = self.k_bounds();
        let slack = 1e-9 * hi;
        if !(k_next >= lo - slack && k_next <= hi + slack) {
            return Err(ModelError::GridExit { period, k: k_next });
        }
        Ok((eq, c, k_next))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub t: usize,
    pub state: usize,
    pub z: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "Y")]
    pub y: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub measured_tfp: f64,
    pub lambda_t: f64,
    pub var_log_wage: f64,
    pub var_log_tfpq: f64,
    pub var_log_tfpr: f64,
    pub labor_share: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub w0: f64,
    pub rev_share_top10: f64,
    pub rev_share_p50_p90: f64,
    pub income: f64,
    #[serde(rename = "K_next")]
    pub k_next: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationPath {
    pub seed: u64,
    pub burn_in: usize,
    pub records: Vec<PeriodRecord>,
}

impl SimulationPath {
    pub fn post_burn_in(&self) -> &[PeriodRecord] {
        &self.records[self.burn_in.min(self.records.len())..]
    }
}

pub const Z_PATH_STREAM: &str = "z-path";

fn record(policy: &Policy, t: usize, state: usize, k: f64) -> Result<PeriodRecord> {
    let (eq, c, k_next) = policy.step(state, k, t)?;
    let summary = &policy.states[state];
    Ok(PeriodRecord {
        t,
        state,
        z: eq.shock.z,
        k,
        y: eq.y,
        c,
        measured_tfp: measured_tfp(&policy.params, &eq),
        lambda_t: eq.lambda_t,
        var_log_wage: summary.dispersion.var_log_wage,
        var_log_tfpq: summary.dispersion.var_log_tfpq,
        var_log_tfpr: summary.dispersion.var_log_tfpr,
        labor_share: eq.labor_share(),
        r: eq.r,
        w0: eq.w0,
        rev_share_top10: summary.shares.rev_share_top10,
        rev_share_p50_p90: summary.shares.rev_share_p50_p90,
        income: eq.income(),
        k_next,
    })
}

/// Simulate `t_len` periods from capital `k0` in state `s0`.
pub fn simulate_from(policy: &Policy, k0: f64, s0: usize, t_len: usize, burn_in: usize, seed: u64) -> Result<SimulationPath> {
    if t_len <= burn_in {
        return Err(ModelError::domain("T", format!("T = {t_len} must exceed burn_in = {burn_in}")));
    }
    let stream = Stream::new(seed, Z_PATH_STREAM, 0);
    let mut records = Vec::with_capacity(t_len);
    let (mut state, mut k) = (s0, k0);
    for t in 0..t_len {
        let rec = record(policy, t, state, k)?;
        k = rec.k_next;
        state = policy.chain.step(state, stream.uniform(t as u64));
        records.push(rec);
    }
    Ok(SimulationPath { seed, burn_in, records })
}

/// Simulate from the boom-state steady state.
pub fn simulate(policy: &Policy, t_len: usize, burn_in: usize, seed: u64) -> Result<SimulationPath> {
    simulate_from(policy, policy.k_star[0], 0, t_len, burn_in, seed)
}

/// Time averages and volatility over the post-burn-in periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathMoments {
    pub labor_share: f64,
    pub wage_inequality: f64,
    pub rev_share_top10: f64,
    pub rev_share_p50_p90: f64,
    pub std_tfp: f64,
    pub mean_var_log_tfpq: f64,
    pub mean_var_log_tfpr: f64,
    pub mean_log_y: f64,
    pub std_log_y: f64,
    pub crisis_frequency: f64,
    pub periods: usize,
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn path_moments(path: &SimulationPath) -> Result<PathMoments> {
    let recs = path.post_burn_in();
    if recs.is_empty() {
        return Err(ModelError::EmptyPanel);
    }
    let mean = |f: fn(&PeriodRecord) -> f64| mean_std(recs.iter().map(f)).0;
    let (mean_log_y, std_log_y) = mean_std(recs.iter().map(|r| r.y.ln()));
    Ok(PathMoments {
        labor_share: mean(|r| r.labor_share),
        wage_inequality: mean(|r| r.var_log_wage),
        rev_share_top10: mean(|r| r.rev_share_top10),
        rev_share_p50_p90: mean(|r| r.rev_share_p50_p90),
        std_tfp: mean_std(recs.iter().map(|r| r.measured_tfp)).1,
        mean_var_log_tfpq: mean(|r| r.var_log_tfpq),
        mean_var_log_tfpr: mean(|r| r.var_log_tfpr),
        mean_log_y,
        std_log_y,
        crisis_frequency: mean(|r| r.state as f64),
        periods: recs.len(),
    })
}

/// Mean treated-minus-control paths after a forced crisis at t = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IRFResult {
    pub horizon: usize,
    pub n_sims: usize,
    pub d_log_y: Vec<f64>,
    pub d_measured_tfp: Vec<f64>,
    pub d_log_k: Vec<f64>,
    pub d_var_log_tfpq: Vec<f64>,
    pub d_var_log_tfpr: Vec<f64>,
    pub d_var_log_wage: Vec<f64>,
    /// Cross-sectional dispersion levels in the boom and crisis states.
    pub boom_levels: DispersionMoments,
    pub crisis_levels: DispersionMoments,
}

const IRF_BURN_IN: usize = 200;

fn ergodic_boom_capital(policy: &Policy, seed: u64, replica: u64) -> Result<f64> {
    let stream = Stream::new(seed, "irf-burn", replica);
    let (mut state, mut k) = (0usize, policy.k_star[0]);
    let mut t = 0usize;
    while t < IRF_BURN_IN || state != 0 {
        let (_, _, k_next) = policy.step(state, k, t)?;
        k = k_next;
        state = policy.chain.step(state, stream.uniform(t as u64));
        t += 1;
        if t > 100 * IRF_BURN_IN + 10_000 {
            break;
        }
    }
    if state != 0 {
        return Err(ModelError::InvalidProcess("the chain never returns to the boom state".into()));
    }
    Ok(k)
}

type Trace = [Vec<f64>; 6];

fn trace(policy: &Policy, k0: f64, s0: usize, horizon: usize, stream: &Stream) -> Result<Trace> {
    let mut out: Trace = Default::default();
    let (mut state, mut k) = (s0, k0);
    for t in 0..horizon {
        let (eq, _, k_next) = policy.step(state, k, t)?;
        let d = &policy.states[state].dispersion;
        out[0].push(eq.y.ln());
        out[1].push(measured_tfp(&policy.params, &eq));
        out[2].push(k.ln());
        out[3].push(d.var_log_tfpq);
        out[4].push(d.var_log_tfpr);
        out[5].push(d.var_log_wage);
        k = k_next;
        state = policy.chain.step(state, stream.uniform(t as u64));
    }
    Ok(out)
}

pub fn impulse_response(policy: &Policy, horizon: usize, n_sims: usize, seed: u64) -> Result<IRFResult> {
    if horizon == 0 || n_sims == 0 {
        return Err(ModelError::domain("horizon", "horizon and n_sims must be positive"));
    }
    let diffs: Vec<Trace> = (0..n_sims as u64)
        .into_par_iter()
        .map(|r| {
            let k0 = ergodic_boom_capital(policy, seed, r)?;
            let stream = Stream::new(seed, "irf-path", r);
            let treated = trace(policy, k0, 1, horizon, &stream)?;
            let control = trace(policy, k0, 0, horizon, &stream)?;
            let mut d: Trace = Default::default();
            for v in 0..6 {
                d[v] = treated[v].iter().zip(&control[v]).map(|(a, b)| a - b).collect();
            }
            Ok(d)
        })
        .collect::<Result<_>>()?;
    let mut mean: Trace = [0; 6].map(|_| vec![0.0; horizon]);
    for d in &diffs {
        for v in 0..6 {
            for t in 0..horizon {
                mean[v][t] += d[v][t];
            }
        }
    }
    for series in mean.iter_mut() {
        for x in series.iter_mut() {
            *x /= n_sims as f64;
        }
    }
    let [d_log_y, d_measured_tfp, d_log_k, d_var_log_tfpq, d_var_log_tfpr, d_var_log_wage] = mean;
    Ok(IRFResult {
        horizon,
        n_sims,
        d_log_y,
        d_measured_tfp,
        d_log_k,
        d_var_log_tfpq,
        d_var_log_tfpr,
        d_var_log_wage,
        boom_levels: policy.states[0].dispersion,
        crisis_levels: policy.states[1].dispersion,
    })
}

/// Exogenous driver processes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShockProcess {
    ZChain(MarkovChain2),
    /// Aggregate law of lambda_theta_t; z stays at zero.
    ThetaRate(ThetaRedrawProcess),
    /// log sigma_t - log sigma follows an AR(1) around the baseline.
    LogVol(LogVolProcess),
}

/// Shock states for `t_len` periods starting from the baseline (state 0
/// for the chains).
pub fn generate_shock_path(
    params: &ValidatedParams,
    process: &ShockProcess,
    t_len: usize,
    seed: u64,
) -> Result<Vec<AggregateShockState>> {
    let base = AggregateShockState::baseline(params, 0.0);
    let stream = Stream::new(seed, "shock-path", 0);
    let mut path = Vec::with_capacity(t_len);
    match process {
        ShockProcess::ZChain(chain) => {
            chain.validate()?;
            let mut s = 0;
            for t in 0..t_len {
                path.push(AggregateShockState {
                    z: chain.levels()[s],
                    ..base
                });
                s = chain.step(s, stream.uniform(t as u64));
            }
        }
        ShockProcess::ThetaRate(process) => {
            process.validate()?;
            let chain = process.chain();
            let mut s = 0;
            for t in 0..t_len {
                path.push(AggregateShockState {
                    lambda_theta_t: process.rate(s),
                    ..base
                });
                s = chain.step(s, stream.uniform(t as u64));
            }
        }
        ShockProcess::LogVol(vol) => {
            vol.validate()?;
            let (mut d1, mut d2) = (0.0f64, 0.0f64);
            for t in 0..t_len as u64 {
                path.push(AggregateShockState {
                    sigma1_t: params.sigma1 * d1.exp(),
                    sigma2_t: params.sigma2 * d2.exp(),
                    ..base
                });
                d1 = vol.rho1 * d1 + vol.sigma_l * stream.normal(2 * t);
                d2 = vol.rho2 * d2 + vol.sigma_k * stream.normal(2 * t + 1);
            }
        }
    }
    Ok(path)
}
