//! Structural parameters, aggregate shock states and the exogenous
//! processes that drive them.

use std::ops::Deref;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Structural constants of the economy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Capital intensity.
    pub alpha: f64,
    /// Labor (scale) intensity.
    pub gamma: f64,
    /// Depreciation rate per period.
    pub delta: f64,
    /// Discount factor per period.
    pub beta: f64,
    /// CES elasticity of substitution between intermediate goods.
    pub xi: f64,
    /// Worker-type (skill) intensity in firm productivity.
    pub psi: f64,
    /// Rate of the exponential worker-type distribution.
    pub lambda_x: f64,
    /// Baseline rate of the exponential firm-type distribution.
    pub lambda_theta: f64,
    /// Std dev of the firm-specific labor-wedge shock.
    pub sigma1: f64,
    /// Std dev of the firm-specific capital-wedge shock.
    pub sigma2: f64,
}

impl ModelParams {
    /// Fixed parameters of the annual calibration together with the
    /// calibrated free parameters.
    pub fn baseline() -> Self {
        ModelParams {
            alpha: 0.3,
            gamma: 0.6,
            delta: 0.10,
            beta: 0.96,
            xi: 9.0,
            psi: 0.4022,
            lambda_x: 0.8681,
            lambda_theta: 2.6160,
            sigma1: 0.2293,
            sigma2: 0.0,
        }
    }

    pub fn validate(self) -> Result<ValidatedParams> {
        let p = self;
        let fields = [
            ("alpha", p.alpha),
            ("gamma", p.gamma),
            ("delta", p.delta),
            ("beta", p.beta),
            ("xi", p.xi),
            ("psi", p.psi),
            ("lambda_x", p.lambda_x),
            ("lambda_theta", p.lambda_theta),
            ("sigma1", p.sigma1),
            ("sigma2", p.sigma2),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(ModelError::domain(name, format!("{name} = {v} is not finite")));
            }
        }
        if p.alpha <= 0.0 {
            return Err(ModelError::domain("alpha", format!("alpha = {} must be > 0", p.alpha)));
        }
        if p.gamma <= 0.0 {
            return Err(ModelError::domain("gamma", format!("gamma = {} must be > 0", p.gamma)));
        }
        if p.alpha + p.gamma >= 1.0 {
            return Err(ModelError::domain(
                "alpha+gamma",
                format!("alpha + gamma = {} must be < 1", p.alpha + p.gamma),
            ));
        }
        if p.xi <= 1.0 {
            return Err(ModelError::domain("xi", format!("xi = {} must be > 1", p.xi)));
        }
        if !(0.0..=1.0).contains(&p.psi) {
            return Err(ModelError::domain("psi", format!("psi = {} must lie in [0, 1]", p.psi)));
        }
        if p.lambda_x <= 0.0 {
            return Err(ModelError::domain("lambda_x", format!("lambda_x = {} must be > 0", p.lambda_x)));
        }
        if p.lambda_theta <= 0.0 {
            return Err(ModelError::domain(
                "lambda_theta",
                format!("lambda_theta = {} must be > 0", p.lambda_theta),
            ));
        }
        if p.sigma1 < 0.0 {
            return Err(ModelError::domain("sigma1", format!("sigma1 = {} must be >= 0", p.sigma1)));
        }
        if p.sigma2 < 0.0 {
            return Err(ModelError::domain("sigma2", format!("sigma2 = {} must be >= 0", p.sigma2)));
        }
        if !(p.beta > 0.0 && p.beta < 1.0) {
            return Err(ModelError::domain("beta", format!("beta = {} must lie in (0, 1)", p.beta)));
        }
        if !(0.0..=1.0).contains(&p.delta) {
            return Err(ModelError::domain("delta", format!("delta = {} must lie in [0, 1]", p.delta)));
        }
        Ok(ValidatedParams(p))
    }

    /// kappa = (xi - 1) / xi, the inverse markup.
    pub fn kappa(&self) -> f64 {
        (self.xi - 1.0) / self.xi
    }

    /// eta^Q = xi / (1 + (1 - alpha - gamma)(xi - 1)).
    pub fn eta_q(&self) -> f64 {
        self.xi / self.drs_denominator()
    }

    /// 1 + (1 - alpha - gamma)(xi - 1), the common denominator of the
    /// firm-level elasticities.
    pub fn drs_denominator(&self) -> f64 {
        1.0 + (1.0 - self.alpha - self.gamma) * (self.xi - 1.0)
    }

    /// Coefficient on (lambda_t/lambda_x)^psi in the job-distribution equation.
    pub fn job_curvature_coef(&self) -> f64 {
        let (a, g, xi, psi) = (self.alpha, self.gamma, self.xi, self.psi);
        ((xi - 1.0) * (g - psi * (1.0 - a)) - psi) / (g * self.drs_denominator())
    }

    /// Loading of z on the job-distribution equation.
    pub fn job_z_loading(&self) -> f64 {
        (1.0 + (self.xi - 1.0) * (1.0 - self.alpha)) / self.drs_denominator()
    }
}

/// Parameters that passed [`ModelParams::validate`]. All solvers take this.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidatedParams(ModelParams);

impl ValidatedParams {
    pub fn into_inner(self) -> ModelParams {
        self.0
    }
}

impl Deref for ValidatedParams {
    type Target = ModelParams;
    fn deref(&self) -> &ModelParams {
        &self.0
    }
}

/// Time-varying exogenous drivers for one period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregateShockState {
    /// Correlation of the log labor wedge with firm type.
    pub z: f64,
    /// Aggregate productivity.
    #[serde(rename = "A")]
    pub a: f64,
    pub lambda_theta_t: f64,
    pub sigma1_t: f64,
    pub sigma2_t: f64,
}

impl AggregateShockState {
    /// Shock state with the baseline firm-type rate and wedge volatilities
    /// of `params`, unit aggregate productivity and the given `z`.
    pub fn baseline(params: &ModelParams, z: f64) -> Self {
        AggregateShockState {
            z,
            a: 1.0,
            lambda_theta_t: params.lambda_theta,
            sigma1_t: params.sigma1,
            sigma2_t: params.sigma2,
        }
    }

    pub fn with_a(mut self, a: f64) -> Self {
        self.a = a;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.z.is_finite() && self.z >= 0.0) {
            return Err(ModelError::domain("z", format!("z = {} must be finite and >= 0", self.z)));
        }
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(ModelError::domain("A", format!("A = {} must be > 0", self.a)));
        }
        if !(self.lambda_theta_t.is_finite() && self.lambda_theta_t > 0.0) {
            return Err(ModelError::domain(
                "lambda_theta_t",
                format!("lambda_theta_t = {} must be > 0", self.lambda_theta_t),
            ));
        }
        if !(self.sigma1_t.is_finite() && self.sigma1_t >= 0.0) {
            return Err(ModelError::domain("sigma1_t", format!("sigma1_t = {} must be >= 0", self.sigma1_t)));
        }
        if !(self.sigma2_t.is_finite() && self.sigma2_t >= 0.0) {
            return Err(ModelError::domain("sigma2_t", format!("sigma2_t = {} must be >= 0", self.sigma2_t)));
        }
        Ok(())
    }
}

/// Two-state Markov chain for the market-efficiency shock z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovChain2 {
    /// z in the boom state.
    pub z_low: f64,
    /// z in the crisis state.
    pub z_high: f64,
    /// Probability of remaining in the boom state.
    pub p_stay_low: f64,
    /// Probability of remaining in the crisis state.
    pub p_stay_high: f64,
}

impl MarkovChain2 {
    pub fn baseline() -> Self {
        MarkovChain2 {
            z_low: 0.0,
            z_high: 0.3984,
            p_stay_low: 0.977,
            p_stay_high: 0.688,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_stay_low", self.p_stay_low), ("p_stay_high", self.p_stay_high)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ModelError::domain(name, format!("{name} = {p} must lie in [0, 1]")));
            }
        }
        for (name, z) in [("z_low", self.z_low), ("z_high", self.z_high)] {
            if !(z.is_finite() && z >= 0.0) {
                return Err(ModelError::domain(name, format!("{name} = {z} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    pub fn levels(&self) -> [f64; 2] {
        [self.z_low, self.z_high]
    }

    /// Row-stochastic transition matrix, state 0 = low z.
    pub fn transition(&self) -> [[f64; 2]; 2] {
        [
            [self.p_stay_low, 1.0 - self.p_stay_low],
            [1.0 - self.p_stay_high, self.p_stay_high],
        ]
    }

    /// Next state index given the current one and a uniform draw in (0, 1).
    pub fn step(&self, state: usize, u: f64) -> usize {
        let stay = if state == 0 { self.p_stay_low } else { self.p_stay_high };
        if u < stay {
            state
        } else {
            1 - state
        }
    }

    /// Chain that never leaves the boom state.
    pub fn frozen_low(&self) -> Self {
        MarkovChain2 {
            p_stay_low: 1.0,
            p_stay_high: 0.0,
            ..*self
        }
    }
}

/// Stationary distribution (prob_low, prob_high) of a two-state chain.
/// The identity chain has no unique answer and returns (0.5, 0.5).
pub fn stationary_distribution(chain: &MarkovChain2) -> (f64, f64) {
    let leave_low = 1.0 - chain.p_stay_low;
    let leave_high = 1.0 - chain.p_stay_high;
    let total = leave_low + leave_high;
    if total <= 0.0 {
        return (0.5, 0.5);
    }
    let low = leave_high / total;
    (low, 1.0 - low)
}

/// Firm-type redraw process with a two-state Markov rate lambda_theta_t:
/// theta' = rho*theta with probability p, rho*theta + eps otherwise,
/// eps ~ Exp(lambda_theta_{t+1}), p = rho*lambda_theta_{t+1}/lambda_theta_t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaRedrawProcess {
    pub rho: f64,
    pub lambda_low: f64,
    pub lambda_high: f64,
    pub p_stay_low: f64,
    pub p_stay_high: f64,
}

impl ThetaRedrawProcess {
    /// Process with a fixed rate.
    pub fn constant(rho: f64, lambda: f64) -> Self {
        ThetaRedrawProcess {
            rho,
            lambda_low: lambda,
            lambda_high: lambda,
            p_stay_low: 1.0,
            p_stay_high: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(ModelError::InvalidProcess(format!("rho = {} must lie in [0, 1)", self.rho)));
        }
        if !(self.lambda_low > 0.0 && self.lambda_low.is_finite()) {
            return Err(ModelError::InvalidProcess(format!("lambda_low = {} must be > 0", self.lambda_low)));
        }
        if self.lambda_high < self.lambda_low {
            return Err(ModelError::InvalidProcess(format!(
                "lambda_high = {} must be >= lambda_low = {}",
                self.lambda_high, self.lambda_low
            )));
        }
        if self.lambda_high > self.lambda_low && self.rho * self.lambda_high >= self.lambda_low {
            return Err(ModelError::InvalidProcess(format!(
                "lambda_high = {} must be < lambda_low / rho = {}",
                self.lambda_high,
                self.lambda_low / self.rho
            )));
        }
        for p in [self.p_stay_low, self.p_stay_high] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ModelError::InvalidProcess(format!("transition probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn rate(&self, state: usize) -> f64 {
        if state == 0 {
            self.lambda_low
        } else {
            self.lambda_high
        }
    }

    pub fn chain(&self) -> MarkovChain2 {
        MarkovChain2 {
            z_low: self.lambda_low,
            z_high: self.lambda_high,
            p_stay_low: self.p_stay_low,
            p_stay_high: self.p_stay_high,
        }
    }

    /// Probability of no redraw when the rate moves from `from` to `to`.
    pub fn keep_probability(&self, from: f64, to: f64) -> Result<f64> {
        let p = self.rho * to / from;
        if !(0.0..=1.0).contains(&p) {
            return Err(ModelError::InvalidProcess(format!(
                "keep probability rho*{to}/{from} = {p} outside [0, 1]"
            )));
        }
        Ok(p)
    }
}

/// AR(1) processes for the log wedge volatilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogVolProcess {
    pub rho1: f64,
    pub rho2: f64,
    pub sigma_l: f64,
    pub sigma_k: f64,
}

impl LogVolProcess {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rho1", self.rho1), ("rho2", self.rho2)] {
            if !(v.is_finite() && v.abs() < 1.0) {
                return Err(ModelError::domain(name, format!("{name} = {v} must satisfy |rho| < 1")));
            }
        }
        for (name, v) in [("sigma_l", self.sigma_l), ("sigma_k", self.sigma_k)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ModelError::domain(name, format!("{name} = {v} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// On-disk parameter file: the structural constants plus an optional
/// z-chain. Unknown keys are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub alpha: f64,
    pub gamma: f64,
    pub delta: f64,
    pub beta: f64,
    pub xi: f64,
    pub psi: f64,
    pub lambda_x: f64,
    pub lambda_theta: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<MarkovChain2>,
}

impl ParamsFile {
    pub fn new(p: ModelParams, chain: Option<MarkovChain2>) -> Self {
        ParamsFile {
            alpha: p.alpha,
            gamma: p.gamma,
            delta: p.delta,
            beta: p.beta,
            xi: p.xi,
            psi: p.psi,
            lambda_x: p.lambda_x,
            lambda_theta: p.lambda_theta,
            sigma1: p.sigma1,
            sigma2: p.sigma2,
            chain,
        }
    }

    pub fn model(&self) -> ModelParams {
        ModelParams {
            alpha: self.alpha,
            gamma: self.gamma,
            delta: self.delta,
            beta: self.beta,
            xi: self.xi,
            psi: self.psi,
            lambda_x: self.lambda_x,
            lambda_theta: self.lambda_theta,
            sigma1: self.sigma1,
            sigma2: self.sigma2,
        }
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> std::result::Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}
