//! Within-period equilibrium: the job-distribution rate, the firm-level
//! elasticities and lognormal moment constants, and the closed-form
//! aggregate prices and quantities given capital and the shock state.

use serde::{Deserialize, Serialize};

use crate::error::{checked_exp, ModelError, Result};
use crate::params::{AggregateShockState, ValidatedParams};
use crate::roots;

/// Firm-level elasticities and the lognormal moment constants entering the
/// labor (B1), capital (B2) and goods (B3) market-clearing conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    #[serde(rename = "eta_Q")]
    pub eta_q: f64,
    #[serde(rename = "eta_Q_theta")]
    pub eta_q_theta: f64,
    pub eta_l_theta: f64,
    #[serde(rename = "B1")]
    pub b1: f64,
    #[serde(rename = "B2")]
    pub b2: f64,
    #[serde(rename = "B3")]
    pub b3: f64,
    pub kappa: f64,
}

impl Coefficients {
    /// lambda_theta - kappa * eta_Q * eta_Q_theta; must be positive.
    pub fn capital_margin(&self, lambda_theta_t: f64) -> f64 {
        lambda_theta_t - self.kappa * self.eta_q * self.eta_q_theta
    }
}

/// One period's full within-period solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticEquilibrium {
    pub lambda_t: f64,
    pub coefficients: Coefficients,
    pub w0: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "Y")]
    pub y: f64,
    #[serde(rename = "Q_bar")]
    pub q_bar: f64,
    pub k_bar: f64,
    pub chi_bar: f64,
    pub l_bar: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "C_in")]
    pub c_in: f64,
    #[serde(rename = "Y_l")]
    pub y_l: f64,
    #[serde(rename = "Y_k")]
    pub y_k: f64,
    #[serde(rename = "Y_d")]
    pub y_d: f64,
    pub shock: AggregateShockState,
    #[serde(rename = "K")]
    pub k: f64,
}

impl StaticEquilibrium {
    /// Household income Y_l + Y_k + Y_d.
    pub fn income(&self) -> f64 {
        self.y_l + self.y_k + self.y_d
    }

    pub fn labor_share(&self) -> f64 {
        self.y_l / self.y
    }
}

/// G(lambda) = b (lambda/lambda_x)^psi + lambda - (d z + lambda_theta);
/// its root is the job-distribution rate.
pub fn job_dist_residual(params: &ValidatedParams, shock: &AggregateShockState, lambda: f64) -> f64 {
    let b = params.job_curvature_coef();
    let target = params.job_z_loading() * shock.z + shock.lambda_theta_t;
    b * (lambda / params.lambda_x).powf(params.psi) + lambda - target
}

fn job_dist_residual_and_slope(params: &ValidatedParams, shock: &AggregateShockState, lambda: f64) -> (f64, f64) {
    let b = params.job_curvature_coef();
    let target = params.job_z_loading() * shock.z + shock.lambda_theta_t;
    let pow = (lambda / params.lambda_x).powf(params.psi);
    let slope = if lambda > 0.0 {
        1.0 + b * params.psi * pow / lambda
    } else {
        f64::INFINITY
    };
    (b * pow + lambda - target, slope)
}

/// Initial bracket [0, hi] for the job-distribution root; `hi` is where the
/// increasing branch of G is certain to be positive for nonnegative b and
/// typical negative b. Callers should still expand it if G(hi) <= 0.
pub fn job_dist_bracket(params: &ValidatedParams, shock: &AggregateShockState) -> (f64, f64) {
    let b = params.job_curvature_coef();
    let target = params.job_z_loading() * shock.z + shock.lambda_theta_t;
    let hi = target + b.abs() * (1.0 + target / params.lambda_x).powf(params.psi) + 1.0;
    (0.0, hi)
}

/// Solve the job-distribution fixed point for lambda_t.
pub fn solve_lambda(params: &ValidatedParams, shock: &AggregateShockState) -> Result<f64> {
    shock.validate()?;
    let b = params.job_curvature_coef();
    let target = params.job_z_loading() * shock.z + shock.lambda_theta_t;
    if params.psi == 0.0 {
        // G is affine: b + lambda - target
        let lambda = target - b;
        if lambda <= 0.0 {
            return Err(ModelError::NoRoot(format!(
                "psi = 0 and d*z + lambda_theta = {target} <= b = {b}"
            )));
        }
        return Ok(lambda);
    }
    let (lo, mut hi) = job_dist_bracket(params, shock);
    let mut expansions = 0;
    while job_dist_residual(params, shock, hi) <= 0.0 {
        hi *= 2.0;
        expansions += 1;
        if expansions > 200 || !hi.is_finite() {
            return Err(ModelError::NoRoot(format!(
                "G stays non-positive up to lambda = {hi} (b = {b}, psi = {})",
                params.psi
            )));
        }
    }
    let ftol = 1e-15 * target.max(1.0);
    roots::newton_bisect(|l| job_dist_residual_and_slope(params, shock, l), lo, hi, ftol, 400)
}

/// (lambda_t / lambda_x)^psi: the loading of log TFPQ on firm type.
pub fn tfpq_loading(params: &ValidatedParams, lambda_t: f64) -> f64 {
    (lambda_t / params.lambda_x).powf(params.psi)
}

/// Firm-level elasticities and the market-clearing moment constants at a
/// given lambda_t.
pub fn coefficients(params: &ValidatedParams, shock: &AggregateShockState, lambda_t: f64) -> Result<Coefficients> {
    let kappa = params.kappa();
    let eta_q = params.eta_q();
    let r = tfpq_loading(params, lambda_t);
    let z = shock.z;
    let eta_q_theta = -params.gamma * z + (1.0 - params.psi) * r;
    let eta_l_theta = kappa * eta_q * eta_q_theta - z - params.psi / params.gamma * r;

    let (s1, s2) = (shock.sigma1_t, shock.sigma2_t);
    let lab1 = kappa * eta_q * params.gamma + 1.0;
    let lab2 = kappa * eta_q * params.alpha;
    let cap1 = kappa * eta_q * params.gamma;
    let cap2 = kappa * eta_q * params.alpha + 1.0;
    let b1 = (0.5 * (lab1 * lab1 * s1 * s1 + lab2 * lab2 * s2 * s2)).exp();

    let margin = shock.lambda_theta_t - kappa * eta_q * eta_q_theta;
    if !(margin > 0.0) {
        return Err(ModelError::UnboundedCapitalDemand { margin });
    }
    let b2 = (0.5 * (cap1 * cap1 * s1 * s1 + cap2 * cap2 * s2 * s2)).exp() / margin;
    let b3 = (0.5 * (cap1 * cap1 * s1 * s1 + lab2 * lab2 * s2 * s2)).exp() / margin;
    let c = Coefficients {
        eta_q,
        eta_q_theta,
        eta_l_theta,
        b1,
        b2,
        b3,
        kappa,
    };
    if [b1, b2, b3].iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite("market-clearing constants"));
    }
    Ok(c)
}

/// Aggregate labor income, capital income and distributed profits.
pub fn factor_incomes(params: &ValidatedParams, eq: &StaticEquilibrium) -> Result<(f64, f64, f64)> {
    let c = &eq.coefficients;
    let lt = eq.shock.lambda_theta_t;
    let margin = c.capital_margin(lt);
    if !(margin > 0.0) {
        return Err(ModelError::UnboundedCapitalDemand { margin });
    }
    let labor_den = margin + eq.shock.z;
    if !(labor_den > 0.0) {
        return Err(ModelError::UnboundedCapitalDemand { margin: labor_den });
    }
    let scale = lt * eq.chi_bar * eq.q_bar;
    let y_l = params.gamma * c.b1 * scale / labor_den;
    let y_k = params.alpha * c.b2 * scale;
    let y_d = (1.0 / c.kappa - params.gamma - params.alpha) * c.b3 * scale;
    Ok((y_l, y_k, y_d))
}

/// Prices and aggregates for capital stock `k` given the solved lambda_t
/// and its coefficients. All powers are evaluated in logs.
pub fn aggregates(
    params: &ValidatedParams,
    shock: &AggregateShockState,
    lambda_t: f64,
    coeffs: &Coefficients,
    k: f64,
) -> Result<StaticEquilibrium> {
    if !(k.is_finite() && k > 0.0) {
        return Err(ModelError::domain("K", format!("K = {k} must be > 0")));
    }
    let margin = coeffs.capital_margin(shock.lambda_theta_t);
    if !(margin > 0.0) {
        return Err(ModelError::UnboundedCapitalDemand { margin });
    }
    let (a, g, xi) = (params.alpha, params.gamma, params.xi);
    let kappa = coeffs.kappa;
    let eta_q = coeffs.eta_q;

    let ln_a = shock.a.ln();
    let ln_k = k.ln();
    let ln_kappa = kappa.ln();
    let ln_lt = shock.lambda_theta_t.ln();
    let ln_b1 = coeffs.b1.ln();
    let ln_b2 = coeffs.b2.ln();
    let ln_lb3 = ln_lt + coeffs.b3.ln();

    let ln_m = xi / (xi - 1.0) * ln_lb3;
    let ln_w0 = ln_a
        + g.ln()
        + ln_kappa
        + ln_lb3 / (xi - 1.0)
        + (g - 1.0) * (lambda_t.ln() - ln_lt - ln_b1)
        + a * (ln_k - ln_lt - ln_b2);
    let ln_c_in = ln_a + a * ln_k + g * ln_kappa - a * ln_lt - a * ln_b2 + g / xi * ln_m + g * (g.ln() - ln_w0);
    let q_exponent = eta_q / (1.0 - eta_q * (-a + (a + g) / xi));
    let ln_q = q_exponent * ln_c_in;
    let ln_y = ln_m + ln_q;
    let ln_r = ln_lt + ln_b2 + a.ln() + ln_kappa + ln_q + ln_lb3 / (xi - 1.0) - ln_k;
    let ln_chi = ln_kappa - ln_q / xi + ln_y / xi;
    let ln_kbar = a.ln() + ln_kappa + kappa * ln_q + ln_y / xi - ln_r;
    let ln_lbar = (ln_chi + ln_a + a * ln_kbar + g.ln() - ln_w0) / (1.0 - g);

    let mut eq = StaticEquilibrium {
        lambda_t,
        coefficients: *coeffs,
        w0: checked_exp(ln_w0, "w0")?,
        r: checked_exp(ln_r, "R")?,
        y: checked_exp(ln_y, "Y")?,
        q_bar: checked_exp(ln_q, "Q_bar")?,
        k_bar: checked_exp(ln_kbar, "k_bar")?,
        chi_bar: checked_exp(ln_chi, "chi_bar")?,
        l_bar: checked_exp(ln_lbar, "l_bar")?,
        m: checked_exp(ln_m, "M")?,
        c_in: checked_exp(ln_c_in, "C_in")?,
        y_l: 0.0,
        y_k: 0.0,
        y_d: 0.0,
        shock: *shock,
        k,
    };
    let (y_l, y_k, y_d) = factor_incomes(params, &eq)?;
    if ![y_l, y_k, y_d].iter().all(|v| v.is_finite()) {
        return Err(ModelError::NonFinite("factor incomes"));
    }
    eq.y_l = y_l;
    eq.y_k = y_k;
    eq.y_d = y_d;
    Ok(eq)
}

/// log Y - alpha log K: aggregate TFP with the unit labor endowment.
pub fn measured_tfp(params: &ValidatedParams, eq: &StaticEquilibrium) -> f64 {
    eq.y.ln() - params.alpha * eq.k.ln()
}

/// The capital-independent part of a period's solution. Evaluating it at
/// different capital stocks reuses lambda_t and the coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticState {
    pub params: ValidatedParams,
    pub shock: AggregateShockState,
    pub lambda_t: f64,
    pub coefficients: Coefficients,
}

impl StaticState {
    pub fn new(params: &ValidatedParams, shock: &AggregateShockState) -> Result<Self> {
        let lambda_t = solve_lambda(params, shock)?;
        let coefficients = coefficients(params, shock, lambda_t)?;
        Ok(StaticState {
            params: *params,
            shock: *shock,
            lambda_t,
            coefficients,
        })
    }

    pub fn at(&self, k: f64) -> Result<StaticEquilibrium> {
        aggregates(&self.params, &self.shock, self.lambda_t, &self.coefficients, k)
    }
}

/// Convenience: full static solve for one shock state and capital stock.
pub fn solve_static(params: &ValidatedParams, shock: &AggregateShockState, k: f64) -> Result<StaticEquilibrium> {
    StaticState::new(params, shock)?.at(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ModelParams;
    use crate::quad::GaussHermite;

    fn calibrated() -> ValidatedParams {
        ModelParams::baseline().validate().unwrap()
    }

    /// Independent oracle: bisection on G to 1e-12 over the stated bracket.
    fn lambda_oracle(p: &ModelParams, z: f64) -> f64 {
        let d = (1.0 + (p.xi - 1.0) * (1.0 - p.alpha)) / (1.0 + (1.0 - p.alpha - p.gamma) * (p.xi - 1.0));
        let b = ((p.xi - 1.0) * (p.gamma - p.psi * (1.0 - p.alpha)) - p.psi)
            / (p.gamma * (1.0 + (1.0 - p.alpha - p.gamma) * (p.xi - 1.0)));
        let t = d * z + p.lambda_theta;
        let g = |l: f64| b * (l / p.lambda_x).powf(p.psi) + l - t;
        let (mut lo, mut hi) = (0.0, t + b.abs() * (1.0 + t / p.lambda_x).powf(p.psi) + 1.0);
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn lambda_at_baseline() {
        let p = calibrated();
        let s0 = AggregateShockState::baseline(&p, 0.0);
        let sh = AggregateShockState::baseline(&p, 0.3984);
        let l0 = solve_lambda(&p, &s0).unwrap();
        let lh = solve_lambda(&p, &sh).unwrap();
        assert!((l0 - lambda_oracle(&p, 0.0)).abs() < 1e-12);
        assert!((lh - lambda_oracle(&p, 0.3984)).abs() < 1e-12);
        // frozen from the bisection oracle
        assert!((l0 - 0.746_467_660_347_505).abs() < 1e-12);
        assert!((lh - 1.561_286_464_412_476).abs() < 1e-12);
        assert!(lh > l0);
        assert!(job_dist_residual(&p, &s0, l0).abs() <= 1e-12 * p.lambda_theta.max(1.0));
    }

    #[test]
    fn psi_zero_closed_form() {
        let p = ModelParams {
            psi: 0.0,
            lambda_theta: 6.0,
            ..ModelParams::baseline()
        }
        .validate()
        .unwrap();
        let z = 0.2;
        let shock = AggregateShockState::baseline(&p, z);
        let b = (p.xi - 1.0) / (1.0 + (1.0 - p.alpha - p.gamma) * (p.xi - 1.0));
        let d = (1.0 + (p.xi - 1.0) * (1.0 - p.alpha)) / (1.0 + (1.0 - p.alpha - p.gamma) * (p.xi - 1.0));
        let lambda = solve_lambda(&p, &shock).unwrap();
        assert_eq!(lambda, p.lambda_theta + d * z - b);
    }

    #[test]
    fn psi_zero_without_positive_root() {
        let p = ModelParams {
            psi: 0.0,
            lambda_theta: 1.0,
            ..ModelParams::baseline()
        }
        .validate()
        .unwrap();
        let shock = AggregateShockState::baseline(&p, 0.0);
        assert!(matches!(solve_lambda(&p, &shock), Err(ModelError::NoRoot(_))));
    }

    #[test]
    fn negative_z_rejected() {
        let p = calibrated();
        let shock = AggregateShockState::baseline(&p, -0.1);
        assert!(matches!(solve_lambda(&p, &shock), Err(ModelError::Domain { .. })));
    }

    #[test]
    fn lambda_neutral_to_a_and_sigma() {
        let p = calibrated();
        let base = AggregateShockState::baseline(&p, 0.3984);
        let l = solve_lambda(&p, &base).unwrap();
        for a in [0.5, 1.0, 2.0] {
            assert_eq!(solve_lambda(&p, &base.with_a(a)).unwrap().to_bits(), l.to_bits());
        }
        for s1 in [0.0, 0.3] {
            for s2 in [0.0, 0.3] {
                let s = AggregateShockState {
                    sigma1_t: s1,
                    sigma2_t: s2,
                    ..base
                };
                assert_eq!(solve_lambda(&p, &s).unwrap().to_bits(), l.to_bits());
            }
        }
    }

    #[test]
    fn lambda_increasing_in_z() {
        let p = calibrated();
        let mut prev = 0.0;
        for i in 0..50 {
            let z = i as f64 * 0.02;
            let l = solve_lambda(&p, &AggregateShockState::baseline(&p, z)).unwrap();
            assert!(l > prev, "z = {z}");
            prev = l;
        }
    }

    #[test]
    fn degenerate_coefficients() {
        let p = ModelParams {
            psi: 0.0,
            lambda_theta: 6.0,
            sigma1: 0.0,
            sigma2: 0.0,
            ..ModelParams::baseline()
        }
        .validate()
        .unwrap();
        let shock = AggregateShockState::baseline(&p, 0.0);
        let l = solve_lambda(&p, &shock).unwrap();
        let c = coefficients(&p, &shock, l).unwrap();
        assert_eq!(c.b1, 1.0);
        assert_eq!(c.eta_q_theta, 1.0);
        let expected = 1.0 / (p.lambda_theta - c.kappa * c.eta_q);
        assert!((c.b2 - expected).abs() < 1e-15 * expected);
        assert!((c.b3 - expected).abs() < 1e-15 * expected);
    }

    #[test]
    fn labor_elasticity_restates_fixed_point() {
        let p = calibrated();
        for z in [0.0, 0.1, 0.3984, 0.8] {
            let shock = AggregateShockState::baseline(&p, z);
            let l = solve_lambda(&p, &shock).unwrap();
            let c = coefficients(&p, &shock, l).unwrap();
            assert!((c.eta_l_theta - (p.lambda_theta - l)).abs() < 1e-12, "z = {z}");
        }
    }

    #[test]
    fn moment_constants_match_hermite_quadrature() {
        let p = ModelParams {
            sigma2: 0.15,
            ..ModelParams::baseline()
        }
        .validate()
        .unwrap();
        let gh = GaussHermite::new(64);
        for z in [0.0, 0.3984] {
            let shock = AggregateShockState::baseline(&p, z);
            let l = solve_lambda(&p, &shock).unwrap();
            let c = coefficients(&p, &shock, l).unwrap();
            let ke = c.kappa * c.eta_q;
            let margin = c.capital_margin(p.lambda_theta);
            let e1 = |coef: f64| gh.normal_expectation(p.sigma1, |e| (-coef * e).exp());
            let e2 = |coef: f64| gh.normal_expectation(p.sigma2, |e| (-coef * e).exp());
            let b1 = e1(ke * p.gamma + 1.0) * e2(ke * p.alpha);
            let b2 = e1(ke * p.gamma) * e2(ke * p.alpha + 1.0) / margin;
            let b3 = e1(ke * p.gamma) * e2(ke * p.alpha) / margin;
            assert!((b1 / c.b1 - 1.0).abs() < 1e-10);
            assert!((b2 / c.b2 - 1.0).abs() < 1e-10);
            assert!((b3 / c.b3 - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn unbounded_capital_demand_guard() {
        // very fat firm-type tail: lambda_theta below kappa eta_Q eta_Q_theta
        let p = ModelParams {
            lambda_theta: 0.3,
            ..ModelParams::baseline()
        }
        .validate()
        .unwrap();
        let shock = AggregateShockState::baseline(&p, 0.0);
        let l = solve_lambda(&p, &shock).unwrap();
        assert!(matches!(
            coefficients(&p, &shock, l),
            Err(ModelError::UnboundedCapitalDemand { .. })
        ));
    }

    #[test]
    fn aggregate_identities() {
        let p = calibrated();
        for z in [0.0, 0.3984] {
            let eq = solve_static(&p, &AggregateShockState::baseline(&p, z), 3.7).unwrap();
            // Q_bar = A k_bar^alpha l_bar^gamma
            let q = eq.shock.a * eq.k_bar.powf(p.alpha) * eq.l_bar.powf(p.gamma);
            assert!((q / eq.q_bar - 1.0).abs() < 1e-10);
            // labor-market closure
            let closure = p.lambda_theta * eq.coefficients.b1 * eq.l_bar;
            assert!((closure / eq.lambda_t - 1.0).abs() < 1e-10);
            assert!((eq.y / (eq.m * eq.q_bar) - 1.0).abs() < 1e-14);
            // capital income is R K
            assert!((eq.y_k / (eq.r * eq.k) - 1.0).abs() < 1e-12);
            for v in [eq.w0, eq.r, eq.y, eq.q_bar, eq.k_bar, eq.chi_bar, eq.l_bar] {
                assert!(v > 0.0);
            }
        }
    }

    #[test]
    fn factor_incomes_exhaust_output_without_wedges() {
        let p = ModelParams {
            sigma1: 0.0,
            sigma2: 0.0,
            ..ModelParams::baseline()
        }
        .validate()
        .unwrap();
        let eq = solve_static(&p, &AggregateShockState::baseline(&p, 0.0), 2.0).unwrap();
        assert!((eq.income() / eq.y - 1.0).abs() < 1e-10);
        assert!((eq.y_k / eq.y - p.alpha * p.kappa()).abs() < 1e-12);
        let eq_h = solve_static(&p, &AggregateShockState::baseline(&p, 0.3984), 2.0).unwrap();
        assert!(eq_h.income() < eq_h.y);
    }

    #[test]
    fn factor_incomes_fall_short_in_crisis_at_calibration() {
        let p = calibrated();
        let eq = solve_static(&p, &AggregateShockState::baseline(&p, 0.3984), 2.0).unwrap();
        assert!(eq.income() < eq.y);
    }

    #[test]
    fn measured_tfp_and_output_elasticities() {
        let p = ModelParams {
            psi: 0.0,
            lambda_theta: 6.0,
            ..ModelParams::baseline()
        }
        .validate()
        .unwrap();
        let shock = AggregateShockState::baseline(&p, 0.0);
        let eq = solve_static(&p, &shock, 1.0).unwrap();
        assert_eq!(measured_tfp(&p, &eq), eq.y.ln());

        // elasticity of Y w.r.t. A read off the closed-form composition:
        // w0 ~ A, C_in ~ A w0^-gamma, Q_bar ~ C_in^E
        let e = p.eta_q() / (1.0 - p.eta_q() * (-p.alpha + (p.alpha + p.gamma) / p.xi));
        let analytic = (1.0 - p.gamma) * e;
        let h = 1e-6;
        let up = solve_static(&p, &shock.with_a(1.0 + h), 1.0).unwrap();
        let dn = solve_static(&p, &shock.with_a(1.0 - h), 1.0).unwrap();
        let fd = (measured_tfp(&p, &up) - measured_tfp(&p, &dn)) / ((1.0 + h).ln() - (1.0 - h).ln());
        assert!((fd / analytic - 1.0).abs() < 1e-6);
    }

    #[test]
    fn tfp_falls_in_crisis() {
        let p = calibrated();
        let k = 5.0;
        let boom = solve_static(&p, &AggregateShockState::baseline(&p, 0.0), k).unwrap();
        let crisis = solve_static(&p, &AggregateShockState::baseline(&p, 0.3984), k).unwrap();
        assert!(measured_tfp(&p, &boom) > measured_tfp(&p, &crisis));
    }

    #[test]
    fn wage_scale_homogeneity() {
        let p = calibrated();
        let s = AggregateShockState::baseline(&p, 0.3984);
        let base = solve_static(&p, &s, 2.0).unwrap();
        let a2 = solve_static(&p, &s.with_a(2.0), 2.0).unwrap();
        let k2 = solve_static(&p, &s, 4.0).unwrap();
        assert!((a2.w0 / base.w0 - 2.0).abs() < 1e-12 * 2.0);
        assert!((k2.w0 / base.w0 - 2f64.powf(p.alpha)).abs() < 1e-12);
    }
}
