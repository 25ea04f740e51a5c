use proptest::prelude::*;
use sortcycle::firms::{analytic_moments, empirical_revenue_shares, firm_outcome, population_revenue_shares, FirmDraw};
use sortcycle::params::stationary_distribution;
use sortcycle::verify::{bracket_sign_changes, foc_residuals, job_residual, residual_upper_bound};
use sortcycle::{solve_lambda, solve_static, AggregateShockState, MarkovChain2, ModelParams, ValidatedParams};

fn params_strategy() -> impl Strategy<Value = ValidatedParams> {
    (
        0.05..0.45f64,
        0.0..1.0f64,
        0.02..0.2f64,
        0.9..0.99f64,
        1.5..12.0f64,
        0.05..0.8f64,
        0.2..4.0f64,
        0.5..12.0f64,
        0.0..0.5f64,
        0.0..0.3f64,
    )
        .prop_map(|(alpha, g, delta, beta, xi, psi, lambda_x, lambda_theta, sigma1, sigma2)| {
            let gamma = 0.3 + g * (0.95 - alpha - 0.3);
            ModelParams {
                alpha,
                gamma,
                delta,
                beta,
                xi,
                psi,
                lambda_x,
                lambda_theta,
                sigma1,
                sigma2,
            }
            .validate()
            .expect("strategy stays inside the valid region")
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn job_residual_has_one_sign_change(p in params_strategy(), z in 0.0..2.0f64) {
        let shock = AggregateShockState::baseline(&p, z);
        let upper = residual_upper_bound(&p, &shock);
        prop_assert_eq!(bracket_sign_changes(&p, &shock, upper, 10_000), 1);
        let l = solve_lambda(&p, &shock).unwrap();
        prop_assert!(job_residual(&p, z, p.lambda_theta, l).abs() <= 1e-12 * p.lambda_theta.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    #[test]
    fn lambda_strictly_increasing_in_z(p in params_strategy(), z_max in 0.1..2.0f64) {
        let ls: Vec<f64> = (0..50)
            .map(|i| solve_lambda(&p, &AggregateShockState::baseline(&p, z_max * i as f64 / 49.0)).unwrap())
            .collect();
        prop_assert!(ls.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn lambda_neutral_to_a_and_sigma(p in params_strategy(), z in 0.0..1.0f64) {
        let base = AggregateShockState::baseline(&p, z);
        let l = solve_lambda(&p, &base).unwrap().to_bits();
        for a in [0.5, 1.0, 2.0] {
            prop_assert_eq!(solve_lambda(&p, &base.with_a(a)).unwrap().to_bits(), l);
        }
        for (s1, s2) in [(0.0, 0.0), (0.3, 0.0), (0.0, 0.3), (0.3, 0.3)] {
            let s = AggregateShockState { sigma1_t: s1, sigma2_t: s2, ..base };
            prop_assert_eq!(solve_lambda(&p, &s).unwrap().to_bits(), l);
        }
    }

    #[test]
    fn w0_homogeneity(p in params_strategy(), a in 0.2..5.0f64, k in 0.2..5.0f64) {
        let shock = AggregateShockState::baseline(&p, 0.0);
        let Ok(e1) = solve_static(&p, &shock, 1.0) else { return Ok(()) };
        let ea = solve_static(&p, &shock.with_a(a), 1.0).unwrap();
        let ek = solve_static(&p, &shock, k).unwrap();
        prop_assert!((ea.w0 / (a * e1.w0) - 1.0).abs() < 1e-12);
        prop_assert!((ek.w0 / (k.powf(p.alpha) * e1.w0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn firm_first_order_conditions(
        p in params_strategy(),
        z in 0.0..0.5f64,
        theta in 0.0..3.0f64,
        e1 in -2.0..2.0f64,
        e2 in -2.0..2.0f64,
    ) {
        let shock = AggregateShockState::baseline(&p, z);
        let Ok(eq) = solve_static(&p, &shock, 1.0) else { return Ok(()) };
        let theta = theta / p.lambda_theta;
        let draw = FirmDraw { theta, eps1: p.sigma1 * e1, eps2: p.sigma2 * e2 };
        let Ok(f) = firm_outcome(&p, &eq, draw) else { return Ok(()) };
        for r in foc_residuals(&p, &eq, &f) {
            prop_assert!(r <= 1e-9, "{:?}", foc_residuals(&p, &eq, &f));
        }
    }

    #[test]
    fn analytic_moments_are_nonnegative(p in params_strategy(), z in 0.0..0.5f64) {
        let shock = AggregateShockState::baseline(&p, z);
        let Ok(eq) = solve_static(&p, &shock, 1.0) else { return Ok(()) };
        let m = analytic_moments(&p, &eq);
        prop_assert!(m.var_log_wage > 0.0 && m.var_log_tfpq > 0.0 && m.var_log_tfpr > 0.0);
    }

    #[test]
    fn population_shares_are_fractions(p in params_strategy(), z in 0.0..0.5f64) {
        let shock = AggregateShockState::baseline(&p, z);
        let Ok(eq) = solve_static(&p, &shock, 1.0) else { return Ok(()) };
        let Ok(s) = population_revenue_shares(&p, &eq) else { return Ok(()) };
        prop_assert!(s.rev_share_top10 >= 0.1 - 1e-9 && s.rev_share_top10 <= 1.0);
        prop_assert!(s.rev_share_p50_p90 >= 0.0);
        prop_assert!(s.rev_share_top10 + s.rev_share_p50_p90 <= 1.0 + 1e-12);
    }

    #[test]
    fn empirical_shares_scale_and_order_free(mut rev in prop::collection::vec(0.01..100.0f64, 10..200), c in 0.1..10.0f64) {
        let a = empirical_revenue_shares(&rev);
        let scaled: Vec<f64> = rev.iter().map(|r| c * r).collect();
        let b = empirical_revenue_shares(&scaled);
        rev.reverse();
        let d = empirical_revenue_shares(&rev);
        prop_assert!((a.rev_share_top10 - b.rev_share_top10).abs() < 1e-12);
        prop_assert!((a.rev_share_top10 - d.rev_share_top10).abs() < 1e-12);
        prop_assert!((a.rev_share_p50_p90 - d.rev_share_p50_p90).abs() < 1e-12);
    }

    #[test]
    fn stationary_distribution_is_invariant(pl in 0.01..0.999f64, ph in 0.01..0.999f64) {
        let chain = MarkovChain2 { p_stay_low: pl, p_stay_high: ph, ..MarkovChain2::baseline() };
        let (a, b) = stationary_distribution(&chain);
        prop_assert!((a + b - 1.0).abs() < 1e-14);
        prop_assert!((a * pl + b * (1.0 - ph) - a).abs() < 1e-14);
    }
}
