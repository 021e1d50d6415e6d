//! Property tests for invariants that must hold for every valid input.

use hawkes_impact::impact::{exponent_link, exponent_link_inverse, impact_analytic, log_grid, permanent_impact};
use hawkes_impact::longmemory::{fbm_limit_covariance, poisson_covariance};
use hawkes_impact::manipulation::{
    price_after_supply_shift, DecayKernel, ImpactFunction, ImpactModelSpec, Investor, InvestorPopulation,
};
use hawkes_impact::output::Table;
use hawkes_impact::{propagator_closed_form, KernelSpec};
use proptest::prelude::*;

fn kernel() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        (0.05..0.95f64, 0.2..5.0f64).prop_map(|(a, b)| KernelSpec::exponential(a, b).unwrap()),
        (0.05..0.95f64, 0.05..0.45f64, 0.2..5.0f64)
            .prop_map(|(a, alpha, c)| KernelSpec::shifted_power_law(a, alpha, c).unwrap()),
    ]
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_nonnegative_and_tail_integral_is_monotone(spec in kernel(), xs in prop::collection::vec(0.0..200.0f64, 2..20)) {
        prop_assert!(close(spec.tail_integral(0.0).unwrap(), spec.norm(), 1e-10));
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        let mut prev = f64::INFINITY;
        for &x in &xs {
            prop_assert!(spec.eval(x).unwrap() >= 0.0);
            let tail = spec.tail_integral(x).unwrap();
            prop_assert!(tail <= prev + 1e-14);
            prop_assert!(tail >= 0.0);
            prev = tail;
        }
    }

    #[test]
    fn fourier_at_zero_is_the_norm(spec in kernel()) {
        let f = spec.fourier(0.0).unwrap();
        prop_assert!(close(f.re, spec.norm(), 1e-8));
        prop_assert!(f.im.abs() < 1e-8);
    }

    #[test]
    fn zeta_is_nonincreasing_with_the_right_endpoints(spec in kernel(), kappa in 0.1..3.0f64, v in 0.1..3.0f64) {
        let z = propagator_closed_form(&spec, kappa, v, 0.05, 50.0, None).unwrap();
        let a = spec.norm();
        prop_assert!(close(z.zeta0, kappa * v / (1.0 - a), 1e-12));
        prop_assert!(close(z.zeta_inf / z.zeta0, 1.0 - a, 1e-12));
        prop_assert!(z.is_nonincreasing(1e-12));
        prop_assert!(z.values.iter().all(|&x| x >= z.zeta_inf - 1e-12));
    }

    #[test]
    fn impact_starts_at_zero_and_rises_then_relaxes(spec in kernel(), rate in 0.1..5.0f64, tau in 0.5..10.0f64) {
        let z = propagator_closed_form(&spec, 1.0, 1.0, 0.01, 60.0, None).unwrap();
        let grid: Vec<f64> = (0..=120).map(|i| i as f64 * 0.25).collect();
        let mi = impact_analytic(&z, rate, tau, &grid).unwrap();
        prop_assert_eq!(mi.values[0], 0.0);
        for (w, t) in mi.values.windows(2).zip(&grid[1..]) {
            if *t <= tau {
                prop_assert!(w[1] >= w[0] - 1e-12);
            } else if t - 0.25 >= tau {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
        }
        let last = *mi.values.last().unwrap();
        prop_assert!(last >= permanent_impact(&z, rate, tau) - 1e-9);
    }

    #[test]
    fn permanent_impact_depends_only_on_executed_volume(spec in kernel(), volume in 0.5..20.0f64, split in 0.1..10.0f64) {
        let z = propagator_closed_form(&spec, 1.0, 1.0, 0.1, 10.0, None).unwrap();
        let a = permanent_impact(&z, volume / split, split);
        let b = permanent_impact(&z, volume, 1.0);
        prop_assert!(close(a, b, 1e-12));
        prop_assert!(close(a, volume, 1e-9));
    }

    #[test]
    fn fbm_covariance_is_self_similar_and_even(alpha in 0.05..0.45f64, h in 0.1..5.0f64, c in 0.2..10.0f64, lag in 0.0..50.0f64) {
        let two_h = 1.0 + 2.0 * alpha;
        let base = fbm_limit_covariance(1.3, alpha, h, &[lag, -lag]).unwrap();
        let scaled = fbm_limit_covariance(1.3, alpha, c * h, &[c * lag]).unwrap();
        prop_assert!(close(base.values[0], base.values[1], 1e-12));
        prop_assert!(close(scaled.values[0], c.powf(two_h) * base.values[0], 1e-9));
    }

    #[test]
    fn poisson_covariance_is_a_triangle(rate in 0.1..10.0f64, h in 0.1..5.0f64, lag in -20.0..20.0f64) {
        let c = poisson_covariance(rate, h, &[lag]).unwrap();
        prop_assert!(close(c.values[0], rate * (h - lag.abs()).max(0.0), 1e-12));
    }

    #[test]
    fn exponent_link_round_trips(gamma in 0.001..0.999f64) {
        let nu = exponent_link(gamma).unwrap();
        prop_assert!(nu > 0.5 && nu < 1.0);
        prop_assert!((exponent_link_inverse(nu).unwrap() - gamma).abs() < 1e-14);
    }

    #[test]
    fn supply_shift_is_linear_and_additive(
        params in prop::collection::vec((-5.0..5.0f64, 0.1..3.0f64, 0.1..3.0f64), 1..6),
        shares in -10.0..10.0f64,
        n0 in -10.0..10.0f64,
        n1 in -10.0..10.0f64,
    ) {
        let pop = InvestorPopulation {
            investors: params.iter().map(|&(e, l, s)| Investor { expected_yield: e, risk_aversion: l, variance: s }).collect(),
            shares,
        };
        let s0 = price_after_supply_shift(&pop, n0).unwrap();
        let s01 = price_after_supply_shift(&pop, n0 + n1).unwrap();
        let shifted = InvestorPopulation { shares: shares - n0, ..pop.clone() };
        let s1 = price_after_supply_shift(&shifted, n1).unwrap();
        let k = s0.impact_coefficient;
        prop_assert!(close(s0.price_after - s0.price_before, k * n0, 1e-12));
        prop_assert!(close(s1.price_before, s0.price_after, 1e-12));
        prop_assert!(close(s1.price_after, s01.price_after, 1e-12));
    }

    #[test]
    fn leading_term_is_antisymmetric(delta in 0.2..2.0f64, g in 0.0..=1.0f64, v1 in 0.1..10.0f64, v2 in 0.1..10.0f64) {
        let m = ImpactModelSpec::new(
            ImpactFunction::power(1.0, delta).unwrap(),
            DecayKernel::Exponential { g_inf: g, timescale: 1.0 },
        ).unwrap();
        prop_assert!((m.leading_term(v1, v2) + m.leading_term(v2, v1)).abs() < 1e-12 * (1.0 + m.leading_term(v1, v2).abs()));
    }

    #[test]
    fn tables_round_trip_through_csv(values in prop::collection::vec(-1e6..1e6f64, 1..30), seed in any::<u64>()) {
        let mut t = Table::new(&serde_json::json!({"seed": seed}), &["t", "x"]).unwrap();
        let grid = log_grid(0.1, 10.0, values.len());
        for (x, v) in grid.iter().zip(&values) {
            t.push_numbers(&[*x, *v]);
        }
        let back = Table::read(t.to_csv_string().unwrap().as_bytes()).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(back.numeric_column(1).unwrap(), values);
    }
}
