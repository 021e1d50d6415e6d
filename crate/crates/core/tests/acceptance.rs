//! Acceptance criteria. Runs every criterion at its stated tolerance, prints
//! one PASS/FAIL line per criterion and exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use hawkes_impact::impact::{
    exponent_link, exponent_link_inverse, fit_power_law, impact_analytic, impact_monte_carlo, log_grid,
    permanent_impact, rescaled_impact_analytic, rescaled_impact_limit, sup_distance,
};
use hawkes_impact::kernel::make_near_critical;
use hawkes_impact::longmemory::{
    branching_for_ratio, convergence_study, empirical_covariance, estimate_gamma, poisson_covariance,
    theoretical_covariance,
};
use hawkes_impact::manipulation::{manipulation_scan, DecayKernel, ImpactFunction, ImpactModelSpec};
use hawkes_impact::numerics::stats::ks_two_sample;
use hawkes_impact::price::martingale_drift_test;
use hawkes_impact::simulation::{
    cluster_statistics, simulate_branching, simulate_market_replica, simulate_thinning, EventStream,
};
use hawkes_impact::{
    check_martingale_identity, compute_resolvent, propagator_closed_form, propagator_from_resolvent, KernelSpec,
    MarketConfig, MetaorderSpec, Side, SimulationMethod,
};

type Outcome = hawkes_impact::Result<(bool, String)>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "martingale identity", budget: Some(Duration::from_secs(10)), run: martingale_identity },
        Criterion { id: 2, name: "two-path propagator", budget: None, run: two_path_propagator },
        Criterion { id: 3, name: "Monte Carlo martingale", budget: Some(Duration::from_secs(300)), run: monte_carlo_martingale },
        Criterion { id: 4, name: "permanent-impact linearity", budget: None, run: permanent_linearity },
        Criterion { id: 5, name: "impact power law", budget: Some(Duration::from_secs(60)), run: impact_power_law },
        Criterion { id: 6, name: "long memory", budget: Some(Duration::from_secs(600)), run: long_memory },
        Criterion { id: 7, name: "exponent link", budget: None, run: exponent_link_check },
        Criterion { id: 8, name: "cluster representation", budget: None, run: cluster_representation },
        Criterion { id: 9, name: "no manipulation", budget: None, run: no_manipulation },
        Criterion { id: 10, name: "Poisson oracle", budget: None, run: poisson_oracle },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str()) || c.id.to_string() == *f) {
            continue;
        }
        let start = Instant::now();
        let result = (c.run)();
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok((ok, detail)) => (ok, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_budget = c.budget.is_none_or(|b| elapsed <= b);
        let budget = c.budget.map(|b| format!(" (budget {}s)", b.as_secs())).unwrap_or_default();
        let pass = ok && in_budget;
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {:<28} {}  [{:.1}s{budget}] {detail}",
            c.id,
            c.name,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} acceptance criteria failed");
        ExitCode::FAILURE
    }
}

fn both_families(norm: f64) -> [KernelSpec; 2] {
    [
        KernelSpec::exponential(norm, 1.0).unwrap(),
        KernelSpec::shifted_power_law(norm, 0.4, 1.0).unwrap(),
    ]
}

fn martingale_identity() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for spec in both_families(0.9) {
        let grid = compute_resolvent(&spec, 1e-3, 30.0)?;
        let zeta = propagator_from_resolvent(&grid, 1.0, 1.0)?;
        let r = check_martingale_identity(&zeta, &spec);
        ok &= r.relative_max < 1e-4;
        parts.push(format!("{} sup|ζ′+ζ(0)φ|/ζ(0)={:.2e}", spec.family_name(), r.relative_max));
    }
    Ok((ok, parts.join(", ")))
}

fn two_path_propagator() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for spec in both_families(0.9) {
        let grid = compute_resolvent(&spec, 1e-3, 30.0)?;
        let a = propagator_from_resolvent(&grid, 1.0, 1.0)?;
        let b = propagator_closed_form(&spec, 1.0, 1.0, 1e-3, 30.0, None)?;
        let sup = a.values.iter().zip(&b.values).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        let rel = sup / b.zeta0;
        ok &= rel < 1e-4;
        parts.push(format!("{} rel sup={rel:.2e}", spec.family_name()));
    }
    // ψ(t) = ab e^{−b(1−a)t} for φ = ab e^{−bt}.
    let (a, b) = (0.5, 1.0);
    let grid = compute_resolvent(&KernelSpec::exponential(a, b)?, 1e-3, 40.0)?;
    let psi_err = grid
        .values
        .iter()
        .enumerate()
        .fold(0.0_f64, |m, (k, v)| m.max((v - a * b * (-b * (1.0 - a) * grid.time(k)).exp()).abs()));
    ok &= psi_err < 1e-6;
    parts.push(format!("exponential ψ sup err={psi_err:.2e}"));
    Ok((ok, parts.join(", ")))
}

fn monte_carlo_martingale() -> Outcome {
    let spec = KernelSpec::exponential(0.9, 1.0)?;
    let cfg = MarketConfig::new(spec.clone(), 0.1, 55.0, 2024);
    let (t, h, n) = (50.0, 5.0, 10_000);
    let correct = propagator_closed_form(&spec, 1.0, 1.0, 1e-3, 60.0, None)?;
    let good = martingale_drift_test(&cfg, &correct, t, h, n)?;
    // Uncompensated control: ζ ≡ ζ(0), a pure permanent kernel.
    let naive = propagator_closed_form(&KernelSpec::zero(), correct.zeta0, 1.0, 1e-3, 60.0, None)?;
    let bad = martingale_drift_test(&cfg, &naive, t, h, n)?;
    // Calibrated control: closed form with the decay rate doubled, which
    // violates the identity by more than 10% in sup norm.
    let wrong_rate = propagator_closed_form(&KernelSpec::exponential(0.9, 2.0)?, 1.0, 1.0, 1e-3, 60.0, None)?;
    let violation = correct
        .values
        .iter()
        .zip(&wrong_rate.values)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
        / correct.zeta0;
    let calibrated = martingale_drift_test(&cfg, &wrong_rate, t, h, n)?;
    let ok = good.passes && !bad.passes && bad.conditional_z.abs() > 3.0 && violation > 0.1 && !calibrated.passes;
    Ok((
        ok,
        format!(
            "correct ζ: z={:.2}/{:.2} ({}), uncompensated: z={:.2}/{:.2} ({}), {:.0}%-violating: z={:.2} ({})",
            good.unconditional_z,
            good.conditional_z,
            verdict(good.passes),
            bad.unconditional_z,
            bad.conditional_z,
            verdict(bad.passes),
            100.0 * violation,
            calibrated.conditional_z,
            verdict(calibrated.passes),
        ),
    ))
}

fn verdict(passes: bool) -> &'static str {
    if passes {
        "passes"
    } else {
        "fails"
    }
}

fn permanent_linearity() -> Outcome {
    let spec = KernelSpec::exponential(0.5, 1.0)?;
    let (kappa, volume) = (0.8, 1.5);
    let zeta = propagator_closed_form(&spec, kappa, volume, 1e-3, 100.0, None)?;
    let mut ok = true;
    let mut worst_z: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    let mut seed = 100;
    for product in [4.0, 8.0, 16.0] {
        for rate in [0.5, 1.0, 2.0] {
            let duration = product / rate;
            let target = kappa * volume * rate * duration;
            let t_end = duration + 40.0;
            let exact = impact_analytic(&zeta, rate, duration, &[t_end])?;
            let perm = permanent_impact(&zeta, rate, duration);
            let rel = ((exact.values[0] - target) / target).abs().max(((perm - target) / target).abs());
            worst_rel = worst_rel.max(rel);
            ok &= rel < 1e-6;

            let mut cfg = MarketConfig::new(spec.clone(), 0.5, t_end, seed);
            cfg.kappa = kappa;
            cfg.volume = volume;
            cfg.metaorder = Some(MetaorderSpec { rate, duration, side: Side::Buy, feedback: false });
            seed += 1;
            let mc = impact_monte_carlo(&cfg, &zeta, 2000, &[t_end], true)?;
            let se = mc.std_errs.as_ref().map(|s| s[0]).unwrap_or(f64::NAN);
            let z = (mc.values[0] - target) / se;
            worst_z = worst_z.max(z.abs());
            ok &= z.abs() < 3.0;
        }
    }
    Ok((ok, format!("3×3 (F,τ) grid: max analytic rel err={worst_rel:.2e}, max MC |z|={worst_z:.2}")))
}

fn impact_power_law() -> Outcome {
    let base = KernelSpec::shifted_power_law(1.0, 0.4, 1.0)?;
    let fit_grid = log_grid(0.01, 1.0, 60);
    let tau = (1.0_f64 - 0.999).powf(-1.25);
    let fam = make_near_critical(&base, tau, 0.999, 1.0)?;
    let rmi = rescaled_impact_analytic(&fam, 1.0, 1.0, 1.0, tau, &fit_grid)?;
    let fit = fit_power_law(&rmi, (0.01, 1.0))?;
    let mut ok = (fit.exponent - 0.6).abs() <= 0.05;

    let ts: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let limit = rescaled_impact_limit(1.0, 0.4, 1.0, 1.0, 1.0, &ts);
    let mut distances = Vec::new();
    for a in [0.9_f64, 0.99, 0.999] {
        let tau = (1.0 - a).powf(-1.25);
        let fam = make_near_critical(&base, tau, a, 1.0)?;
        let rmi = rescaled_impact_analytic(&fam, 1.0, 1.0, 1.0, tau, &ts)?;
        distances.push(sup_distance(&rmi, &limit)?);
    }
    ok &= distances.windows(2).all(|w| w[1] < w[0]);
    Ok((
        ok,
        format!(
            "ν̂={:.4} (R²={:.4}), sup|RMI−K′t^0.6| along a_T=0.9,0.99,0.999: {:.4}, {:.4}, {:.4}",
            fit.exponent, fit.r_squared, distances[0], distances[1], distances[2]
        ),
    ))
}

// Shared near-critical configuration for the empirical exponent.
const GAMMA_ALPHA: f64 = 0.4;
const GAMMA_BRANCHING: f64 = 0.99;
const GAMMA_H: f64 = 1.0;

fn empirical_gamma() -> hawkes_impact::Result<(f64, f64, usize)> {
    let spec = KernelSpec::shifted_power_law(GAMMA_BRANCHING, GAMMA_ALPHA, 1.0)?;
    let mu = 1.0 - GAMMA_BRANCHING;
    let mut cfg = MarketConfig::new(spec.clone(), mu, 1e5, 11);
    cfg.method = SimulationMethod::Branching;
    cfg.burn_in = Some(1e6);
    let markets = (0..4).map(|r| simulate_market_replica(&cfg, r)).collect::<hawkes_impact::Result<Vec<_>>>()?;
    let streams: Vec<&EventStream> = markets.iter().flat_map(|m| [&m.buy, &m.sell]).collect();
    let events = streams.iter().map(|s| s.len()).sum();
    let window = (2.0 * GAMMA_H, 20.0 * GAMMA_H);
    let lags = log_grid(window.0, window.1, 12);
    let empirical = empirical_covariance(&streams, GAMMA_H, &lags)?;
    let theory = theoretical_covariance(&spec, mu, GAMMA_H, &lags)?;
    Ok((estimate_gamma(&empirical, window)?.gamma, estimate_gamma(&theory, window)?.gamma, events))
}

fn long_memory() -> Outcome {
    let base = KernelSpec::shifted_power_law(1.0, GAMMA_ALPHA, 1.0)?;
    let lags = [0.0, 0.5, 1.0, 2.0, 4.0];
    let seq: Vec<(f64, f64)> = [(1e2, 0.1), (1e3, 0.03), (1e4, 0.01)]
        .iter()
        .map(|&(t, r)| (t, branching_for_ratio(t, GAMMA_ALPHA, r)))
        .collect();
    let study = convergence_study(&base, 1.0, 1.0, &lags, &seq)?;
    let distances: Vec<String> = study.rows.iter().map(|r| format!("{:.4}", r.sup_distance)).collect();
    let (gamma, gamma_theory, events) = empirical_gamma()?;
    let ok = study.decreasing && (gamma - 0.2).abs() <= 0.15 && events >= 10_000;
    Ok((
        ok,
        format!(
            "H=0.9 sup distances [{}], empirical γ̂={gamma:.3} (theory at a=0.99: {gamma_theory:.3}) from {events} events",
            distances.join(", ")
        ),
    ))
}

fn exponent_link_check() -> Outcome {
    let (gamma, _, _) = empirical_gamma()?;
    let base = KernelSpec::shifted_power_law(1.0, GAMMA_ALPHA, 1.0)?;
    let tau = (1.0 - GAMMA_BRANCHING).powf(-1.0 / (2.0 * GAMMA_ALPHA));
    let fam = make_near_critical(&base, tau, GAMMA_BRANCHING, 1.0)?;
    let rmi = rescaled_impact_analytic(&fam, 1.0, 1.0, 1.0, tau, &log_grid(0.01, 1.0, 60))?;
    let nu = fit_power_law(&rmi, (0.01, 1.0))?.exponent;
    let linked = exponent_link(gamma)?;
    let identity = (exponent_link_inverse(exponent_link(0.2)?)? - 0.2).abs() < 1e-15 && exponent_link(0.2)? == 0.6;
    let ok = (nu - linked).abs() < 0.1 && identity;
    Ok((ok, format!("a_T=0.99: ν̂={nu:.3}, (1+γ̂)/2={linked:.3}, |diff|={:.3}", (nu - linked).abs())))
}

fn cluster_representation() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (a, horizon, margin) in [(0.5, 12_000.0, 50.0), (0.9, 12_000.0, 500.0)] {
        let mut cfg = MarketConfig::new(KernelSpec::exponential(a, 1.0)?, 1.0, horizon, 7);
        cfg.method = SimulationMethod::Branching;
        let stream = simulate_branching(&cfg)?;
        let stats = cluster_statistics(&stream, margin)?;
        let mean = stats.mean_size.map(|m| m.mean).unwrap_or(f64::NAN);
        let expected = 1.0 / (1.0 - a);
        let rel = (mean - expected).abs() / expected;
        ok &= stats.clusters >= 10_000 && rel < 0.05;
        parts.push(format!("a={a}: mean size {mean:.3} vs {expected} over {} clusters", stats.clusters));
    }
    let spec = KernelSpec::exponential(0.5, 1.0)?;
    let thin = simulate_thinning(&MarketConfig::new(spec.clone(), 1.0, 5_000.0, 31))?;
    let mut bcfg = MarketConfig::new(spec, 1.0, 5_000.0, 32);
    bcfg.method = SimulationMethod::Branching;
    let branch = simulate_branching(&bcfg)?;
    let gaps = |s: &EventStream| s.times.windows(2).map(|w| w[1] - w[0]).collect::<Vec<f64>>();
    let ks = ks_two_sample(&gaps(&thin), &gaps(&branch), 0.01)?;
    ok &= ks.passes && thin.len() >= 9_000;
    parts.push(format!("KS D={:.4} < {:.4} (p={:.3})", ks.statistic, ks.critical_value, ks.p_value));
    Ok((ok, parts.join(", ")))
}

fn no_manipulation() -> Outcome {
    let values = [0.5, 1.0, 2.0, 4.0];
    let grid: Vec<(f64, f64)> = values.iter().flat_map(|&a| values.iter().map(move |&b| (a, b))).collect();
    let horizons = [10.0, 100.0, 1000.0];
    let model = |delta: f64| {
        ImpactModelSpec::new(ImpactFunction::power(1.0, delta)?, DecayKernel::Exponential { g_inf: 1.0, timescale: 1.0 })
    };
    let linear = manipulation_scan(&model(1.0)?, &grid, &horizons)?;
    let mut ok = !linear.manipulable && linear.verdict == "clean";
    let mut parts = vec![format!("linear: {}", linear.verdict)];
    let mut sign_flips = 0;
    for delta in [0.5, 1.5] {
        let v = manipulation_scan(&model(delta)?, &grid, &horizons)?;
        let mut worst: f64 = 0.0;
        for p in v.points.iter().filter(|p| p.v1 != p.v2) {
            worst = worst.max(((p.extrapolated - p.leading_term) / p.leading_term).abs());
            let f = |x: f64| x.powf(delta);
            let displayed = 0.5 * (f(p.v1) * p.v2 - f(p.v2) * p.v1);
            if (p.extrapolated - displayed).abs() > 0.05 * displayed.abs() && (p.extrapolated + displayed).abs() < 0.05 * displayed.abs() {
                sign_flips += 1;
            }
        }
        ok &= v.manipulable && worst < 0.05;
        parts.push(format!("δ={delta}: {} (max rel dev from leading term {worst:.2e})", v.verdict));
    }
    // The cost of buying at v₁ then selling at v₂ has leading term
    // ½G∞(f(v₂)v₁ − f(v₁)v₂); the displayed expression has the opposite sign.
    parts.push(format!("{sign_flips} off-diagonal points equal −½G∞(f(v₁)v₂−f(v₂)v₁)"));
    Ok((ok, parts.join(", ")))
}

fn poisson_oracle() -> Outcome {
    let (mu, h) = (2.0, 1.0);
    let lags = [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 3.0];
    let exact = poisson_covariance(mu, h, &lags)?;
    let theory = theoretical_covariance(&KernelSpec::zero(), mu, h, &lags)?;
    let theory_err = theory.values.iter().zip(&exact.values).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    let mut cfg = MarketConfig::new(KernelSpec::zero(), mu, 5_000.0, 5);
    cfg.burn_in = Some(0.0);
    let markets = (0..8).map(|r| simulate_market_replica(&cfg, r)).collect::<hawkes_impact::Result<Vec<_>>>()?;
    let streams: Vec<&EventStream> = markets.iter().flat_map(|m| [&m.buy, &m.sell]).collect();
    let empirical = empirical_covariance(&streams, h, &lags)?;
    let z = empirical.z_scores(&exact)?;
    let worst_z = z.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let ok = theory_err < 1e-6 * mu * h && worst_z < 3.0;
    Ok((ok, format!("theory vs triangle sup err={theory_err:.2e}, empirical max |z|={worst_z:.2}")))
}
