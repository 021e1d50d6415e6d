//! One runner per experiment. Each fills a [`Report`] with tables, results
//! and named pass/fail checks.

use hawkes_impact::impact::{
    exponent_link, fit_power_law, impact_analytic, impact_monte_carlo, limit_constant_k_prime, log_grid,
    permanent_impact, rescaled_impact_analytic, rescaled_impact_limit, sup_distance,
};
use hawkes_impact::kernel::make_near_critical;
use hawkes_impact::longmemory::{
    branching_for_ratio, convergence_study, empirical_covariance, estimate_gamma, poisson_covariance,
    theoretical_covariance,
};
use hawkes_impact::manipulation::manipulation_scan;
use hawkes_impact::numerics::stats::ks_two_sample;
use hawkes_impact::output::Table;
use hawkes_impact::price::martingale_drift_test;
use hawkes_impact::simulation::{
    cluster_statistics, replicate, simulate_branching, simulate_market, simulate_market_replica, simulate_thinning,
    time_rescaling_test,
};
use hawkes_impact::{
    check_martingale_identity, compute_resolvent, propagator_closed_form, propagator_from_resolvent, EventStream,
    KernelSpec, Market, MarketConfig, SimulationMethod,
};
use serde_json::json;

use crate::config::{Experiment, ExperimentConfig, ImpactSection};
use crate::error::{CliError, CliResult};
use crate::report::Report;

pub fn run(config: &ExperimentConfig) -> CliResult<Report> {
    let mut report = Report::default();
    let experiment = config.experiment.ok_or_else(|| CliError::Config("no experiment selected".into()))?;
    match experiment {
        Experiment::Simulate => simulate(config, &mut report)?,
        Experiment::Propagator => propagator(config, &mut report)?,
        Experiment::Impact => impact(config, &mut report)?,
        Experiment::Longmem => longmem(config, &mut report)?,
        Experiment::Roundtrip => roundtrip(config, &mut report)?,
        Experiment::Exponents => exponents(config, &mut report)?,
    }
    let feedback = config.market.as_ref().and_then(|m| m.metaorder).is_some_and(|m| m.feedback);
    if feedback {
        report.result("extensions", ["metaorder_feedback"])?;
    }
    Ok(report)
}

fn header(config: &ExperimentConfig, kind: &str) -> serde_json::Value {
    json!({ "kind": kind, "seed": config.seed, "config": config })
}

fn section<'a, T>(value: &'a Option<T>, name: &str) -> CliResult<&'a T> {
    value.as_ref().ok_or_else(|| CliError::Config(format!("missing `{name}` section")))
}

fn gaps(s: &EventStream) -> Vec<f64> {
    s.times.windows(2).map(|w| w[1] - w[0]).collect()
}

fn simulate(config: &ExperimentConfig, report: &mut Report) -> CliResult<()> {
    let market = config.market()?;
    let opts = config.simulate.clone().unwrap_or_default();
    let m = simulate_market(&market)?;
    report.table("events.csv", &m.to_table(config)?)?;

    let rate = market.stationary_rate();
    let se = (market.count_variance_rate() / market.horizon).sqrt();
    let z = |s: &EventStream| (s.len() as f64 / market.horizon - rate) / se;
    let (zb, zs) = (z(&m.buy), z(&m.sell));
    report.result("events", json!({ "buy": m.buy.len(), "sell": m.sell.len(), "metaorder": m.metaorder.len() }))?;
    report.result("stationary_rate", rate)?;
    report.result("rate_z", json!({ "buy": zb, "sell": zs }))?;
    report.result("burn_in", market.burn_in_length())?;
    report.check("stationary_rate_within_3se", zb.abs() < 3.0 && zs.abs() < 3.0);

    // The compensator is reconstructed from the stream alone, so the test
    // runs on a replica started from an empty history.
    let mut fresh = market.clone();
    fresh.burn_in = Some(0.0);
    fresh.metaorder = None;
    let unburnt = simulate_market_replica(&fresh, 1)?;
    let ks = time_rescaling_test(&unburnt.buy.times, &market.kernel, market.mu, opts.ks_level)?;
    report.result("time_rescaling", ks)?;
    report.check("time_rescaling_ks", ks.passes);

    if market.method == SimulationMethod::Branching {
        let margin = opts.cluster_margin.unwrap_or_else(|| market.burn_in_length());
        let stats = cluster_statistics(&m.buy, margin)?;
        let expected = 1.0 / (1.0 - market.kernel.norm());
        let mean = stats.mean_size.map_or(f64::NAN, |s| s.mean);
        report.check("cluster_mean_within_5pct", (mean - expected).abs() < 0.05 * expected);
        report.result("expected_cluster_size", expected)?;
        report.result("clusters", stats)?;
    }
    if opts.compare_methods {
        let mut other = market.clone();
        other.method = match market.method {
            SimulationMethod::Thinning => SimulationMethod::Branching,
            SimulationMethod::Branching => SimulationMethod::Thinning,
        };
        other.metaorder = None;
        other.seed = market.seed.wrapping_add(1);
        let alt = match other.method {
            SimulationMethod::Thinning => simulate_thinning(&other)?,
            SimulationMethod::Branching => simulate_branching(&other)?,
        };
        let ks = ks_two_sample(&gaps(&m.buy), &gaps(&alt), opts.ks_level)?;
        report.result("method_comparison", ks)?;
        report.check("thinning_matches_branching_ks", ks.passes);
    }
    Ok(())
}

fn propagator(config: &ExperimentConfig, report: &mut Report) -> CliResult<()> {
    let spec = config.kernel()?;
    let p = config.propagator.clone().unwrap_or_default();
    let grid = compute_resolvent(spec, p.step, p.horizon)?;
    let from_resolvent = propagator_from_resolvent(&grid, p.kappa, p.volume)?;
    let closed = propagator_closed_form(spec, p.kappa, p.volume, p.step, p.horizon, None)?;

    let n = grid.len().min(from_resolvent.len()).min(closed.len());
    let mut table = Table::new(&header(config, "propagator"), &["t", "psi", "zeta_resolvent", "zeta_closed_form"])?;
    for k in 0..n {
        table.push_numbers(&[grid.time(k), grid.values[k], from_resolvent.values[k], closed.values[k]]);
    }
    report.table("propagator.csv", &table)?;

    let two_path = (0..n)
        .map(|k| (from_resolvent.values[k] - closed.values[k]).abs())
        .fold(0.0_f64, f64::max)
        / closed.zeta0;
    let residual = check_martingale_identity(&from_resolvent, spec);
    report.result("zeta0", closed.zeta0)?;
    report.result("zeta_inf", closed.zeta_inf)?;
    report.result("two_path_relative_sup", two_path)?;
    report.result("martingale_residual", residual)?;
    report.result("resolvent_iterations", grid.iterations)?;
    report.result("resolvent_residual", grid.residual)?;
    report.result("resolvent_truncated", grid.truncated)?;
    report.result("warnings", [grid.warnings.clone(), from_resolvent.warnings.clone()].concat())?;
    report.check("two_path_within_1e-4", two_path < 1e-4);
    report.check("martingale_identity_within_1e-4", residual.relative_max < 1e-4);

    if let Some(drift) = &p.drift {
        let market = config.market()?;
        let lag = drift.t + drift.h;
        let zeta = propagator_closed_form(spec, market.kappa, market.volume, p.step, lag, None)?;
        let naive = propagator_closed_form(&KernelSpec::zero(), zeta.zeta0, 1.0, p.step, lag, None)?;
        let good = martingale_drift_test(&market, &zeta, drift.t, drift.h, drift.n_paths)?;
        let bad = martingale_drift_test(&market, &naive, drift.t, drift.h, drift.n_paths)?;
        report.result("drift", json!({ "compensated": good, "uncompensated": bad }))?;
        report.check("compensated_price_has_no_drift", good.passes);
        if spec.norm() > 0.0 {
            report.check("uncompensated_price_drifts", !bad.passes);
        }
    }
    Ok(())
}

fn impact(config: &ExperimentConfig, report: &mut Report) -> CliResult<()> {
    match section(&config.impact, "impact")? {
        ImpactSection::Metaorder { times, step, n_paths, antithetic } => {
            let market = config.market()?;
            let meta = market
                .metaorder
                .ok_or_else(|| CliError::Config("the metaorder impact mode needs `market.metaorder`".into()))?;
            let zeta = propagator_closed_form(&market.kernel, market.kappa, market.volume, *step, market.horizon, None)?;
            let sign = meta.side.sign();
            let mut analytic = impact_analytic(&zeta, meta.rate, meta.duration, times)?;
            analytic.values.iter_mut().for_each(|v| *v *= sign);
            let permanent = sign * permanent_impact(&zeta, meta.rate, meta.duration);
            let expected = sign * market.kappa * market.volume * meta.rate * meta.duration;
            let rel = if expected == 0.0 { permanent.abs() } else { ((permanent - expected) / expected).abs() };
            report.result("permanent_impact", permanent)?;
            report.result("kappa_v_f_tau", expected)?;
            report.check("permanent_impact_linear", rel < 1e-6);

            let mc = if *n_paths > 0 {
                Some(impact_monte_carlo(&market, &zeta, *n_paths, times, *antithetic)?)
            } else {
                None
            };
            let mut table = Table::new(&header(config, "impact"), &["t", "MI_analytic", "MI_monte_carlo", "SE"])?;
            let mut worst_z: f64 = 0.0;
            for (i, t) in times.iter().enumerate() {
                let mut row = vec![t.to_string(), analytic.values[i].to_string()];
                match &mc {
                    Some(c) => {
                        let se = c.std_errs.as_ref().map_or(f64::NAN, |s| s[i]);
                        if se > 0.0 {
                            worst_z = worst_z.max((c.values[i] - analytic.values[i]).abs() / se);
                        }
                        row.extend([c.values[i].to_string(), se.to_string()]);
                    }
                    None => row.extend([String::new(), String::new()]),
                }
                table.push_row(row);
            }
            report.table("impact.csv", &table)?;
            if mc.is_some() {
                report.result("monte_carlo_max_abs_z", worst_z)?;
                report.check("monte_carlo_within_3se", worst_z < 3.0);
            }
        }
        ImpactSection::NearCritical { alpha, scale, branching, kappa, volume, rate, fit_window, points } => {
            if branching.is_empty() {
                return Err(CliError::Config("`impact.branching` is empty".into()));
            }
            let base = KernelSpec::shifted_power_law(1.0, *alpha, *scale)?;
            let fit_grid = log_grid(fit_window.0, fit_window.1, *points);
            let uniform: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
            let limit_fit = rescaled_impact_limit(*scale, *alpha, *kappa, *volume, *rate, &fit_grid);
            let limit = rescaled_impact_limit(*scale, *alpha, *kappa, *volume, *rate, &uniform);
            let mut columns = vec!["t".to_string(), "limit".to_string()];
            let mut curves = Vec::new();
            let mut rows = Vec::new();
            for &a in branching {
                let tau = (1.0 - a).powf(-1.0 / (2.0 * alpha));
                let fam = make_near_critical(&base, tau, a, 1.0)?;
                let rmi = rescaled_impact_analytic(&fam, *kappa, *volume, *rate, tau, &fit_grid)?;
                let fit = fit_power_law(&rmi, *fit_window)?;
                let on_uniform = rescaled_impact_analytic(&fam, *kappa, *volume, *rate, tau, &uniform)?;
                let distance = sup_distance(&on_uniform, &limit)?;
                rows.push(json!({ "branching": a, "duration": tau, "fit": fit, "sup_distance": distance }));
                columns.push(format!("RMI_a={a}"));
                curves.push(rmi.values);
            }
            let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
            let mut table = Table::new(&header(config, "renormalized_impact"), &cols)?;
            for (i, t) in fit_grid.iter().enumerate() {
                let mut row = vec![*t, limit_fit.values[i]];
                row.extend(curves.iter().map(|c| c[i]));
                table.push_numbers(&row);
            }
            report.table("rmi.csv", &table)?;

            let nu = rows.last().and_then(|r| r["fit"]["exponent"].as_f64()).unwrap_or(f64::NAN);
            let distances: Vec<f64> = rows.iter().filter_map(|r| r["sup_distance"].as_f64()).collect();
            report.result("k_prime", limit_constant_k_prime(*scale, *alpha, *kappa, *volume, *rate))?;
            report.result("nu_hat", nu)?;
            report.result("nu_limit", 1.0 - alpha)?;
            report.result("members", rows)?;
            report.check("nu_hat_within_0.05", (nu - (1.0 - alpha)).abs() <= 0.05);
            if distances.len() > 1 {
                report.check("sup_distance_decreasing", distances.windows(2).all(|w| w[1] < w[0]));
            }
        }
    }
    Ok(())
}

fn replicas(market: &MarketConfig, n: u64) -> CliResult<Vec<Market>> {
    Ok(replicate(n, |r| simulate_market_replica(market, r))?)
}

fn longmem(config: &ExperimentConfig, report: &mut Report) -> CliResult<()> {
    let opts = section(&config.longmem, "longmem")?;
    if opts.convergence.is_none() && opts.covariance.is_none() {
        return Err(CliError::Config("`longmem` needs a `convergence` or `covariance` section".into()));
    }
    if let Some(c) = &opts.convergence {
        let base = KernelSpec::shifted_power_law(1.0, c.alpha, c.scale)?;
        let seq: Vec<(f64, f64)> =
            c.sequence.iter().map(|&(t, ratio)| (t, branching_for_ratio(t, c.alpha, ratio))).collect();
        let study = convergence_study(&base, c.c_mu, c.h, &c.lags, &seq)?;
        let mut columns = vec!["tau".to_string(), "fbm_limit".to_string()];
        columns.extend(study.rows.iter().map(|r| format!("C_T={}", r.scale)));
        let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
        let mut table = Table::new(&header(config, "rescaled_covariance"), &cols)?;
        for (i, lag) in study.lags.iter().enumerate() {
            let mut row = vec![*lag, study.limit[i]];
            row.extend(study.rows.iter().map(|r| r.values[i]));
            table.push_numbers(&row);
        }
        report.table("convergence.csv", &table)?;
        report.check("convergence_decreasing", study.decreasing);
        report.result("hurst", 0.5 + c.alpha)?;
        report.result("convergence", study)?;
    }
    if let Some(c) = &opts.covariance {
        let market = config.market()?;
        let markets = replicas(&market, c.replicas)?;
        let streams: Vec<&EventStream> = markets.iter().flat_map(|m| [&m.buy, &m.sell]).collect();
        let empirical = empirical_covariance(&streams, c.h, &c.lags)?;
        let theory = theoretical_covariance(&market.kernel, market.mu, c.h, &c.lags)?;
        let z = empirical.z_scores(&theory)?;
        let se = empirical.std_errs.clone().unwrap_or_default();
        let mut table = Table::new(&header(config, "covariance"), &["tau", "empirical", "SE", "theoretical", "z"])?;
        for i in 0..c.lags.len() {
            table.push_numbers(&[c.lags[i], empirical.values[i], se[i], theory.values[i], z[i]]);
        }
        report.table("covariance.csv", &table)?;
        let worst = z.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        report.result("events", streams.iter().map(|s| s.len()).sum::<usize>())?;
        report.result("max_abs_z", worst)?;
        report.check("empirical_matches_theory_3se", worst < 3.0);
        if market.kernel.norm() == 0.0 {
            let exact = poisson_covariance(market.mu, c.h, &c.lags)?;
            let err = theory.values.iter().zip(&exact.values).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            report.result("poisson_theory_error", err)?;
            report.check("theory_matches_poisson_triangle", err < 1e-6 * market.mu * c.h);
        }
        if let Some(window) = c.fit_window {
            report.result("gamma_empirical", estimate_gamma(&empirical, window)?)?;
            report.result("gamma_theoretical", estimate_gamma(&theory, window)?)?;
        }
    }
    Ok(())
}

fn roundtrip(config: &ExperimentConfig, report: &mut Report) -> CliResult<()> {
    let opts = section(&config.roundtrip, "roundtrip")?;
    let grid: Vec<(f64, f64)> =
        opts.volumes.iter().flat_map(|&a| opts.volumes.iter().map(move |&b| (a, b))).collect();
    let verdict = manipulation_scan(&opts.model, &grid, &opts.horizons)?;
    let mut columns = vec!["v1".to_string(), "v2".to_string()];
    columns.extend(opts.horizons.iter().map(|t| format!("cost_T={t}")));
    columns.extend(["extrapolated", "leading_term", "manipulation"].map(String::from));
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = Table::new(&header(config, "roundtrip"), &cols)?;
    let mut worst: f64 = 0.0;
    for p in &verdict.points {
        let mut row = vec![p.v1.to_string(), p.v2.to_string()];
        row.extend(p.normalized_costs.iter().map(f64::to_string));
        row.extend([p.extrapolated.to_string(), p.leading_term.to_string(), p.manipulation.to_string()]);
        table.push_row(row);
        if p.leading_term.abs() > verdict.tolerance {
            worst = worst.max(((p.extrapolated - p.leading_term) / p.leading_term).abs());
        }
    }
    report.table("scan.csv", &table)?;
    report.result("verdict", &verdict.verdict)?;
    report.result("manipulable", verdict.manipulable)?;
    report.result("max_relative_deviation_from_leading_term", worst)?;
    report.check("extrapolation_matches_leading_term_5pct", worst < 0.05);
    report.result("report", verdict)?;
    Ok(())
}

fn exponents(config: &ExperimentConfig, report: &mut Report) -> CliResult<()> {
    let e = section(&config.exponents, "exponents")?;
    let spec = KernelSpec::shifted_power_law(e.branching, e.alpha, e.scale)?;
    let mu = e.rate * (1.0 - e.branching);
    let mut market = MarketConfig::new(spec.clone(), mu, e.horizon, config.seed());
    market.method = SimulationMethod::Branching;
    market.burn_in = Some(e.burn_in);
    let markets = replicas(&market, e.replicas)?;
    let streams: Vec<&EventStream> = markets.iter().flat_map(|m| [&m.buy, &m.sell]).collect();
    let window = (e.lag_window.0 * e.h, e.lag_window.1 * e.h);
    let lags = log_grid(window.0, window.1, e.lag_points);
    let empirical = empirical_covariance(&streams, e.h, &lags)?;
    let theory = theoretical_covariance(&spec, mu, e.h, &lags)?;
    let gamma = estimate_gamma(&empirical, window)?;
    let gamma_theory = estimate_gamma(&theory, window)?;

    let base = KernelSpec::shifted_power_law(1.0, e.alpha, e.scale)?;
    let tau = (1.0 - e.branching).powf(-1.0 / (2.0 * e.alpha));
    let fam = make_near_critical(&base, tau, e.branching, 1.0)?;
    let rmi = rescaled_impact_analytic(&fam, 1.0, 1.0, 1.0, tau, &log_grid(e.impact_window.0, e.impact_window.1, 60))?;
    let nu = fit_power_law(&rmi, e.impact_window)?;
    let linked = exponent_link(gamma.gamma)?;
    let diff = (nu.exponent - linked).abs();

    let mut table = Table::new(&header(config, "covariance"), &["tau", "empirical", "SE", "theoretical"])?;
    let se = empirical.std_errs.clone().unwrap_or_default();
    for i in 0..lags.len() {
        table.push_numbers(&[lags[i], empirical.values[i], se[i], theory.values[i]]);
    }
    report.table("covariance.csv", &table)?;
    let mut summary = Table::new(&header(config, "exponents"), &["quantity", "value"])?;
    for (name, value) in [
        ("gamma_empirical", gamma.gamma),
        ("gamma_theoretical", gamma_theory.gamma),
        ("gamma_limit", 1.0 - 2.0 * e.alpha),
        ("nu_hat", nu.exponent),
        ("nu_limit", 1.0 - e.alpha),
        ("link_from_gamma", linked),
    ] {
        summary.push_row(vec![name.to_string(), value.to_string()]);
    }
    report.table("exponents.csv", &summary)?;
    report.result("events", streams.iter().map(|s| s.len()).sum::<usize>())?;
    report.result("duration", tau)?;
    report.result("gamma_empirical", gamma)?;
    report.result("gamma_theoretical", gamma_theory)?;
    report.result("nu_fit", nu)?;
    report.result("link_from_gamma", linked)?;
    report.result("link_difference", diff)?;
    report.check("exponent_link_within_tolerance", diff < e.tolerance);
    Ok(())
}
