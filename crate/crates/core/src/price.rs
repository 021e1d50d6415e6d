//! Price paths implied by the order flows.
//!
//! The propagator construction sums `±ζ(t − t_i)` over past events. The
//! anticipation construction instead evaluates
//! `P_t = P_0 + κ lim_s E[V^a_s − V^b_s | F_t]` from the conditional intensity
//! forecast `E[λ_u | F_t] = μ + μ∫_0^u ψ + ∫_0^t ψ(u−x) dM_x`:
//!
//! `P_t = P_0 + κv [N^a_t − N^b_t + ∫_0^t Ψ̄(t−x)(dM^a_x − dM^b_x)]`,
//!
//! integrating the compensator part `Ψ̄(t−x)(λ^a_x − λ^b_x)dx` numerically
//! between events. Both flows are taken to start empty at time 0.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::numerics::quad::{integrate, QuadOptions};
use crate::numerics::stats::{CompensatedSum, MeanEstimate};
use crate::output::Table;
use crate::resolvent::{compute_resolvent, PropagatorKernel, ResolventGrid, CRITICAL_TOL};
use crate::simulation::{replicate, MarketConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceConstruction {
    Propagator,
    Anticipation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePath {
    pub times: Vec<f64>,
    pub prices: Vec<f64>,
    pub p0: f64,
    pub construction: PriceConstruction,
}

impl PricePath {
    /// Adds an independent Brownian path `σB_t` sampled at `times`.
    pub fn add_exogenous_noise<R: Rng>(&mut self, sigma: f64, rng: &mut R) {
        let mut level = 0.0;
        let mut prev = 0.0;
        for (t, p) in self.times.iter().zip(self.prices.iter_mut()) {
            let z: f64 = StandardNormal.sample(rng);
            level += sigma * (t - prev).max(0.0).sqrt() * z;
            prev = *t;
            *p += level;
        }
    }

    pub fn to_table<C: Serialize>(&self, config: &C) -> Result<Table> {
        let header = json!({
            "kind": "price",
            "construction": self.construction,
            "p0": self.p0,
            "config": config,
        });
        let mut t = Table::new(&header, &["t", "price"])?;
        for (x, p) in self.times.iter().zip(&self.prices) {
            t.push_numbers(&[*x, *p]);
        }
        Ok(t)
    }
}

fn check_lags(events: &[&[f64]], latest: f64, zeta: &PropagatorKernel) -> Result<()> {
    let earliest = events.iter().filter_map(|e| e.first()).fold(f64::INFINITY, |m, &t| m.min(t));
    if earliest.is_finite() && latest - earliest > zeta.max_lag() {
        return Err(Error::Horizon { lag: latest - earliest, horizon: zeta.max_lag() });
    }
    Ok(())
}

/// `P_0 + Σ_{buy t_i ≤ t} ζ(t−t_i) − Σ_{sell t_j ≤ t} ζ(t−t_j)`.
pub fn propagator_price_at(buy: &[f64], sell: &[f64], zeta: &PropagatorKernel, p0: f64, t: f64) -> Result<f64> {
    check_lags(&[buy, sell], t, zeta)?;
    Ok(p0 + signed_propagator_sum(buy, sell, zeta, t))
}

fn signed_propagator_sum(buy: &[f64], sell: &[f64], zeta: &PropagatorKernel, t: f64) -> f64 {
    let mut s = CompensatedSum::default();
    for &x in &buy[..buy.partition_point(|&x| x <= t)] {
        s.add(zeta.value(t - x));
    }
    for &x in &sell[..sell.partition_point(|&x| x <= t)] {
        s.add(-zeta.value(t - x));
    }
    s.value()
}

/// Propagator price on `grid` and at every event time (right limits), sorted.
pub fn propagator_price(
    buy: &[f64],
    sell: &[f64],
    zeta: &PropagatorKernel,
    p0: f64,
    grid: &[f64],
) -> Result<PricePath> {
    let mut times: Vec<f64> = grid.iter().chain(buy).chain(sell).copied().collect();
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::domain("price sample times must be finite"));
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    if let Some(&last) = times.last() {
        check_lags(&[buy, sell], last, zeta)?;
    }
    let prices = times.iter().map(|&t| p0 + signed_propagator_sum(buy, sell, zeta, t)).collect();
    Ok(PricePath { times, prices, p0, construction: PriceConstruction::Propagator })
}

/// Evaluates the anticipation formula from a resolvent grid.
#[derive(Debug, Clone)]
pub struct AnticipationPricer {
    resolvent: ResolventGrid,
    kappa: f64,
    volume: f64,
    quad: QuadOptions,
}

impl AnticipationPricer {
    /// Builds ψ on `[0, horizon]` with step `step`. Critical kernels violate
    /// the finite-expected-volume assumption and are rejected.
    pub fn new(spec: &KernelSpec, kappa: f64, volume: f64, step: f64, horizon: f64) -> Result<Self> {
        let norm = spec.norm();
        if norm >= 1.0 - CRITICAL_TOL {
            return Err(Error::Criticality {
                norm,
                context: "the anticipated order-flow imbalance is infinite at criticality".into(),
            });
        }
        Self::from_resolvent(compute_resolvent(spec, step, horizon)?, kappa, volume)
    }

    pub fn from_resolvent(resolvent: ResolventGrid, kappa: f64, volume: f64) -> Result<Self> {
        if !(volume > 0.0 && kappa >= 0.0) {
            return Err(Error::invalid("κ must be nonnegative and v positive"));
        }
        Ok(Self { resolvent, kappa, volume, quad: QuadOptions { abs_tol: 1e-13, rel_tol: 1e-12, max_intervals: 2000 } })
    }

    pub fn resolvent(&self) -> &ResolventGrid {
        &self.resolvent
    }

    /// `ζ(0) = κv(1 + |ψ|)`: the jump of the price at an event.
    pub fn jump(&self) -> f64 {
        self.kappa * self.volume * (1.0 + self.resolvent.total_mass)
    }

    /// `P_t` given both flows on `[0, t]`.
    pub fn price(&self, buy: &[f64], sell: &[f64], p0: f64, t: f64) -> Result<f64> {
        if t > self.resolvent.horizon {
            return Err(Error::Horizon { lag: t, horizon: self.resolvent.horizon });
        }
        let buy = &buy[..buy.partition_point(|&x| x <= t)];
        let sell = &sell[..sell.partition_point(|&x| x <= t)];
        if buy.first().is_some_and(|&x| x < 0.0) || sell.first().is_some_and(|&x| x < 0.0) {
            return Err(Error::domain("events before time 0"));
        }
        let spec = &self.resolvent.spec;
        let mut jumps = CompensatedSum::default();
        for &x in buy {
            jumps.add(1.0 + self.resolvent.complementary_mass(t - x)?);
        }
        for &x in sell {
            jumps.add(-(1.0 + self.resolvent.complementary_mass(t - x)?));
        }
        // ∫_0^t Ψ̄(t−x)(λ^a_x − λ^b_x) dx, split at events where λ jumps.
        let mut breaks: Vec<f64> = buy.iter().chain(sell).copied().collect();
        breaks.push(t);
        breaks.sort_by(f64::total_cmp);
        let mut compensator = CompensatedSum::default();
        let mut left = 0.0;
        for &right in &breaks {
            if right > left {
                let nb = buy.partition_point(|&x| x <= left);
                let ns = sell.partition_point(|&x| x <= left);
                let (active_buy, active_sell) = (&buy[..nb], &sell[..ns]);
                if nb + ns > 0 {
                    let integrand = |x: f64| {
                        let mut d = 0.0;
                        for &e in active_buy {
                            d += spec.value(x - e);
                        }
                        for &e in active_sell {
                            d -= spec.value(x - e);
                        }
                        let lag = (t - x).clamp(0.0, self.resolvent.horizon);
                        d * self.resolvent.complementary_mass(lag).unwrap_or(0.0)
                    };
                    compensator.add(integrate(integrand, left, right, self.quad)?.value);
                }
            }
            left = right;
        }
        Ok(p0 + self.kappa * self.volume * (jumps.value() - compensator.value()))
    }

    pub fn price_path(&self, buy: &[f64], sell: &[f64], p0: f64, grid: &[f64]) -> Result<PricePath> {
        let prices = grid.iter().map(|&t| self.price(buy, sell, p0, t)).collect::<Result<_>>()?;
        Ok(PricePath { times: grid.to_vec(), prices, p0, construction: PriceConstruction::Anticipation })
    }
}

/// Monte Carlo check that `P_{t+h} − P_t` has no predictable drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub t: f64,
    pub h: f64,
    /// Trailing window of the signed order count used to condition.
    pub window: f64,
    pub n_paths: u64,
    /// `P_{t+h} − P_t`.
    pub unconditional: MeanEstimate,
    pub unconditional_z: f64,
    /// `(P_{t+h} − P_t)·sgn(N^a − N^b over (t − window, t])`.
    pub conditional: MeanEstimate,
    pub conditional_z: f64,
    pub passes: bool,
}

/// Studentized drift statistics of the propagator price built with `zeta`.
///
/// Paths start empty at time 0 (burn-in is ignored), which is the setting in
/// which the propagator price is a martingale. The unconditional mean drift
/// vanishes by buy/sell symmetry for any ζ, so the test also conditions on
/// the sign of the recent order imbalance, which is what an uncompensated ζ
/// fails to offset. The test passes when both statistics are within 3 SE.
pub fn martingale_drift_test(
    config: &MarketConfig,
    zeta: &PropagatorKernel,
    t: f64,
    h: f64,
    n_paths: u64,
) -> Result<DriftReport> {
    martingale_drift_test_with_window(config, zeta, t, h, h, n_paths)
}

pub fn martingale_drift_test_with_window(
    config: &MarketConfig,
    zeta: &PropagatorKernel,
    t: f64,
    h: f64,
    window: f64,
    n_paths: u64,
) -> Result<DriftReport> {
    if !(t > 0.0 && h > 0.0 && window > 0.0 && window <= t) {
        return Err(Error::invalid("drift test needs t > 0, h > 0 and 0 < window <= t"));
    }
    if n_paths < 2 {
        return Err(Error::invalid("drift test needs at least two paths"));
    }
    let mut cfg = config.clone();
    cfg.burn_in = Some(0.0);
    cfg.metaorder = None;
    if cfg.horizon < t + h {
        cfg.horizon = t + h;
    }
    let samples = replicate(n_paths, |r| {
        let m = crate::simulation::simulate_market_replica(&cfg, r)?;
        let (buy, sell) = (&m.buy.times[..], &m.sell.times[..]);
        let p0 = propagator_price_at(buy, sell, zeta, 0.0, t)?;
        let p1 = propagator_price_at(buy, sell, zeta, 0.0, t + h)?;
        let imbalance = m.buy.count_between(t - window, t) as f64 - m.sell.count_between(t - window, t) as f64;
        let sign = if imbalance > 0.0 {
            1.0
        } else if imbalance < 0.0 {
            -1.0
        } else {
            0.0
        };
        Ok((p1 - p0, (p1 - p0) * sign))
    })?;
    let d: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let c: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let unconditional = MeanEstimate::from_samples(&d);
    let conditional = MeanEstimate::from_samples(&c);
    let unconditional_z = unconditional.z_score(0.0);
    let conditional_z = conditional.z_score(0.0);
    Ok(DriftReport {
        t,
        h,
        window,
        n_paths,
        unconditional,
        unconditional_z,
        conditional,
        conditional_z,
        passes: unconditional_z.abs() < 3.0 && conditional_z.abs() < 3.0,
    })
}
