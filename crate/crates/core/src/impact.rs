//! Metaorder impact `MI(t) = E[P_t − P_0] = F ∫_0^{t∧τ} ζ(t−s) ds`, its
//! near-critical renormalization and power-law fits.
//!
//! With `φ^T = a_T Φ` and `Φ(x) ~ αc^α/x^{1+α}`, the renormalized impact
//! `RMI^T(t) = (1−a_T)/(τ^T)^{1−α} · MI^T(tτ^T)` tends to `K′ t^{1−α}` with
//! `K′ = c^α κ v F/(1−α)` when `τ^T → ∞` and `τ^T (1−a_T)^{1/α} → 0`.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::kernel::NearCriticalFamily;
use crate::numerics::stats::{loglog_fit, MeanEstimate};
use crate::output::Table;
use crate::price::propagator_price_at;
use crate::resolvent::{propagator_closed_form, PropagatorKernel, ZetaConstruction};
use crate::simulation::{replicate, simulate_market_replica, MarketConfig, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveProvenance {
    Analytic,
    MonteCarlo,
    Limit,
}

/// Record of a `RMI^T` rescaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Renormalization {
    pub branching: f64,
    pub duration: f64,
    pub alpha: f64,
    /// `(1−a_T)/(τ^T)^{1−α}`.
    pub prefactor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errs: Option<Vec<f64>>,
    pub provenance: CurveProvenance,
    /// Metaorder execution rate `F`.
    pub rate: f64,
    /// Metaorder duration `τ`.
    pub duration: f64,
    pub side: Side,
    pub zeta_construction: Option<ZetaConstruction>,
    pub n_paths: Option<u64>,
    pub renormalization: Option<Renormalization>,
}

impl ImpactCurve {
    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.times.iter().position(|&x| x == t).map(|i| self.values[i])
    }

    pub fn to_table<C: Serialize>(&self, config: &C) -> Result<Table> {
        let header = json!({
            "kind": "impact",
            "provenance": self.provenance,
            "rate": self.rate,
            "duration": self.duration,
            "side": self.side,
            "zeta_construction": self.zeta_construction,
            "n_paths": self.n_paths,
            "renormalization": self.renormalization,
            "config": config,
        });
        let mut t = Table::new(&header, &["t", "MI", "SE"])?;
        for (i, (x, v)) in self.times.iter().zip(&self.values).enumerate() {
            let se = self.std_errs.as_ref().map(|s| s[i].to_string()).unwrap_or_default();
            t.push_row(vec![x.to_string(), v.to_string(), se]);
        }
        Ok(t)
    }
}

fn check_metaorder(rate: f64, duration: f64) -> Result<()> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::invalid(format!("metaorder rate must be nonnegative, got {rate}")));
    }
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::invalid(format!("metaorder duration must be nonnegative, got {duration}")));
    }
    Ok(())
}

/// `MI(t) = F [Z(t) − Z((t−τ)⁺)]` with `Z(x) = ∫_0^x ζ`, for a buy metaorder.
pub fn impact_analytic(zeta: &PropagatorKernel, rate: f64, duration: f64, grid: &[f64]) -> Result<ImpactCurve> {
    check_metaorder(rate, duration)?;
    let z = zeta.integrator();
    let values = grid
        .iter()
        .map(|&t| {
            if t < 0.0 {
                return Err(Error::domain(format!("impact at negative time {t}")));
            }
            if rate == 0.0 || duration == 0.0 {
                return Ok(0.0);
            }
            Ok(rate * (z.integral(t)? - z.integral((t - duration).max(0.0))?))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ImpactCurve {
        times: grid.to_vec(),
        values,
        std_errs: None,
        provenance: CurveProvenance::Analytic,
        rate,
        duration,
        side: Side::Buy,
        zeta_construction: Some(zeta.construction),
        n_paths: None,
        renormalization: None,
    })
}

/// `lim_t MI(t) = F τ ζ_∞`, which is `κ v F τ` for a subcritical kernel.
pub fn permanent_impact(zeta: &PropagatorKernel, rate: f64, duration: f64) -> f64 {
    rate * duration * zeta.zeta_inf
}

/// Average of `P_t − P_0` over simulated replicas with the metaorder
/// executed on top of the anonymous flows. With `antithetic`, each replica
/// is also priced with the anonymous buy and sell flows swapped and the two
/// prices averaged, which cancels the anonymous contribution pathwise.
pub fn impact_monte_carlo(
    config: &MarketConfig,
    zeta: &PropagatorKernel,
    n_paths: u64,
    grid: &[f64],
    antithetic: bool,
) -> Result<ImpactCurve> {
    config.validate()?;
    if n_paths < 2 {
        return Err(Error::invalid("Monte Carlo impact needs at least two paths"));
    }
    if grid.iter().any(|&t| t < 0.0 || t > config.horizon) {
        return Err(Error::invalid("impact grid must lie in [0, horizon]"));
    }
    let (rate, duration, side) = config.metaorder.map(|m| (m.rate, m.duration, m.side)).unwrap_or((0.0, 0.0, Side::Buy));
    let samples: Vec<Vec<f64>> = replicate(n_paths, |r| {
        let market = simulate_market_replica(config, r)?;
        let (buy, sell) = market.total_flows();
        let path = |buy: &[f64], sell: &[f64]| -> Result<Vec<f64>> {
            grid.iter().map(|&t| propagator_price_at(buy, sell, zeta, 0.0, t)).collect()
        };
        let direct = path(&buy, &sell)?;
        if !antithetic {
            return Ok(direct);
        }
        let swapped = match side {
            Side::Buy => {
                let mut b = market.sell.times.clone();
                b.extend_from_slice(&market.metaorder.times);
                b.sort_by(f64::total_cmp);
                path(&b, &market.buy.times)?
            }
            Side::Sell => {
                let mut s = market.buy.times.clone();
                s.extend_from_slice(&market.metaorder.times);
                s.sort_by(f64::total_cmp);
                path(&market.sell.times, &s)?
            }
        };
        Ok(direct.iter().zip(&swapped).map(|(a, b)| 0.5 * (a + b)).collect())
    })?;
    let mut values = Vec::with_capacity(grid.len());
    let mut std_errs = Vec::with_capacity(grid.len());
    let mut column = vec![0.0; samples.len()];
    for j in 0..grid.len() {
        for (c, s) in column.iter_mut().zip(&samples) {
            *c = s[j];
        }
        let m = MeanEstimate::from_samples(&column);
        values.push(m.mean);
        std_errs.push(m.std_err);
    }
    Ok(ImpactCurve {
        times: grid.to_vec(),
        values,
        std_errs: Some(std_errs),
        provenance: CurveProvenance::MonteCarlo,
        rate,
        duration,
        side,
        zeta_construction: Some(zeta.construction),
        n_paths: Some(n_paths),
        renormalization: None,
    })
}

/// `(1−a_T)/(τ^T)^{1−α}`.
pub fn renormalization_prefactor(branching: f64, duration: f64, alpha: f64) -> f64 {
    (1.0 - branching) / duration.powf(1.0 - alpha)
}

/// Rescales a curve sampled on `[0, τ^T]` to `RMI^T` on `[0, 1]`.
pub fn renormalize_impact(curve: &ImpactCurve, branching: f64, duration: f64, alpha: f64) -> Result<ImpactCurve> {
    if !(duration > 0.0) {
        return Err(Error::invalid("τ^T must be positive"));
    }
    if curve.times.iter().any(|&t| t > duration * (1.0 + 1e-12)) {
        return Err(Error::invalid("curve extends beyond τ^T"));
    }
    let prefactor = renormalization_prefactor(branching, duration, alpha);
    let mut out = curve.clone();
    out.times = curve.times.iter().map(|t| t / duration).collect();
    out.values = curve.values.iter().map(|v| v * prefactor).collect();
    out.std_errs = curve.std_errs.as_ref().map(|s| s.iter().map(|v| v * prefactor).collect());
    out.renormalization = Some(Renormalization { branching, duration, alpha, prefactor });
    Ok(out)
}

/// Analytic `RMI^T` of the near-critical family at rescaled times `ts ⊂ [0, 1]`.
pub fn rescaled_impact_analytic(
    family: &NearCriticalFamily,
    kappa: f64,
    volume: f64,
    rate: f64,
    duration: f64,
    ts: &[f64],
) -> Result<ImpactCurve> {
    if ts.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
        return Err(Error::invalid("rescaled times must lie in [0, 1]"));
    }
    let zeta = propagator_closed_form(&family.kernel()?, kappa, volume, duration / 64.0, duration, None)?;
    let grid: Vec<f64> = ts.iter().map(|t| t * duration).collect();
    let curve = impact_analytic(&zeta, rate, duration, &grid)?;
    let mut out = renormalize_impact(&curve, family.branching, duration, family.alpha())?;
    out.times = ts.to_vec();
    Ok(out)
}

/// `K′ = c^α κ v F/(1−α)`.
pub fn limit_constant_k_prime(scale: f64, alpha: f64, kappa: f64, volume: f64, rate: f64) -> f64 {
    scale.powf(alpha) * kappa * volume * rate / (1.0 - alpha)
}

/// The limit `K′ t^{1−α}` on `ts`.
pub fn rescaled_impact_limit(
    scale: f64,
    alpha: f64,
    kappa: f64,
    volume: f64,
    rate: f64,
    ts: &[f64],
) -> ImpactCurve {
    let k = limit_constant_k_prime(scale, alpha, kappa, volume, rate);
    ImpactCurve {
        times: ts.to_vec(),
        values: ts.iter().map(|t| k * t.powf(1.0 - alpha)).collect(),
        std_errs: None,
        provenance: CurveProvenance::Limit,
        rate,
        duration: 1.0,
        side: Side::Buy,
        zeta_construction: None,
        n_paths: None,
        renormalization: None,
    }
}

/// `max_i |a_i − b_i|` for curves on the same grid.
pub fn sup_distance(a: &ImpactCurve, b: &ImpactCurve) -> Result<f64> {
    if a.times != b.times {
        return Err(Error::invalid("curves are sampled on different grids"));
    }
    Ok(a.values.iter().zip(&b.values).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub points: usize,
}

/// Least squares of `ln MI` on `ln t` over curve points in the window.
pub fn fit_power_law(curve: &ImpactCurve, window: (f64, f64)) -> Result<PowerLawFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid(format!("fit window must satisfy 0 < t_min < t_max, got {window:?}")));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve
        .times
        .iter()
        .zip(&curve.values)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(t, v)| (*t, *v))
        .unzip();
    if let Some(v) = ys.iter().find(|v| **v <= 0.0) {
        return Err(Error::domain(format!("power-law fit needs positive impact, got {v}")));
    }
    let fit = loglog_fit(&xs, &ys)?;
    Ok(PowerLawFit {
        exponent: fit.slope,
        amplitude: fit.amplitude(),
        r_squared: fit.r_squared,
        window,
        points: fit.points,
    })
}

/// `ν = (1+γ)/2` for `γ ∈ (0, 1)`.
pub fn exponent_link(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::domain(format!("long-memory exponent must lie in (0, 1), got {gamma}")));
    }
    Ok((1.0 + gamma) / 2.0)
}

/// `γ = 2ν − 1` for `ν ∈ (1/2, 1)`.
pub fn exponent_link_inverse(nu: f64) -> Result<f64> {
    if !(nu > 0.5 && nu < 1.0) {
        return Err(Error::domain(format!("impact exponent must lie in (1/2, 1), got {nu}")));
    }
    Ok(2.0 * nu - 1.0)
}

/// Second differences `v_{i+1} − 2v_i + v_{i−1}` (uniform grids only).
pub fn second_differences(curve: &ImpactCurve) -> Vec<f64> {
    curve.values.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect()
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln();
    let mut g: Vec<f64> = (0..n).map(|i| lo * (r * i as f64 / (n - 1) as f64).exp()).collect();
    g[n - 1] = hi;
    g
}
