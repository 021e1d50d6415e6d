//! Round-trip costs in a transient-impact model with a permanent component,
//! and the no-manipulation constraint they put on the impact function.
//!
//! A mean-variance investor model gives an indifference price that moves
//! linearly in the supply of shares.
//!
//! The strategy buys at rate `v₁` on `[0, θT]` and sells at rate `v₂` on
//! `[θT, T]` with `θ = v₂/(v₁+v₂)`. With `𝒢(x) = ∫_0^x G`, its expected cost is
//! `E = v₁f(v₁) ∫_0^{θT} 𝒢(t) dt + v₂f(v₂) ∫_0^{(1−θ)T} 𝒢(u) du
//!    − v₂f(v₁) ∫_{θT}^T [𝒢(t) − 𝒢(t−θT)] dt`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::quad::{integrate, QuadOptions};

/// Instantaneous impact `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ImpactFunction {
    /// `f(v) = λ v^δ`.
    Power { lambda: f64, delta: f64 },
    /// Linear interpolation through `(0, 0)` and the given nodes, linear
    /// extrapolation from the last two.
    Tabulated { volumes: Vec<f64>, values: Vec<f64> },
}

impl ImpactFunction {
    pub fn power(lambda: f64, delta: f64) -> Result<Self> {
        let f = ImpactFunction::Power { lambda, delta };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ImpactFunction::Power { lambda, delta } => {
                if !(*lambda > 0.0 && *delta > 0.0 && lambda.is_finite() && delta.is_finite()) {
                    return Err(Error::invalid(format!("power impact needs λ, δ > 0, got ({lambda}, {delta})")));
                }
            }
            ImpactFunction::Tabulated { volumes, values } => {
                if volumes.len() != values.len() || volumes.len() < 2 {
                    return Err(Error::invalid("tabulated impact needs at least two (v, f) nodes"));
                }
                let mut prev = (0.0, 0.0);
                for (&v, &f) in volumes.iter().zip(values) {
                    if !(v > prev.0 && f > prev.1) {
                        return Err(Error::invalid("tabulated impact must be strictly increasing with f(0) = 0"));
                    }
                    prev = (v, f);
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, v: f64) -> f64 {
        match self {
            ImpactFunction::Power { lambda, delta } => lambda * v.powf(*delta),
            ImpactFunction::Tabulated { volumes, values } => {
                let i = volumes.partition_point(|&x| x < v);
                let (x0, y0, x1, y1) = if i == 0 {
                    (0.0, 0.0, volumes[0], values[0])
                } else if i >= volumes.len() {
                    let n = volumes.len();
                    (volumes[n - 2], values[n - 2], volumes[n - 1], values[n - 1])
                } else {
                    (volumes[i - 1], values[i - 1], volumes[i], values[i])
                };
                y0 + (y1 - y0) * (v - x0) / (x1 - x0)
            }
        }
    }
}

/// Decay kernel `G = G_∞ + (1 − G_∞) G̃₁` with `G̃₁(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DecayKernel {
    /// `G̃₁(t) = e^{−t/θ_G}`.
    Exponential { g_inf: f64, timescale: f64 },
    /// `G̃₁(t) = (1 + t/ℓ)^{−β}`.
    PowerLaw { g_inf: f64, exponent: f64, scale: f64 },
}

impl DecayKernel {
    pub fn g_inf(&self) -> f64 {
        match *self {
            DecayKernel::Exponential { g_inf, .. } | DecayKernel::PowerLaw { g_inf, .. } => g_inf,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.g_inf();
        if !(0.0..=1.0).contains(&g) {
            return Err(Error::invalid(format!("G_∞ must lie in [0, 1], got {g}")));
        }
        let ok = match *self {
            DecayKernel::Exponential { timescale, .. } => timescale > 0.0,
            DecayKernel::PowerLaw { exponent, scale, .. } => exponent > 0.0 && scale > 0.0,
        };
        if !ok {
            return Err(Error::invalid("decay kernel parameters must be positive"));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            DecayKernel::Exponential { g_inf, timescale } => g_inf + (1.0 - g_inf) * (-t / timescale).exp(),
            DecayKernel::PowerLaw { g_inf, exponent, scale } => g_inf + (1.0 - g_inf) * (1.0 + t / scale).powf(-exponent),
        }
    }

    /// Order `p` of the decay `c/T^p` of the Cesàro terms in the normalized cost.
    pub fn cesaro_order(&self) -> f64 {
        match *self {
            DecayKernel::Exponential { .. } => 1.0,
            DecayKernel::PowerLaw { exponent, .. } => exponent.min(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactModelSpec {
    pub impact: ImpactFunction,
    pub decay: DecayKernel,
    /// Price volatility; does not enter expected costs.
    pub sigma: f64,
}

impl ImpactModelSpec {
    pub fn new(impact: ImpactFunction, decay: DecayKernel) -> Result<Self> {
        let m = ImpactModelSpec { impact, decay, sigma: 0.0 };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.impact.validate()?;
        self.decay.validate()
    }

    /// `½ G_∞ (f(v₂)v₁ − f(v₁)v₂)`, the large-`T` limit of the normalized cost.
    pub fn leading_term(&self, v1: f64, v2: f64) -> f64 {
        0.5 * self.decay.g_inf() * (self.impact.eval(v2) * v1 - self.impact.eval(v1) * v2)
    }
}

fn quad_opts() -> QuadOptions {
    QuadOptions { abs_tol: 0.0, rel_tol: 1e-11, max_intervals: 20_000 }
}

/// `𝒢(x) = ∫_0^x G`.
fn primitive(g: &DecayKernel, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    Ok(integrate(|s: f64| g.eval(s), 0.0, x, quad_opts())?.value)
}

fn outer<F: FnMut(f64) -> Result<f64>>(mut f: F, a: f64, b: f64) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let mut err = None;
    let v = integrate(
        |t: f64| match f(t) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        a,
        b,
        quad_opts(),
    )?
    .value;
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// Expected cost `E` of the round trip, by nested adaptive quadrature.
pub fn round_trip_cost(model: &ImpactModelSpec, v1: f64, v2: f64, horizon: f64) -> Result<f64> {
    model.validate()?;
    if !(v1 > 0.0 && v2 > 0.0 && horizon > 0.0) {
        return Err(Error::invalid(format!("round trip needs v1, v2, T > 0, got ({v1}, {v2}, {horizon})")));
    }
    let g = &model.decay;
    let theta = v2 / (v1 + v2);
    let s = theta * horizon;
    let i1 = outer(|t| primitive(g, t), 0.0, s)?;
    let i2 = outer(|u| primitive(g, u), 0.0, horizon - s)?;
    let i3 = outer(
        |t| {
            // ∫_{t−S}^{t} G
            Ok(integrate(|u: f64| g.eval(u), t - s, t, quad_opts())?.value)
        },
        s,
        horizon,
    )?;
    let f1 = model.impact.eval(v1);
    let f2 = model.impact.eval(v2);
    let e = v1 * f1 * i1 + v2 * f2 * i2 - v2 * f1 * i3;
    if !e.is_finite() {
        return Err(Error::numerical("round-trip cost is not finite"));
    }
    Ok(e)
}

/// `E (v₁+v₂)² / (T² v₁ v₂)`.
pub fn normalized_cost(model: &ImpactModelSpec, v1: f64, v2: f64, horizon: f64) -> Result<f64> {
    Ok(round_trip_cost(model, v1, v2, horizon)? * (v1 + v2).powi(2) / (horizon * horizon * v1 * v2))
}

/// `(r^p x_{k+1} − x_k)/(r^p − 1)` for consecutive members of a geometric
/// sequence with ratio `r`, assuming an error `c/T^p`.
pub fn richardson(values: &[f64], ratio: f64, order: f64) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Precondition("Richardson extrapolation needs two values".into()));
    }
    let w = ratio.powf(order);
    Ok((w * values[n - 1] - values[n - 2]) / (w - 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub v1: f64,
    pub v2: f64,
    pub normalized_costs: Vec<f64>,
    pub extrapolated: f64,
    pub leading_term: f64,
    pub manipulation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManipulationVerdict {
    pub model: ImpactModelSpec,
    pub horizons: Vec<f64>,
    pub richardson_order: f64,
    /// Extrapolated costs below `−tolerance` count as manipulations.
    pub tolerance: f64,
    pub points: Vec<ScanPoint>,
    pub manipulable: bool,
    pub verdict: String,
}

/// Extrapolates the normalized cost over the `(v₁, v₂)` grid and flags the
/// model when any limit is negative. `horizons` must be geometric.
pub fn manipulation_scan(
    model: &ImpactModelSpec,
    grid: &[(f64, f64)],
    horizons: &[f64],
) -> Result<ManipulationVerdict> {
    model.validate()?;
    if horizons.len() < 2 {
        return Err(Error::invalid("manipulation scan needs at least two horizons"));
    }
    let ratio = horizons[1] / horizons[0];
    if horizons.windows(2).any(|w| !(w[0] > 0.0) || ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-9) || !(ratio > 1.0) {
        return Err(Error::invalid("horizons must form an increasing geometric sequence"));
    }
    let order = model.decay.cesaro_order();
    let scale = grid
        .iter()
        .map(|&(a, b)| model.decay.g_inf() * (model.impact.eval(a) * b).abs().max((model.impact.eval(b) * a).abs()))
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let tolerance = 1e-6 * scale;
    let points = grid
        .par_iter()
        .map(|&(v1, v2)| {
            let costs = horizons
                .iter()
                .map(|&t| normalized_cost(model, v1, v2, t))
                .collect::<Result<Vec<f64>>>()?;
            let extrapolated = richardson(&costs, ratio, order)?;
            Ok(ScanPoint {
                v1,
                v2,
                leading_term: model.leading_term(v1, v2),
                manipulation: extrapolated < -tolerance,
                normalized_costs: costs,
                extrapolated,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manipulable = points.iter().any(|p| p.manipulation);
    Ok(ManipulationVerdict {
        model: model.clone(),
        horizons: horizons.to_vec(),
        richardson_order: order,
        tolerance,
        points,
        manipulable,
        verdict: if manipulable { "manipulable" } else { "clean" }.to_string(),
    })
}

/// Mean-variance investor: expected yield `E_i`, risk aversion `λ_i`,
/// variance `Σ_i`. Demand at price `P` is `(E_i − P)/(2λ_iΣ_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Investor {
    pub expected_yield: f64,
    pub risk_aversion: f64,
    pub variance: f64,
}

impl Investor {
    fn elasticity(&self) -> f64 {
        1.0 / (2.0 * self.risk_aversion * self.variance)
    }

    pub fn demand(&self, price: f64) -> f64 {
        (self.expected_yield - price) * self.elasticity()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvestorPopulation {
    pub investors: Vec<Investor>,
    /// Total shares `N` held by the population.
    pub shares: f64,
}

impl InvestorPopulation {
    pub fn validate(&self) -> Result<()> {
        if self.investors.is_empty() {
            return Err(Error::domain("investor population is empty"));
        }
        if self.investors.iter().any(|i| !(i.risk_aversion > 0.0 && i.variance > 0.0)) {
            return Err(Error::invalid("risk aversion and variance must be positive"));
        }
        Ok(())
    }

    /// `k = 1/Σ(1/(2λ_iΣ_i))`.
    pub fn impact_coefficient(&self) -> Result<f64> {
        self.validate()?;
        Ok(1.0 / self.investors.iter().map(Investor::elasticity).sum::<f64>())
    }
}

/// `P = (Σ E_i/(2λ_iΣ_i) − N) / Σ 1/(2λ_iΣ_i)`, where demands sum to `N`.
pub fn indifference_price(pop: &InvestorPopulation) -> Result<f64> {
    let k = pop.impact_coefficient()?;
    let weighted: f64 = pop.investors.iter().map(|i| i.expected_yield * i.elasticity()).sum();
    Ok((weighted - pop.shares) * k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupplyShift {
    pub price_before: f64,
    pub price_after: f64,
    pub impact_coefficient: f64,
}

/// Price after a non-optimizing buyer removes `N₀` shares: `P⁺ = P + k N₀`.
pub fn price_after_supply_shift(pop: &InvestorPopulation, n0: f64) -> Result<SupplyShift> {
    let price_before = indifference_price(pop)?;
    let k = pop.impact_coefficient()?;
    Ok(SupplyShift { price_before, price_after: price_before + k * n0, impact_coefficient: k })
}
