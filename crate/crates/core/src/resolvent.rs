//! The resolvent `ψ = Σ_{k≥1} φ^{*k}` and the propagator kernel ζ.
//!
//! ψ solves the renewal equation `ψ = φ + φ∗ψ`, discretized with the
//! trapezoid rule on a uniform grid and solved by fixed-point iteration with
//! FFT convolutions. ζ is then built two ways:
//!
//! * from ψ: `ζ(t) = κv [1 + Ψ̄(t) − (φ∗Ψ̄)(t)]` with `Ψ̄(y) = ∫_y^∞ ψ`, which
//!   is `1 + ∫_t^∞ψ − ∫_t^∞∫_0^t ψ(u−s)φ(s) ds du` after exchanging the
//!   order of integration;
//! * in closed form: `ζ(x) = ζ(0)(1 − ∫_0^x φ)` with `ζ(0) = κv/(1 − ∫φ)`.
//!
//! Both must satisfy the martingale identity `ζ′ = −ζ(0) φ`.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::numerics::conv::CausalConvolver;
use crate::numerics::stats::{linear_fit, loglog_fit};
use crate::output::Table;

/// Branching ratios within this distance of one are treated as critical.
pub const CRITICAL_TOL: f64 = 1e-9;

/// Controls for the fixed-point renewal solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventOptions {
    /// Stop when successive iterates differ by less than this in sup norm.
    pub tol: f64,
    pub max_iterations: usize,
    /// Relative shortfall of `Δ·Σψ` against `∫φ/(1−∫φ)` above which the grid
    /// is flagged as truncated.
    pub mass_tolerance: f64,
}

impl Default for ResolventOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iterations: 200_000, mass_tolerance: 1e-3 }
    }
}

/// Model of ψ past the grid horizon, fitted on the last decade of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum TailModel {
    /// `ψ(t) ≈ amplitude · t^{-exponent}`.
    PowerLaw { amplitude: f64, exponent: f64 },
    /// `ψ(t) ≈ amplitude · e^{-rate t}`.
    Exponential { amplitude: f64, rate: f64 },
}

impl TailModel {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TailModel::PowerLaw { amplitude, exponent } => amplitude * t.powf(-exponent),
            TailModel::Exponential { amplitude, rate } => amplitude * (-rate * t).exp(),
        }
    }

    /// `∫_x^∞` of the model; `None` when the fitted tail is not integrable.
    pub fn mass_beyond(&self, x: f64) -> Option<f64> {
        match *self {
            TailModel::PowerLaw { amplitude, exponent } => {
                (exponent > 1.0).then(|| amplitude * x.powf(1.0 - exponent) / (exponent - 1.0))
            }
            TailModel::Exponential { amplitude, rate } => {
                (rate > 0.0).then(|| amplitude * (-rate * x).exp() / rate)
            }
        }
    }
}

/// ψ sampled at `t_k = kΔ`, `k = 0..=H/Δ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolventGrid {
    pub step: f64,
    pub horizon: f64,
    pub values: Vec<f64>,
    pub spec: KernelSpec,
    /// Exact `|ψ| = ∫φ/(1−∫φ)`.
    pub total_mass: f64,
    pub iterations: usize,
    /// `sup |ψ − φ − φ∗ψ|` of the discrete equation at the returned iterate.
    pub residual: f64,
    pub tail: Option<TailModel>,
    /// Set when the grid misses more than the configured share of `|ψ|`.
    pub truncated: bool,
    pub warnings: Vec<String>,
    /// `Ψ̄(t_k) = |ψ| − ∫_0^{t_k} ψ`.
    complementary: Vec<f64>,
}

pub fn compute_resolvent(spec: &KernelSpec, step: f64, horizon: f64) -> Result<ResolventGrid> {
    compute_resolvent_with(spec, step, horizon, ResolventOptions::default())
}

pub fn compute_resolvent_with(
    spec: &KernelSpec,
    step: f64,
    horizon: f64,
    opts: ResolventOptions,
) -> Result<ResolventGrid> {
    spec.validate()?;
    let norm = spec.norm();
    if norm >= 1.0 - CRITICAL_TOL {
        return Err(Error::Criticality {
            norm,
            context: "the resolvent series diverges".into(),
        });
    }
    let (n, phi) = sample_kernel(spec, step, horizon)?;
    let conv = CausalConvolver::new(&phi);
    let scale = phi.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut psi = phi.clone();
    let mut iterations = 0;
    loop {
        let smoothed = conv.trapezoid(&psi, &phi, step);
        let mut change: f64 = 0.0;
        for k in 0..n {
            let next = phi[k] + smoothed[k];
            change = change.max((next - psi[k]).abs());
            psi[k] = next;
        }
        iterations += 1;
        if change < opts.tol * scale {
            break;
        }
        if iterations >= opts.max_iterations {
            return Err(Error::numerical(format!(
                "renewal iteration stalled at change {change:.3e} after {iterations} passes"
            )));
        }
    }
    let check = conv.trapezoid(&psi, &phi, step);
    let residual = (0..n).fold(0.0_f64, |m, k| m.max((psi[k] - phi[k] - check[k]).abs()));

    let total_mass = norm / (1.0 - norm);
    let cumulative = cumulative_trapezoid(&psi, step);
    let complementary: Vec<f64> = cumulative.iter().map(|c| total_mass - c).collect();
    let grid_mass = cumulative[n - 1];

    let mut warnings = Vec::new();
    let truncated = total_mass > 0.0 && total_mass - grid_mass > opts.mass_tolerance * total_mass;
    if truncated {
        warnings.push(format!(
            "horizon {horizon} holds only {:.4}% of the resolvent mass {total_mass}",
            100.0 * grid_mass / total_mass
        ));
    }
    let tail = fit_tail(spec, &psi, step, &mut warnings);
    Ok(ResolventGrid {
        step,
        horizon: (n - 1) as f64 * step,
        values: psi,
        spec: spec.clone(),
        total_mass,
        iterations,
        residual,
        tail,
        truncated,
        warnings,
        complementary,
    })
}

fn sample_kernel(spec: &KernelSpec, step: f64, horizon: f64) -> Result<(usize, Vec<f64>)> {
    if !(step > 0.0 && step.is_finite() && horizon > step && horizon.is_finite()) {
        return Err(Error::invalid(format!("grid needs 0 < step < horizon, got step {step}, horizon {horizon}")));
    }
    let n = (horizon / step).round() as usize + 1;
    Ok((n, (0..n).map(|k| spec.value(k as f64 * step)).collect()))
}

fn cumulative_trapezoid(values: &[f64], step: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * step * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

fn fit_tail(spec: &KernelSpec, psi: &[f64], step: f64, warnings: &mut Vec<String>) -> Option<TailModel> {
    let n = psi.len();
    let first = (n / 10).max(1);
    if n < 20 || psi[n - 1] <= 0.0 {
        return None;
    }
    let samples = 64usize;
    let ratio = ((n - 1) as f64 / first as f64).ln();
    let mut idx: Vec<usize> = (0..samples)
        .map(|i| (first as f64 * (ratio * i as f64 / (samples - 1) as f64).exp()).round() as usize)
        .map(|k| k.min(n - 1))
        .collect();
    idx.dedup();
    let ts: Vec<f64> = idx.iter().map(|&k| k as f64 * step).collect();
    let ys: Vec<f64> = idx.iter().map(|&k| psi[k]).collect();
    if ys.iter().any(|&y| y <= 0.0) {
        return None;
    }
    if spec.tail_asymptotics().is_some() {
        let fit = loglog_fit(&ts, &ys).ok()?;
        let exponent = -fit.slope;
        if exponent <= 1.0 {
            warnings.push(format!(
                "fitted resolvent tail exponent {exponent:.3} is not integrable; the grid ends before the cluster time scale"
            ));
        }
        Some(TailModel::PowerLaw { amplitude: fit.amplitude(), exponent })
    } else {
        let logs: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
        let fit = linear_fit(&ts, &logs).ok()?;
        Some(TailModel::Exponential { amplitude: fit.intercept.exp(), rate: -fit.slope })
    }
}

impl ResolventGrid {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    /// `Δ·Σψ` by the trapezoid rule over the grid.
    pub fn grid_mass(&self) -> f64 {
        self.total_mass - self.complementary[self.len() - 1]
    }

    /// Grid mass plus the fitted tail beyond the horizon.
    pub fn mass_with_tail(&self) -> Option<f64> {
        Some(self.grid_mass() + self.tail?.mass_beyond(self.horizon)?)
    }

    /// ψ(t): linear inside the grid, the tail model beyond it.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::domain(format!("resolvent at negative time {t}")));
        }
        if t <= self.horizon {
            let x = t / self.step;
            let k = (x.floor() as usize).min(self.len() - 2);
            let s = x - k as f64;
            return Ok(self.values[k] * (1.0 - s) + self.values[k + 1] * s);
        }
        self.tail
            .map(|m| m.value(t))
            .ok_or(Error::Horizon { lag: t, horizon: self.horizon })
    }

    pub fn complementary_grid(&self) -> &[f64] {
        &self.complementary
    }

    /// `Ψ̄(y) = ∫_y^∞ ψ` for `0 ≤ y ≤ H`, cubic Hermite between nodes using
    /// `Ψ̄′ = −ψ`.
    pub fn complementary_mass(&self, y: f64) -> Result<f64> {
        if !(0.0..=self.horizon).contains(&y) {
            return Err(Error::Horizon { lag: y, horizon: self.horizon });
        }
        let x = y / self.step;
        let k = (x.floor() as usize).min(self.len() - 2);
        let s = x - k as f64;
        let (p0, p1) = (self.complementary[k], self.complementary[k + 1]);
        let (m0, m1) = (-self.values[k] * self.step, -self.values[k + 1] * self.step);
        let s2 = s * s;
        let s3 = s2 * s;
        Ok((2.0 * s3 - 3.0 * s2 + 1.0) * p0
            + (s3 - 2.0 * s2 + s) * m0
            + (3.0 * s2 - 2.0 * s3) * p1
            + (s3 - s2) * m1)
    }

    pub fn to_table(&self) -> Result<Table> {
        let header = json!({
            "kind": "resolvent",
            "step": self.step,
            "horizon": self.horizon,
            "spec": self.spec,
            "total_mass": self.total_mass,
            "grid_mass": self.grid_mass(),
            "iterations": self.iterations,
            "residual": self.residual,
            "tail": self.tail,
            "truncated": self.truncated,
            "warnings": self.warnings,
        });
        let mut t = Table::new(&header, &["t", "psi"])?;
        for (k, v) in self.values.iter().enumerate() {
            t.push_numbers(&[self.time(k), *v]);
        }
        Ok(t)
    }
}

/// Which formula produced a [`PropagatorKernel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaConstruction {
    Resolvent,
    ClosedForm,
}

/// ζ sampled at `t_k = kΔ`, with its instantaneous and permanent levels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropagatorKernel {
    pub step: f64,
    pub horizon: f64,
    pub values: Vec<f64>,
    pub zeta0: f64,
    pub zeta_inf: f64,
    /// Price impact per share.
    pub kappa: f64,
    /// Shares per market order.
    pub volume: f64,
    pub construction: ZetaConstruction,
    pub spec: KernelSpec,
    pub warnings: Vec<String>,
}

fn check_impact_units(kappa: f64, volume: f64) -> Result<()> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::invalid(format!("κ must be finite and nonnegative, got {kappa}")));
    }
    if !(volume > 0.0 && volume.is_finite()) {
        return Err(Error::invalid(format!("order volume must be positive, got {volume}")));
    }
    Ok(())
}

pub fn propagator_from_resolvent(grid: &ResolventGrid, kappa: f64, volume: f64) -> Result<PropagatorKernel> {
    check_impact_units(kappa, volume)?;
    let (_, phi) = sample_kernel(&grid.spec, grid.step, grid.horizon)?;
    let phi = &phi[..grid.len()];
    let conv = CausalConvolver::new(phi).trapezoid(&grid.complementary, phi, grid.step);
    let unit = kappa * volume;
    let values: Vec<f64> = grid
        .complementary
        .iter()
        .zip(&conv)
        .map(|(bar, c)| unit * (1.0 + bar - c))
        .collect();
    let mut warnings = grid.warnings.clone();
    if grid.spec.tail_asymptotics().is_some() && grid.tail.and_then(|t| t.mass_beyond(grid.horizon)).is_none() {
        warnings.push("heavy-tailed resolvent without an integrable tail model past the horizon".into());
    }
    Ok(PropagatorKernel {
        step: grid.step,
        horizon: grid.horizon,
        zeta0: values[0],
        zeta_inf: unit,
        values,
        kappa,
        volume,
        construction: ZetaConstruction::Resolvent,
        spec: grid.spec.clone(),
        warnings,
    })
}

/// `ζ(x) = ζ(0)(1 − ∫_0^x φ)`. For a critical kernel `zeta0` must be given;
/// otherwise it must be omitted or equal `κv/(1−∫φ)`.
pub fn propagator_closed_form(
    spec: &KernelSpec,
    kappa: f64,
    volume: f64,
    step: f64,
    horizon: f64,
    zeta0: Option<f64>,
) -> Result<PropagatorKernel> {
    spec.validate()?;
    check_impact_units(kappa, volume)?;
    let norm = spec.norm();
    let critical = norm >= 1.0 - CRITICAL_TOL;
    let zeta0 = if critical {
        zeta0.ok_or_else(|| Error::MissingParameter("ζ(0) must be supplied for a critical kernel".into()))?
    } else {
        let implied = kappa * volume / (1.0 - norm);
        if let Some(z) = zeta0 {
            if (z - implied).abs() > 1e-9 * implied.abs().max(f64::MIN_POSITIVE) {
                return Err(Error::invalid(format!(
                    "ζ(0) = {z} contradicts κv/(1−∫φ) = {implied} for a subcritical kernel"
                )));
            }
        }
        implied
    };
    if !(zeta0 > 0.0 && zeta0.is_finite()) {
        return Err(Error::invalid(format!("ζ(0) must be positive, got {zeta0}")));
    }
    let (n, _) = sample_kernel(spec, step, horizon)?;
    let deficit = if critical { 0.0 } else { 1.0 - norm };
    let values = (0..n).map(|k| zeta0 * (deficit + spec.tail_mass(k as f64 * step))).collect();
    Ok(PropagatorKernel {
        step,
        horizon: (n - 1) as f64 * step,
        values,
        zeta0,
        zeta_inf: zeta0 * deficit,
        kappa,
        volume,
        construction: ZetaConstruction::ClosedForm,
        spec: spec.clone(),
        warnings: Vec::new(),
    })
}

impl PropagatorKernel {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    /// Largest lag at which [`PropagatorKernel::eval`] is defined. The closed
    /// form is exact at every lag.
    pub fn max_lag(&self) -> f64 {
        match self.construction {
            ZetaConstruction::ClosedForm => f64::INFINITY,
            ZetaConstruction::Resolvent => self.horizon,
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::domain(format!("ζ at negative lag {t}")));
        }
        if t > self.max_lag() {
            return Err(Error::Horizon { lag: t, horizon: self.horizon });
        }
        Ok(self.value(t))
    }

    /// ζ(t) for `0 ≤ t ≤ max_lag()`, unchecked. Grid kernels use local cubic
    /// interpolation.
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        match self.construction {
            ZetaConstruction::ClosedForm => {
                let deficit = self.zeta_inf / self.zeta0;
                self.zeta0 * (deficit + self.spec.tail_mass(t))
            }
            ZetaConstruction::Resolvent => self.interpolate(t),
        }
    }

    fn interpolate(&self, t: f64) -> f64 {
        let n = self.len();
        let x = (t / self.step).clamp(0.0, (n - 1) as f64);
        if n < 4 {
            let k = (x.floor() as usize).min(n - 2);
            let s = x - k as f64;
            return self.values[k] * (1.0 - s) + self.values[k + 1] * s;
        }
        let k = (x.floor() as usize).clamp(1, n - 3) - 1;
        let s = x - k as f64;
        let v = &self.values[k..k + 4];
        // Lagrange cubic through nodes 0..3 at offset s.
        let l0 = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0;
        let l1 = s * (s - 2.0) * (s - 3.0) / 2.0;
        let l2 = -s * (s - 1.0) * (s - 3.0) / 2.0;
        let l3 = s * (s - 1.0) * (s - 2.0) / 6.0;
        l0 * v[0] + l1 * v[1] + l2 * v[2] + l3 * v[3]
    }

    /// Evaluator of `Z(x) = ∫_0^x ζ`, exact for the closed form and by the
    /// trapezoid rule on the grid otherwise.
    pub fn integrator(&self) -> ZetaIntegrator<'_> {
        let cumulative = match self.construction {
            ZetaConstruction::ClosedForm => Vec::new(),
            ZetaConstruction::Resolvent => cumulative_trapezoid(&self.values, self.step),
        };
        ZetaIntegrator { zeta: self, cumulative }
    }

    pub fn is_nonincreasing(&self, tol: f64) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0] + tol)
    }

    pub fn to_table(&self) -> Result<Table> {
        let header = json!({
            "kind": "propagator",
            "construction": self.construction,
            "step": self.step,
            "horizon": self.horizon,
            "spec": self.spec,
            "kappa": self.kappa,
            "volume": self.volume,
            "zeta0": self.zeta0,
            "zeta_inf": self.zeta_inf,
            "warnings": self.warnings,
        });
        let mut t = Table::new(&header, &["t", "zeta"])?;
        for (k, v) in self.values.iter().enumerate() {
            t.push_numbers(&[self.time(k), *v]);
        }
        Ok(t)
    }
}

/// See [`PropagatorKernel::integrator`].
pub struct ZetaIntegrator<'a> {
    zeta: &'a PropagatorKernel,
    cumulative: Vec<f64>,
}

impl ZetaIntegrator<'_> {
    pub fn integral(&self, x: f64) -> Result<f64> {
        let z = self.zeta;
        if x < 0.0 || x.is_nan() {
            return Err(Error::domain(format!("∫ζ up to negative time {x}")));
        }
        if x > z.max_lag() {
            return Err(Error::Horizon { lag: x, horizon: z.horizon });
        }
        match z.construction {
            ZetaConstruction::ClosedForm => {
                let deficit = z.zeta_inf / z.zeta0;
                Ok(z.zeta0 * (deficit * x + z.spec.integrated_tail(x)?))
            }
            ZetaConstruction::Resolvent => {
                let pos = x / z.step;
                let k = (pos.floor() as usize).min(z.len() - 2);
                let dx = x - k as f64 * z.step;
                let end = z.interpolate(x);
                Ok(self.cumulative[k] + 0.5 * dx * (z.values[k] + end))
            }
        }
    }
}

/// Residual of `ζ′ + ζ(0)φ = 0` on ζ's grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleResidual {
    pub max_abs: f64,
    /// `(Δ Σ r_k²)^{1/2}`.
    pub l2: f64,
    /// `max_abs / ζ(0)`.
    pub relative_max: f64,
    pub points: usize,
}

/// Evaluates `r_k = (ζ_{k+1} − ζ_k)/Δ + ζ(0) φ(t_k + Δ/2)` at every cell.
pub fn check_martingale_identity(zeta: &PropagatorKernel, spec: &KernelSpec) -> MartingaleResidual {
    let h = zeta.step;
    let mut max_abs: f64 = 0.0;
    let mut sq = 0.0;
    for (k, w) in zeta.values.windows(2).enumerate() {
        let r = (w[1] - w[0]) / h + zeta.zeta0 * spec.value((k as f64 + 0.5) * h);
        max_abs = max_abs.max(r.abs());
        sq += r * r * h;
    }
    MartingaleResidual {
        max_abs,
        l2: sq.sqrt(),
        relative_max: max_abs / zeta.zeta0,
        points: zeta.len().saturating_sub(1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quad::{integrate, integrate_to_infinity, QuadOptions};

    fn exp_half() -> KernelSpec {
        KernelSpec::exponential(0.5, 1.0).unwrap()
    }

    // Truncated Neumann series Σ_{k≤terms} φ^{*k} by repeated convolution.
    fn neumann_oracle(spec: &KernelSpec, step: f64, horizon: f64, terms: usize) -> Vec<f64> {
        let (_, phi) = sample_kernel(spec, step, horizon).unwrap();
        let conv = CausalConvolver::new(&phi);
        let mut power = phi.clone();
        let mut sum = phi.clone();
        for _ in 1..terms {
            power = conv.trapezoid(&power, &phi, step);
            for (s, p) in sum.iter_mut().zip(&power) {
                *s += p;
            }
        }
        sum
    }

    #[test]
    fn exponential_resolvent_closed_form() {
        let g = compute_resolvent(&exp_half(), 1e-3, 40.0).unwrap();
        let oracle = neumann_oracle(&exp_half(), 1e-3, 40.0, 50);
        for (k, v) in g.values.iter().enumerate() {
            let exact = 0.5 * (-0.5 * g.time(k)).exp();
            assert!((v - exact).abs() < 1e-6, "t={}: {v} vs {exact}", g.time(k));
            assert!((v - oracle[k]).abs() < 1e-9);
        }
        assert!(g.residual < 1e-9);
        assert!(matches!(g.tail, Some(TailModel::Exponential { rate, .. }) if (rate - 0.5).abs() < 1e-3));
    }

    #[test]
    fn resolvent_mass_approaches_geometric_sum() {
        let mut last = 0.0;
        for h in [5.0, 10.0, 20.0, 40.0] {
            let g = compute_resolvent(&exp_half(), 1e-2, h).unwrap();
            let m = g.grid_mass();
            assert!(m > last && m <= 1.0 + 1e-4);
            last = m;
        }
        assert!((last - 1.0).abs() < 1e-4);
        let short = compute_resolvent(&exp_half(), 1e-2, 5.0).unwrap();
        assert!(short.truncated);
        assert!((short.mass_with_tail().unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn zero_kernel_has_zero_resolvent() {
        let g = compute_resolvent(&KernelSpec::zero(), 0.1, 10.0).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
        assert!(!g.truncated);
    }

    #[test]
    fn resolvent_dominates_kernel() {
        let spec = KernelSpec::shifted_power_law(0.8, 0.4, 1.0).unwrap();
        let g = compute_resolvent(&spec, 1e-2, 50.0).unwrap();
        for (k, v) in g.values.iter().enumerate() {
            assert!(*v >= spec.value(g.time(k)));
        }
        assert!(g.grid_mass() <= g.total_mass);
    }

    #[test]
    fn critical_kernel_rejected() {
        let spec = KernelSpec::shifted_power_law(1.0, 0.4, 1.0).unwrap();
        assert!(matches!(compute_resolvent(&spec, 0.1, 10.0), Err(Error::Criticality { .. })));
    }

    // ζ(t)/κv = 1 + ∫_t^∞ψ − ∫_t^∞∫_0^t ψ(u−s)φ(s) ds du with ψ(t) = ½e^{−t/2}.
    fn zeta_by_quadrature(t: f64) -> f64 {
        let psi = |x: f64| 0.5 * (-0.5 * x).exp();
        let phi = |x: f64| 0.5 * (-x).exp();
        let opts = QuadOptions::with_tol(1e-12, 1e-11);
        let tail = integrate_to_infinity(psi, t, opts).unwrap().value;
        let double = integrate_to_infinity(
            |u: f64| {
                if t == 0.0 {
                    return 0.0;
                }
                integrate(|s: f64| psi(u - s) * phi(s), 0.0, t, opts).unwrap().value
            },
            t,
            opts,
        )
        .unwrap()
        .value;
        1.0 + tail - double
    }

    #[test]
    fn exponential_zeta_from_resolvent() {
        let g = compute_resolvent(&exp_half(), 1e-3, 40.0).unwrap();
        let z = propagator_from_resolvent(&g, 1.0, 1.0).unwrap();
        assert!((z.zeta0 - 2.0).abs() < 1e-12);
        assert_eq!(z.zeta_inf, 1.0);
        for &t in &[0.0_f64, 0.3, 1.0, 2.5, 7.0, 20.0] {
            let closed = 1.0 + (-t).exp();
            let quad = zeta_by_quadrature(t);
            assert!((quad - closed).abs() < 1e-8, "oracle t={t}");
            assert!((z.eval(t).unwrap() - closed).abs() < 1e-5, "t={t}");
        }
        assert!(z.eval(41.0).is_err());
    }

    #[test]
    fn two_constructions_agree() {
        for spec in [
            KernelSpec::exponential(0.9, 2.0).unwrap(),
            KernelSpec::shifted_power_law(0.9, 0.4, 1.0).unwrap(),
        ] {
            let g = compute_resolvent(&spec, 1e-3, 30.0).unwrap();
            let a = propagator_from_resolvent(&g, 0.5, 2.0).unwrap();
            let b = propagator_closed_form(&spec, 0.5, 2.0, 1e-3, 30.0, None).unwrap();
            let sup = a.values.iter().zip(&b.values).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(sup / b.zeta0 < 1e-4, "{}: {sup}", spec.family_name());
        }
    }

    #[test]
    fn closed_form_examples() {
        let z = propagator_closed_form(&exp_half(), 1.0, 1.0, 0.01, 10.0, None).unwrap();
        assert!((z.eval(2f64.ln()).unwrap() - 1.5).abs() < 1e-14);
        assert_eq!(z.values[0], z.zeta0);
        let crit = KernelSpec::shifted_power_law(1.0, 0.4, 1.0).unwrap();
        let zc = propagator_closed_form(&crit, 1.0, 1.0, 0.1, 100.0, Some(1.0)).unwrap();
        for &x in &[0.0, 1.0, 10.0, 1e6] {
            assert!((zc.eval(x).unwrap() - (1.0 + x).powf(-0.4)).abs() < 1e-14);
        }
        assert_eq!(zc.zeta_inf, 0.0);
        assert!(matches!(
            propagator_closed_form(&crit, 1.0, 1.0, 0.1, 100.0, None),
            Err(Error::MissingParameter(_))
        ));
        assert!(propagator_closed_form(&exp_half(), 1.0, 1.0, 0.1, 10.0, Some(3.0)).is_err());
    }

    #[test]
    fn permanent_level_vanishes_only_at_criticality() {
        for a in [0.5, 0.9, 0.99, 1.0] {
            let spec = KernelSpec::shifted_power_law(a, 0.4, 1.0).unwrap();
            let zeta0 = (a == 1.0).then_some(1.0);
            let z = propagator_closed_form(&spec, 1.0, 1.0, 0.1, 10.0, zeta0).unwrap();
            assert_eq!(z.zeta_inf == 0.0, a == 1.0);
            assert!(z.is_nonincreasing(0.0));
            assert!(z.values.iter().all(|&v| v >= z.zeta_inf));
            if a < 1.0 {
                assert!((z.zeta_inf / z.zeta0 - (1.0 - a)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn martingale_identity_residuals() {
        for spec in [exp_half(), KernelSpec::shifted_power_law(0.7, 0.3, 0.5).unwrap()] {
            for step in [1e-2, 1e-3] {
                let z = propagator_closed_form(&spec, 1.0, 1.0, step, 20.0, None).unwrap();
                assert!(check_martingale_identity(&z, &spec).relative_max < 10.0 * step);
            }
        }
        let g = compute_resolvent(&exp_half(), 1e-3, 30.0).unwrap();
        let z = propagator_from_resolvent(&g, 1.0, 1.0).unwrap();
        assert!(check_martingale_identity(&z, &exp_half()).max_abs < 1e-4);

        let mut bad = propagator_closed_form(&exp_half(), 1.0, 1.0, 1e-3, 20.0, None).unwrap();
        let half = bad.len() / 2;
        for v in &mut bad.values[half..] {
            *v += 0.1;
        }
        assert!(check_martingale_identity(&bad, &exp_half()).max_abs > 0.05);
    }

    #[test]
    fn complementary_mass_is_smooth_and_exact_for_exponential() {
        let g = compute_resolvent(&exp_half(), 1e-2, 30.0).unwrap();
        for &y in &[0.0_f64, 0.005, 1.234, 10.0, 29.99] {
            let exact = (-0.5 * y).exp();
            assert!((g.complementary_mass(y).unwrap() - exact).abs() < 1e-5, "y={y}");
        }
        assert!(g.complementary_mass(31.0).is_err());
    }

    #[test]
    fn zeta_integrals_agree() {
        let spec = KernelSpec::exponential(0.5, 1.0).unwrap();
        let closed = propagator_closed_form(&spec, 1.0, 1.0, 1e-3, 30.0, None).unwrap();
        let grid = propagator_from_resolvent(&compute_resolvent(&spec, 1e-3, 30.0).unwrap(), 1.0, 1.0).unwrap();
        let (a, b) = (closed.integrator(), grid.integrator());
        for &x in &[0.0_f64, 0.4, 3.3, 29.0] {
            let exact = x + 1.0 - (-x).exp();
            assert!((a.integral(x).unwrap() - exact).abs() < 1e-12);
            assert!((b.integral(x).unwrap() - exact).abs() < 1e-5);
        }
        assert!(b.integral(31.0).is_err());
    }

    #[test]
    fn tables_carry_metadata() {
        let g = compute_resolvent(&exp_half(), 0.5, 5.0).unwrap();
        let t = g.to_table().unwrap();
        assert_eq!(t.rows.len(), 11);
        assert_eq!(t.header["step"], 0.5);
        let z = propagator_from_resolvent(&g, 1.0, 1.0).unwrap().to_table().unwrap();
        assert_eq!(z.header["construction"], "resolvent");
    }
}
