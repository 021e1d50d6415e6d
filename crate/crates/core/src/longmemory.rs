//! Covariance of order-flow increments, its near-critical fractional
//! Brownian limit and the long-memory exponent `γ = 1 − 2α`.
//!
//! For a stationary Hawkes process with kernel `φ` and baseline `μ`, the
//! increments `N_{t+h} − N_t` have covariance with Fourier transform
//! `Ĉ(z, h) = h m ĝ^h(z) / |1 − φ̂(z)|²`, where `m = μ/(1 − ∫φ)` and
//! `ĝ^h(z) = 2(1 − cos zh)/(h z²)` transforms the triangle `(1 − |τ|/h)⁺`.
//! The Poisson part `m (h − |τ|)⁺` is inverted exactly and only the remainder
//! `h m ĝ^h (|1 − φ̂|^{-2} − 1)` goes through numerical quadrature.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, NearCriticalFamily};
use crate::numerics::quad::{gauss_legendre, integrate, QuadOptions};
use crate::numerics::special::{gamma, theta};
use crate::numerics::stats::{compensated_sum, loglog_fit, MeanEstimate};
use crate::output::Table;
use crate::simulation::EventStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceProvenance {
    /// Exact triangle covariance of Poisson increments.
    Poisson,
    TheoreticalFourier,
    Empirical,
    FbmLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceCurve {
    /// Increment length `h`.
    pub h: f64,
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errs: Option<Vec<f64>>,
    pub provenance: CovarianceProvenance,
    /// Frequency cutoff `Z` of a Fourier inversion.
    pub cutoff: Option<f64>,
    /// Quadrature nodes of a Fourier inversion.
    pub nodes: Option<usize>,
    /// Number of batches behind empirical standard errors.
    pub batches: Option<usize>,
}

impl CovarianceCurve {
    fn exact(h: f64, lags: &[f64], values: Vec<f64>, provenance: CovarianceProvenance) -> Self {
        CovarianceCurve {
            h,
            lags: lags.to_vec(),
            values,
            std_errs: None,
            provenance,
            cutoff: None,
            nodes: None,
            batches: None,
        }
    }

    /// Pointwise `|self − other| / SE` using the standard errors of both curves.
    pub fn z_scores(&self, other: &CovarianceCurve) -> Result<Vec<f64>> {
        if self.lags != other.lags {
            return Err(Error::invalid("covariance curves are sampled on different lags"));
        }
        let se = |c: &CovarianceCurve, i: usize| c.std_errs.as_ref().map_or(0.0, |s| s[i]);
        (0..self.lags.len())
            .map(|i| {
                let s = (se(self, i).powi(2) + se(other, i).powi(2)).sqrt();
                if s == 0.0 {
                    Err(Error::invalid("z-scores need at least one curve with standard errors"))
                } else {
                    Ok((self.values[i] - other.values[i]).abs() / s)
                }
            })
            .collect()
    }

    pub fn to_table<C: Serialize>(&self, config: &C) -> Result<Table> {
        let header = json!({
            "kind": "covariance",
            "h": self.h,
            "provenance": self.provenance,
            "cutoff": self.cutoff,
            "nodes": self.nodes,
            "batches": self.batches,
            "config": config,
        });
        let mut t = Table::new(&header, &["tau", "C", "SE"])?;
        for (i, (x, v)) in self.lags.iter().zip(&self.values).enumerate() {
            let se = self.std_errs.as_ref().map(|s| s[i].to_string()).unwrap_or_default();
            t.push_row(vec![x.to_string(), v.to_string(), se]);
        }
        Ok(t)
    }
}

/// `max_i |a_i − b_i|` over a shared lag grid.
pub fn sup_distance(a: &CovarianceCurve, b: &CovarianceCurve) -> Result<f64> {
    if a.lags != b.lags {
        return Err(Error::invalid("covariance curves are sampled on different lags"));
    }
    Ok(a.values.iter().zip(&b.values).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())))
}

fn check_h(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("increment length must be positive, got {h}")));
    }
    Ok(())
}

/// `ĝ^h(z) = h (sin(zh/2)/(zh/2))²`.
pub fn triangle_transform(h: f64, z: f64) -> f64 {
    let x = 0.5 * z * h;
    if x.abs() < 1e-4 {
        h * (1.0 - x * x / 3.0)
    } else {
        h * (x.sin() / x).powi(2)
    }
}

/// `m (h − |τ|)⁺` with `m` the stationary intensity.
pub fn poisson_covariance(rate: f64, h: f64, lags: &[f64]) -> Result<CovarianceCurve> {
    check_h(h)?;
    if !(rate >= 0.0) {
        return Err(Error::invalid(format!("intensity must be nonnegative, got {rate}")));
    }
    let values = lags.iter().map(|t| rate * (h - t.abs()).max(0.0)).collect();
    Ok(CovarianceCurve::exact(h, lags, values, CovarianceProvenance::Poisson))
}

/// `Ĉ(z, h) = h m ĝ^h(z)/|1 − φ̂(z)|²`.
pub fn spectral_density(spec: &KernelSpec, mu: f64, h: f64, z: f64) -> Result<f64> {
    let m = stationary_intensity(spec, mu)?;
    let d = Complex64::new(1.0, 0.0) - spec.fourier(z)?;
    Ok(h * m * triangle_transform(h, z) / d.norm_sqr())
}

fn stationary_intensity(spec: &KernelSpec, mu: f64) -> Result<f64> {
    spec.validate()?;
    let a = spec.norm();
    if a >= 1.0 {
        return Err(Error::Criticality { norm: a, context: "increment covariance needs a subcritical kernel".into() });
    }
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::invalid(format!("baseline intensity must be nonnegative, got {mu}")));
    }
    Ok(mu / (1.0 - a))
}

/// Controls of the Fourier inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierOptions {
    /// The cutoff `Z` is raised until the bound on the discarded integral is
    /// below `tol · m h`.
    pub tol: f64,
    /// Gauss–Legendre order per panel.
    pub order: usize,
    /// Largest phase `(τ_max + h)·width` swept by one uniform panel.
    pub radians_per_panel: f64,
    pub max_nodes: usize,
}

impl Default for FourierOptions {
    fn default() -> Self {
        FourierOptions { tol: 1e-8, order: 16, radians_per_panel: 4.0, max_nodes: 40_000_000 }
    }
}

/// Quadrature of `(1/π)∫_0^∞ Ĉ_rem(z) cos(τz) dz` with node amplitudes that
/// do not depend on the lag.
struct SpectralRemainder {
    nodes: Vec<f64>,
    amplitudes: Vec<f64>,
    cutoff: f64,
}

const GEOMETRIC_PANELS: i32 = 80;

impl SpectralRemainder {
    fn build(spec: &KernelSpec, m: f64, h: f64, max_lag: f64, opts: FourierOptions) -> Result<Self> {
        if spec.norm() == 0.0 || m == 0.0 {
            return Ok(SpectralRemainder { nodes: vec![], amplitudes: vec![], cutoff: 0.0 });
        }
        let remainder = |z: f64| -> Result<f64> {
            let d = Complex64::new(1.0, 0.0) - spec.fourier(z)?;
            Ok(1.0 / d.norm_sqr() - 1.0)
        };
        let omega = max_lag + h;
        let timescale = spec.e_folding_time();
        let split = (1.0 / omega).min(1.0 / timescale);
        let width = (opts.radians_per_panel / omega).min(2.0 / timescale);

        // |Ĉ_rem| ≤ 2 m |R(z)|/z², so the discarded part is below (2m/π) sup|R|/Z.
        let tail_bound = |z: f64| -> Result<f64> {
            let mut sup = 0.0_f64;
            for j in 0..9 {
                sup = sup.max(remainder(z * 2f64.powf(j as f64 / 2.0))?.abs());
            }
            Ok(2.0 * m * sup / (PI * z))
        };
        let target = opts.tol * m * h;
        let mut cutoff = 8.0 * split.max(1.0 / timescale);
        let mut doublings = 0;
        while tail_bound(cutoff)? > target {
            cutoff *= 2.0;
            doublings += 1;
            if doublings > 80 {
                return Err(Error::numerical("spectral remainder does not decay"));
            }
        }
        let uniform = ((cutoff - split) / width).ceil().max(1.0) as usize;
        let total = (uniform + GEOMETRIC_PANELS as usize + 1) * opts.order;
        if total > opts.max_nodes {
            return Err(Error::numerical(format!(
                "frequency cutoff {cutoff:.3e} needs {total} nodes, above the limit {}",
                opts.max_nodes
            )));
        }
        let mut edges = Vec::with_capacity(uniform + GEOMETRIC_PANELS as usize + 2);
        edges.push(0.0);
        for k in (0..=GEOMETRIC_PANELS).rev() {
            edges.push(split * 2f64.powi(-k));
        }
        let step = (cutoff - split) / uniform as f64;
        for k in 1..=uniform {
            edges.push(split + step * k as f64);
        }
        let (x, w) = gauss_legendre(opts.order);
        let mut nodes = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for e in edges.windows(2) {
            let (mid, half) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(mid + half * xi);
                weights.push(half * wi);
            }
        }
        let amplitudes = nodes
            .par_iter()
            .zip(&weights)
            .map(|(&z, &w)| Ok(w * h * m * triangle_transform(h, z) * remainder(z)? / PI))
            .collect::<Result<Vec<f64>>>()?;
        Ok(SpectralRemainder { nodes, amplitudes, cutoff })
    }

    fn at(&self, lag: f64) -> f64 {
        compensated_sum(self.nodes.iter().zip(&self.amplitudes).map(|(z, a)| a * (lag * z).cos()))
    }
}

/// Covariance of `h`-increments by inversion of `Ĉ(z, h)`.
pub fn theoretical_covariance(spec: &KernelSpec, mu: f64, h: f64, lags: &[f64]) -> Result<CovarianceCurve> {
    theoretical_covariance_with(spec, mu, h, lags, FourierOptions::default())
}

pub fn theoretical_covariance_with(
    spec: &KernelSpec,
    mu: f64,
    h: f64,
    lags: &[f64],
    opts: FourierOptions,
) -> Result<CovarianceCurve> {
    check_h(h)?;
    let m = stationary_intensity(spec, mu)?;
    let max_lag = lags.iter().fold(0.0_f64, |a, t| a.max(t.abs()));
    if !max_lag.is_finite() {
        return Err(Error::invalid("lags must be finite"));
    }
    let rem = SpectralRemainder::build(spec, m, h, max_lag, opts)?;
    let values = lags.par_iter().map(|t| m * (h - t.abs()).max(0.0) + rem.at(t.abs())).collect();
    Ok(CovarianceCurve {
        h,
        lags: lags.to_vec(),
        values,
        std_errs: None,
        provenance: CovarianceProvenance::TheoreticalFourier,
        cutoff: Some(rem.cutoff),
        nodes: Some(rem.nodes.len()),
        batches: None,
    })
}

/// Maximum relative error of the forward transform of the inverted
/// covariance against `Ĉ(z, h)` at the given frequencies. The inverted curve
/// is sampled on `[0, max_lag]`, which must cover its decay.
pub fn fourier_self_test(spec: &KernelSpec, mu: f64, h: f64, freqs: &[f64], max_lag: f64) -> Result<f64> {
    check_h(h)?;
    let m = stationary_intensity(spec, mu)?;
    let order = 16;
    let (x, w) = gauss_legendre(order);
    let width = 0.5 * h;
    let panels = (max_lag / width).ceil() as usize;
    let mut lags = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for k in 0..panels {
        let mid = (k as f64 + 0.5) * width;
        for (xi, wi) in x.iter().zip(&w) {
            lags.push(mid + 0.5 * width * xi);
            weights.push(0.5 * width * wi);
        }
    }
    let rem = SpectralRemainder::build(spec, m, h, max_lag, FourierOptions::default())?;
    let values: Vec<f64> = lags.par_iter().map(|&t| rem.at(t)).collect();
    let mut worst = 0.0_f64;
    for &z in freqs {
        let forward =
            2.0 * compensated_sum(lags.iter().zip(&weights).zip(&values).map(|((t, w), v)| w * v * (z * t).cos()));
        let d = Complex64::new(1.0, 0.0) - spec.fourier(z)?;
        let g = h * m * triangle_transform(h, z);
        let exact_rem = g * (1.0 / d.norm_sqr() - 1.0);
        worst = worst.max((forward - exact_rem).abs() / (g / d.norm_sqr()));
    }
    Ok(worst)
}

/// `A_T² C^{N,T}(Tτ, Th)`, the covariance of `h`-increments of `X^T = A_T N^T_{T·}`.
pub fn rescaled_covariance(
    family: &NearCriticalFamily,
    h: f64,
    lags: &[f64],
    opts: FourierOptions,
) -> Result<CovarianceCurve> {
    let t = family.scale;
    let raw: Vec<f64> = lags.iter().map(|x| x * t).collect();
    let c = theoretical_covariance_with(&family.kernel()?, family.exogenous_intensity, h * t, &raw, opts)?;
    let a2 = family.normalizer * family.normalizer;
    Ok(CovarianceCurve {
        h,
        lags: lags.to_vec(),
        values: c.values.iter().map(|v| v * a2).collect(),
        ..c
    })
}

/// Options of the empirical estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalOptions {
    /// Spacing of overlapping window starts, as a fraction of `h`.
    pub step_fraction: f64,
    /// Batch length in units of `τ + h`.
    pub batch_factor: f64,
    /// Minimum number of disjoint `(τ_max + h)`-windows in the data.
    pub min_windows: f64,
}

impl Default for EmpiricalOptions {
    fn default() -> Self {
        EmpiricalOptions { step_fraction: 0.25, batch_factor: 50.0, min_windows: 1000.0 }
    }
}

/// Autocovariance of `h`-increments pooled over independent streams.
pub fn empirical_covariance(streams: &[&EventStream], h: f64, lags: &[f64]) -> Result<CovarianceCurve> {
    let pairs: Vec<(&[f64], &[f64], f64)> =
        streams.iter().map(|s| (s.times.as_slice(), s.times.as_slice(), s.horizon)).collect();
    empirical_pairs(&pairs, h, lags, EmpiricalOptions::default())
}

/// Covariance between `h`-increments of the first stream and lagged
/// `h`-increments of the second, pooled over independent pairs.
pub fn empirical_cross_covariance(
    pairs: &[(&EventStream, &EventStream)],
    h: f64,
    lags: &[f64],
) -> Result<CovarianceCurve> {
    let mut raw = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        if a.horizon != b.horizon {
            return Err(Error::invalid("paired streams must share a horizon"));
        }
        raw.push((a.times.as_slice(), b.times.as_slice(), a.horizon));
    }
    empirical_pairs(&raw, h, lags, EmpiricalOptions::default())
}

pub fn empirical_covariance_with(
    streams: &[&EventStream],
    h: f64,
    lags: &[f64],
    opts: EmpiricalOptions,
) -> Result<CovarianceCurve> {
    let pairs: Vec<(&[f64], &[f64], f64)> =
        streams.iter().map(|s| (s.times.as_slice(), s.times.as_slice(), s.horizon)).collect();
    empirical_pairs(&pairs, h, lags, opts)
}

#[derive(Default, Clone, Copy)]
struct Batch {
    n: f64,
    xy: f64,
    x: f64,
    y: f64,
}

/// `N(t)` for nondecreasing query times.
struct Cursor<'a> {
    times: &'a [f64],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(times: &'a [f64]) -> Self {
        Cursor { times, pos: 0 }
    }

    fn count(&mut self, t: f64) -> f64 {
        while self.pos < self.times.len() && self.times[self.pos] <= t {
            self.pos += 1;
        }
        self.pos as f64
    }
}

fn empirical_pairs(data: &[(&[f64], &[f64], f64)], h: f64, lags: &[f64], opts: EmpiricalOptions) -> Result<CovarianceCurve> {
    check_h(h)?;
    if lags.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::invalid("empirical lags must be finite and nonnegative"));
    }
    let max_lag = lags.iter().fold(0.0_f64, |a, &t| a.max(t));
    let total: f64 = data.iter().map(|d| d.2).sum();
    if total < opts.min_windows * (max_lag + h) {
        return Err(Error::Precondition(format!(
            "{total} time units hold fewer than {} disjoint windows of length {}",
            opts.min_windows,
            max_lag + h
        )));
    }
    let step = opts.step_fraction * h;
    let per_lag = lags
        .par_iter()
        .map(|&lag| {
            let batch_len = opts.batch_factor * (lag + h);
            let mut batches: Vec<Batch> = Vec::new();
            for &(xs, ys, horizon) in data {
                let span = horizon - lag - h;
                if span < 0.0 {
                    continue;
                }
                let nb = ((span / batch_len).floor() as usize).max(1);
                let offset = batches.len();
                batches.resize(offset + nb, Batch::default());
                let windows = (span / step).floor() as usize + 1;
                let (mut x0, mut x1) = (Cursor::new(xs), Cursor::new(xs));
                let (mut y0, mut y1) = (Cursor::new(ys), Cursor::new(ys));
                for j in 0..windows {
                    let t = j as f64 * step;
                    let x = x1.count(t + h) - x0.count(t);
                    let y = y1.count(t + lag + h) - y0.count(t + lag);
                    let b = &mut batches[offset + ((t / batch_len) as usize).min(nb - 1)];
                    b.n += 1.0;
                    b.xy += x * y;
                    b.x += x;
                    b.y += y;
                }
            }
            let n = compensated_sum(batches.iter().map(|b| b.n));
            let mx = compensated_sum(batches.iter().map(|b| b.x)) / n;
            let my = compensated_sum(batches.iter().map(|b| b.y)) / n;
            let pxy = compensated_sum(batches.iter().map(|b| b.xy)) / n;
            // Linearization of P − x̄ȳ around the pooled means, per batch.
            let influence: Vec<f64> =
                batches.iter().map(|b| (b.xy - my * b.x - mx * b.y) / b.n).collect();
            let se = MeanEstimate::from_samples(&influence).std_err;
            (pxy - mx * my, se, batches.len())
        })
        .collect::<Vec<_>>();
    let batches = per_lag.iter().map(|p| p.2).min();
    if batches.is_some_and(|b| b < 2) {
        return Err(Error::Precondition("standard errors need at least two batches".into()));
    }
    Ok(CovarianceCurve {
        h,
        lags: lags.to_vec(),
        values: per_lag.iter().map(|p| p.0).collect(),
        std_errs: Some(per_lag.iter().map(|p| p.1).collect()),
        provenance: CovarianceProvenance::Empirical,
        cutoff: None,
        nodes: None,
        batches,
    })
}

/// `θ(x)` through the Gamma identity; see [`theta_by_quadrature`] for an
/// independent evaluation.
pub fn theta_constant(x: f64) -> Result<Complex64> {
    theta(x)
}

/// `θ(x)` from its defining integral: the power series of `e^{iu}` on
/// `[0, 1]` and, on `[1, ∞)`, three integrations by parts followed by
/// adaptive quadrature of the remaining absolutely convergent integral.
pub fn theta_by_quadrature(x: f64) -> Result<Complex64> {
    let lower = x > 0.0 && x < 1.0;
    let upper = x > 1.0 && x < 2.0;
    if !(lower || upper) {
        return Err(Error::domain(format!("theta(x) defined for x in (0,1) or (1,2), got {x}")));
    }
    let i = Complex64::i();
    // ∫_0^1 (e^{iu} − [x>1]) u^{-x} du = Σ_{k ≥ k0} i^k/(k!(k+1−x))
    let mut head = Complex64::new(0.0, 0.0);
    let mut ik = Complex64::new(1.0, 0.0);
    let mut fact = 1.0;
    for k in 0..40 {
        if k > 0 {
            ik *= i;
            fact *= k as f64;
        }
        if k == 0 && upper {
            continue;
        }
        head += ik / (fact * (k as f64 + 1.0 - x));
    }
    // I(p) = ∫_1^∞ e^{iu} u^{-p} du = i e^{i} − i p I(p+1)
    let ei = Complex64::new(0.0, 1.0).exp();
    let depth = 3;
    let opts = QuadOptions { abs_tol: 1e-13, rel_tol: 1e-12, max_intervals: 200_000 };
    let limit = 4000.0 * PI;
    let p_last = x + depth as f64;
    let mut rest = integrate(|u: f64| Complex64::from_polar(u.powf(-p_last), u), 1.0, limit, opts)?.value;
    // Leading asymptotic term of ∫_L^∞ e^{iu} u^{-p} du.
    rest += i * Complex64::from_polar(limit.powf(-p_last), limit);
    for d in (0..depth).rev() {
        let p = x + d as f64;
        rest = i * ei - i * p * rest;
    }
    let mut total = head + rest;
    if upper {
        total -= 1.0 / (x - 1.0);
    }
    Ok(total)
}

/// The displayed constant
/// `K = h C_μ / (2 Re θ(1−2α) |θ(1+α)|² c^{2α} α²)` multiplying
/// `g^h ∗ |t|^{2α−1}` in the limit covariance.
pub fn limit_constant_k(c_mu: f64, alpha: f64, scale: f64, h: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let re = theta(1.0 - 2.0 * alpha)?.re;
    let m = theta(1.0 + alpha)?.norm_sqr();
    Ok(h * c_mu / (2.0 * re * m * scale.powf(2.0 * alpha) * alpha * alpha))
}

/// Prefactor of `|τ+h|^{2H} + |τ−h|^{2H} − 2|τ|^{2H}` in the limit covariance.
///
/// Evaluating `K g^h ∗ |t|^{2α−1}` gives this form with prefactor
/// `K / (h · 2α(1+2α))`, which is independent of `h`.
pub fn fbm_constant(c_mu: f64, alpha: f64, scale: f64) -> Result<f64> {
    Ok(limit_constant_k(c_mu, alpha, scale, 1.0)? / (2.0 * alpha * (1.0 + 2.0 * alpha)))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::domain(format!("tail exponent must lie in (0, 1/2), got {alpha}")));
    }
    Ok(())
}

/// `K(|τ+h|^{2H} + |τ−h|^{2H} − 2|τ|^{2H})` with `H = 1/2 + α`.
pub fn fbm_limit_covariance(k: f64, alpha: f64, h: f64, lags: &[f64]) -> Result<CovarianceCurve> {
    check_alpha(alpha)?;
    check_h(h)?;
    let two_h = 1.0 + 2.0 * alpha;
    let values = lags
        .iter()
        .map(|t| k * ((t + h).abs().powf(two_h) + (t - h).abs().powf(two_h) - 2.0 * t.abs().powf(two_h)))
        .collect();
    Ok(CovarianceCurve::exact(h, lags, values, CovarianceProvenance::FbmLimit))
}

/// One member of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub scale: f64,
    pub branching: f64,
    /// `T (1 − a_T)^{1/α}`.
    pub scale_ratio: f64,
    pub sup_distance: f64,
    /// `A_T² C^{N,T}(Tτ, Th)` on the study's lags.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub h: f64,
    pub lags: Vec<f64>,
    pub fbm_constant: f64,
    /// The fBm limit on the study's lags.
    pub limit: Vec<f64>,
    pub rows: Vec<ConvergenceRow>,
    /// Whether the distances decrease strictly along the sequence.
    pub decreasing: bool,
}

/// Sup distances between `A_T² C^{N,T}(T·, Th)` and the fBm limit along a
/// sequence `(T, a_T)`. The sequence must satisfy the scaling assumption:
/// `T` increasing and `T(1 − a_T)^{1/α}` decreasing.
pub fn convergence_study(
    base: &KernelSpec,
    c_mu: f64,
    h: f64,
    lags: &[f64],
    sequence: &[(f64, f64)],
) -> Result<ConvergenceStudy> {
    let families = families(base, c_mu, sequence)?;
    for w in families.windows(2) {
        if !(w[1].scale > w[0].scale && w[1].scale_ratio() < w[0].scale_ratio()) {
            return Err(Error::Config(format!(
                "sequence violates T(1 − a_T)^(1/α) → 0: {} then {}",
                w[0].scale_ratio(),
                w[1].scale_ratio()
            )));
        }
    }
    convergence_distances(&families, c_mu, h, lags)
}

/// The distances of [`convergence_study`] without the admissibility check.
pub fn convergence_distances(
    families: &[NearCriticalFamily],
    c_mu: f64,
    h: f64,
    lags: &[f64],
) -> Result<ConvergenceStudy> {
    let first = families.first().ok_or_else(|| Error::invalid("empty (T, a_T) sequence"))?;
    let alpha = first.alpha();
    let k = fbm_constant(c_mu, alpha, first.tail.scale)?;
    let limit = fbm_limit_covariance(k, alpha, h, lags)?;
    let rows = families
        .iter()
        .map(|f| {
            let c = rescaled_covariance(f, h, lags, FourierOptions::default())?;
            Ok(ConvergenceRow {
                scale: f.scale,
                branching: f.branching,
                scale_ratio: f.scale_ratio(),
                sup_distance: sup_distance(&c, &limit)?,
                values: c.values,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let decreasing = rows.windows(2).all(|w| w[1].sup_distance < w[0].sup_distance);
    Ok(ConvergenceStudy { h, lags: lags.to_vec(), fbm_constant: k, limit: limit.values, rows, decreasing })
}

pub fn families(base: &KernelSpec, c_mu: f64, sequence: &[(f64, f64)]) -> Result<Vec<NearCriticalFamily>> {
    sequence.iter().map(|&(t, a)| crate::kernel::make_near_critical(base, t, a, c_mu)).collect()
}

/// `a_T` with `T(1 − a_T)^{1/α} = ratio`.
pub fn branching_for_ratio(scale: f64, alpha: f64, ratio: f64) -> f64 {
    1.0 - (ratio / scale).powf(alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaFit {
    pub gamma: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub points: usize,
}

/// `γ̂ = −slope` of `ln C(τ, h)` against `ln τ` over lags in the window.
pub fn estimate_gamma(curve: &CovarianceCurve, window: (f64, f64)) -> Result<GammaFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid(format!("fit window must satisfy 0 < τ_min < τ_max, got {window:?}")));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve
        .lags
        .iter()
        .zip(&curve.values)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(t, v)| (*t, *v))
        .unzip();
    if let Some(v) = ys.iter().find(|v| **v <= 0.0) {
        return Err(Error::domain(format!("γ fit needs positive covariance, got {v}")));
    }
    let f = loglog_fit(&xs, &ys)?;
    Ok(GammaFit { gamma: -f.slope, amplitude: f.amplitude(), r_squared: f.r_squared, window, points: f.points })
}

/// `Re θ(1 − 2α)` evaluated for the sign requirement of `K`.
pub fn theta_real_part(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(theta(1.0 - 2.0 * alpha)?.re)
}

/// `Γ(1/2) e^{iπ/4}`, the value of `θ(1/2)`.
pub fn theta_half() -> Complex64 {
    gamma(0.5) * Complex64::from_polar(1.0, PI / 4.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{simulate_market_replica, MarketConfig};

    fn exp_half() -> KernelSpec {
        KernelSpec::exponential(0.5, 1.0).unwrap()
    }

    #[test]
    fn triangle_transform_matches_quadrature() {
        for (h, z) in [(1.0, 0.0), (1.0, 0.7), (2.5, 3.1), (0.3, 40.0)] {
            let q = integrate(|t: f64| 2.0 * (1.0 - t / h) * (z * t).cos(), 0.0, h, QuadOptions::default())
                .unwrap()
                .value;
            assert!((triangle_transform(h, z) - q).abs() < 1e-12, "h={h} z={z}");
        }
    }

    #[test]
    fn poisson_triangle() {
        let lags = [0.0, 0.5, 1.0, 2.0, -0.5];
        let c = theoretical_covariance(&KernelSpec::zero(), 2.0, 1.0, &lags).unwrap();
        let p = poisson_covariance(2.0, 1.0, &lags).unwrap();
        assert!(sup_distance(&c, &p).unwrap() < 1e-12);
        assert_eq!(p.values, vec![2.0, 1.0, 0.0, 0.0, 1.0]);
    }

    // Oracle: C(τ,h) = ∫_0^h∫_0^h c(τ+u−v) du dv + m(h−|τ|)⁺ with the
    // exponential-kernel covariance density c(t) = m a b (2−a)/(2(1−a)) e^{−b(1−a)|t|}.
    fn exponential_oracle(a: f64, b: f64, mu: f64, h: f64, tau: f64) -> f64 {
        let m = mu / (1.0 - a);
        let beta = b * (1.0 - a);
        let amp = m * a * b * (2.0 - a) / (2.0 * (1.0 - a));
        let inner = |s: f64| {
            // ∫_0^h∫_0^h f(τ+u−v) = ∫_{-h}^{h} (h−|s|) f(τ+s) ds
            (h - s.abs()) * amp * (-beta * (tau + s).abs()).exp()
        };
        let opts = QuadOptions::with_tol(1e-14, 1e-13);
        let mut v = 0.0;
        let mut edges = vec![-h, 0.0, h];
        if tau.abs() < h {
            edges.push(-tau);
        }
        edges.sort_by(f64::total_cmp);
        for e in edges.windows(2) {
            v += integrate(inner, e[0], e[1], opts).unwrap().value;
        }
        v + m * (h - tau.abs()).max(0.0)
    }

    #[test]
    fn exponential_covariance_matches_oracle() {
        let lags = [0.0, 0.5, 1.0, 2.0, 5.0, 12.0];
        let c = theoretical_covariance(&exp_half(), 1.0, 1.0, &lags).unwrap();
        for (t, v) in lags.iter().zip(&c.values) {
            let o = exponential_oracle(0.5, 1.0, 1.0, 1.0, *t);
            assert!((v - o).abs() < 1e-7 * o.abs().max(1.0), "τ={t}: {v} vs {o}");
        }
        let sym = theoretical_covariance(&exp_half(), 1.0, 1.0, &[-2.0, 2.0]).unwrap();
        assert_eq!(sym.values[0], sym.values[1]);
    }

    #[test]
    fn forward_transform_reproduces_spectrum() {
        let err = fourier_self_test(&exp_half(), 1.0, 1.0, &[0.0, 0.3, 1.0, 2.5, 4.0], 60.0).unwrap();
        assert!(err < 1e-4, "{err}");
        let err = fourier_self_test(&KernelSpec::exponential(0.8, 2.0).unwrap(), 0.5, 2.0, &[0.0, 0.7, 2.0], 80.0).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn empirical_matches_theory_and_poisson() {
        let lags = [0.0, 1.0, 5.0];
        let mut cfg = MarketConfig::new(exp_half(), 1.0, 2000.0, 5);
        cfg.burn_in = Some(40.0);
        let paths: Vec<_> = (0..20).map(|r| simulate_market_replica(&cfg, r).unwrap()).collect();
        let streams: Vec<&EventStream> = paths.iter().map(|m| &m.buy).collect();
        let emp = empirical_covariance(&streams, 1.0, &lags).unwrap();
        let th = theoretical_covariance(&exp_half(), 1.0, 1.0, &lags).unwrap();
        for z in emp.z_scores(&th).unwrap() {
            assert!(z < 3.0, "{z}");
        }
        let pairs: Vec<_> = paths.iter().map(|m| (&m.buy, &m.sell)).collect();
        let cross = empirical_cross_covariance(&pairs, 1.0, &lags).unwrap();
        let zero = CovarianceCurve::exact(1.0, &lags, vec![0.0; 3], CovarianceProvenance::Poisson);
        for z in cross.z_scores(&zero).unwrap() {
            assert!(z < 3.0, "{z}");
        }
        let short = &streams[..1];
        let too_long = [0.0, 100.0];
        assert!(matches!(empirical_covariance(short, 1.0, &too_long), Err(Error::Precondition(_))));
    }

    #[test]
    fn theta_two_ways() {
        let half = theta_by_quadrature(0.5).unwrap();
        assert!((half - theta_half()).norm() < 1e-6);
        assert!((half.re - 1.2533141373155).abs() < 1e-6 && (half.im - 1.2533141373155).abs() < 1e-6);
        for x in [0.05, 0.2, 0.35, 0.8, 0.95, 1.05, 1.25, 1.4, 1.49, 1.9] {
            let a = theta_constant(x).unwrap();
            let b = theta_by_quadrature(x).unwrap();
            assert!((a - b).norm() < 1e-6 * a.norm().max(1.0), "x={x}: {a} vs {b}");
        }
        for alpha in [0.01, 0.1, 0.2, 0.3, 0.4, 0.49] {
            assert!(theta_by_quadrature(1.0 - 2.0 * alpha).unwrap().re > 0.0);
            assert!(theta_real_part(alpha).unwrap() > 0.0);
        }
        // |θ(1+α)| is unchanged by the conjugate branch of the (−z) side.
        let t = theta_constant(1.4).unwrap();
        assert_eq!(t.norm_sqr(), t.conj().norm_sqr());
        assert!(theta_constant(1.0).is_err() && theta_by_quadrature(0.0).is_err());
    }

    #[test]
    fn limit_constant_structure() {
        let k = limit_constant_k(1.0, 0.4, 1.0, 1.0).unwrap();
        // Regression value, cross-validated by the two θ evaluations above.
        let re = theta_by_quadrature(0.2).unwrap().re;
        let m = theta_by_quadrature(1.4).unwrap().norm_sqr();
        assert!((k - 1.0 / (2.0 * re * m * 0.16)).abs() < 1e-6 * k);
        assert!((k - 0.626_682_3).abs() < 1e-6, "{k}");
        assert!((limit_constant_k(2.0, 0.4, 1.0, 3.0).unwrap() - 6.0 * k).abs() < 1e-12);
        assert!((limit_constant_k(1.0, 0.4, 2.0, 1.0).unwrap() - k * 2f64.powf(-0.8)).abs() < 1e-12);
        assert!((fbm_constant(1.0, 0.4, 1.0).unwrap() - k / (0.8 * 1.8)).abs() < 1e-12);
    }

    #[test]
    fn fbm_limit_shape() {
        let k = 0.3;
        let alpha = 0.4;
        let c = fbm_limit_covariance(k, alpha, 2.0, &[0.0]).unwrap();
        assert!((c.values[0] - 2.0 * k * 2f64.powf(1.8)).abs() < 1e-12);
        let lags = [3.0, 7.0, 20.0];
        let a = fbm_limit_covariance(k, alpha, 1.0, &lags).unwrap();
        let scaled: Vec<f64> = lags.iter().map(|t| 2.5 * t).collect();
        let b = fbm_limit_covariance(k, alpha, 2.5, &scaled).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((y - 2.5f64.powf(1.8) * x).abs() < 1e-10 * y);
        }
        let far = fbm_limit_covariance(k, alpha, 1.0, &[1e4]).unwrap();
        let asym = k * 1.8 * 0.8 * 1e4f64.powf(-0.2);
        assert!((far.values[0] / asym - 1.0).abs() < 1e-6);
        let lags: Vec<f64> = (0..=40).map(|i| 10f64.powf(1.0 + 2.0 * i as f64 / 40.0)).collect();
        let g = estimate_gamma(&fbm_limit_covariance(k, alpha, 1.0, &lags).unwrap(), (10.0, 1000.0)).unwrap();
        assert!((g.gamma - 0.2).abs() < 0.02);
    }

    #[test]
    fn gamma_on_exact_power() {
        let lags: Vec<f64> = (1..=30).map(|i| i as f64).collect();
        let c = CovarianceCurve::exact(1.0, &lags, lags.iter().map(|t| 0.7 * t.powf(-0.2)).collect(), CovarianceProvenance::FbmLimit);
        let g = estimate_gamma(&c, (1.0, 30.0)).unwrap();
        assert!((g.gamma - 0.2).abs() < 1e-10 && (g.r_squared - 1.0).abs() < 1e-12);
        let mut bad = c.clone();
        bad.values[3] = -1.0;
        assert!(matches!(estimate_gamma(&bad, (1.0, 30.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn rescaled_covariance_converges() {
        let base = KernelSpec::shifted_power_law(1.0, 0.4, 1.0).unwrap();
        let lags = [0.0, 0.5, 1.0, 2.0, 4.0];
        let seq: Vec<(f64, f64)> = [(1e2, 0.1), (1e3, 0.03), (1e4, 0.01)]
            .iter()
            .map(|&(t, r)| (t, branching_for_ratio(t, 0.4, r)))
            .collect();
        let study = convergence_study(&base, 1.0, 1.0, &lags, &seq).unwrap();
        assert!(study.decreasing, "{:?}", study.rows);
        let bad: Vec<(f64, f64)> = [1e2, 1e3, 1e4].iter().map(|&t| (t, 0.99)).collect();
        assert!(matches!(convergence_study(&base, 1.0, 1.0, &lags, &bad), Err(Error::Config(_))));
    }
}
