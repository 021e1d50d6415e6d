//! Hawkes excitation kernels φ with their integrals and Fourier transforms.
//!
//! Offspring delays are sampled from the normalized kernel. The near-critical
//! rescaled family is `φ^T = a_T Φ`.
//!
//! Three families are supported:
//!
//! * `exponential`: `φ(t) = a b e^{-bt}`;
//! * `shifted_power_law`: `φ(t) = a α c^α / (t + c)^{1+α}`, a density scaled
//!   by its branching ratio `a` whose tail is exactly `a α c^α / t^{1+α}`;
//! * `tabulated`: linear interpolation between nodes, extrapolated past the
//!   last node by a power law fitted on the last decade of the grid.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::quad::{integrate, QuadOptions};
use crate::numerics::special::{expint_e, theta};

/// Tolerance used when checking that a base kernel integrates to one.
pub const UNIT_NORM_TOL: f64 = 1e-6;

/// Parametric description of an excitation kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    Exponential {
        /// Branching ratio `a = ∫φ`.
        norm: f64,
        /// Decay rate `b` (inverse time).
        rate: f64,
    },
    ShiftedPowerLaw {
        norm: f64,
        /// Tail exponent α.
        alpha: f64,
        /// Time scale `c`.
        scale: f64,
    },
    Tabulated(TabulatedKernel),
}

/// Asymptotic power tail `φ(x) ~ a α c^α / x^{1+α}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTail {
    pub alpha: f64,
    pub scale: f64,
}

impl KernelSpec {
    pub fn exponential(norm: f64, rate: f64) -> Result<Self> {
        let k = KernelSpec::Exponential { norm, rate };
        k.validate()?;
        Ok(k)
    }

    pub fn shifted_power_law(norm: f64, alpha: f64, scale: f64) -> Result<Self> {
        let k = KernelSpec::ShiftedPowerLaw { norm, alpha, scale };
        k.validate()?;
        Ok(k)
    }

    /// The identically-zero kernel (a Poisson flow).
    pub fn zero() -> Self {
        KernelSpec::Exponential { norm: 0.0, rate: 1.0 }
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(KernelSpec::Tabulated(TabulatedKernel::new(times, values)?))
    }

    /// Samples `spec` on `[0, horizon]` with the given step.
    pub fn sampled(&self, step: f64, horizon: f64) -> Result<Self> {
        if step <= 0.0 || horizon <= step {
            return Err(Error::invalid("sampling needs 0 < step < horizon"));
        }
        let n = (horizon / step).round() as usize;
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
        let values = times.iter().map(|&t| self.value(t)).collect();
        Self::tabulated(times, values)
    }

    pub fn validate(&self) -> Result<()> {
        let check_norm = |norm: f64| {
            if !(0.0..=1.0).contains(&norm) || !norm.is_finite() {
                Err(Error::invalid(format!("branching ratio must lie in [0, 1], got {norm}")))
            } else {
                Ok(())
            }
        };
        match self {
            KernelSpec::Exponential { norm, rate } => {
                check_norm(*norm)?;
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err(Error::invalid(format!("exponential rate must be positive, got {rate}")));
                }
            }
            KernelSpec::ShiftedPowerLaw { norm, alpha, scale } => {
                check_norm(*norm)?;
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(Error::invalid(format!("tail exponent must lie in (0, 1), got {alpha}")));
                }
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(Error::invalid(format!("scale must be positive, got {scale}")));
                }
            }
            KernelSpec::Tabulated(t) => check_norm(t.norm())?,
        }
        Ok(())
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            KernelSpec::Exponential { .. } => "exponential",
            KernelSpec::ShiftedPowerLaw { .. } => "shifted_power_law",
            KernelSpec::Tabulated(_) => "tabulated",
        }
    }

    /// `φ(t)`, with a domain error for negative `t`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::domain(format!("kernel evaluated at negative time {t}")));
        }
        Ok(self.value(t))
    }

    /// `φ(t)` for hot loops; zero for negative arguments.
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            KernelSpec::Exponential { norm, rate } => norm * rate * (-rate * t).exp(),
            KernelSpec::ShiftedPowerLaw { norm, alpha, scale } => {
                norm * alpha * scale.powf(*alpha) / (t + scale).powf(1.0 + alpha)
            }
            KernelSpec::Tabulated(tab) => tab.value(t),
        }
    }

    /// Branching ratio `∫_0^∞ φ`.
    pub fn norm(&self) -> f64 {
        match self {
            KernelSpec::Exponential { norm, .. } | KernelSpec::ShiftedPowerLaw { norm, .. } => *norm,
            KernelSpec::Tabulated(tab) => tab.norm(),
        }
    }

    /// `∫_x^∞ φ(s) ds`.
    pub fn tail_integral(&self, x: f64) -> Result<f64> {
        if x < 0.0 || x.is_nan() {
            return Err(Error::domain(format!("tail integral from negative time {x}")));
        }
        Ok(self.tail_mass(x))
    }

    #[inline]
    pub(crate) fn tail_mass(&self, x: f64) -> f64 {
        match self {
            KernelSpec::Exponential { norm, rate } => norm * (-rate * x).exp(),
            KernelSpec::ShiftedPowerLaw { norm, alpha, scale } => {
                norm * (1.0 + x / scale).powf(-alpha)
            }
            KernelSpec::Tabulated(tab) => tab.tail_mass(x),
        }
    }

    /// `∫_0^x ∫_u^∞ φ(s) ds du`.
    pub fn integrated_tail(&self, x: f64) -> Result<f64> {
        if x < 0.0 || x.is_nan() {
            return Err(Error::domain(format!("integrated tail up to negative time {x}")));
        }
        Ok(match self {
            KernelSpec::Exponential { norm, rate } => norm * -(-rate * x).exp_m1() / rate,
            KernelSpec::ShiftedPowerLaw { norm, alpha, scale } => {
                // a c [(1 + x/c)^{1-α} − 1] / (1 − α)
                norm * scale * ((1.0 - alpha) * (x / scale).ln_1p()).exp_m1() / (1.0 - alpha)
            }
            KernelSpec::Tabulated(tab) => {
                let mut breaks: Vec<f64> = tab.times.iter().copied().filter(|&t| t < x).collect();
                breaks.push(x);
                let mut total = 0.0;
                let mut left = 0.0;
                for &right in breaks.iter().skip(1) {
                    total += integrate(
                        |u: f64| tab.tail_mass(u),
                        left,
                        right,
                        QuadOptions::with_tol(1e-13, 1e-11),
                    )?
                    .value;
                    left = right;
                }
                total
            }
        })
    }

    /// `∫_0^x φ(s) ds`.
    pub fn cumulative(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            KernelSpec::Exponential { norm, rate } => norm * -(-rate * x).exp_m1(),
            KernelSpec::ShiftedPowerLaw { norm, alpha, scale } => {
                norm * -((-alpha) * (x / scale).ln_1p()).exp_m1()
            }
            KernelSpec::Tabulated(tab) => tab.cumulative(x),
        }
    }

    /// Fourier transform `φ̂(z) = ∫_0^∞ φ(t) e^{itz} dt`.
    pub fn fourier(&self, z: f64) -> Result<Complex64> {
        if !z.is_finite() {
            return Err(Error::domain("Fourier frequency must be finite"));
        }
        if z == 0.0 {
            return Ok(Complex64::new(self.norm(), 0.0));
        }
        if z < 0.0 {
            return Ok(self.fourier(-z)?.conj());
        }
        match self {
            KernelSpec::Exponential { norm, rate } => {
                Ok(Complex64::new(norm * rate, 0.0) / Complex64::new(*rate, -z))
            }
            KernelSpec::ShiftedPowerLaw { norm, alpha, scale } => {
                // ∫_0^∞ α c^α (t+c)^{-1-α} e^{izt} dt = α e^{-izc} E_{1+α}(-izc)
                let w = Complex64::new(0.0, -z * scale);
                let e = expint_e(1.0 + alpha, w)?;
                Ok(norm * alpha * w.exp() * e)
            }
            KernelSpec::Tabulated(tab) => tab.fourier(z),
        }
    }

    /// Whether `φ` is nonincreasing on the half-line.
    pub fn is_nonincreasing(&self) -> bool {
        match self {
            KernelSpec::Exponential { .. } | KernelSpec::ShiftedPowerLaw { .. } => true,
            KernelSpec::Tabulated(tab) => tab.values.windows(2).all(|w| w[1] <= w[0]),
        }
    }

    /// `(α, c)` of the power tail, when the kernel has one.
    pub fn tail_asymptotics(&self) -> Option<PowerTail> {
        match self {
            KernelSpec::Exponential { .. } => None,
            KernelSpec::ShiftedPowerLaw { alpha, scale, .. } => {
                Some(PowerTail { alpha: *alpha, scale: *scale })
            }
            KernelSpec::Tabulated(tab) => tab.power_tail(),
        }
    }

    /// Same shape with branching ratio `norm`.
    pub fn with_norm(&self, norm: f64) -> Result<Self> {
        let spec = match self {
            KernelSpec::Exponential { rate, .. } => KernelSpec::Exponential { norm, rate: *rate },
            KernelSpec::ShiftedPowerLaw { alpha, scale, .. } => {
                KernelSpec::ShiftedPowerLaw { norm, alpha: *alpha, scale: *scale }
            }
            KernelSpec::Tabulated(tab) => {
                let current = tab.norm();
                if current == 0.0 {
                    return Err(Error::invalid("cannot rescale a zero tabulated kernel"));
                }
                let factor = norm / current;
                KernelSpec::Tabulated(TabulatedKernel::new(
                    tab.times.clone(),
                    tab.values.iter().map(|v| v * factor).collect(),
                )?)
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Quantile of the normalized offspring-delay density `φ / ∫φ`.
    pub fn delay_quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0 - 1e-16);
        match self {
            KernelSpec::Exponential { rate, .. } => -(-u).ln_1p() / rate,
            KernelSpec::ShiftedPowerLaw { alpha, scale, .. } => {
                scale * ((-(-u).ln_1p() / alpha).exp_m1())
            }
            KernelSpec::Tabulated(tab) => tab.quantile(u),
        }
    }

    /// A characteristic relaxation time of the excitation: the kernel's own
    /// time scale stretched by the cluster amplification.
    pub fn cluster_timescale(&self) -> f64 {
        let norm = self.norm().min(1.0 - 1e-12);
        match self {
            KernelSpec::Exponential { rate, .. } => 1.0 / (rate * (1.0 - norm)),
            KernelSpec::ShiftedPowerLaw { alpha, scale, .. } => {
                scale * (1.0 - norm).powf(-1.0 / alpha)
            }
            KernelSpec::Tabulated(tab) => tab.times.last().copied().unwrap_or(1.0) / (1.0 - norm),
        }
    }

    /// Time over which `φ` falls by a factor `e` from `φ(0)`.
    pub fn e_folding_time(&self) -> f64 {
        match self {
            KernelSpec::Exponential { rate, .. } => 1.0 / rate,
            KernelSpec::ShiftedPowerLaw { alpha, scale, .. } => scale * (1.0 / (1.0 + alpha)).exp_m1(),
            KernelSpec::Tabulated(tab) => {
                let target = tab.values[0] / std::f64::consts::E;
                tab.times
                    .iter()
                    .zip(&tab.values)
                    .find(|(_, v)| **v <= target)
                    .map(|(t, _)| *t)
                    .unwrap_or_else(|| tab.last_time())
            }
        }
    }
}

/// A kernel given by node values, linear in between, power-law tail beyond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TabulatedRaw", into = "TabulatedRaw")]
pub struct TabulatedKernel {
    times: Vec<f64>,
    values: Vec<f64>,
    /// Running trapezoid integrals at the nodes.
    cumulative: Vec<f64>,
    /// Tail `φ(t) = amplitude (t / t_last)^{-exponent}` for `t > t_last`.
    tail_amplitude: f64,
    tail_exponent: f64,
}

#[derive(Serialize, Deserialize)]
struct TabulatedRaw {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<TabulatedRaw> for TabulatedKernel {
    type Error = Error;
    fn try_from(raw: TabulatedRaw) -> Result<Self> {
        TabulatedKernel::new(raw.times, raw.values)
    }
}

impl From<TabulatedKernel> for TabulatedRaw {
    fn from(t: TabulatedKernel) -> Self {
        TabulatedRaw { times: t.times, values: t.values }
    }
}

impl TabulatedKernel {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::invalid("tabulated kernel needs >= 2 (t, phi) pairs of equal length"));
        }
        if times[0] != 0.0 {
            return Err(Error::invalid("tabulated kernel must start at t = 0"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("tabulated kernel times must be strictly increasing"));
        }
        if values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid("tabulated kernel values must be finite and nonnegative"));
        }
        let mut cumulative = Vec::with_capacity(times.len());
        cumulative.push(0.0);
        for i in 1..times.len() {
            let seg = 0.5 * (values[i] + values[i - 1]) * (times[i] - times[i - 1]);
            cumulative.push(cumulative[i - 1] + seg);
        }
        let (tail_amplitude, tail_exponent) = fit_last_decade(&times, &values)?;
        Ok(Self { times, values, cumulative, tail_amplitude, tail_exponent })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail_exponent(&self) -> f64 {
        self.tail_exponent
    }

    fn last_time(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    fn tail_total(&self) -> f64 {
        if self.tail_amplitude == 0.0 {
            0.0
        } else {
            self.tail_amplitude * self.last_time() / (self.tail_exponent - 1.0)
        }
    }

    fn norm(&self) -> f64 {
        self.cumulative.last().expect("non-empty") + self.tail_total()
    }

    fn segment(&self, t: f64) -> usize {
        match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i.min(self.times.len() - 2),
            Err(i) => i - 1,
        }
    }

    fn value(&self, t: f64) -> f64 {
        let last = self.last_time();
        if t > last {
            return self.tail_amplitude * (t / last).powf(-self.tail_exponent);
        }
        let i = self.segment(t);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let w = (t - t0) / (t1 - t0);
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    fn cumulative(&self, x: f64) -> f64 {
        let last = self.last_time();
        if x >= last {
            let grid = *self.cumulative.last().expect("non-empty");
            if self.tail_amplitude == 0.0 {
                return grid;
            }
            let p = self.tail_exponent;
            let extra = self.tail_amplitude * last / (p - 1.0) * (1.0 - (x / last).powf(1.0 - p));
            return grid + extra;
        }
        let i = self.segment(x);
        let t0 = self.times[i];
        0.5 * (self.values[i] + self.value(x)) * (x - t0) + self.cumulative[i]
    }

    fn tail_mass(&self, x: f64) -> f64 {
        let last = self.last_time();
        if x >= last {
            if self.tail_amplitude == 0.0 {
                return 0.0;
            }
            let p = self.tail_exponent;
            return self.tail_amplitude * last / (p - 1.0) * (x / last).powf(1.0 - p);
        }
        (self.norm() - self.cumulative(x)).max(0.0)
    }

    fn fourier(&self, z: f64) -> Result<Complex64> {
        let mut total = Complex64::new(0.0, 0.0);
        for i in 0..self.times.len() - 1 {
            let (t0, t1) = (self.times[i], self.times[i + 1]);
            let h = t1 - t0;
            let (a, b) = linear_moments(z * h);
            let phase = Complex64::from_polar(1.0, z * t0);
            total += phase * h * (self.values[i] * a + self.values[i + 1] * b);
        }
        if self.tail_amplitude > 0.0 {
            let last = self.last_time();
            let mut p = self.tail_exponent;
            if (p - p.round()).abs() < 1e-9 {
                p += 1e-9;
            }
            let e = expint_e(p, Complex64::new(0.0, -z * last))?;
            total += self.tail_amplitude * last * e;
        }
        Ok(total)
    }

    fn quantile(&self, u: f64) -> f64 {
        let total = self.norm();
        let target = u * total;
        let grid_total = *self.cumulative.last().expect("non-empty");
        if target >= grid_total && self.tail_amplitude > 0.0 {
            let last = self.last_time();
            let p = self.tail_exponent;
            let rest = ((target - grid_total) * (p - 1.0) / (self.tail_amplitude * last)).min(1.0 - 1e-16);
            return last * (1.0 - rest).powf(1.0 / (1.0 - p));
        }
        let i = match self.cumulative.binary_search_by(|c| c.total_cmp(&target)) {
            Ok(i) => return self.times[i],
            Err(i) => (i.max(1) - 1).min(self.times.len() - 2),
        };
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let (f0, f1) = (self.values[i], self.values[i + 1]);
        let r = target - self.cumulative[i];
        let slope = (f1 - f0) / h;
        // f0 s + slope s²/2 = r
        let s = if slope.abs() < 1e-14 * f0.max(1e-300) {
            if f0 > 0.0 { r / f0 } else { 0.0 }
        } else {
            let disc = (f0 * f0 + 2.0 * slope * r).max(0.0);
            2.0 * r / (f0 + disc.sqrt()).max(1e-300)
        };
        t0 + s.clamp(0.0, h)
    }

    fn power_tail(&self) -> Option<PowerTail> {
        if self.tail_amplitude == 0.0 || self.tail_exponent >= 2.0 {
            return None;
        }
        let alpha = self.tail_exponent - 1.0;
        let norm = self.norm();
        // amplitude · t_last^{p} = norm · α c^α
        let coef = self.tail_amplitude * self.last_time().powf(self.tail_exponent);
        let scale = (coef / (norm * alpha)).powf(1.0 / alpha);
        Some(PowerTail { alpha, scale })
    }
}

/// `(∫_0^1 (1-s) e^{iθs} ds, ∫_0^1 s e^{iθs} ds)`.
fn linear_moments(theta: f64) -> (Complex64, Complex64) {
    if theta.abs() < 0.5 {
        // Σ_m (iθ)^m / m! · 1/(m+1)(m+2) and Σ (iθ)^m / m! · 1/(m+2)
        let mut a = Complex64::new(0.0, 0.0);
        let mut b = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for m in 0..30 {
            let mf = m as f64;
            a += term / ((mf + 1.0) * (mf + 2.0));
            b += term / (mf + 2.0);
            term = term * Complex64::new(0.0, theta) / (mf + 1.0);
        }
        return (a, b);
    }
    let i = Complex64::new(0.0, 1.0);
    let e = Complex64::from_polar(1.0, theta);
    let full = (e - 1.0) / (i * theta);
    let b = e / (i * theta) + (e - 1.0) / (theta * theta);
    (full - b, b)
}

fn fit_last_decade(times: &[f64], values: &[f64]) -> Result<(f64, f64)> {
    let last_t = *times.last().expect("non-empty");
    let last_v = *values.last().expect("non-empty");
    if last_v == 0.0 {
        return Ok((0.0, f64::INFINITY));
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, v)| **t >= last_t / 10.0 && **t > 0.0 && **v > 0.0)
        .map(|(t, v)| (t.ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::invalid("cannot fit a tail: fewer than two positive nodes in the last decade"));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let exponent = -sxy / sxx;
    if exponent <= 1.0 {
        return Err(Error::invalid(format!(
            "tabulated kernel tail decays like t^-{exponent:.3}, which is not integrable"
        )));
    }
    Ok((last_v, exponent))
}

/// The near-critical sequence member `(μ^T, φ^T = a_T Φ)` at observation scale `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearCriticalFamily {
    pub base: KernelSpec,
    pub tail: PowerTail,
    /// Observation scale `T`.
    pub scale: f64,
    /// Branching ratio `a_T` of the rescaled kernel.
    pub branching: f64,
    /// `C_μ`.
    pub c_mu: f64,
    /// `μ^T = C_μ (1 - a_T) T^{2α-1}`.
    pub exogenous_intensity: f64,
    /// `A_T = T^{-2α}`.
    pub normalizer: f64,
}

/// Builds the member of the near-critical family at scale `T`.
pub fn make_near_critical(base: &KernelSpec, scale: f64, branching: f64, c_mu: f64) -> Result<NearCriticalFamily> {
    let norm = base.norm();
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::InvalidBase(norm));
    }
    if !(branching > 0.0 && branching < 1.0) {
        return Err(Error::invalid(format!("a_T must lie in (0, 1), got {branching}")));
    }
    if !(scale > 0.0) || !(c_mu > 0.0) {
        return Err(Error::invalid("T and C_mu must be positive"));
    }
    let tail = base
        .tail_asymptotics()
        .ok_or_else(|| Error::invalid("near-critical family needs a power-tailed base kernel"))?;
    if !(tail.alpha > 0.0 && tail.alpha < 0.5) {
        return Err(Error::invalid(format!("tail exponent must lie in (0, 1/2), got {}", tail.alpha)));
    }
    let alpha = tail.alpha;
    Ok(NearCriticalFamily {
        base: base.clone(),
        tail,
        scale,
        branching,
        c_mu,
        exogenous_intensity: c_mu * (1.0 - branching) * scale.powf(2.0 * alpha - 1.0),
        normalizer: scale.powf(-2.0 * alpha),
    })
}

impl NearCriticalFamily {
    pub fn alpha(&self) -> f64 {
        self.tail.alpha
    }

    /// `φ^T = a_T Φ`.
    pub fn kernel(&self) -> Result<KernelSpec> {
        self.base.with_norm(self.branching)
    }

    /// `T (1 - a_T)^{1/α}`, which must vanish along an admissible sequence.
    pub fn scale_ratio(&self) -> f64 {
        self.scale * (1.0 - self.branching).powf(1.0 / self.alpha())
    }

    /// `φ̂^T(z / T)`.
    pub fn rescaled_fourier(&self, z: f64) -> Result<Complex64> {
        Ok(self.branching * self.base.fourier(z / self.scale)?)
    }

    /// Small-frequency expansion `a_T [1 + θ(1+α) α (c z / T)^α]`.
    pub fn rescaled_fourier_expansion(&self, z: f64) -> Result<Complex64> {
        if z == 0.0 {
            return Ok(Complex64::new(self.branching, 0.0));
        }
        let alpha = self.alpha();
        let th = theta(1.0 + alpha)?;
        let x = (self.tail.scale * z.abs() / self.scale).powf(alpha);
        let v = self.branching * (1.0 + th * alpha * x);
        Ok(if z < 0.0 { v.conj() } else { v })
    }
}

/// `|θ(1+α)|² α²` prefactor of the low-frequency behaviour of `1 - Φ̂`.
pub fn low_frequency_modulus(alpha: f64) -> Result<f64> {
    let th = theta(1.0 + alpha)?;
    Ok(th.norm_sqr() * alpha * alpha)
}
