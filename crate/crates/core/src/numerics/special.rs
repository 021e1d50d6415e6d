//! Gamma and the generalized exponential integral on the complex plane.
//!
//! The oscillatory constants θ(x) of the heavy-tail Fourier asymptotics
//! live here too.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use statrs::function::gamma::gamma;

/// Generalized exponential integral `E_p(z) = ∫_1^∞ e^{-z t} t^{-p} dt`
/// for real non-integer `p > 0` and `Re z ≥ 0`, `z ≠ 0`.
///
/// Uses the power series for small `|z|` and a continued fraction otherwise.
pub fn expint_e(p: f64, z: Complex64) -> Result<Complex64> {
    if p <= 0.0 || (p - p.round()).abs() < 1e-12 {
        return Err(Error::domain(format!("expint_e needs non-integer p > 0, got {p}")));
    }
    if z.re < 0.0 {
        return Err(Error::domain("expint_e implemented for Re z >= 0 only"));
    }
    let r = z.norm();
    if r == 0.0 {
        return if p > 1.0 {
            Ok(Complex64::new(1.0 / (p - 1.0), 0.0))
        } else {
            Err(Error::domain("E_p(0) diverges for p <= 1"))
        };
    }
    if r <= 2.5 {
        Ok(expint_series(p, z))
    } else {
        expint_continued_fraction(p, z)
    }
}

// E_p(z) = Γ(1-p) z^{p-1} - Σ_k (-z)^k / (k! (k + 1 - p))
fn expint_series(p: f64, z: Complex64) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0); // (-z)^k / k!
    for k in 0..200 {
        let contrib = term / (k as f64 + 1.0 - p);
        sum += contrib;
        if k > 2 && contrib.norm() < 1e-17 * sum.norm().max(1e-300) {
            break;
        }
        term = term * (-z) / (k as f64 + 1.0);
    }
    gamma(1.0 - p) * z.powf(p - 1.0) - sum
}

// Modified Lentz evaluation of the classical continued fraction.
fn expint_continued_fraction(p: f64, z: Complex64) -> Result<Complex64> {
    const TINY: f64 = 1e-300;
    let mut b = z + p;
    let mut c = Complex64::new(1.0 / TINY, 0.0);
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..20_000 {
        let an = -(i as f64) * (p - 1.0 + i as f64);
        b += 2.0;
        d = an * d + b;
        if d.norm() < TINY {
            d = Complex64::new(TINY, 0.0);
        }
        c = b + an / c;
        if c.norm() < TINY {
            c = Complex64::new(TINY, 0.0);
        }
        d = 1.0 / d;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).norm() < 1e-15 {
            return Ok(h * (-z).exp());
        }
    }
    Err(Error::numerical(format!("E_{p}({z}) continued fraction did not converge")))
}

/// `θ(x) = ∫_0^∞ e^{iu} u^{-x} du` for `x ∈ (0,1)`, and the regularized
/// `∫_0^∞ (e^{iu} - 1) u^{-x} du` for `x ∈ (1,2)`.
///
/// Both branches equal `Γ(1-x) e^{iπ(1-x)/2}` (rotation of the contour onto
/// the imaginary axis, continued analytically across `x = 1`).
pub fn theta(x: f64) -> Result<Complex64> {
    let in_lower = x > 0.0 && x < 1.0;
    let in_upper = x > 1.0 && x < 2.0;
    if !(in_lower || in_upper) {
        return Err(Error::domain(format!("theta(x) defined for x in (0,1) or (1,2), got {x}")));
    }
    let phase = Complex64::from_polar(1.0, PI * (1.0 - x) / 2.0);
    Ok(gamma(1.0 - x) * phase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quad::{integrate, QuadOptions};

    // Oracle: plain real-axis quadrature on [1, L] plus the asymptotic
    // series of the remaining tail.
    fn expint_quadrature(p: f64, z: Complex64) -> Complex64 {
        let upper = 400.0;
        let q = integrate(
            |t: f64| (-z * t).exp() * t.powf(-p),
            1.0,
            upper,
            QuadOptions { abs_tol: 1e-12, rel_tol: 1e-11, max_intervals: 50_000 },
        )
        .unwrap()
        .value;
        // ∫_L^∞ e^{-zt} t^{-p} dt ~ e^{-zL} L^{-p} / z Σ_k (-1)^k (p)_k / (zL)^k
        let zl = z * upper;
        let mut series = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for k in 0..12 {
            series += term;
            term = -term * (p + k as f64) / zl;
        }
        q + (-zl).exp() * upper.powf(-p) / z * series
    }

    #[test]
    fn expint_matches_quadrature_on_imaginary_axis() {
        for &p in &[1.4, 1.25, 1.75, 0.6] {
            for &y in &[0.05, 0.7, 2.4, 2.6, 5.0, 31.0] {
                let z = Complex64::new(0.0, -y);
                let e = expint_e(p, z).unwrap();
                let q = expint_quadrature(p, z);
                assert!((e - q).norm() < 1e-8 * q.norm().max(1.0), "p={p} y={y}: {e} vs {q}");
            }
        }
    }

    #[test]
    fn expint_series_and_fraction_agree_at_switch() {
        let z = Complex64::new(0.0, -2.5);
        let s = expint_series(1.4, z);
        let c = expint_continued_fraction(1.4, z).unwrap();
        assert!((s - c).norm() < 1e-12);
    }

    #[test]
    fn expint_real_axis_value() {
        // E_{1.5}(0) = 1/0.5
        let v = expint_e(1.5, Complex64::new(0.0, 0.0)).unwrap();
        assert!((v.re - 2.0).abs() < 1e-15);
    }

    #[test]
    fn theta_half() {
        let t = theta(0.5).unwrap();
        let expected = PI.sqrt() * (2f64).sqrt() / 2.0;
        assert!((t.re - expected).abs() < 1e-12);
        assert!((t.im - expected).abs() < 1e-12);
    }

    #[test]
    fn theta_domain() {
        assert!(theta(1.0).is_err());
        assert!(theta(0.0).is_err());
        assert!(theta(2.0).is_err());
    }
}
