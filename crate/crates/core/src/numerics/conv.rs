//! FFT-based linear convolution against a fixed kernel.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Repeated causal convolutions `(k * x)[n] = Σ_{j≤n} k[n-j] x[j]`, truncated
/// to the first `len` outputs. The kernel spectrum is computed once.
pub struct CausalConvolver {
    len: usize,
    size: usize,
    kernel_hat: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl CausalConvolver {
    pub fn new(kernel: &[f64]) -> Self {
        let len = kernel.len();
        let size = (2 * len).next_power_of_two().max(2);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut kernel_hat: Vec<Complex64> =
            kernel.iter().map(|&k| Complex64::new(k, 0.0)).collect();
        kernel_hat.resize(size, Complex64::new(0.0, 0.0));
        forward.process(&mut kernel_hat);
        Self { len, size, kernel_hat, forward, inverse }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn convolve(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.len, "signal length must match kernel length");
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        buf.resize(self.size, Complex64::new(0.0, 0.0));
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.size as f64;
        buf[..self.len].iter().map(|c| c.re * scale).collect()
    }

    /// Trapezoid approximation of `∫_0^{t_n} k(t_n - s) x(s) ds` on a grid
    /// of step `dt`, for every node `n`.
    pub fn trapezoid(&self, x: &[f64], kernel: &[f64], dt: f64) -> Vec<f64> {
        let mut full = self.convolve(x);
        let k0 = kernel[0];
        let x0 = x[0];
        full[0] = 0.0;
        for n in 1..self.len {
            full[n] = dt * (full[n] - 0.5 * kernel[n] * x0 - 0.5 * k0 * x[n]);
        }
        full
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_convolution() {
        let k: Vec<f64> = (0..37).map(|i| (-(i as f64) * 0.1).exp()).collect();
        let x: Vec<f64> = (0..37).map(|i| (i as f64 * 0.3).sin()).collect();
        let conv = CausalConvolver::new(&k).convolve(&x);
        for n in 0..37 {
            let direct: f64 = (0..=n).map(|j| k[n - j] * x[j]).sum();
            assert!((conv[n] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn trapezoid_of_constants() {
        // ∫_0^t 1·1 ds = t
        let n = 101;
        let ones = vec![1.0; n];
        let c = CausalConvolver::new(&ones);
        let tr = c.trapezoid(&ones, &ones, 0.01);
        for (i, v) in tr.iter().enumerate() {
            assert!((v - i as f64 * 0.01).abs() < 1e-12);
        }
    }
}
