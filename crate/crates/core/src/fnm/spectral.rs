//! DFT plumbing shared by the spectral layers.
//!
//! Convention: the forward transform carries the 1/n factor, so the k-th
//! coefficient equals the quadrature inner product <psi_k, h> and the k = 0
//! coefficient is the grid mean. Real fields are reconstructed from the
//! nonnegative-frequency coefficients by conjugate mirroring.

use std::cell::RefCell;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn run_fft(buffer: &mut [Complex64], forward: bool) {
    PLANNER.with(|p| {
        let fft = if forward {
            p.borrow_mut().plan_fft_forward(buffer.len())
        } else {
            p.borrow_mut().plan_fft_inverse(buffer.len())
        };
        fft.process(buffer);
    });
}

/// Coefficients c_k = (1/n) sum_i v_i e^{-2 pi i k i / n} for k = 0..=modes,
/// one column per channel.
pub fn forward_coeffs(values: &Array2<f64>, modes: usize) -> Array2<Complex64> {
    let (n, channels) = values.dim();
    let mut out = Array2::zeros((modes + 1, channels));
    let mut buffer = vec![Complex64::default(); n];
    for ch in 0..channels {
        for i in 0..n {
            buffer[i] = Complex64::new(values[[i, ch]], 0.0);
        }
        run_fft(&mut buffer, true);
        for k in 0..=modes {
            out[[k, ch]] = buffer[k] / n as f64;
        }
    }
    out
}

/// Unnormalized forward transform sum_i g_i e^{-2 pi i k i / n}, used by the
/// reverse pass.
pub fn forward_unnormalized(values: &Array2<f64>, modes: usize) -> Array2<Complex64> {
    let mut out = forward_coeffs(values, modes);
    out *= Complex64::new(values.nrows() as f64, 0.0);
    out
}

/// Real field b_0 + 2 sum_{k=1..K} Re(b_k psi_k) on the n-point grid from
/// one-sided coefficients (conjugate symmetry implied; Im b_0 ignored).
pub fn inverse_mirrored(coeffs: &Array2<Complex64>, n: usize) -> Array2<f64> {
    let (k_max_plus_1, channels) = coeffs.dim();
    let mut out = Array2::zeros((n, channels));
    let mut buffer = vec![Complex64::default(); n];
    for ch in 0..channels {
        buffer.fill(Complex64::default());
        buffer[0] = Complex64::new(coeffs[[0, ch]].re, 0.0);
        for k in 1..k_max_plus_1 {
            buffer[k] = coeffs[[k, ch]];
            buffer[n - k] = coeffs[[k, ch]].conj();
        }
        run_fft(&mut buffer, false);
        for i in 0..n {
            out[[i, ch]] = buffer[i].re;
        }
    }
    out
}

/// (1/n) sum_{k=0..K} Re(d_k psi_k) on the grid, without mirroring; this is
/// the adjoint of `forward_coeffs` acting on cotangents of the one-sided
/// coefficients (real and imaginary parts treated independently).
pub fn inverse_oneside(coeffs: &Array2<Complex64>, n: usize) -> Array2<f64> {
    let (k_max_plus_1, channels) = coeffs.dim();
    let mut out = Array2::zeros((n, channels));
    let mut buffer = vec![Complex64::default(); n];
    for ch in 0..channels {
        buffer.fill(Complex64::default());
        for k in 0..k_max_plus_1 {
            buffer[k] = coeffs[[k, ch]];
        }
        run_fft(&mut buffer, false);
        for i in 0..n {
            out[[i, ch]] = buffer[i].re / n as f64;
        }
    }
    out
}
