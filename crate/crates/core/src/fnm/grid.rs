//! Vector-valued functions sampled on the uniform grid x_i = i/n of the
//! unit torus.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// A d-channel function on the n-point periodic grid; row i holds the
/// channel values at x_i = i/n.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Array2<f64>,
}

impl GridFunction {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let n = values.nrows();
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "grid resolution must be a power of two, got {n}"
            )));
        }
        if values.ncols() == 0 {
            return Err(Error::InvalidArgument("need at least one channel".into()));
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize, channels: usize) -> Result<Self> {
        Self::new(Array2::zeros((n, channels)))
    }

    pub fn resolution(&self) -> usize {
        self.values.nrows()
    }

    pub fn channels(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Quadrature integral per channel: (1/n) sum_i h(x_i), exact for
    /// trigonometric polynomials of degree < n.
    pub fn integral(&self) -> Array1<f64> {
        self.values.mean_axis(ndarray::Axis(0)).expect("nonempty grid")
    }

    /// Quadrature L^2 norm over all channels.
    pub fn l2_norm(&self) -> f64 {
        (self.values.mapv(|v| v * v).sum() / self.resolution() as f64).sqrt()
    }

    /// Synthesizes `sum_k Re(coeff_k psi_k)` per channel from coefficients
    /// over k = 0..=K (conjugate symmetry implied), sampled at resolution n.
    /// Used to build band-limited test inputs.
    pub fn band_limited(
        n: usize,
        coeffs: &[Vec<num_complex::Complex64>],
    ) -> Result<Self> {
        let channels = coeffs.len();
        if channels == 0 {
            return Err(Error::InvalidArgument("need at least one channel".into()));
        }
        let mut values = Array2::zeros((n, channels));
        for (ch, spec) in coeffs.iter().enumerate() {
            if spec.len() > n / 2 {
                return Err(Error::InvalidArgument(format!(
                    "degree {} does not fit resolution {n}",
                    spec.len() - 1
                )));
            }
            for i in 0..n {
                let x = i as f64 / n as f64;
                let mut acc = spec[0].re;
                for (k, c) in spec.iter().enumerate().skip(1) {
                    let theta = 2.0 * std::f64::consts::PI * k as f64 * x;
                    acc += 2.0 * (c.re * theta.cos() - c.im * theta.sin());
                }
                values[[i, ch]] = acc;
            }
        }
        Self::new(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    #[test]
    fn rejects_bad_shapes() {
        assert!(GridFunction::new(Array2::zeros((6, 1))).is_err());
        assert!(GridFunction::new(Array2::zeros((0, 1))).is_err());
        assert!(GridFunction::new(Array2::zeros((8, 0))).is_err());
        assert!(GridFunction::zeros(8, 2).is_ok());
    }

    #[test]
    fn quadrature_exact_for_trig_polynomials() {
        // integral of c + a cos(2 pi k x) over the torus is c for k < n
        let n = 16;
        let coeffs = vec![vec![
            Complex64::new(0.75, 0.0),
            Complex64::new(0.3, -0.2),
            Complex64::new(0.0, 0.5),
        ]];
        let h = GridFunction::band_limited(n, &coeffs).unwrap();
        assert_abs_diff_eq!(h.integral()[0], 0.75, epsilon = 1e-12);
    }

    #[test]
    fn l2_norm_parseval() {
        // ||c0 + 2 Re(c1 psi_1)||^2 = c0^2 + 2|c1|^2
        let coeffs = vec![vec![Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.25)]];
        let h = GridFunction::band_limited(32, &coeffs).unwrap();
        let expected = (1.0f64 + 2.0 * (0.25 + 0.0625)).sqrt();
        assert_abs_diff_eq!(h.l2_norm(), expected, epsilon = 1e-12);
    }
}
