//! Eigenvalue spectra, Karhunen-Loeve input sampling, and observation
//! datasets for the diagonal sequence-space model.
//!
//! Everything lives in the shared eigenbasis, so an element of the Hilbert
//! space is just its coefficient sequence on the truncation `1..=J` and a
//! covariance operator is a positive eigenvalue sequence.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A truncated power-law eigenvalue sequence `values[j-1] = scale * j^(-2*half_exponent)`.
///
/// The half exponent is the symbol that appears in the decay laws (alpha for
/// the training covariance, alpha' for the test covariance, p for the prior,
/// and beta + 1/2 for the full-field prior variances).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    half_exponent: f64,
    scale: f64,
    values: Vec<f64>,
}

impl Spectrum {
    /// Builds the spectrum `scale * j^(-2*half_exponent)` for `j = 1..=truncation`.
    pub fn power_law(half_exponent: f64, scale: f64, truncation: usize) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "spectrum scale must be positive, got {scale}"
            )));
        }
        if truncation == 0 {
            return Err(Error::InvalidArgument(
                "spectrum truncation must be at least 1".into(),
            ));
        }
        let values = (1..=truncation)
            .map(|j| scale * (j as f64).powf(-2.0 * half_exponent))
            .collect();
        Ok(Self {
            half_exponent,
            scale,
            values,
        })
    }

    pub fn half_exponent(&self) -> f64 {
        self.half_exponent
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn truncation(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, j: usize) -> f64 {
        self.values[j]
    }
}

/// Role tag for a coefficient sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoefficientLabel {
    TruthF,
    QoiQ,
    OperatorL,
    Estimate,
}

/// Coefficients of an element of the Hilbert space in the shared eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    pub coeffs: Vec<f64>,
    pub label: CoefficientLabel,
}

impl CoefficientVector {
    pub fn new(coeffs: Vec<f64>, label: CoefficientLabel) -> Self {
        Self { coeffs, label }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Sobolev norm `sqrt(sum_j j^{2s} v_j^2)` on the truncation.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, v)| ((i + 1) as f64).powf(2.0 * s) * v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales in place so that the Sobolev `s`-norm equals `target`.
    pub fn normalize_sobolev(&mut self, s: f64, target: f64) {
        let norm = self.sobolev_norm(s);
        if norm > 0.0 {
            let factor = target / norm;
            for v in &mut self.coeffs {
                *v *= factor;
            }
        }
    }

    /// Truth sequence `j^(-exponent)` used by the rate sweeps.
    pub fn power_law_truth(exponent: f64, truncation: usize, label: CoefficientLabel) -> Self {
        let coeffs = (1..=truncation)
            .map(|j| (j as f64).powf(-exponent))
            .collect();
        Self { coeffs, label }
    }
}

/// Law of the unit-variance KL coefficients z_j.
///
/// Both choices are zero mean, unit variance, independent across coordinates;
/// `UniformUnit` is Uniform on [-sqrt(3), sqrt(3)].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoefficientLaw {
    GaussianUnit,
    UniformUnit,
}

impl CoefficientLaw {
    fn sample<R: Rng>(self, rng: &mut R) -> f64 {
        match self {
            CoefficientLaw::GaussianUnit => StandardNormal.sample(rng),
            CoefficientLaw::UniformUnit => {
                let half_width = 3.0f64.sqrt();
                Uniform::new_inclusive(-half_width, half_width).sample(rng)
            }
        }
    }
}

/// End-to-end dataset: input coefficient rows and scalar responses
/// `y_n = <f, u_n> + gamma * xi_n`.
#[derive(Debug, Clone)]
pub struct E2eDataset {
    pub inputs: Array2<f64>,
    pub responses: Array1<f64>,
    pub noise_level: f64,
}

/// Full-field dataset: input coefficient rows and response rows
/// `Y_{nj} = l_j * u_{nj} + eta_{nj}` with unit coordinate-wise noise.
#[derive(Debug, Clone)]
pub struct FfDataset {
    pub inputs: Array2<f64>,
    pub responses: Array2<f64>,
}

/// Draws `n` KL-expansion input rows `u_{nj} = sqrt(sigma_j) z_{nj}`.
///
/// Deterministic in `(spectrum, law, n, seed)`.
pub fn sample_inputs(
    spectrum: &Spectrum,
    law: CoefficientLaw,
    n: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample count must be at least 1".into(),
        ));
    }
    let j = spectrum.truncation();
    let sqrt_sigma: Vec<f64> = spectrum.values().iter().map(|v| v.sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Array2::zeros((n, j));
    for mut row in inputs.rows_mut() {
        for (col, entry) in row.iter_mut().enumerate() {
            *entry = sqrt_sigma[col] * law.sample(&mut rng);
        }
    }
    Ok(inputs)
}

/// Builds end-to-end responses `y_n = sum_j f_j u_{nj} + gamma * xi_n`.
///
/// The inner product is accumulated in ascending j so results are
/// bit-reproducible; `gamma = 0` gives the exact matrix-vector product.
pub fn generate_e2e(
    f_truth: &CoefficientVector,
    inputs: &Array2<f64>,
    gamma: f64,
    seed: u64,
) -> Result<E2eDataset> {
    if f_truth.len() != inputs.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "truth length {} vs input columns {}",
            f_truth.len(),
            inputs.ncols()
        )));
    }
    if gamma < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "noise level must be nonnegative, got {gamma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut responses = Array1::zeros(inputs.nrows());
    for (row, y) in inputs.rows().into_iter().zip(responses.iter_mut()) {
        let mut acc = 0.0;
        for (u, f) in row.iter().zip(&f_truth.coeffs) {
            acc += f * u;
        }
        let noise: f64 = StandardNormal.sample(&mut rng);
        *y = acc + gamma * noise;
    }
    Ok(E2eDataset {
        inputs: inputs.clone(),
        responses,
        noise_level: gamma,
    })
}

/// Builds full-field responses `Y_{nj} = l_j u_{nj} + eta_{nj}` with iid
/// standard-normal noise realized coordinate-wise on the truncation.
pub fn generate_ff(
    l_truth: &CoefficientVector,
    inputs: &Array2<f64>,
    seed: u64,
) -> Result<FfDataset> {
    if l_truth.len() != inputs.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "operator length {} vs input columns {}",
            l_truth.len(),
            inputs.ncols()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut responses = Array2::zeros(inputs.raw_dim());
    for (in_row, mut out_row) in inputs.rows().into_iter().zip(responses.rows_mut()) {
        for ((u, y), l) in in_row.iter().zip(out_row.iter_mut()).zip(&l_truth.coeffs) {
            let noise: f64 = StandardNormal.sample(&mut rng);
            *y = l * u + noise;
        }
    }
    Ok(FfDataset {
        inputs: inputs.clone(),
        responses,
    })
}

/// Mixes a base seed with a trial index (and an optional stream tag) so
/// parallel Monte-Carlo trials get independent deterministic streams.
pub fn trial_seed(base: u64, trial: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the xor-combined inputs
    let mut z = base ^ trial.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ stream.rotate_left(32);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
