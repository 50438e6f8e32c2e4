//! Closed-form Bayesian posterior estimators on the truncated eigenbasis.
//!
//! End-to-end: Gaussian posterior for the linear functional f with
//! mean `fbar = (1/N) L^{1/2} (C + mu I)^{-1} L^{1/2} (sum_n y_n u_n)` and
//! covariance `mu L^{1/2} (C + mu I)^{-1} L^{1/2}`, where
//! `C = L^{1/2} SigmaHat L^{1/2}`, `mu = gamma^2 / N`, and L is the prior
//! covariance. Everything is solved through a symmetric positive-definite
//! factorization of the J x J system; no explicit inverse is formed for the
//! mean.
//!
//! Full-field: the eigenvalue-wise conjugate-Gaussian posterior
//! `lbar_j = mu_j S_uy / (1 + mu_j S_uu)`, `c_j = mu_j / (1 + mu_j S_uu)`
//! under the unit-noise observation model.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2};
use ndarray_linalg::cholesky::{CholeskyFactorized, FactorizeC, InverseC, SolveC};
use ndarray_linalg::UPLO;

use crate::error::{Error, Result};
use crate::spectrum::{CoefficientLabel, CoefficientVector, E2eDataset, FfDataset, Spectrum};

/// Floor applied when dividing by sqrt(lambda_j); lambda_j = j^{-2p} is
/// always positive, the floor only avoids denormal slowdowns.
pub const LAMBDA_FLOOR: f64 = 1e-300;

/// Factorized end-to-end posterior system for one dataset/prior pair.
///
/// Holds the Cholesky factorization of `G = L^{1/2} SigmaHat L^{1/2} + mu I`
/// so that posterior means for many response vectors (and the covariance)
/// can be computed without refactorizing.
pub struct E2eSystem {
    sqrt_lambda: Array1<f64>,
    factor: CholeskyFactorized<ndarray::OwnedRepr<f64>>,
    pub mu: f64,
    pub n: usize,
}

impl E2eSystem {
    pub fn new(inputs: &Array2<f64>, prior: &Spectrum, gamma: f64) -> Result<Self> {
        let (n, j) = inputs.dim();
        if prior.truncation() != j {
            return Err(Error::DimensionMismatch(format!(
                "prior truncation {} vs input columns {j}",
                prior.truncation()
            )));
        }
        if !(gamma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise level must be nonnegative, got {gamma}"
            )));
        }
        let mu = gamma * gamma / n as f64;
        let sqrt_lambda = Array1::from_iter(prior.values().iter().map(|v| v.sqrt()));

        // G = L^{1/2} (U^T U / N) L^{1/2} + mu I, assembled with one gemm
        let mut g = Array2::zeros((j, j));
        general_mat_mul(1.0 / n as f64, &inputs.t(), inputs, 0.0, &mut g);
        for row in 0..j {
            for col in 0..j {
                g[[row, col]] *= sqrt_lambda[row] * sqrt_lambda[col];
            }
            g[[row, row]] += mu;
        }
        let factor = g.factorizec(UPLO::Lower)?;
        Ok(Self {
            sqrt_lambda,
            factor,
            mu,
            n,
        })
    }

    pub fn truncation(&self) -> usize {
        self.sqrt_lambda.len()
    }

    /// Posterior mean from the weighted data vector `b = (1/N) sum_n y_n u_n`.
    pub fn mean_from_weighted_data(&self, b: &Array1<f64>) -> Result<Array1<f64>> {
        let rhs = b * &self.sqrt_lambda;
        let solved = self.factor.solvec(&rhs)?;
        Ok(solved * &self.sqrt_lambda)
    }

    /// Posterior mean for a response vector on the generating inputs.
    pub fn mean_from_responses(
        &self,
        inputs: &Array2<f64>,
        responses: &Array1<f64>,
    ) -> Result<Array1<f64>> {
        let b = inputs.t().dot(responses) / self.n as f64;
        self.mean_from_weighted_data(&b)
    }

    /// Dense posterior covariance `mu L^{1/2} G^{-1} L^{1/2}`.
    pub fn posterior_covariance(&self) -> Result<Array2<f64>> {
        let mut inv = self.factor.invc()?;
        let j = self.truncation();
        for row in 0..j {
            for col in 0..j {
                inv[[row, col]] *= self.mu * self.sqrt_lambda[row] * self.sqrt_lambda[col];
            }
        }
        Ok(inv)
    }

    /// Inverse of the regularized system matrix G (used by the risk module's
    /// trace identities).
    pub fn g_inverse(&self) -> Result<Array2<f64>> {
        Ok(self.factor.invc()?)
    }

    pub fn sqrt_lambda(&self) -> &Array1<f64> {
        &self.sqrt_lambda
    }
}

/// Gaussian posterior for the end-to-end linear functional.
#[derive(Debug, Clone)]
pub struct E2ePosterior {
    pub mean: CoefficientVector,
    pub covariance: Array2<f64>,
    pub gamma: f64,
    pub prior: Spectrum,
}

/// Computes the end-to-end posterior mean and covariance.
pub fn e2e_posterior(data: &E2eDataset, prior: &Spectrum) -> Result<E2ePosterior> {
    if !(data.noise_level > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "posterior requires a positive noise level, got {}",
            data.noise_level
        )));
    }
    let system = E2eSystem::new(&data.inputs, prior, data.noise_level)?;
    let mean = system.mean_from_responses(&data.inputs, &data.responses)?;
    let covariance = system.posterior_covariance()?;
    Ok(E2ePosterior {
        mean: CoefficientVector::new(mean.to_vec(), CoefficientLabel::Estimate),
        covariance,
        gamma: data.noise_level,
        prior: prior.clone(),
    })
}

/// Eigenvalue-wise posterior for the full-field forward operator.
#[derive(Debug, Clone)]
pub struct FfPosterior {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

/// Computes the full-field posterior coordinate-wise by Gaussian conjugacy.
pub fn ff_posterior(data: &FfDataset, prior: &Spectrum) -> Result<FfPosterior> {
    let j = data.inputs.ncols();
    if prior.truncation() != j {
        return Err(Error::DimensionMismatch(format!(
            "prior truncation {} vs data columns {j}",
            prior.truncation()
        )));
    }
    if data.responses.dim() != data.inputs.dim() {
        return Err(Error::DimensionMismatch(
            "response matrix shape differs from input matrix shape".into(),
        ));
    }
    let mut means = Vec::with_capacity(j);
    let mut variances = Vec::with_capacity(j);
    for col in 0..j {
        let mu_j = prior.values()[col];
        let mut s_uu = 0.0;
        let mut s_uy = 0.0;
        for row in 0..data.inputs.nrows() {
            let u = data.inputs[[row, col]];
            s_uu += u * u;
            s_uy += u * data.responses[[row, col]];
        }
        let denom = 1.0 + mu_j * s_uu;
        means.push(mu_j * s_uy / denom);
        variances.push(mu_j / denom);
    }
    Ok(FfPosterior { means, variances })
}

/// Plug-in parameter-to-observable estimate: entry j is `q_j * lbar_j`.
pub fn plugin_pto(qoi: &CoefficientVector, posterior: &FfPosterior) -> Result<CoefficientVector> {
    if qoi.len() != posterior.means.len() {
        return Err(Error::DimensionMismatch(format!(
            "qoi length {} vs posterior length {}",
            qoi.len(),
            posterior.means.len()
        )));
    }
    let coeffs = qoi
        .coeffs
        .iter()
        .zip(&posterior.means)
        .map(|(q, l)| q * l)
        .collect();
    Ok(CoefficientVector::new(coeffs, CoefficientLabel::Estimate))
}
