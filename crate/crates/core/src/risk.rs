//! Exact noise-averaged prediction risks under a test measure that shares
//! the eigenbasis, split into bias and variance, plus Monte-Carlo checks.
//!
//! End-to-end: `bias = ||(S')^{1/2}(I - A_N S_N) f||^2` is evaluated by
//! running the posterior-mean map on noiseless responses, and
//! `variance = gamma^2 tr((S')^{1/2} A_N A_N^T (S')^{1/2})` collapses to the
//! J x J identity
//! `mu sum_i sigma'_i lambda_i (G^{-1}_{ii} - mu ||row_i(G^{-1})||^2)`
//! with `G = C_hat + mu I` (substituting `C_hat = G - mu I` into
//! `A_N A_N^T = (1/N) L^{1/2} G^{-1} C_hat G^{-1} L^{1/2}`).
//!
//! Full-field: the estimator is affine in the noise coordinate-wise, so the
//! noise average is `(1 - rho_j)^2 l_j^2 + Var(lbar_j)` with
//! `rho_j = mu_j S_uu / (1 + mu_j S_uu)` and
//! `Var(lbar_j) = mu_j^2 S_uu / (1 + mu_j S_uu)^2`, weighted by
//! `sigma'_j q_j^2`.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::estimators::E2eSystem;
use crate::spectrum::{CoefficientVector, Spectrum};

/// Risk decomposition for one dataset realization (noise averaged out).
#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub total: f64,
    pub bias: f64,
    pub variance: f64,
    /// Weighted posterior-covariance trace; only meaningful for the
    /// end-to-end estimator.
    pub spread: Option<f64>,
}

fn check_test_spectrum(test: &Spectrum, j: usize) -> Result<()> {
    if test.truncation() != j {
        return Err(Error::DimensionMismatch(format!(
            "test spectrum truncation {} vs {j}",
            test.truncation()
        )));
    }
    Ok(())
}

/// Noise-averaged out-of-distribution risk of the end-to-end posterior mean,
/// conditional on the sampled inputs.
pub fn e2e_conditional_risk(
    f_truth: &CoefficientVector,
    inputs: &Array2<f64>,
    gamma: f64,
    prior: &Spectrum,
    test_spectrum: &Spectrum,
) -> Result<RiskReport> {
    let j = inputs.ncols();
    if f_truth.len() != j {
        return Err(Error::DimensionMismatch(format!(
            "truth length {} vs input columns {j}",
            f_truth.len()
        )));
    }
    check_test_spectrum(test_spectrum, j)?;
    let system = E2eSystem::new(inputs, prior, gamma)?;

    let truth = Array1::from_vec(f_truth.coeffs.clone());
    let noiseless = inputs.dot(&truth);
    let mean0 = system.mean_from_responses(inputs, &noiseless)?;
    let mut bias = 0.0;
    for idx in 0..j {
        let d = truth[idx] - mean0[idx];
        bias += test_spectrum.values()[idx] * d * d;
    }

    let (variance, spread) = e2e_variance_spread(&system, prior, test_spectrum)?;
    Ok(RiskReport {
        total: bias + variance,
        bias,
        variance,
        spread: Some(spread),
    })
}

fn e2e_variance_spread(
    system: &E2eSystem,
    prior: &Spectrum,
    test_spectrum: &Spectrum,
) -> Result<(f64, f64)> {
    let g_inv = system.g_inverse()?;
    let j = prior.truncation();
    let mu = system.mu;
    let mut variance = 0.0;
    let mut spread = 0.0;
    for i in 0..j {
        let weight = test_spectrum.values()[i] * prior.values()[i];
        let diag = g_inv[[i, i]];
        let row_sq: f64 = g_inv.row(i).iter().map(|v| v * v).sum();
        variance += weight * (diag - mu * row_sq);
        spread += weight * diag;
    }
    Ok((mu * variance, mu * spread))
}

/// Reference evaluation of the end-to-end variance by applying the
/// posterior-mean map to each canonical response vector. O(N) solves; used
/// to cross-check the trace identity.
pub fn e2e_variance_columnwise(
    inputs: &Array2<f64>,
    gamma: f64,
    prior: &Spectrum,
    test_spectrum: &Spectrum,
) -> Result<f64> {
    let system = E2eSystem::new(inputs, prior, gamma)?;
    let n = inputs.nrows();
    let mut acc = 0.0;
    for col in 0..n {
        let mut e = Array1::zeros(n);
        e[col] = 1.0;
        let a_col = system.mean_from_responses(inputs, &e)?;
        for idx in 0..prior.truncation() {
            acc += test_spectrum.values()[idx] * a_col[idx] * a_col[idx];
        }
    }
    Ok(gamma * gamma * acc)
}

/// Noise-averaged risk of the plug-in functional `sum_j q_j lbar_j`,
/// conditional on the inputs, under the weighted test norm.
pub fn ff_conditional_risk(
    l_truth: &CoefficientVector,
    qoi: &CoefficientVector,
    inputs: &Array2<f64>,
    prior: &Spectrum,
    test_spectrum: &Spectrum,
) -> Result<RiskReport> {
    let j = inputs.ncols();
    if l_truth.len() != j || qoi.len() != j {
        return Err(Error::DimensionMismatch(format!(
            "truth length {} / qoi length {} vs input columns {j}",
            l_truth.len(),
            qoi.len()
        )));
    }
    check_test_spectrum(test_spectrum, j)?;
    if prior.truncation() != j {
        return Err(Error::DimensionMismatch(format!(
            "prior truncation {} vs input columns {j}",
            prior.truncation()
        )));
    }
    let mut bias = 0.0;
    let mut variance = 0.0;
    for col in 0..j {
        let mu_j = prior.values()[col];
        let s_uu: f64 = inputs.column(col).iter().map(|u| u * u).sum();
        let denom = 1.0 + mu_j * s_uu;
        let rho = mu_j * s_uu / denom;
        let var_lbar = mu_j * mu_j * s_uu / (denom * denom);
        let weight = test_spectrum.values()[col] * qoi.coeffs[col] * qoi.coeffs[col];
        let d = (1.0 - rho) * l_truth.coeffs[col];
        bias += weight * d * d;
        variance += weight * var_lbar;
    }
    Ok(RiskReport {
        total: bias + variance,
        bias,
        variance,
        spread: None,
    })
}

/// A risk configuration that `mc_risk_check` can validate.
pub enum RiskProblem<'a> {
    EndToEnd {
        f_truth: &'a CoefficientVector,
        inputs: &'a Array2<f64>,
        gamma: f64,
        prior: &'a Spectrum,
        test_spectrum: &'a Spectrum,
    },
    FullField {
        l_truth: &'a CoefficientVector,
        qoi: &'a CoefficientVector,
        inputs: &'a Array2<f64>,
        prior: &'a Spectrum,
        test_spectrum: &'a Spectrum,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRiskCheck {
    pub analytic: f64,
    pub mc_estimate: f64,
    pub mc_std_err: f64,
}

/// Monte-Carlo validation of the analytic conditional risk: averages the
/// weighted squared error over fresh noise draws with the inputs held fixed.
pub fn mc_risk_check(
    problem: &RiskProblem<'_>,
    noise_replicates: usize,
    seed: u64,
) -> Result<McRiskCheck> {
    if noise_replicates < 100 {
        return Err(Error::InvalidArgument(format!(
            "need at least 100 noise replicates, got {noise_replicates}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |samples: &mut Vec<f64>, value: f64| samples.push(value);
    let mut samples = Vec::with_capacity(noise_replicates);
    let analytic;
    match problem {
        RiskProblem::EndToEnd {
            f_truth,
            inputs,
            gamma,
            prior,
            test_spectrum,
        } => {
            analytic =
                e2e_conditional_risk(f_truth, inputs, *gamma, prior, test_spectrum)?.total;
            let system = E2eSystem::new(inputs, prior, *gamma)?;
            let truth = Array1::from_vec(f_truth.coeffs.clone());
            let noiseless = inputs.dot(&truth);
            for _ in 0..noise_replicates {
                let noise: Array1<f64> = Array1::from_iter(
                    (0..inputs.nrows()).map(|_| StandardNormal.sample(&mut rng)),
                );
                let responses = &noiseless + &(noise * *gamma);
                let mean = system.mean_from_responses(inputs, &responses)?;
                let mut err = 0.0;
                for idx in 0..truth.len() {
                    let d = truth[idx] - mean[idx];
                    err += test_spectrum.values()[idx] * d * d;
                }
                draw(&mut samples, err);
            }
        }
        RiskProblem::FullField {
            l_truth,
            qoi,
            inputs,
            prior,
            test_spectrum,
        } => {
            analytic = ff_conditional_risk(l_truth, qoi, inputs, prior, test_spectrum)?.total;
            let j = inputs.ncols();
            // per-coordinate sufficient statistics
            let s_uu: Vec<f64> = (0..j)
                .map(|c| inputs.column(c).iter().map(|u| u * u).sum())
                .collect();
            for _ in 0..noise_replicates {
                let mut err = 0.0;
                for col in 0..j {
                    let mu_j = prior.values()[col];
                    let mut s_uy = 0.0;
                    for u in inputs.column(col) {
                        let noise: f64 = StandardNormal.sample(&mut rng);
                        s_uy += u * (l_truth.coeffs[col] * u + noise);
                    }
                    let lbar = mu_j * s_uy / (1.0 + mu_j * s_uu[col]);
                    let d = l_truth.coeffs[col] - lbar;
                    err += test_spectrum.values()[col]
                        * qoi.coeffs[col]
                        * qoi.coeffs[col]
                        * d
                        * d;
                }
                draw(&mut samples, err);
            }
        }
    }
    let m = samples.len() as f64;
    let mc_estimate = samples.iter().sum::<f64>() / m;
    let var = samples
        .iter()
        .map(|s| (s - mc_estimate) * (s - mc_estimate))
        .sum::<f64>()
        / (m - 1.0);
    Ok(McRiskCheck {
        analytic,
        mc_estimate,
        mc_std_err: (var / m).sqrt(),
    })
}
