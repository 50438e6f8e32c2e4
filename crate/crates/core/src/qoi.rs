//! Catalog of linear quantities of interest on L^2((0,1)) expressed in the
//! sine eigenbasis phi_j(x) = sqrt(2) sin(j pi x), together with their decay
//! exponents r (meaning |q_j|^2 <= C j^{-2r-1}).

use crate::error::{Error, Result};
use crate::fit::log_log_slope;
use crate::spectrum::{CoefficientLabel, CoefficientVector};

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QoIKind {
    /// h -> integral of h over (0, 1); r = 1/2.
    MeanOnInterval,
    /// h -> h(x0); r = -1/2.
    PointEvaluation { x0: f64 },
    /// h -> h'(x0); r = -3/2.
    DerivativePointEvaluation { x0: f64 },
    /// Exact power law q_j = scale * j^{-r-1/2}.
    SyntheticPowerlaw { r: f64, scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QoIDescriptor {
    pub kind: QoIKind,
}

impl QoIDescriptor {
    pub fn new(kind: QoIKind) -> Result<Self> {
        match kind {
            QoIKind::PointEvaluation { x0 } | QoIKind::DerivativePointEvaluation { x0 } => {
                if !(x0 > 0.0 && x0 < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "evaluation point must lie in (0,1), got {x0}"
                    )));
                }
            }
            QoIKind::SyntheticPowerlaw { r, scale } => {
                if !r.is_finite() || !(scale > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "synthetic power law needs finite r and positive scale (r={r}, scale={scale})"
                    )));
                }
            }
            QoIKind::MeanOnInterval => {}
        }
        Ok(Self { kind })
    }

    /// The decay exponent r in |q_j|^2 <= C j^{-2r-1}.
    pub fn decay_exponent_r(&self) -> f64 {
        match self.kind {
            QoIKind::MeanOnInterval => 0.5,
            QoIKind::PointEvaluation { .. } => -0.5,
            QoIKind::DerivativePointEvaluation { .. } => -1.5,
            QoIKind::SyntheticPowerlaw { r, .. } => r,
        }
    }
}

/// First J coefficients q_j = q(phi_j) of the descriptor's functional.
pub fn qoi_coefficients(descriptor: &QoIDescriptor, j: usize) -> Result<CoefficientVector> {
    if j == 0 {
        return Err(Error::InvalidArgument("truncation must be at least 1".into()));
    }
    let coeffs = (1..=j)
        .map(|idx| {
            let jf = idx as f64;
            match descriptor.kind {
                QoIKind::MeanOnInterval => 2f64.sqrt() * (1.0 - (jf * PI).cos()) / (jf * PI),
                QoIKind::PointEvaluation { x0 } => 2f64.sqrt() * (jf * PI * x0).sin(),
                QoIKind::DerivativePointEvaluation { x0 } => {
                    2f64.sqrt() * jf * PI * (jf * PI * x0).cos()
                }
                QoIKind::SyntheticPowerlaw { r, scale } => scale * jf.powf(-r - 0.5),
            }
        })
        .collect();
    Ok(CoefficientVector::new(coeffs, CoefficientLabel::QoiQ))
}

/// Fits the decay exponent from dyadic-block envelope maxima of |q_j|^2 and
/// reports the numerically verified envelope constant
/// `max_j j^{2r+1} |q_j|^2` for the descriptor's stored r.
///
/// Block maxima are used so that structured zeros of the coefficients (e.g.
/// sin(j pi / 2) vanishing on even j) do not corrupt the fit.
pub fn verify_decay(descriptor: &QoIDescriptor, j: usize) -> Result<(f64, f64)> {
    if j < 256 {
        return Err(Error::InvalidArgument(format!(
            "decay verification needs J >= 256, got {j}"
        )));
    }
    let q = qoi_coefficients(descriptor, j)?;
    let r_stored = descriptor.decay_exponent_r();

    let mut block_centers = Vec::new();
    let mut block_maxima = Vec::new();
    let mut constant = 0f64;
    let mut lo = 1usize;
    while lo <= j {
        let hi = (2 * lo - 1).min(j);
        let mut max_sq = 0f64;
        for idx in lo..=hi {
            let sq = q.coeffs[idx - 1] * q.coeffs[idx - 1];
            max_sq = max_sq.max(sq);
            constant = constant.max((idx as f64).powf(2.0 * r_stored + 1.0) * sq);
        }
        // only full blocks participate in the envelope fit
        if hi == 2 * lo - 1 && max_sq > 0.0 {
            block_centers.push(((lo * hi) as f64).sqrt());
            block_maxima.push(max_sq);
        }
        lo *= 2;
    }
    let fit = log_log_slope(&block_centers, &block_maxima)?;
    // envelope max |q_j|^2 ~ j^{-2r-1}  =>  r = -(slope + 1)/2
    let fitted_r = -(fit.slope + 1.0) / 2.0;
    Ok((fitted_r, constant))
}
