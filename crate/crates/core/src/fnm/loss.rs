//! Batch losses: average relative error and average squared error, with the
//! L2 quadrature norm for function outputs and the Euclidean norm for
//! vector outputs, plus their exact gradients with respect to predictions.

use crate::error::{Error, Result};
use crate::fnm::grid::GridFunction;
use crate::fnm::model::Sample;

/// Guard added to the denominator of the relative loss.
pub const RELATIVE_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LossKind {
    Relative,
    Squared,
}

fn check_pair(pred: &Sample, truth: &Sample) -> Result<()> {
    match (pred, truth) {
        (Sample::Vector(p), Sample::Vector(t)) if p.len() == t.len() => Ok(()),
        (Sample::Function(p), Sample::Function(t))
            if p.resolution() == t.resolution() && p.channels() == t.channels() =>
        {
            Ok(())
        }
        _ => Err(Error::DimensionMismatch(
            "prediction and target shapes disagree".into(),
        )),
    }
}

/// Output-space norm: Euclidean for vectors, L2 quadrature for functions.
pub fn sample_norm(s: &Sample) -> f64 {
    match s {
        Sample::Vector(v) => v.mapv(|x| x * x).sum().sqrt(),
        Sample::Function(h) => h.l2_norm(),
    }
}

fn difference(pred: &Sample, truth: &Sample) -> Sample {
    match (pred, truth) {
        (Sample::Vector(p), Sample::Vector(t)) => Sample::Vector(p - t),
        (Sample::Function(p), Sample::Function(t)) => Sample::Function(
            GridFunction::new(p.values() - t.values()).expect("shapes checked"),
        ),
        _ => unreachable!("shapes checked"),
    }
}

fn scale(s: &Sample, factor: f64) -> Sample {
    match s {
        Sample::Vector(v) => Sample::Vector(v * factor),
        Sample::Function(h) => {
            Sample::Function(GridFunction::new(h.values() * factor).expect("same shape"))
        }
    }
}

/// (1/N) sum ||y - pred|| / (||y|| + 1e-6).
pub fn loss_relative(preds: &[Sample], truths: &[Sample]) -> Result<f64> {
    batch_loss(LossKind::Relative, preds, truths)
}

/// (1/N) sum ||y - pred||^2.
pub fn loss_squared(preds: &[Sample], truths: &[Sample]) -> Result<f64> {
    batch_loss(LossKind::Squared, preds, truths)
}

pub fn batch_loss(kind: LossKind, preds: &[Sample], truths: &[Sample]) -> Result<f64> {
    Ok(batch_loss_gradients(kind, preds, truths, false)?.0)
}

/// Loss and, when requested, per-sample gradients with respect to the raw
/// prediction values (grid values for functions), averaged over the batch.
pub fn batch_loss_gradients(
    kind: LossKind,
    preds: &[Sample],
    truths: &[Sample],
    with_gradients: bool,
) -> Result<(f64, Vec<Sample>)> {
    if preds.len() != truths.len() || preds.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "batch sizes disagree or are empty: {} predictions, {} targets",
            preds.len(),
            truths.len()
        )));
    }
    let n_batch = preds.len() as f64;
    let mut total = 0.0;
    let mut grads = Vec::new();
    for (pred, truth) in preds.iter().zip(truths) {
        check_pair(pred, truth)?;
        let diff = difference(pred, truth);
        let dnorm = sample_norm(&diff);
        // factor turning grid values into the norm gradient: the quadrature
        // norm carries a 1/n weight per grid point
        let quad = match &diff {
            Sample::Vector(_) => 1.0,
            Sample::Function(h) => 1.0 / h.resolution() as f64,
        };
        match kind {
            LossKind::Relative => {
                let denom = sample_norm(truth) + RELATIVE_GUARD;
                total += dnorm / denom / n_batch;
                if with_gradients {
                    let factor = if dnorm == 0.0 {
                        0.0
                    } else {
                        quad / (dnorm * denom * n_batch)
                    };
                    grads.push(scale(&diff, factor));
                }
            }
            LossKind::Squared => {
                total += dnorm * dnorm / n_batch;
                if with_gradients {
                    grads.push(scale(&diff, 2.0 * quad / n_batch));
                }
            }
        }
    }
    Ok((total, grads))
}
