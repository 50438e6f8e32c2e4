//! Desk-scale synthetic experiment for the neural mappings: a band-limited
//! random input, an intermediate function given by a spectral low-pass of a
//! pointwise nonlinearity, and either the function itself (full-field) or
//! its grid mean and standard deviation (end-to-end) as the target.

use fnmlab_core::fnm::grid::GridFunction;
use fnmlab_core::fnm::loss::{loss_relative, LossKind};
use fnmlab_core::fnm::model::{FnmModel, ModelConfig, Sample, Variant};
use fnmlab_core::fnm::spectral;
use fnmlab_core::fnm::train::{train, OptimizerConfig};
use fnmlab_core::spectrum::trial_seed;
use fnmlab_core::Result;
use ndarray::Array1;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{FnmTaskConfig, TaskKind};

pub const ALL_VARIANTS: [Variant; 4] =
    [Variant::F2F, Variant::F2V, Variant::V2F, Variant::V2V];

fn variant_name(variant: Variant) -> &'static str {
    match variant {
        Variant::F2F => "f2f",
        Variant::F2V => "f2v",
        Variant::V2F => "v2f",
        Variant::V2V => "v2v",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FnmCell {
    pub variant: String,
    pub n: usize,
    pub seed: u64,
    pub test_error: f64,
    pub final_train_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FnmMedian {
    pub variant: String,
    pub n: usize,
    pub test_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FnmReport {
    pub cells: Vec<FnmCell>,
    pub medians: Vec<FnmMedian>,
}

/// One drawn example: the KL coefficient vector, the input function, and
/// both target representations.
struct Example {
    coeffs: Array1<f64>,
    input_fn: GridFunction,
    target_fn: GridFunction,
    target_vec: Array1<f64>,
}

/// KL coefficient layout: [a_0, a_1, b_1, ..., a_K, b_K] with amplitude
/// decay k^-1.5, matching a once-differentiable random field.
fn draw_example(rng: &mut ChaCha8Rng, config: &FnmTaskConfig) -> Example {
    let k = config.kl_modes;
    let mut coeffs = Array1::zeros(2 * k + 1);
    for v in coeffs.iter_mut() {
        *v = rng.gen_range(-1.0..1.0) * 3f64.sqrt(); // unit variance
    }
    let spec: Vec<Complex64> = (0..=k)
        .map(|m| {
            if m == 0 {
                Complex64::new(coeffs[0], 0.0)
            } else {
                let amp = (m as f64).powf(-1.5);
                Complex64::new(amp * coeffs[2 * m - 1], amp * coeffs[2 * m])
            }
        })
        .collect();
    let input_fn = GridFunction::band_limited(config.resolution, &[spec]).expect("valid grid");

    let target_fn = match config.task {
        TaskKind::Identity => input_fn.clone(),
        TaskKind::Smoothed => smoothed_image(&input_fn),
    };
    let mean = target_fn.integral()[0];
    let second: f64 =
        target_fn.values().mapv(|v| v * v).sum() / config.resolution as f64;
    let std = (second - mean * mean).max(0.0).sqrt();
    Example {
        coeffs,
        input_fn,
        target_fn,
        target_vec: Array1::from_vec(vec![mean, std]),
    }
}

/// Fixed spectral low-pass of tanh(u): filter weight 1/(1 + m^2) on mode m.
fn smoothed_image(input: &GridFunction) -> GridFunction {
    let n = input.resolution();
    let nonlinear = GridFunction::new(input.values().mapv(f64::tanh)).expect("same grid");
    let modes = n / 2 - 1;
    let mut coeffs = spectral::forward_coeffs(nonlinear.values(), modes);
    for (m, mut row) in coeffs.rows_mut().into_iter().enumerate() {
        let weight = 1.0 / (1.0 + (m * m) as f64);
        row.mapv_inplace(|c| c * weight);
    }
    GridFunction::new(spectral::inverse_mirrored(&coeffs, n)).expect("same grid")
}

fn dataset(
    config: &FnmTaskConfig,
    variant: Variant,
    count: usize,
    seed: u64,
) -> (Vec<Sample>, Vec<Sample>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count);
    for _ in 0..count {
        let example = draw_example(&mut rng, config);
        inputs.push(if variant.vector_input() {
            Sample::Vector(example.coeffs)
        } else {
            Sample::Function(example.input_fn)
        });
        targets.push(if variant.vector_output() {
            Sample::Vector(example.target_vec)
        } else {
            Sample::Function(example.target_fn)
        });
    }
    (inputs, targets)
}

fn model_config(config: &FnmTaskConfig, variant: Variant) -> ModelConfig {
    let kl_dim = 2 * config.kl_modes + 1;
    ModelConfig {
        variant,
        in_dim: if variant.vector_input() { kl_dim } else { 1 },
        out_dim: if variant.vector_output() { 2 } else { 1 },
        width: config.width,
        modes: config.modes,
        hidden_layers: config.hidden_layers,
        resolution: config.resolution,
        use_w_branch: variant.vector_output(),
    }
}

/// Trains one variant on `n` samples and reports the relative test error.
pub fn train_one(
    config: &FnmTaskConfig,
    variant: Variant,
    n: usize,
    seed: u64,
) -> Result<FnmCell> {
    config.validate()?;
    let (inputs, targets) = dataset(config, variant, n, trial_seed(seed, 0, 1));
    let (test_inputs, test_targets) =
        dataset(config, variant, config.n_test, trial_seed(seed, 0, 2));
    let mut model = FnmModel::init(model_config(config, variant), trial_seed(seed, 0, 3))?;
    let opt = OptimizerConfig {
        epochs: config.epochs,
        batch_size: config.batch_size,
        learning_rate: config.learning_rate,
        loss: LossKind::Relative,
        seed: trial_seed(seed, 0, 4),
        ..OptimizerConfig::default()
    };
    let report = train(&mut model, &inputs, &targets, &opt)?;
    let mut preds = Vec::with_capacity(test_inputs.len());
    for input in &test_inputs {
        preds.push(model.forward(input)?.0);
    }
    let test_error = loss_relative(&preds, &test_targets)?;
    Ok(FnmCell {
        variant: variant_name(variant).to_string(),
        n,
        seed,
        test_error,
        final_train_loss: *report.loss_history.last().expect("at least one epoch"),
    })
}

/// Runs the full grid: every variant, every training-set size, every seed,
/// with medians over seeds per (variant, N).
pub fn run_fnm_synthetic(config: &FnmTaskConfig) -> Result<FnmReport> {
    config.validate()?;
    let variants: Vec<Variant> = match config.task {
        TaskKind::Smoothed => ALL_VARIANTS.to_vec(),
        // the identity target is only defined for function inputs
        TaskKind::Identity => vec![Variant::F2F],
    };
    let mut cells = Vec::new();
    for &variant in &variants {
        for &n in &config.n_grid {
            for &seed in &config.seeds {
                cells.push(train_one(config, variant, n, seed)?);
            }
        }
    }
    let mut medians = Vec::new();
    for &variant in &variants {
        for &n in &config.n_grid {
            let mut errors: Vec<f64> = cells
                .iter()
                .filter(|c| c.variant == variant_name(variant) && c.n == n)
                .map(|c| c.test_error)
                .collect();
            medians.push(FnmMedian {
                variant: variant_name(variant).to_string(),
                n,
                test_error: crate::sweep::median(&mut errors),
            });
        }
    }
    Ok(FnmReport { cells, medians })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sample_count_is_rejected() {
        let mut cfg = FnmTaskConfig::default_smoothed();
        cfg.n_grid = vec![0];
        assert!(run_fnm_synthetic(&cfg).is_err());
    }

    #[test]
    fn smoothed_image_is_smoother_than_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = FnmTaskConfig::default_smoothed();
        let example = draw_example(&mut rng, &cfg);
        // the filter damps every nonzero mode, so the image has less
        // high-frequency energy than tanh of the input
        let nonlinear = GridFunction::new(example.input_fn.values().mapv(f64::tanh)).unwrap();
        let modes = cfg.resolution / 2 - 1;
        let c_raw = spectral::forward_coeffs(nonlinear.values(), modes);
        let c_img = spectral::forward_coeffs(example.target_fn.values(), modes);
        for m in 1..=modes {
            assert!(c_img[[m, 0]].norm() <= c_raw[[m, 0]].norm() + 1e-12);
        }
    }

    #[test]
    fn datasets_are_deterministic() {
        let cfg = FnmTaskConfig::default_smoothed();
        let (a, _) = dataset(&cfg, Variant::F2F, 4, 9);
        let (b, _) = dataset(&cfg, Variant::F2F, 4, 9);
        assert_eq!(a, b);
    }

    #[test]
    fn identity_task_trains_to_low_error() {
        let mut cfg = FnmTaskConfig::default_identity();
        cfg.epochs = 250;
        let cell = train_one(&cfg, Variant::F2F, 256, 1).unwrap();
        assert!(
            cell.test_error < 1e-2,
            "identity relative error {}",
            cell.test_error
        );
    }
}
