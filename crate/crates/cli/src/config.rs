//! Experiment configuration: serde-friendly mirrors of the rate
//! specification plus sweep plumbing (N grid, truncation, trials, seeds).

use fnmlab_core::qoi::{QoIDescriptor, QoIKind};
use fnmlab_core::rates::RateSpec;
use fnmlab_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateParams {
    pub alpha: f64,
    pub alpha_prime: f64,
    pub s: f64,
    pub p: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub r: f64,
    pub gamma_sq: f64,
}

impl RateParams {
    pub fn to_spec(self) -> Result<RateSpec> {
        RateSpec::new(
            self.alpha,
            self.alpha_prime,
            self.s,
            self.p,
            self.beta,
            self.r,
            self.gamma_sq,
        )
    }
}

/// QoI selection for full-field sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum QoiParams {
    MeanOnInterval,
    PointEvaluation { x0: f64 },
    DerivativePointEvaluation { x0: f64 },
    Synthetic { r: f64, scale: f64 },
}

impl QoiParams {
    pub fn to_descriptor(self) -> Result<QoIDescriptor> {
        let kind = match self {
            QoiParams::MeanOnInterval => QoIKind::MeanOnInterval,
            QoiParams::PointEvaluation { x0 } => QoIKind::PointEvaluation { x0 },
            QoiParams::DerivativePointEvaluation { x0 } => {
                QoIKind::DerivativePointEvaluation { x0 }
            }
            QoiParams::Synthetic { r, scale } => QoIKind::SyntheticPowerlaw { r, scale },
        };
        QoIDescriptor::new(kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub rate: RateParams,
    /// Sample sizes, dyadic and strictly increasing.
    pub n_grid: Vec<usize>,
    /// Sequence truncation J.
    pub truncation: usize,
    /// Trials per sample size.
    pub trials: usize,
    /// QoI for full-field sweeps; defaults to the synthetic power law with
    /// the spec's r.
    #[serde(default)]
    pub qoi: Option<QoiParams>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("need at least one trial".into()));
        }
        if self.truncation == 0 {
            return Err(Error::InvalidArgument("truncation must be positive".into()));
        }
        if self.n_grid.len() < 4 {
            return Err(Error::InvalidArgument(
                "need at least 4 sample sizes to fit an asymptotic slope".into(),
            ));
        }
        for pair in self.n_grid.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::InvalidArgument(format!(
                    "sample sizes must be strictly increasing: {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        for &n in &self.n_grid {
            if n == 0 || !n.is_power_of_two() {
                return Err(Error::InvalidArgument(format!(
                    "sample sizes must be dyadic, got {n}"
                )));
            }
        }
        self.rate.to_spec().map(|_| ())
    }

    /// The end-to-end acceptance configuration.
    pub fn default_ee() -> Self {
        Self {
            rate: RateParams {
                alpha: 1.0,
                alpha_prime: 1.0,
                s: 1.0,
                p: 1.5,
                beta: 0.0,
                r: 0.0,
                gamma_sq: 1.0,
            },
            n_grid: (6..=13).map(|k| 1usize << k).collect(),
            truncation: 2048,
            trials: 20,
            qoi: None,
        }
    }

    /// The full-field acceptance configuration with a synthetic QoI of
    /// smoothness `r`.
    pub fn default_ff(r: f64) -> Self {
        Self {
            rate: RateParams {
                alpha: 1.0,
                alpha_prime: 1.0,
                s: 1.0,
                p: 1.0,
                beta: 0.5,
                r,
                gamma_sq: 1.0,
            },
            n_grid: (6..=13).map(|k| 1usize << k).collect(),
            truncation: 2048,
            trials: 20,
            qoi: Some(QoiParams::Synthetic { r, scale: 1.0 }),
        }
    }

    /// The comparison acceptance configuration: `alpha' = alpha`, prior
    /// `p = beta + r + 1`, truth factorized through the QoI.
    pub fn default_comparison(alpha: f64, beta: f64, r: f64) -> Self {
        Self {
            rate: RateParams {
                alpha,
                alpha_prime: alpha,
                s: (beta + r + 0.5).max(0.0),
                p: beta + r + 1.0,
                beta,
                r,
                gamma_sq: 1.0,
            },
            n_grid: (6..=13).map(|k| 1usize << k).collect(),
            truncation: 2048,
            trials: 20,
            qoi: Some(QoiParams::Synthetic { r, scale: 1.0 }),
        }
    }
}

/// Synthetic FNM experiment task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// Intermediate function = spectral low-pass of tanh(u); outputs are the
    /// function (full-field) or its grid mean and standard deviation
    /// (end-to-end).
    Smoothed,
    /// Output = input function (function-input variants only).
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FnmTaskConfig {
    pub task: TaskKind,
    /// Training-set sizes.
    pub n_grid: Vec<usize>,
    pub n_test: usize,
    /// Model-initialization / data seeds; medians are taken across them.
    pub seeds: Vec<u64>,
    pub resolution: usize,
    /// Input band limit of the KL expansion.
    pub kl_modes: usize,
    pub width: usize,
    pub modes: usize,
    pub hidden_layers: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl FnmTaskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArgument(
                "training-set sizes must be positive".into(),
            ));
        }
        if self.seeds.is_empty() || self.n_test == 0 {
            return Err(Error::InvalidArgument(
                "need at least one seed and a nonempty test set".into(),
            ));
        }
        if !self.resolution.is_power_of_two()
            || self.resolution <= 2 * self.modes
            || self.resolution <= 2 * self.kl_modes
        {
            return Err(Error::InvalidArgument(format!(
                "resolution {} must be a power of two above twice the band limits",
                self.resolution
            )));
        }
        Ok(())
    }

    pub fn default_smoothed() -> Self {
        Self {
            task: TaskKind::Smoothed,
            n_grid: vec![64, 256, 1024],
            n_test: 128,
            seeds: vec![1, 2, 3],
            resolution: 32,
            kl_modes: 4,
            width: 8,
            modes: 4,
            hidden_layers: 2,
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-2,
        }
    }

    pub fn default_identity() -> Self {
        Self {
            task: TaskKind::Identity,
            n_grid: vec![256],
            n_test: 64,
            seeds: vec![1],
            resolution: 32,
            kl_modes: 4,
            width: 8,
            modes: 4,
            hidden_layers: 2,
            epochs: 300,
            batch_size: 32,
            learning_rate: 1e-2,
        }
    }
}
