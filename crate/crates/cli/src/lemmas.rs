//! Numerical checks of the supporting lemmas: power-law series decay rates,
//! effective-dimension growth, and the regularized-inverse identity.

use fnmlab_core::fit::log_log_slope;
use fnmlab_core::rates::{
    effective_dimension, regularized_inverse_residual, series_oracle_powerlaw,
};
use fnmlab_core::Result;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// One series-decay check: the sum `sum_j j^{-t} / (1 + N j^{-u})^v` should
/// scale like `N^{-min(v, (t-1)/u)}`, with a `log N` factor at the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesCase {
    pub t: f64,
    pub u: f64,
    pub v: f64,
    pub predicted: f64,
    pub log_flag: bool,
    pub fitted: f64,
}

/// Fits the decay slope for the three regimes of the series lemma: the
/// tail-dominated case `(t-1)/u < v`, the boundary case with the `log N`
/// correction, and the head-dominated case `(t-1)/u > v`.
pub fn series_slopes() -> Result<Vec<SeriesCase>> {
    // one triple per regime: tail-dominated ((t-1)/u < v), boundary with the
    // log factor, head-dominated ((t-1)/u > v); t is kept large enough that
    // the oracle's tail certification stays cheap
    let triples = [(3.0, 2.0, 2.0), (3.0, 1.0, 2.0), (4.0, 1.0, 2.0)];
    let n_grid: Vec<u64> = (8..=16).map(|k| 1u64 << k).collect();
    let mut cases = Vec::new();
    for (t, u, v) in triples {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut predicted = f64::NAN;
        let mut log_flag = false;
        for &n in &n_grid {
            let (sum, rate, log) = series_oracle_powerlaw(t, u, v, n)?;
            predicted = rate;
            log_flag = log;
            xs.push(n as f64);
            // divide out the boundary log factor so the fit targets the
            // power-law part alone
            ys.push(if log { sum / (n as f64).ln() } else { sum });
        }
        let fit = log_log_slope(&xs, &ys)?;
        cases.push(SeriesCase {
            t,
            u,
            v,
            predicted,
            log_flag,
            fitted: fit.slope,
        });
    }
    Ok(cases)
}

/// One effective-dimension check: `tr(C_mu^{-1} C)` for the power-law
/// spectrum `d_j = j^{-2(alpha+p)}` should grow like `mu^{-1/(2(alpha+p))}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DimensionCase {
    pub alpha: f64,
    pub p: f64,
    pub predicted: f64,
    pub fitted: f64,
}

pub fn effective_dimension_slopes() -> Result<Vec<DimensionCase>> {
    let pairs = [(1.0, 1.5), (1.0, 1.0), (0.75, 1.25)];
    let mu_grid: Vec<f64> = (4..=14).map(|k| 2f64.powi(-k)).collect();
    let mut cases = Vec::new();
    for (alpha, p) in pairs {
        let table = effective_dimension(alpha, p, &mu_grid)?;
        let xs: Vec<f64> = table.iter().map(|&(mu, _)| mu).collect();
        let ys: Vec<f64> = table.iter().map(|&(_, trace)| trace).collect();
        let fit = log_log_slope(&xs, &ys)?;
        cases.push(DimensionCase {
            alpha,
            p,
            predicted: -1.0 / (2.0 * (alpha + p)),
            fitted: fit.slope,
        });
    }
    Ok(cases)
}

/// Maximum relative residual of the regularized-inverse identity over
/// `count` random symmetric PSD pairs of varying size and regularization.
pub fn regularized_inverse_max_residual(count: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let dim = rng.gen_range(2..=16);
        let a = random_psd(&mut rng, dim);
        let b = random_psd(&mut rng, dim);
        // the lower end keeps the condition number (~ ||A|| / lambda) small
        // enough that floating-point error stays well under the certified
        // residual tolerance
        let lambda = 10f64.powf(rng.gen_range(-4.0..0.0));
        worst = worst.max(regularized_inverse_residual(&a, &b, lambda)?);
    }
    Ok(worst)
}

fn random_psd(rng: &mut ChaCha8Rng, dim: usize) -> Array2<f64> {
    let g = Array2::from_shape_fn((dim, dim), |_| rng.gen_range(-1.0..1.0));
    g.t().dot(&g)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub series: Vec<SeriesCase>,
    pub dimensions: Vec<DimensionCase>,
    pub max_inverse_residual: f64,
}

impl LemmaReport {
    /// True when every fitted slope lies within the stated tolerances and
    /// the inverse identity holds to near machine precision.
    pub fn passes(&self) -> bool {
        self.series
            .iter()
            .all(|c| (c.fitted + c.predicted).abs() <= 0.1)
            && self
                .dimensions
                .iter()
                .all(|c| (c.fitted - c.predicted).abs() <= 0.05)
            && self.max_inverse_residual <= 1e-8
    }
}

pub fn verify_all(seed: u64) -> Result<LemmaReport> {
    Ok(LemmaReport {
        series: series_slopes()?,
        dimensions: effective_dimension_slopes()?,
        max_inverse_residual: regularized_inverse_max_residual(100, seed)?,
    })
}
