//! Convergence-rate sweeps: sample inputs, evaluate analytic conditional
//! risks over an N grid, and fit empirical slopes against the theoretical
//! exponents.

use fnmlab_core::qoi::qoi_coefficients;
use fnmlab_core::rates::{
    compare_exponents, ee_rate_general, ee_rate_optimal, ff_rate_powerlaw, rho_ee, rho_ff,
    CompareTable, RateExponent,
};
use fnmlab_core::risk::{e2e_conditional_risk, ff_conditional_risk};
use fnmlab_core::spectrum::{
    sample_inputs, trial_seed, CoefficientLabel, CoefficientLaw, CoefficientVector, Spectrum,
};
use fnmlab_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::{QoiParams, SweepConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub trial: usize,
    pub risk: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MedianPoint {
    pub n: usize,
    pub risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub experiment: String,
    pub points: Vec<SweepPoint>,
    pub medians: Vec<MedianPoint>,
    /// Log-log slope of the median risk over the upper half of the N grid.
    pub slope: f64,
    pub slope_std_err: f64,
    /// Theoretical decay exponent e (risk ~ N^-e), so the predicted slope
    /// is -e.
    pub theory_exponent: f64,
    pub log_flag: bool,
}

pub(crate) fn median(values: &mut Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite risks"));
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Medians per N and the slope fit over the upper half of the grid (at
/// least three points): the asymptotic regime of the rate statements.
fn summarize(
    experiment: &str,
    points: Vec<SweepPoint>,
    n_grid: &[usize],
    theory: RateExponent,
) -> Result<SweepResult> {
    let mut medians = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let mut risks: Vec<f64> = points
            .iter()
            .filter(|p| p.n == n)
            .map(|p| p.risk)
            .collect();
        medians.push(MedianPoint {
            n,
            risk: median(&mut risks),
        });
    }
    let start = (n_grid.len() / 2).min(n_grid.len().saturating_sub(3));
    let xs: Vec<f64> = medians[start..].iter().map(|m| m.n as f64).collect();
    let ys: Vec<f64> = medians[start..].iter().map(|m| m.risk).collect();
    let fit = fnmlab_core::fit::log_log_slope(&xs, &ys)?;
    Ok(SweepResult {
        experiment: experiment.to_string(),
        points,
        medians,
        slope: fit.slope,
        slope_std_err: fit.std_err,
        theory_exponent: theory.exponent,
        log_flag: theory.log_factor,
    })
}

/// End-to-end sweep: fresh Gaussian inputs per (N, trial), analytic
/// conditional risk of the posterior mean, slope fit against the
/// rate-theory exponent.
pub fn run_ee_sweep(config: &SweepConfig, seed: u64) -> Result<SweepResult> {
    config.validate()?;
    let spec = config.rate.to_spec()?;
    spec.ee_admissible()?;
    let j = config.truncation;
    let input_spectrum = Spectrum::power_law(spec.alpha, 1.0, j)?;
    let test_spectrum = Spectrum::power_law(spec.alpha_prime, 1.0, j)?;
    let prior = Spectrum::power_law(spec.p, 1.0, j)?;
    // truth just inside H^s: the slowest admissible decay for the theorem's
    // uniform-over-the-ball rate
    let mut truth =
        CoefficientVector::power_law_truth(spec.s + 0.51, j, CoefficientLabel::TruthF);
    truth.normalize_sobolev(spec.s, 1.0);
    let gamma = spec.gamma_sq.sqrt();

    let theory = if spec.p == spec.s + 0.5 {
        ee_rate_optimal(&spec)?
    } else {
        ee_rate_general(&spec)?
    };

    let mut points = Vec::with_capacity(config.n_grid.len() * config.trials);
    for (stream, &n) in config.n_grid.iter().enumerate() {
        for trial in 0..config.trials {
            let s = trial_seed(seed, trial as u64, stream as u64);
            let inputs = sample_inputs(&input_spectrum, CoefficientLaw::GaussianUnit, n, s)?;
            let report = e2e_conditional_risk(&truth, &inputs, gamma, &prior, &test_spectrum)?;
            points.push(SweepPoint {
                n,
                trial,
                risk: report.total,
            });
        }
    }
    summarize("ee", points, &config.n_grid, theory)
}

fn ff_qoi(config: &SweepConfig) -> Result<CoefficientVector> {
    let params = config.qoi.unwrap_or(QoiParams::Synthetic {
        r: config.rate.r,
        scale: 1.0,
    });
    qoi_coefficients(&params.to_descriptor()?, config.truncation)
}

/// Full-field sweep: coordinate-wise posterior for the operator, plug-in
/// QoI risk, slope fit against the power-law rate.
pub fn run_ff_sweep(config: &SweepConfig, seed: u64) -> Result<SweepResult> {
    config.validate()?;
    let spec = config.rate.to_spec()?;
    spec.ff_powerlaw_admissible()?;
    let j = config.truncation;
    let input_spectrum = Spectrum::power_law(spec.alpha, 1.0, j)?;
    let test_spectrum = Spectrum::power_law(spec.alpha_prime, 1.0, j)?;
    // prior mu_j = j^{-2 beta - 1}
    let prior = Spectrum::power_law(spec.beta + 0.5, 1.0, j)?;
    let l_truth =
        CoefficientVector::power_law_truth(spec.beta + 0.51, j, CoefficientLabel::OperatorL);
    let qoi = ff_qoi(config)?;
    let theory = ff_rate_powerlaw(&spec)?;

    let mut points = Vec::with_capacity(config.n_grid.len() * config.trials);
    for (stream, &n) in config.n_grid.iter().enumerate() {
        for trial in 0..config.trials {
            let s = trial_seed(seed, trial as u64, stream as u64);
            let inputs = sample_inputs(&input_spectrum, CoefficientLaw::GaussianUnit, n, s)?;
            let report = ff_conditional_risk(&l_truth, &qoi, &inputs, &prior, &test_spectrum)?;
            points.push(SweepPoint {
                n,
                trial,
                risk: report.total,
            });
        }
    }
    summarize("ff", points, &config.n_grid, theory)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub ee: SweepResult,
    pub ff: SweepResult,
    /// Whether the configuration satisfies the strict sufficient conditions
    /// of the comparison corollary (notably alpha + beta + r > 1/2); the
    /// sweeps still run outside that regime.
    pub corollary_admissible: bool,
    pub r0: f64,
    pub r1: f64,
    pub rho1: f64,
    pub curve: Vec<CurveRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub r: f64,
    pub rho_ee: f64,
    pub rho_ff: f64,
    pub admissible: bool,
}

/// End-to-end versus full-field sweeps on the shared factorized truth
/// f_j = q_j l_j, with the in-distribution exponents rho as theory targets,
/// plus the exponent-versus-r curve table.
pub fn run_comparison(config: &SweepConfig, seed: u64) -> Result<ComparisonReport> {
    config.validate()?;
    let spec = config.rate.to_spec()?;
    // only the structural conditions are hard requirements here: the
    // exponent curves extend below the corollary's sufficient condition
    // alpha + beta + r > 1/2 (the rough-QoI half of the crossing picture),
    // so that case is reported as a flag rather than rejected
    if !(spec.beta + spec.r + 0.5 > 0.0) {
        return Err(Error::Inadmissible(
            "comparison requires beta + r + 1/2 > 0".into(),
        ));
    }
    if !(spec.alpha + spec.beta > 0.0) {
        return Err(Error::Inadmissible(
            "comparison requires alpha + beta > 0".into(),
        ));
    }
    let corollary_admissible = spec.comparison_admissible().is_ok();
    if spec.alpha_prime != spec.alpha {
        return Err(Error::InvalidArgument(
            "the comparison is stated in distribution: alpha' must equal alpha".into(),
        ));
    }
    let j = config.truncation;
    let input_spectrum = Spectrum::power_law(spec.alpha, 1.0, j)?;
    let test_spectrum = input_spectrum.clone();
    let ab = spec.alpha + spec.beta;

    let l_truth =
        CoefficientVector::power_law_truth(spec.beta + 0.51, j, CoefficientLabel::OperatorL);
    let qoi = ff_qoi(config)?;
    let f_truth = CoefficientVector::new(
        l_truth
            .coeffs
            .iter()
            .zip(&qoi.coeffs)
            .map(|(l, q)| l * q)
            .collect(),
        CoefficientLabel::TruthF,
    );

    // end-to-end side: prior tuned to the factorized regularity p = b + r + 1
    let ee_prior = Spectrum::power_law(spec.beta + spec.r + 1.0, 1.0, j)?;
    let gamma = spec.gamma_sq.sqrt();
    let ee_theory = RateExponent {
        exponent: rho_ee(ab, spec.r),
        log_factor: false,
    };
    let mut ee_points = Vec::new();
    for (stream, &n) in config.n_grid.iter().enumerate() {
        for trial in 0..config.trials {
            let s = trial_seed(seed, trial as u64, stream as u64);
            let inputs = sample_inputs(&input_spectrum, CoefficientLaw::GaussianUnit, n, s)?;
            let report =
                e2e_conditional_risk(&f_truth, &inputs, gamma, &ee_prior, &test_spectrum)?;
            ee_points.push(SweepPoint {
                n,
                trial,
                risk: report.total,
            });
        }
    }
    let ee = summarize("compare-ee", ee_points, &config.n_grid, ee_theory)?;

    // full-field side: prior mu_j = j^{-2 beta - 1}, same inputs stream
    let ff_prior = Spectrum::power_law(spec.beta + 0.5, 1.0, j)?;
    let ff_theory = RateExponent {
        exponent: rho_ff(ab, spec.r),
        log_factor: false,
    };
    let mut ff_points = Vec::new();
    for (stream, &n) in config.n_grid.iter().enumerate() {
        for trial in 0..config.trials {
            let s = trial_seed(seed, trial as u64, stream as u64);
            let inputs = sample_inputs(&input_spectrum, CoefficientLaw::GaussianUnit, n, s)?;
            let report =
                ff_conditional_risk(&l_truth, &qoi, &inputs, &ff_prior, &test_spectrum)?;
            ff_points.push(SweepPoint {
                n,
                trial,
                risk: report.total,
            });
        }
    }
    let ff = summarize("compare-ff", ff_points, &config.n_grid, ff_theory)?;

    let r_grid: Vec<f64> = (-40..=30).map(|i| i as f64 * 0.05).collect();
    let table: CompareTable = compare_exponents(ab, &r_grid)?;
    Ok(ComparisonReport {
        ee,
        ff,
        corollary_admissible,
        r0: table.r0,
        r1: table.r1,
        rho1: table.rho1,
        curve: table
            .rows
            .iter()
            .map(|row| CurveRow {
                r: row.r,
                rho_ee: row.rho_ee,
                rho_ff: row.rho_ff,
                admissible: row.admissible,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RateParams;

    fn small_ee_config() -> SweepConfig {
        SweepConfig {
            rate: RateParams {
                alpha: 1.0,
                alpha_prime: 1.0,
                s: 1.0,
                p: 1.5,
                beta: 0.0,
                r: 0.0,
                gamma_sq: 1.0,
            },
            n_grid: vec![16, 32, 64, 128, 256],
            truncation: 128,
            trials: 3,
            qoi: None,
        }
    }

    #[test]
    fn ee_sweep_slope_is_roughly_theoretical() {
        let result = run_ee_sweep(&small_ee_config(), 7).unwrap();
        assert_eq!(result.theory_exponent, 0.8);
        assert!(!result.log_flag);
        // loose tolerance at this desk scale; the acceptance run uses the
        // full configuration
        assert!(
            (result.slope + 0.8).abs() < 0.3,
            "slope {} too far from -0.8",
            result.slope
        );
    }

    #[test]
    fn ee_sweep_reaches_the_parametric_rate_for_easy_test_norms() {
        // alpha' > alpha + 1/2: the test norm downweights the hard
        // coordinates enough that the risk decays at the parametric N^-1
        let mut cfg = small_ee_config();
        cfg.rate.alpha_prime = 2.0;
        cfg.n_grid = vec![16, 32, 64, 128, 256, 512];
        cfg.truncation = 256;
        let result = run_ee_sweep(&cfg, 5).unwrap();
        assert_eq!(result.theory_exponent, 1.0);
        assert!(
            (result.slope + 1.0).abs() < 0.3,
            "slope {} too far from -1",
            result.slope
        );
    }

    #[test]
    fn sweeps_are_deterministic_in_the_seed() {
        let a = run_ee_sweep(&small_ee_config(), 11).unwrap();
        let b = run_ee_sweep(&small_ee_config(), 11).unwrap();
        assert_eq!(a, b);
        let c = run_ee_sweep(&small_ee_config(), 12).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn ff_sweep_with_degenerate_grid_start_runs() {
        let mut cfg = SweepConfig::default_ff(0.5);
        cfg.n_grid = vec![1, 2, 4, 8, 16];
        cfg.truncation = 64;
        cfg.trials = 2;
        let result = run_ff_sweep(&cfg, 3).unwrap();
        assert_eq!(result.points.len(), 10);
        assert!(result.points.iter().all(|p| p.risk.is_finite()));
    }

    #[test]
    fn noiseless_interpolation_collapses_risk() {
        // gamma = 0 with N >= J: the posterior mean interpolates and the
        // conditional risk collapses toward the truncation floor
        use fnmlab_core::risk::e2e_conditional_risk;
        use fnmlab_core::spectrum::{
            sample_inputs, CoefficientLabel, CoefficientLaw, CoefficientVector, Spectrum,
        };
        let j = 32;
        let spectrum = Spectrum::power_law(1.0, 1.0, j).unwrap();
        let prior = Spectrum::power_law(1.5, 1.0, j).unwrap();
        let mut truth =
            CoefficientVector::power_law_truth(1.51, j, CoefficientLabel::TruthF);
        truth.normalize_sobolev(1.0, 1.0);
        let inputs =
            sample_inputs(&spectrum, CoefficientLaw::GaussianUnit, 4 * j, 5).unwrap();
        let report =
            e2e_conditional_risk(&truth, &inputs, 0.0, &prior, &spectrum).unwrap();
        assert!(report.total < 1e-18, "risk {}", report.total);
    }

    #[test]
    fn comparison_requires_in_distribution_spec() {
        let mut cfg = SweepConfig::default_comparison(1.0, 0.0, 1.0);
        cfg.rate.alpha_prime = 0.75;
        cfg.truncation = 32;
        cfg.trials = 1;
        cfg.n_grid = vec![4, 8, 16, 32];
        assert!(run_comparison(&cfg, 1).is_err());
    }

    #[test]
    fn comparison_flags_the_corollary_regime() {
        // rough QoIs below alpha + beta + r = 1/2 still run, but the strict
        // corollary conditions are reported as not satisfied
        let mut cfg = SweepConfig::default_comparison(0.55, 0.45, -0.9);
        cfg.truncation = 32;
        cfg.trials = 1;
        cfg.n_grid = vec![4, 8, 16, 32];
        assert!(!run_comparison(&cfg, 1).unwrap().corollary_admissible);
        let mut cfg = SweepConfig::default_comparison(1.0, 0.0, 1.0);
        cfg.truncation = 32;
        cfg.trials = 1;
        cfg.n_grid = vec![4, 8, 16, 32];
        assert!(run_comparison(&cfg, 1).unwrap().corollary_admissible);
    }

    #[test]
    fn truncation_tail_is_negligible() {
        // doubling J changes the risk by well under 1% at the largest N of
        // the reduced configuration; the same input draw is reused (first
        // J columns) so only the truncation differs
        use fnmlab_core::risk::e2e_conditional_risk;
        use fnmlab_core::spectrum::{
            sample_inputs, CoefficientLabel, CoefficientLaw, CoefficientVector, Spectrum,
        };
        use ndarray::s;
        let n = 512;
        let (j_coarse, j_fine) = (512, 1024);
        let fine_spectrum = Spectrum::power_law(1.0, 1.0, j_fine).unwrap();
        let inputs_fine =
            sample_inputs(&fine_spectrum, CoefficientLaw::GaussianUnit, n, 9).unwrap();
        let inputs_coarse = inputs_fine.slice(s![.., ..j_coarse]).to_owned();
        let risk_at = |j: usize, inputs: &ndarray::Array2<f64>| {
            let prior = Spectrum::power_law(1.5, 1.0, j).unwrap();
            let test = Spectrum::power_law(1.0, 1.0, j).unwrap();
            let mut truth =
                CoefficientVector::power_law_truth(1.51, j, CoefficientLabel::TruthF);
            truth.normalize_sobolev(1.0, 1.0);
            e2e_conditional_risk(&truth, inputs, 1.0, &prior, &test)
                .unwrap()
                .total
        };
        let ra = risk_at(j_coarse, &inputs_coarse);
        let rb = risk_at(j_fine, &inputs_fine);
        assert!(
            (ra - rb).abs() / rb < 0.01,
            "truncation drift {ra} vs {rb}"
        );
    }
}
