//! Report emission: a flat CSV of per-(N, trial) risks with the fitted
//! slope columns, a JSON summary, and a log-log SVG plot with one polyline
//! per experiment family.

use std::path::Path;

use fnmlab_core::rates::RateExponent;
use fnmlab_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::sweep::{MedianPoint, SweepPoint, SweepResult};

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    experiment: String,
    #[serde(rename = "N")]
    n: usize,
    trial: usize,
    risk: f64,
    slope: f64,
    #[serde(rename = "slopeStdErr")]
    slope_std_err: f64,
    #[serde(rename = "theoryExponent")]
    theory_exponent: f64,
    #[serde(rename = "logFlag")]
    log_flag: bool,
}

/// Writes the sweep results as CSV. The shortest-round-trip float formatting
/// is deterministic, so identical results yield byte-identical files.
pub fn write_csv(results: &[SweepResult], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_error)?;
    if results.is_empty() {
        // header-only file
        writer.write_record([
            "experiment",
            "N",
            "trial",
            "risk",
            "slope",
            "slopeStdErr",
            "theoryExponent",
            "logFlag",
        ])
        .map_err(csv_error)?;
    }
    for result in results {
        for point in &result.points {
            writer
                .serialize(CsvRow {
                    experiment: result.experiment.clone(),
                    n: point.n,
                    trial: point.trial,
                    risk: point.risk,
                    slope: result.slope,
                    slope_std_err: result.slope_std_err,
                    theory_exponent: result.theory_exponent,
                    log_flag: result.log_flag,
                })
                .map_err(csv_error)?;
        }
    }
    writer.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}

/// Reads a CSV written by `write_csv` back into sweep results, grouped by
/// experiment in order of first appearance; medians are recomputed from the
/// points (the computation is deterministic, so a round trip is lossless).
pub fn read_csv(path: &Path) -> Result<Vec<SweepResult>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_error)?;
    let mut results: Vec<SweepResult> = Vec::new();
    for row in reader.deserialize::<CsvRow>() {
        let row = row.map_err(csv_error)?;
        let point = SweepPoint {
            n: row.n,
            trial: row.trial,
            risk: row.risk,
        };
        match results.iter_mut().find(|r| r.experiment == row.experiment) {
            Some(result) => result.points.push(point),
            None => results.push(SweepResult {
                experiment: row.experiment,
                points: vec![point],
                medians: Vec::new(),
                slope: row.slope,
                slope_std_err: row.slope_std_err,
                theory_exponent: row.theory_exponent,
                log_flag: row.log_flag,
            }),
        }
    }
    for result in &mut results {
        let mut grid: Vec<usize> = result.points.iter().map(|p| p.n).collect();
        grid.sort_unstable();
        grid.dedup();
        result.medians = grid
            .into_iter()
            .map(|n| {
                let mut risks: Vec<f64> = result
                    .points
                    .iter()
                    .filter(|p| p.n == n)
                    .map(|p| p.risk)
                    .collect();
                MedianPoint {
                    n,
                    risk: crate::sweep::median(&mut risks),
                }
            })
            .collect();
    }
    Ok(results)
}

/// JSON summary: slopes, theory targets, and medians per experiment.
pub fn write_json(results: &[SweepResult], path: &Path) -> Result<()> {
    #[derive(Serialize)]
    struct Summary<'a> {
        experiment: &'a str,
        slope: f64,
        slope_std_err: f64,
        theory_exponent: f64,
        log_flag: bool,
        medians: &'a [MedianPoint],
    }
    let summaries: Vec<Summary> = results
        .iter()
        .map(|r| Summary {
            experiment: &r.experiment,
            slope: r.slope,
            slope_std_err: r.slope_std_err,
            theory_exponent: r.theory_exponent,
            log_flag: r.log_flag,
            medians: &r.medians,
        })
        .collect();
    let text = serde_json::to_string_pretty(&summaries)
        .map_err(|e| Error::InvalidArgument(format!("json: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Log-log plot of the median risks: one polyline per experiment family.
pub fn write_svg(results: &[SweepResult], path: &Path) -> Result<()> {
    const WIDTH: f64 = 640.0;
    const HEIGHT: f64 = 480.0;
    const MARGIN: f64 = 50.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for result in results {
        for m in &result.medians {
            if m.risk > 0.0 {
                xs.push((m.n as f64).ln());
                ys.push(m.risk.ln());
            }
        }
    }
    let (x_min, x_max) = bounds(&xs);
    let (y_min, y_max) = bounds(&ys);
    let map_x = |v: f64| MARGIN + (v - x_min) / (x_max - x_min).max(1e-12) * (WIDTH - 2.0 * MARGIN);
    let map_y =
        |v: f64| HEIGHT - MARGIN - (v - y_min) / (y_max - y_min).max(1e-12) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\">log N</text>\n",
        WIDTH / 2.0,
        HEIGHT - 10.0
    ));
    svg.push_str(&format!(
        "<text x=\"12\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 12 {})\">log risk</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    ));
    for (idx, result) in results.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        let pts: Vec<String> = result
            .medians
            .iter()
            .filter(|m| m.risk > 0.0)
            .map(|m| format!("{:.2},{:.2}", map_x((m.n as f64).ln()), map_y(m.risk.ln())))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{} (slope {:.3})</text>\n",
            WIDTH - MARGIN - 170.0,
            MARGIN + 16.0 * idx as f64,
            result.experiment,
            result.slope
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
    }
    if !min.is_finite() {
        (0.0, 1.0)
    } else {
        (min, max)
    }
}

/// Checks a fitted slope against the theoretical exponent at the stated
/// tolerance; used by the CLI to decide the exit status.
pub fn slope_within(result: &SweepResult, tolerance: f64) -> bool {
    (result.slope + result.theory_exponent).abs() <= tolerance
}

/// Convenience for constructing results in tests and from the theory-only
/// subcommand.
pub fn theory_only(experiment: &str, theory: RateExponent) -> SweepResult {
    SweepResult {
        experiment: experiment.to_string(),
        points: Vec::new(),
        medians: Vec::new(),
        slope: f64::NAN,
        slope_std_err: f64::NAN,
        theory_exponent: theory.exponent,
        log_flag: theory.log_factor,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_results() -> Vec<SweepResult> {
        vec![
            SweepResult {
                experiment: "ee".into(),
                points: vec![
                    SweepPoint { n: 16, trial: 0, risk: 0.5 },
                    SweepPoint { n: 16, trial: 1, risk: 0.25 },
                    SweepPoint { n: 32, trial: 0, risk: 0.125 },
                    SweepPoint { n: 32, trial: 1, risk: 0.1 },
                ],
                medians: vec![
                    MedianPoint { n: 16, risk: 0.375 },
                    MedianPoint { n: 32, risk: 0.1125 },
                ],
                slope: -0.81,
                slope_std_err: 0.02,
                theory_exponent: 0.8,
                log_flag: false,
            },
            SweepResult {
                experiment: "ff".into(),
                points: vec![
                    SweepPoint { n: 16, trial: 0, risk: 0.3 },
                    SweepPoint { n: 32, trial: 0, risk: 0.15 },
                ],
                medians: vec![
                    MedianPoint { n: 16, risk: 0.3 },
                    MedianPoint { n: 32, risk: 0.15 },
                ],
                slope: -1.0,
                slope_std_err: 0.01,
                theory_exponent: 1.0,
                log_flag: true,
            },
        ]
    }

    #[test]
    fn csv_round_trip_preserves_results() {
        let dir = std::env::temp_dir().join("fnmlab-report-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.csv");
        let results = sample_results();
        write_csv(&results, &path).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(results, back);
        std::fs::remove_file(&path).unwrap();
    }

    #[test]
    fn empty_results_write_header_only() {
        let dir = std::env::temp_dir().join("fnmlab-report-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("empty.csv");
        write_csv(&[], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.trim(),
            "experiment,N,trial,risk,slope,slopeStdErr,theoryExponent,logFlag"
        );
        assert!(read_csv(&path).unwrap().is_empty());
        std::fs::remove_file(&path).unwrap();
    }

    #[test]
    fn identical_results_write_identical_bytes() {
        let dir = std::env::temp_dir().join("fnmlab-report-test");
        std::fs::create_dir_all(&dir).unwrap();
        let a = dir.join("a.csv");
        let b = dir.join("b.csv");
        write_csv(&sample_results(), &a).unwrap();
        write_csv(&sample_results(), &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        std::fs::remove_file(&a).unwrap();
        std::fs::remove_file(&b).unwrap();
    }

    #[test]
    fn svg_has_one_polyline_per_family() {
        let dir = std::env::temp_dir().join("fnmlab-report-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("plot.svg");
        write_svg(&sample_results(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.matches("<polyline").count(), 2);
        assert!(text.contains("ee"));
        assert!(text.contains("ff"));
        std::fs::remove_file(&path).unwrap();
    }

    #[test]
    fn tolerance_check() {
        let results = sample_results();
        assert!(slope_within(&results[0], 0.15));
        assert!(!slope_within(&results[0], 0.005));
    }
}
