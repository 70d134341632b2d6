//! Evaluation statistics for truth/prediction pairs: the relative residual
//! ΔZ = (truth − predicted)/truth, the share of samples with |ΔZ| < 0.10
//! (accuracy), the count with |ΔZ| > 0.50 (outliers), and the standard
//! deviation of the raw errors in megapascals.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

const PA_PER_MPA: f64 = 1e6;

/// The four headline statistics for one model on one dataset, plus the
/// signed mean residual for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    /// Percent of samples with |ΔZ| < 0.10 (strict).
    pub accuracy_pct: f64,
    /// Mean of |ΔZ|.
    pub mean_abs_residual: f64,
    /// Signed mean of ΔZ.
    pub mean_residual: f64,
    /// Count of samples with |ΔZ| > 0.50 (strict).
    pub outliers: usize,
    /// Population standard deviation of (truth − predicted), megapascals.
    pub deviation_mpa: f64,
}

/// Relative residuals ΔZ_i = (truth_i − pred_i) / truth_i.
pub fn residuals(truth: &[f64], pred: &[f64]) -> Result<Vec<f64>> {
    if truth.is_empty() || truth.len() != pred.len() {
        return Err(Error::domain(format!(
            "need equal non-empty truth/prediction lists, got {} / {}",
            truth.len(),
            pred.len()
        )));
    }
    truth
        .iter()
        .zip(pred)
        .enumerate()
        .map(|(i, (&t, &p))| {
            if t == 0.0 {
                Err(Error::domain(format!(
                    "sample {i}: zero truth value makes the relative residual undefined"
                )))
            } else {
                Ok((t - p) / t)
            }
        })
        .collect()
}

/// Computes the full report. Inputs are in pascals; only the deviation is
/// unit-bearing (reported in MPa).
pub fn report(truth: &[f64], pred: &[f64]) -> Result<MetricsReport> {
    let dz = residuals(truth, pred)?;
    let n = dz.len();
    let within = dz.iter().filter(|z| z.abs() < 0.10).count();
    let outliers = dz.iter().filter(|z| z.abs() > 0.50).count();
    let mean_abs_residual = dz.iter().map(|z| z.abs()).sum::<f64>() / n as f64;
    let mean_residual = dz.iter().sum::<f64>() / n as f64;

    let errors_mpa: Vec<f64> = truth
        .iter()
        .zip(pred)
        .map(|(&t, &p)| (t - p) / PA_PER_MPA)
        .collect();
    let mean_err = errors_mpa.iter().sum::<f64>() / n as f64;
    let var = errors_mpa
        .iter()
        .map(|e| (e - mean_err) * (e - mean_err))
        .sum::<f64>()
        / n as f64;

    Ok(MetricsReport {
        n,
        accuracy_pct: 100.0 * within as f64 / n as f64,
        mean_abs_residual,
        mean_residual,
        outliers,
        deviation_mpa: var.sqrt(),
    })
}

/// One named row of the benchmark comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedReport {
    pub model: String,
    pub report: MetricsReport,
}

/// The model-comparison table: one row per model, columns Accuracy /
/// Residual / Outlier / Deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkTable {
    pub rows: Vec<NamedReport>,
}

/// Builds the comparison table from named reports.
pub fn benchmark_table(rows: Vec<NamedReport>) -> Result<BenchmarkTable> {
    if rows.is_empty() {
        return Err(Error::domain(
            "benchmark table needs at least one report".to_string(),
        ));
    }
    Ok(BenchmarkTable { rows })
}

impl BenchmarkTable {
    /// Aligned text rendering for terminals.
    pub fn render_text(&self) -> String {
        let name_width = self
            .rows
            .iter()
            .map(|r| r.model.len())
            .chain(std::iter::once("Model".len()))
            .max()
            .unwrap();
        let mut out = String::new();
        out.push_str(&format!(
            "{:<name_width$}  {:>9}  {:>9}  {:>8}  {:>10}\n",
            "Model", "Accuracy", "Residual", "Outlier", "Deviation"
        ));
        for row in &self.rows {
            let r = &row.report;
            out.push_str(&format!(
                "{:<name_width$}  {:>8.2}%  {:>9.3}  {:>8}  {:>10.2}\n",
                row.model, r.accuracy_pct, r.mean_abs_residual, r.outliers, r.deviation_mpa
            ));
        }
        out
    }

    /// Full-precision CSV rendering; parses back to the identical numbers.
    pub fn render_csv(&self) -> String {
        let mut out = String::from(
            "model,n,accuracy_pct,mean_abs_residual,mean_residual,outliers,deviation_mpa\n",
        );
        for row in &self.rows {
            let r = &row.report;
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                row.model,
                r.n,
                r.accuracy_pct,
                r.mean_abs_residual,
                r.mean_residual,
                r.outliers,
                r.deviation_mpa
            ));
        }
        out
    }

    /// Parses the CSV produced by [`BenchmarkTable::render_csv`].
    pub fn parse_csv(text: &str) -> Result<BenchmarkTable> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(Error::domain(format!(
                    "benchmark csv line {}: expected 7 fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|_| Error::domain(format!("benchmark csv line {}: bad number '{s}'", lineno + 1)))
            };
            rows.push(NamedReport {
                model: fields[0].to_string(),
                report: MetricsReport {
                    n: fields[1]
                        .parse()
                        .map_err(|_| Error::domain(format!("bad count '{}'", fields[1])))?,
                    accuracy_pct: parse(fields[2])?,
                    mean_abs_residual: parse(fields[3])?,
                    mean_residual: parse(fields[4])?,
                    outliers: fields[5]
                        .parse()
                        .map_err(|_| Error::domain(format!("bad count '{}'", fields[5])))?,
                    deviation_mpa: parse(fields[6])?,
                },
            });
        }
        benchmark_table(rows)
    }
}
