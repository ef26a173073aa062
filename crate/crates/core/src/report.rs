//! Per-country experiment reports and their on-disk layout.
//!
//! A country directory holds:
//!
//! | file            | content                                               |
//! |-----------------|-------------------------------------------------------|
//! | `metrics.csv`   | MSE / MAE / correlation per split (normalized scale)  |
//! | `forecast.csv`  | reported forecast quarters in US$                     |
//! | `trace.csv`     | per-epoch train/test MSE and MAE                      |
//! | `fit_train.csv` | target vs model output on the training samples        |
//! | `fit_test.csv`  | target vs model output on the test samples            |
//! | `report.json`   | everything above in one document                      |
//!
//! The fit files double as the regression scatter data.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendar::YearQuarter;
use crate::disaggregate::Method;
use crate::forecast::{format_sci3, ForecastResult};
use crate::lstm::CandidateMode;
use crate::scaling::ScalerParams;
use crate::training::EpochMetrics;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("correlation undefined: {0} values are constant")]
    UndefinedCorrelation(&'static str),
    #[error("correlation needs at least 2 equal-length series, got {preds} and {targets}")]
    BadLengths { preds: usize, targets: usize },
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("serializing report: {0}")]
    Json(#[from] serde_json::Error),
}

/// Pearson correlation between model outputs and targets.
pub fn regression_coefficient(preds: &[f64], targets: &[f64]) -> Result<f64, ReportError> {
    if preds.len() != targets.len() || preds.len() < 2 {
        return Err(ReportError::BadLengths {
            preds: preds.len(),
            targets: targets.len(),
        });
    }
    let n = preds.len() as f64;
    let mean_p = preds.iter().sum::<f64>() / n;
    let mean_t = targets.iter().sum::<f64>() / n;
    let (mut cov, mut var_p, mut var_t) = (0.0, 0.0, 0.0);
    for (p, t) in preds.iter().zip(targets) {
        let (dp, dt) = (p - mean_p, t - mean_t);
        cov += dp * dt;
        var_p += dp * dp;
        var_t += dt * dt;
    }
    if var_t == 0.0 {
        return Err(ReportError::UndefinedCorrelation("target"));
    }
    if var_p == 0.0 {
        return Err(ReportError::UndefinedCorrelation("prediction"));
    }
    Ok((cov / (var_p.sqrt() * var_t.sqrt())).clamp(-1.0, 1.0))
}

/// Error values as published for the original study (normalized scale).
/// Display only; never used as test expectations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaperReference {
    pub train_mse: f64,
    pub train_mae: f64,
    pub test_mse: f64,
    pub test_mae: f64,
}

const PAPER_REFERENCE: [(&str, PaperReference); 10] = [
    ("USA", PaperReference { train_mse: 0.00026587, train_mae: 0.009558063, test_mse: 0.000593822, test_mae: 0.010549653 }),
    ("CAN", PaperReference { train_mse: 0.000573174, train_mae: 0.017034501, test_mse: 0.000471171, test_mae: 0.016917394 }),
    ("DEU", PaperReference { train_mse: 0.000610407, train_mae: 0.016112808, test_mse: 0.000437126, test_mae: 0.015138935 }),
    ("FRA", PaperReference { train_mse: 0.000567954, train_mae: 0.017604845, test_mse: 0.000409339, test_mae: 0.016679849 }),
    ("JPN", PaperReference { train_mse: 0.000913517, train_mae: 0.020788627, test_mse: 0.000633532, test_mae: 0.01640135 }),
    ("TUR", PaperReference { train_mse: 0.000534323, train_mae: 0.013281038, test_mse: 0.000314573, test_mae: 0.01217957 }),
    ("KOR", PaperReference { train_mse: 0.000237155, train_mae: 0.009067117, test_mse: 0.000636021, test_mae: 0.012340967 }),
    ("PRT", PaperReference { train_mse: 0.000306369, train_mae: 0.011394773, test_mse: 0.000986045, test_mae: 0.01962471 }),
    ("GRC", PaperReference { train_mse: 0.000185511, train_mae: 0.009552464, test_mse: 0.000188108, test_mae: 0.008993208 }),
    ("IRN", PaperReference { train_mse: 0.000538507, train_mae: 0.01618062, test_mse: 0.000370002, test_mae: 0.013099987 }),
];

/// Published error values for `country_code`, if the study covered it.
pub fn paper_reference(country_code: &str) -> Option<PaperReference> {
    PAPER_REFERENCE
        .iter()
        .find(|(code, _)| *code == country_code)
        .map(|(_, r)| *r)
}

/// One (target, output) pair on the normalized scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub quarter: YearQuarter,
    pub target: f64,
    pub output: f64,
}

/// Settings that produced a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunEcho {
    pub seed: u64,
    pub lookback: usize,
    pub candidate_mode: CandidateMode,
    pub disaggregation: Method,
    pub hidden_sizes: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub scaler: ScalerParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub country_code: String,
    pub train_mse: f64,
    pub train_mae: f64,
    pub test_mse: f64,
    pub test_mae: f64,
    /// Correlation over train and test samples pooled.
    pub regression_coefficient: f64,
    pub regression_train: f64,
    pub regression_test: f64,
    pub best_epoch: usize,
    pub config: RunEcho,
    /// Reported slice of the forecast.
    pub forecast: ForecastResult,
    /// Every recursive step, including the bridge quarters before the slice.
    pub forecast_full: ForecastResult,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub paper_reference_values: Option<PaperReference>,
    pub trace: Vec<EpochMetrics>,
    pub fit_train: Vec<FitPoint>,
    pub fit_test: Vec<FitPoint>,
}

/// Headline numbers of a report, without the per-epoch and per-sample data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportHeadline {
    pub train_mse: f64,
    pub train_mae: f64,
    pub test_mse: f64,
    pub test_mae: f64,
    pub regression_coefficient: f64,
    pub regression_train: f64,
    pub regression_test: f64,
    pub best_epoch: usize,
    pub scaler: ScalerParams,
    pub forecast: ForecastResult,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub paper_reference_values: Option<PaperReference>,
}

impl ExperimentReport {
    pub fn headline(&self) -> ReportHeadline {
        ReportHeadline {
            train_mse: self.train_mse,
            train_mae: self.train_mae,
            test_mse: self.test_mse,
            test_mae: self.test_mae,
            regression_coefficient: self.regression_coefficient,
            regression_train: self.regression_train,
            regression_test: self.regression_test,
            best_epoch: self.best_epoch,
            scaler: self.config.scaler,
            forecast: self.forecast.clone(),
            paper_reference_values: self.paper_reference_values,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    CsvBundle,
}

/// Nine significant digits, the precision used for every emitted metric.
pub fn format_metric(value: f64) -> String {
    format!("{value:.8e}")
}

fn split_row(
    out: &mut String,
    country: &str,
    split: &str,
    values: [f64; 3],
    reference: Option<(f64, f64)>,
    with_reference: bool,
) {
    let [mse, mae, r] = values;
    let _ = write!(
        out,
        "{country},{split},{},{},{}",
        format_metric(mse),
        format_metric(mae),
        format_metric(r)
    );
    if with_reference {
        match reference {
            Some((mse, mae)) => {
                let _ = write!(out, ",{mse},{mae}");
            }
            None => out.push_str(",,"),
        }
    }
    out.push('\n');
}

pub fn metrics_csv(report: &ExperimentReport, pooled: (f64, f64)) -> String {
    let reference = report.paper_reference_values;
    let with_reference = reference.is_some();
    let mut out = String::from("country,split,mse,mae,regression_coefficient");
    if with_reference {
        out.push_str(",paper_mse,paper_mae");
    }
    out.push('\n');
    let code = &report.country_code;
    split_row(
        &mut out,
        code,
        "train",
        [report.train_mse, report.train_mae, report.regression_train],
        reference.map(|r| (r.train_mse, r.train_mae)),
        with_reference,
    );
    split_row(
        &mut out,
        code,
        "test",
        [report.test_mse, report.test_mae, report.regression_test],
        reference.map(|r| (r.test_mse, r.test_mae)),
        with_reference,
    );
    split_row(
        &mut out,
        code,
        "all",
        [pooled.0, pooled.1, report.regression_coefficient],
        None,
        with_reference,
    );
    out
}

fn trace_csv(trace: &[EpochMetrics]) -> String {
    let mut out = String::from("epoch,train_mse,train_mae,test_mse,test_mae\n");
    for m in trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            m.epoch,
            format_metric(m.train_mse),
            format_metric(m.train_mae),
            format_metric(m.test_mse),
            format_metric(m.test_mae)
        );
    }
    out
}

fn fit_csv(points: &[FitPoint]) -> String {
    let mut out = String::from("year,quarter,target,output\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},q{},{},{}",
            p.quarter.year,
            p.quarter.quarter,
            format_metric(p.target),
            format_metric(p.output)
        );
    }
    out
}

fn forecast_csv(forecast: &ForecastResult) -> String {
    let mut out = String::from("year,quarter,value_usd,value_usd_sci3,value_normalized\n");
    for (i, q) in forecast.quarters().enumerate() {
        let usd = forecast.values_usd[i];
        let _ = writeln!(
            out,
            "{},q{},{usd:e},{},{}",
            q.year,
            q.quarter,
            format_sci3(usd),
            format_metric(forecast.values_normalized[i])
        );
    }
    out
}

/// Pooled MSE and MAE over train and test fit points.
pub fn pooled_errors(report: &ExperimentReport) -> (f64, f64) {
    let points: Vec<&FitPoint> = report.fit_train.iter().chain(&report.fit_test).collect();
    let n = points.len().max(1) as f64;
    let mse = points.iter().map(|p| (p.output - p.target).powi(2)).sum::<f64>() / n;
    let mae = points.iter().map(|p| (p.output - p.target).abs()).sum::<f64>() / n;
    (mse, mae)
}

pub(crate) fn write_file(path: &Path, content: impl AsRef<[u8]>) -> Result<(), ReportError> {
    fs::write(path, content).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `report` into `dir` (created if missing). Returns the written paths.
pub fn emit_report(
    report: &ExperimentReport,
    dir: &Path,
    format: ReportFormat,
) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let files: Vec<(&str, String)> = match format {
        ReportFormat::Json => {
            let mut json = serde_json::to_string_pretty(report)?;
            json.push('\n');
            vec![("report.json", json)]
        }
        ReportFormat::CsvBundle => vec![
            ("metrics.csv", metrics_csv(report, pooled_errors(report))),
            ("forecast.csv", forecast_csv(&report.forecast)),
            ("trace.csv", trace_csv(&report.trace)),
            ("fit_train.csv", fit_csv(&report.fit_train)),
            ("fit_test.csv", fit_csv(&report.fit_test)),
        ],
    };
    let mut written = Vec::with_capacity(files.len());
    for (name, content) in files {
        let path = dir.join(name);
        write_file(&path, content)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlation_examples() {
        let t = [0.1, 0.5, 0.3, 0.9];
        assert!((regression_coefficient(&t, &t).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = t.iter().map(|v| -v).collect();
        assert!((regression_coefficient(&neg, &t).unwrap() + 1.0).abs() < 1e-15);
        let shifted: Vec<f64> = t.iter().map(|v| v + 7.5).collect();
        assert!((regression_coefficient(&shifted, &t).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            regression_coefficient(&t, &[0.2; 4]),
            Err(ReportError::UndefinedCorrelation("target"))
        ));
        assert!(matches!(regression_coefficient(&[1.0], &[1.0]), Err(ReportError::BadLengths { .. })));
    }

    #[test]
    fn reference_table_lookup() {
        let irn = paper_reference("IRN").unwrap();
        assert_eq!(irn.train_mse, 0.000538507);
        assert_eq!(irn.train_mae, 0.01618062);
        assert_eq!(paper_reference("USA").unwrap().test_mae, 0.010549653);
        assert!(paper_reference("BRA").is_none());
    }

    #[test]
    fn metric_formatting_has_nine_significant_digits() {
        assert_eq!(format_metric(0.000538507123456), "5.38507123e-4");
        assert_eq!(format_metric(1.0), "1.00000000e0");
    }
}
