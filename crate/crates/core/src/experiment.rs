//! End-to-end experiment runs: config validation and the per-country pipeline.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::calendar::YearQuarter;
use crate::disaggregate::{annual_to_quarterly, write_quarterly_csv, DisaggregateError, Method, QuarterlySeries};
use crate::forecast::{forecast_table, horizon_slice, recursive_forecast, ForecastError, ForecastResult};
use crate::ingest::{parse_annual_csv, validate_span, AnnualSeries, IngestError};
use crate::lstm::{write_checkpoint, CandidateMode, TrainedModel};
use crate::report::{
    emit_report, paper_reference, regression_coefficient, write_file, ExperimentReport, FitPoint, ReportError,
    ReportFormat, ReportHeadline, RunEcho,
};
use crate::scaling::{ScalerError, ScalerParams};
use crate::training::{predict_all, train, TrainConfig, TrainError};
use crate::windowing::{make_windows, train_point_count, WindowError};

/// Defaults as shown by `importcast run --help`.
pub const DEFAULTS_HELP: &str = "\
Config keys (JSON object) and defaults:
  input            path to long-format CSV country,year,value   (required)
  countries        \"all\" or list of ISO3 codes                   all
  disaggregation   smooth | flat                                 smooth
  lookback         window length in quarters                     4
  hidden_sizes     LSTM layer widths                             [16, 16, 16]
  candidate_mode   paper-sigmoid | standard-tanh                 paper-sigmoid
  epochs           full-batch Adam epochs                        200
  learning_rate                                                  0.01
  adam_beta1 / adam_beta2 / adam_eps                             0.9 / 0.999 / 1e-8
  grad_clip_norm   global gradient norm cap                      5.0
  seed             initialization seed                           42
  start_year       first year every series must cover            1970
  years            years every series must cover                 50
  forecast_steps   recursive steps after the last quarter       24
  report_from      first reported quarter                        2021q1
  report_to        last reported quarter                         2025q4
  out_dir          output directory                              out
  parallelism      worker threads (capped at country count)      available processors
  dump_quarterly   write the quarterly series to this CSV        (off)
Relative paths resolve against the working directory. Flags override file values.";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CountrySelection {
    All,
    List(Vec<String>),
}

impl Serialize for CountrySelection {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            CountrySelection::All => s.serialize_str("all"),
            CountrySelection::List(codes) => codes.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for CountrySelection {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Word(String),
            List(Vec<String>),
        }
        match Raw::deserialize(d)? {
            Raw::Word(w) if w.eq_ignore_ascii_case("all") => Ok(CountrySelection::All),
            Raw::Word(w) => Ok(CountrySelection::List(
                w.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect(),
            )),
            Raw::List(codes) => Ok(CountrySelection::List(codes)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub input: PathBuf,
    pub countries: CountrySelection,
    pub disaggregation: Method,
    pub lookback: usize,
    pub hidden_sizes: Vec<usize>,
    pub candidate_mode: CandidateMode,
    pub epochs: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub grad_clip_norm: f64,
    pub seed: u64,
    pub start_year: i32,
    pub years: usize,
    pub forecast_steps: usize,
    pub report_from: YearQuarter,
    pub report_to: YearQuarter,
    #[serde(skip_serializing)]
    pub out_dir: PathBuf,
    pub parallelism: Option<usize>,
    #[serde(skip_serializing)]
    pub dump_quarterly: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        Self {
            input: PathBuf::new(),
            countries: CountrySelection::All,
            disaggregation: Method::Smooth,
            lookback: 4,
            hidden_sizes: train.hidden_sizes,
            candidate_mode: train.candidate_mode,
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            adam_beta1: train.adam_beta1,
            adam_beta2: train.adam_beta2,
            adam_eps: train.adam_eps,
            grad_clip_norm: train.grad_clip_norm,
            seed: train.seed,
            start_year: 1970,
            years: 50,
            forecast_steps: 24,
            report_from: YearQuarter { year: 2021, quarter: 1 },
            report_to: YearQuarter { year: 2025, quarter: 4 },
            out_dir: PathBuf::from("out"),
            parallelism: None,
            dump_quarterly: None,
        }
    }
}

const KNOWN_KEYS: [&str; 21] = [
    "input",
    "countries",
    "disaggregation",
    "lookback",
    "hidden_sizes",
    "candidate_mode",
    "epochs",
    "learning_rate",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
    "grad_clip_norm",
    "seed",
    "start_year",
    "years",
    "forecast_steps",
    "report_from",
    "report_to",
    "out_dir",
    "parallelism",
    "dump_quarterly",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config must be a JSON object")]
    NotAnObject,
    #[error("unknown config key `{key}`{}", suggestion.as_ref().map(|s| format!(", did you mean `{s}`?")).unwrap_or_default())]
    UnknownKey { key: String, suggestion: Option<String> },
    #[error("invalid config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config key `input` is required")]
    MissingInput,
    #[error("input file {0} does not exist")]
    InputNotFound(PathBuf),
    #[error("`{field}` {message}")]
    Range { field: &'static str, message: String },
}

fn suggest(key: &str) -> Option<String> {
    KNOWN_KEYS
        .iter()
        .map(|k| (strsim::damerau_levenshtein(key, k), *k))
        .filter(|(d, _)| *d <= 3)
        .min()
        .map(|(_, k)| k.to_string())
}

fn range(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Range {
        field,
        message: message.into(),
    }
}

/// Fills defaults, rejects unknown keys and checks every range.
pub fn validate_config(raw: &Value) -> Result<ExperimentConfig, ConfigError> {
    let object = raw.as_object().ok_or(ConfigError::NotAnObject)?;
    if let Some(key) = object.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
        return Err(ConfigError::UnknownKey {
            key: key.clone(),
            suggestion: suggest(key),
        });
    }
    let config: ExperimentConfig = serde_json::from_value(raw.clone())?;

    if config.input.as_os_str().is_empty() {
        return Err(ConfigError::MissingInput);
    }
    if !config.input.is_file() {
        return Err(ConfigError::InputNotFound(config.input.clone()));
    }
    if let CountrySelection::List(codes) = &config.countries {
        if codes.is_empty() {
            return Err(range("countries", "must name at least one country or be \"all\""));
        }
    }
    if config.lookback < 1 {
        return Err(range("lookback", "must be at least 1"));
    }
    if config.years < 2 {
        return Err(range("years", format!("must be at least 2, got {}", config.years)));
    }
    if config.lookback >= 4 * config.years {
        return Err(range(
            "lookback",
            format!("must be below the {} quarters in the series, got {}", 4 * config.years, config.lookback),
        ));
    }
    if config.forecast_steps < 1 {
        return Err(range("forecast_steps", "must be at least 1"));
    }
    if config.parallelism == Some(0) {
        return Err(range("parallelism", "must be at least 1"));
    }
    config.train_config().validate().map_err(|e| match e {
        TrainError::InvalidConfig(message) => {
            let field = KNOWN_KEYS
                .iter()
                .find(|k| message.starts_with(*k))
                .copied()
                .unwrap_or("training");
            range(field, message.trim_start_matches(field).trim_start().to_string())
        }
        other => range("training", other.to_string()),
    })?;

    let first = config.forecast_start();
    let last = first.offset(config.forecast_steps as i64 - 1);
    if config.report_to < config.report_from {
        return Err(range("report_to", format!("{} precedes report_from {}", config.report_to, config.report_from)));
    }
    if config.report_from < first || config.report_to > last {
        return Err(range(
            "report_from",
            format!(
                "report slice {}..{} lies outside the forecast span {first}..{last}",
                config.report_from, config.report_to
            ),
        ));
    }
    Ok(config)
}

/// Parses JSON text and validates it.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    validate_config(&serde_json::from_str(text)?)
}

impl ExperimentConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            hidden_sizes: self.hidden_sizes.clone(),
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_eps: self.adam_eps,
            grad_clip_norm: self.grad_clip_norm,
            seed: self.seed,
            candidate_mode: self.candidate_mode,
        }
    }

    /// First quarter after the configured data span.
    pub fn forecast_start(&self) -> YearQuarter {
        YearQuarter {
            year: self.start_year + self.years as i32,
            quarter: 1,
        }
    }

    fn worker_count(&self, countries: usize) -> usize {
        let available = std::thread::available_parallelism().map_or(1, |n| n.get());
        self.parallelism.unwrap_or(available).min(countries).max(1)
    }
}

#[derive(Debug, Error)]
pub enum CountryError {
    #[error("no such series")]
    NoSuchSeries,
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Disaggregate(#[from] DisaggregateError),
    #[error("scaling: {0}")]
    Scaling(#[from] ScalerError),
    #[error("windowing: {0}")]
    Window(#[from] WindowError),
    #[error("training: {0}")]
    Train(#[from] TrainError),
    #[error("forecast: {0}")]
    Forecast(#[from] ForecastError),
    #[error("report: {0}")]
    Report(#[from] ReportError),
}

/// A completed per-country pipeline.
#[derive(Clone, Debug)]
pub struct CountryRun {
    pub report: ExperimentReport,
    pub model: TrainedModel,
    pub quarterly: QuarterlySeries,
}

fn fit_points(quarterly: &QuarterlySeries, offset: usize, targets: &[f64], outputs: &[f64]) -> Vec<FitPoint> {
    targets
        .iter()
        .zip(outputs)
        .enumerate()
        .map(|(i, (&target, &output))| FitPoint {
            quarter: quarterly.quarter_at(offset + i),
            target,
            output,
        })
        .collect()
}

/// ingest check → disaggregate → train-fit scaling → windows → train → forecast.
pub fn run_country(config: &ExperimentConfig, series: AnnualSeries) -> Result<CountryRun, CountryError> {
    let series = validate_span(series, config.start_year, config.years)?;
    let quarterly = annual_to_quarterly(&series, config.disaggregation)?;
    let lookback = config.lookback;
    let scaler = ScalerParams::fit(&quarterly.values[..train_point_count(quarterly.len(), lookback)])?;
    let normalized = scaler.transform_all(&quarterly.values);
    let dataset = make_windows(&normalized, lookback)?;

    let trace = train(&dataset, &config.train_config())?;
    let model = TrainedModel {
        params: trace.best_params.clone(),
        candidate_mode: config.candidate_mode,
    };
    let outputs = predict_all(&model.params, &dataset.inputs, model.candidate_mode).map_err(TrainError::from)?;
    let split = dataset.split_index;
    let (train_out, test_out) = outputs.split_at(split);
    let (train_tgt, test_tgt) = dataset.targets.split_at(split);
    let best = *trace.best();

    let seed_window = &normalized[normalized.len() - lookback..];
    let forecast_full = recursive_forecast(
        &model,
        &scaler,
        seed_window,
        config.forecast_steps,
        &series.country_code,
        quarterly.next_quarter(),
    )?;
    let forecast = horizon_slice(&forecast_full, config.report_from, config.report_to)?;

    let report = ExperimentReport {
        country_code: series.country_code.clone(),
        train_mse: best.train_mse,
        train_mae: best.train_mae,
        test_mse: best.test_mse,
        test_mae: best.test_mae,
        regression_coefficient: regression_coefficient(&outputs, &dataset.targets)?,
        regression_train: regression_coefficient(train_out, train_tgt)?,
        regression_test: regression_coefficient(test_out, test_tgt)?,
        best_epoch: trace.best_epoch,
        config: RunEcho {
            seed: config.seed,
            lookback,
            candidate_mode: config.candidate_mode,
            disaggregation: config.disaggregation,
            hidden_sizes: config.hidden_sizes.clone(),
            epochs: config.epochs,
            learning_rate: config.learning_rate,
            scaler,
        },
        forecast,
        forecast_full,
        paper_reference_values: paper_reference(&series.country_code),
        trace: trace.epochs,
        fit_train: fit_points(&quarterly, lookback, train_tgt, train_out),
        fit_test: fit_points(&quarterly, lookback + split, test_tgt, test_out),
    };
    Ok(CountryRun {
        report,
        model,
        quarterly,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Success,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountryOutcome {
    pub country_code: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub report: Option<ReportHeadline>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub countries: Vec<CountryOutcome>,
}

impl ExperimentSummary {
    pub fn all_succeeded(&self) -> bool {
        self.countries.iter().all(|c| c.status == Status::Success)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CountryOutcome> {
        self.countries.iter().filter(|c| c.status == Status::Failed)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "country,status,train_mse,train_mae,test_mse,test_mae,regression_coefficient,best_epoch,forecast_floored,error\n",
        );
        for c in &self.countries {
            let _ = write!(out, "{},{}", c.country_code, if c.status == Status::Success { "success" } else { "failed" });
            match &c.report {
                Some(r) => {
                    let _ = write!(
                        out,
                        ",{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{},{},",
                        r.train_mse,
                        r.train_mae,
                        r.test_mse,
                        r.test_mae,
                        r.regression_coefficient,
                        r.best_epoch,
                        r.forecast.floored
                    );
                }
                None => out.push_str(",,,,,,,,"),
            }
            if let Some(e) = &c.error {
                out.push('"');
                out.push_str(&e.replace('"', "\"\""));
                out.push('"');
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("building worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("serializing summary: {0}")]
    Json(#[from] serde_json::Error),
}

fn emit_country(run: &CountryRun, dir: &Path) -> Result<(), ReportError> {
    emit_report(&run.report, dir, ReportFormat::CsvBundle)?;
    emit_report(&run.report, dir, ReportFormat::Json)?;
    write_file(&dir.join("model.ckpt"), write_checkpoint(&run.model))
}

/// Runs every selected country and writes all outputs under `config.out_dir`.
///
/// Per-country failures are recorded in the summary, not returned; the
/// error path is reserved for problems that stop the whole run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary, ExperimentError> {
    let text = fs::read_to_string(&config.input).map_err(|source| ExperimentError::Read {
        path: config.input.clone(),
        source,
    })?;
    let mut available: BTreeMap<String, AnnualSeries> = parse_annual_csv(&text)?
        .into_iter()
        .map(|s| (s.country_code.clone(), s))
        .collect();
    let selected: Vec<(String, Option<AnnualSeries>)> = match &config.countries {
        CountrySelection::All => available.into_iter().map(|(c, s)| (c, Some(s))).collect(),
        CountrySelection::List(codes) => codes
            .iter()
            .map(|c| {
                let code = c.to_ascii_uppercase();
                let series = available.remove(&code);
                (code, series)
            })
            .collect(),
    };

    fs::create_dir_all(&config.out_dir).map_err(|source| ReportError::Io {
        path: config.out_dir.clone(),
        source,
    })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count(selected.len()))
        .build()?;
    let results: Vec<(String, Result<CountryRun, CountryError>)> = pool.install(|| {
        selected
            .into_par_iter()
            .map(|(code, series)| {
                let result = series.ok_or(CountryError::NoSuchSeries).and_then(|s| {
                    let run = run_country(config, s)?;
                    emit_country(&run, &config.out_dir.join(&code))?;
                    Ok(run)
                });
                (code, result)
            })
            .collect()
    });

    let mut outcomes = Vec::with_capacity(results.len());
    let mut forecasts: Vec<(ForecastResult, ForecastResult)> = Vec::new();
    let mut quarterly = Vec::new();
    for (code, result) in results {
        match result {
            Ok(run) => {
                outcomes.push(CountryOutcome {
                    country_code: code,
                    status: Status::Success,
                    error: None,
                    report: Some(run.report.headline()),
                });
                forecasts.push((run.report.forecast, run.report.forecast_full));
                quarterly.push(run.quarterly);
            }
            Err(e) => outcomes.push(CountryOutcome {
                country_code: code,
                status: Status::Failed,
                error: Some(e.to_string()),
                report: None,
            }),
        }
    }

    let summary = ExperimentSummary {
        version: env!("CARGO_PKG_VERSION"),
        config: config.clone(),
        countries: outcomes,
    };
    let out = &config.out_dir;
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    write_file(&out.join("summary.json"), json)?;
    write_file(&out.join("summary.csv"), summary.to_csv())?;
    let (sliced, full): (Vec<_>, Vec<_>) = forecasts.into_iter().unzip();
    write_file(&out.join("forecast_table.csv"), forecast_table(&sliced, false))?;
    write_file(&out.join("forecast_table_full.csv"), forecast_table(&full, true))?;
    if let Some(path) = &config.dump_quarterly {
        write_file(path, write_quarterly_csv(&quarterly))?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn input_file() -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        fs::write(f.path(), "country,year,value\nIRN,1970,1\n").unwrap();
        f
    }

    #[test]
    fn empty_config_gets_defaults() {
        let f = input_file();
        let config = validate_config(&json!({ "input": f.path() })).unwrap();
        let expected = ExperimentConfig {
            input: f.path().to_path_buf(),
            ..ExperimentConfig::default()
        };
        assert_eq!(config, expected);
        assert_eq!(config.epochs, 200);
        assert_eq!(config.lookback, 4);
        assert_eq!(config.hidden_sizes, vec![16, 16, 16]);
        assert_eq!(config.disaggregation, Method::Smooth);
        assert_eq!(config.forecast_start().to_string(), "2020q1");
    }

    #[test]
    fn rejects_bad_configs() {
        let f = input_file();
        let err = validate_config(&json!({ "input": f.path(), "epochs": 0 })).unwrap_err();
        assert!(matches!(err, ConfigError::Range { field: "epochs", .. }), "{err}");

        let err = validate_config(&json!({ "input": f.path(), "lookbck": 4 })).unwrap_err();
        assert_eq!(err.to_string(), "unknown config key `lookbck`, did you mean `lookback`?");

        assert!(matches!(validate_config(&json!({})), Err(ConfigError::MissingInput)));
        assert!(matches!(
            validate_config(&json!({ "input": "/definitely/not/here.csv" })),
            Err(ConfigError::InputNotFound(_))
        ));
        assert!(matches!(validate_config(&json!([1])), Err(ConfigError::NotAnObject)));

        let err = validate_config(&json!({ "input": f.path(), "learning_rate": -1.0 })).unwrap_err();
        assert!(matches!(err, ConfigError::Range { field: "learning_rate", .. }), "{err}");

        let err = validate_config(&json!({ "input": f.path(), "report_to": "2026q1" })).unwrap_err();
        assert!(err.to_string().contains("2020q1..2025q4"), "{err}");
        let err = validate_config(&json!({ "input": f.path(), "disaggregation": "spline" })).unwrap_err();
        assert!(matches!(err, ConfigError::Json(_)));
    }

    #[test]
    fn country_selection_forms() {
        let f = input_file();
        let c = validate_config(&json!({ "input": f.path(), "countries": ["IRN", "USA"] })).unwrap();
        assert_eq!(c.countries, CountrySelection::List(vec!["IRN".into(), "USA".into()]));
        let c = validate_config(&json!({ "input": f.path(), "countries": "IRN,USA" })).unwrap();
        assert_eq!(c.countries, CountrySelection::List(vec!["IRN".into(), "USA".into()]));
        let c = validate_config(&json!({ "input": f.path(), "countries": "all" })).unwrap();
        assert_eq!(c.countries, CountrySelection::All);
    }

    #[test]
    fn worker_count_is_capped() {
        let config = ExperimentConfig {
            parallelism: Some(8),
            ..ExperimentConfig::default()
        };
        assert_eq!(config.worker_count(3), 3);
        assert_eq!(config.worker_count(0), 1);
    }
}
