//! Recursive multi-step forecasting and the quarterly forecast table.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendar::YearQuarter;
use crate::lstm::{LstmError, TrainedModel};
use crate::scaling::ScalerParams;

#[derive(Debug, Error, PartialEq)]
pub enum ForecastError {
    #[error("forecast needs at least one step")]
    NoSteps,
    #[error("seed window is empty")]
    EmptySeed,
    #[error("non-finite prediction at step {step}")]
    NonFinite { step: usize },
    #[error("model error at step {step}: {source}")]
    Model { step: usize, source: LstmError },
    #[error("requested {from}..{to} outside forecast span {available_from}..{available_to}")]
    OutOfRange {
        from: YearQuarter,
        to: YearQuarter,
        available_from: YearQuarter,
        available_to: YearQuarter,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub country_code: String,
    pub horizon_start: YearQuarter,
    pub values_normalized: Vec<f64>,
    pub values_usd: Vec<f64>,
    /// Set when any US$ value was negative and floored to zero.
    pub floored: bool,
}

impl ForecastResult {
    pub fn len(&self) -> usize {
        self.values_usd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values_usd.is_empty()
    }

    pub fn horizon_end(&self) -> YearQuarter {
        self.horizon_start.offset(self.len() as i64 - 1)
    }

    pub fn quarters(&self) -> impl Iterator<Item = YearQuarter> + '_ {
        (0..self.len()).map(|i| self.horizon_start.offset(i as i64))
    }
}

/// Rolls the one-step model forward `steps` times, feeding each prediction
/// back into the window, then maps predictions back to US$.
pub fn recursive_forecast(
    model: &TrainedModel,
    scaler: &ScalerParams,
    seed_window: &[f64],
    steps: usize,
    country_code: &str,
    horizon_start: YearQuarter,
) -> Result<ForecastResult, ForecastError> {
    if steps == 0 {
        return Err(ForecastError::NoSteps);
    }
    if seed_window.is_empty() {
        return Err(ForecastError::EmptySeed);
    }
    let mut window = seed_window.to_vec();
    let mut values_normalized = Vec::with_capacity(steps);
    for step in 0..steps {
        let next = model
            .predict(&window)
            .map_err(|source| match source {
                LstmError::NonFinite { .. } => ForecastError::NonFinite { step },
                source => ForecastError::Model { step, source },
            })?;
        if !next.is_finite() {
            return Err(ForecastError::NonFinite { step });
        }
        values_normalized.push(next);
        window.remove(0);
        window.push(next);
    }
    let mut floored = false;
    let values_usd = values_normalized
        .iter()
        .map(|&z| {
            let usd = scaler.inverse_transform(z);
            if usd < 0.0 {
                floored = true;
                0.0
            } else {
                usd
            }
        })
        .collect();
    Ok(ForecastResult {
        country_code: country_code.to_string(),
        horizon_start,
        values_normalized,
        values_usd,
        floored,
    })
}

/// The inclusive sub-range `from..=to` of a forecast.
pub fn horizon_slice(
    result: &ForecastResult,
    from: YearQuarter,
    to: YearQuarter,
) -> Result<ForecastResult, ForecastError> {
    let start = result.horizon_start.quarters_until(from);
    let end = result.horizon_start.quarters_until(to);
    if result.is_empty() || start < 0 || end < start || end >= result.len() as i64 {
        return Err(ForecastError::OutOfRange {
            from,
            to,
            available_from: result.horizon_start,
            available_to: result.horizon_end(),
        });
    }
    let range = start as usize..=end as usize;
    let values_usd = result.values_usd[range.clone()].to_vec();
    Ok(ForecastResult {
        country_code: result.country_code.clone(),
        horizon_start: from,
        values_normalized: result.values_normalized[range].to_vec(),
        floored: result.floored && values_usd.contains(&0.0),
        values_usd,
    })
}

/// Three significant digits in spreadsheet style: `3E+12`, `3.03E+12`, `9.36E+09`.
pub fn format_sci3(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    let formatted = format!("{value:.2e}");
    let (mantissa, exponent) = formatted.split_once('e').expect("exponent form");
    let mantissa = if mantissa.contains('.') {
        mantissa.trim_end_matches('0').trim_end_matches('.')
    } else {
        mantissa
    };
    let exponent: i32 = exponent.parse().expect("integer exponent");
    let sign = if exponent < 0 { '-' } else { '+' };
    format!("{mantissa}E{sign}{:02}", exponent.abs())
}

/// Quarters as rows, countries as columns. All results must cover the same span.
pub fn forecast_table(results: &[ForecastResult], full_precision: bool) -> String {
    let mut out = String::from("year,quarter");
    for r in results {
        let _ = write!(out, ",{}", r.country_code);
    }
    out.push('\n');
    let Some(first) = results.first() else {
        return out;
    };
    for (i, quarter) in first.quarters().enumerate() {
        let _ = write!(out, "{},q{}", quarter.year, quarter.quarter);
        for r in results {
            let v = r.values_usd[i];
            if full_precision {
                let _ = write!(out, ",{v:e}");
            } else {
                let _ = write!(out, ",{}", format_sci3(v));
            }
        }
        out.push('\n');
    }
    out
}
