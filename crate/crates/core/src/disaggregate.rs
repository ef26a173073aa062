//! Annual to quarterly temporal disaggregation.
//!
//! Both methods preserve the annual *mean*: the four quarters of a year
//! average to that year's value, so quarterly figures stay at annual
//! magnitude. Neither method is an indicator-based benchmark (Denton,
//! Chow-Lin); they are stand-ins for an unpublished conversion formula.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendar::YearQuarter;
use crate::ingest::AnnualSeries;

const MAX_REBALANCE_ITERATIONS: usize = 100;

/// Centres of the four quarters, as fractions of a year.
const QUARTER_CENTRES: [f64; 4] = [0.125, 0.375, 0.625, 0.875];

#[derive(Debug, Error, PartialEq)]
pub enum DisaggregateError {
    #[error("{country}: smooth disaggregation needs at least 2 years, got {len}")]
    TooShort { country: String, len: usize },
    #[error("{country}: non-negativity rebalance did not converge for year {year}")]
    NotConverged { country: String, year: i32 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Linear path through year midpoints, corrected per year to the annual mean.
    #[default]
    #[serde(alias = "piecewise-linear-mean-preserving")]
    Smooth,
    /// Each annual value repeated four times.
    Flat,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "smooth" | "piecewise-linear-mean-preserving" => Ok(Method::Smooth),
            "flat" => Ok(Method::Flat),
            other => Err(format!("unknown disaggregation method `{other}` (smooth|flat)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuarterlySeries {
    pub country_code: String,
    pub start: YearQuarter,
    pub values: Vec<f64>,
}

impl QuarterlySeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Label of the quarter at `index`.
    pub fn quarter_at(&self, index: usize) -> YearQuarter {
        self.start.offset(index as i64)
    }

    /// The quarter immediately after the last observation.
    pub fn next_quarter(&self) -> YearQuarter {
        self.quarter_at(self.values.len())
    }

    /// Mean of each complete year of quarters.
    pub fn year_means(&self) -> Vec<f64> {
        self.values
            .chunks_exact(4)
            .map(|q| q.iter().sum::<f64>() / 4.0)
            .collect()
    }
}

pub fn annual_to_quarterly(
    series: &AnnualSeries,
    method: Method,
) -> Result<QuarterlySeries, DisaggregateError> {
    let values = match method {
        Method::Flat => series.values.iter().flat_map(|&v| [v; 4]).collect(),
        Method::Smooth => smooth(series)?,
    };
    Ok(QuarterlySeries {
        country_code: series.country_code.clone(),
        start: YearQuarter {
            year: series.start_year,
            quarter: 1,
        },
        values,
    })
}

fn smooth(series: &AnnualSeries) -> Result<Vec<f64>, DisaggregateError> {
    let annual = &series.values;
    let n = annual.len();
    if n < 2 {
        return Err(DisaggregateError::TooShort {
            country: series.country_code.clone(),
            len: n,
        });
    }

    // Annual values anchor at year midpoints (t = y + 0.5); the end segments
    // are extended linearly.
    let path = |t: f64| {
        let seg = ((t - 0.5).floor().max(0.0) as usize).min(n - 2);
        let frac = t - (seg as f64 + 0.5);
        annual[seg] + (annual[seg + 1] - annual[seg]) * frac
    };

    let mut out = Vec::with_capacity(4 * n);
    for (year, &target) in annual.iter().enumerate() {
        let mut quarters = QUARTER_CENTRES.map(|c| path(year as f64 + c));
        let shift = target - quarters.iter().sum::<f64>() / 4.0;
        quarters.iter_mut().for_each(|q| *q += shift);
        if quarters.iter().any(|&q| q < 0.0) {
            rebalance(&mut quarters, target).ok_or_else(|| DisaggregateError::NotConverged {
                country: series.country_code.clone(),
                year: series.start_year + year as i32,
            })?;
        }
        settle(&mut quarters, target);
        out.extend_from_slice(&quarters);
    }
    Ok(out)
}

/// Rescales non-negative quarters so their mean equals `target` to rounding.
/// The additive correction alone cancels badly next to much larger years.
fn settle(quarters: &mut [f64; 4], target: f64) {
    let sum: f64 = quarters.iter().sum();
    if target > 0.0 && sum > 0.0 {
        let factor = 4.0 * target / sum;
        quarters.iter_mut().for_each(|q| *q *= factor);
    }
}

/// Clamps negative quarters to zero and spreads the surplus over the
/// remaining positive quarters until the year mean matches `target`.
fn rebalance(quarters: &mut [f64; 4], target: f64) -> Option<()> {
    let tolerance = 1e-12 * target.abs().max(1.0);
    for _ in 0..MAX_REBALANCE_ITERATIONS {
        quarters.iter_mut().for_each(|q| *q = q.max(0.0));
        let gap = target - quarters.iter().sum::<f64>() / 4.0;
        if gap.abs() <= tolerance {
            return Some(());
        }
        let free = quarters.iter().filter(|&&q| q > 0.0).count();
        if free == 0 {
            // Everything clamped: only a zero target is consistent.
            quarters.iter_mut().for_each(|q| *q = target);
            return Some(());
        }
        let step = 4.0 * gap / free as f64;
        quarters
            .iter_mut()
            .filter(|q| **q > 0.0)
            .for_each(|q| *q += step);
        if quarters.iter().all(|&q| q >= 0.0) {
            return Some(());
        }
    }
    None
}

/// Renders series as `country,year,quarter,value` CSV.
pub fn write_quarterly_csv(series: &[QuarterlySeries]) -> String {
    let mut out = String::from("country,year,quarter,value\n");
    for s in series {
        for (i, value) in s.values.iter().enumerate() {
            let q = s.quarter_at(i);
            let _ = writeln!(out, "{},{},{},{:e}", s.country_code, q.year, q.quarter, value);
        }
    }
    out
}
