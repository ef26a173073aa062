//! Annual import series: parsing and validation of long-format CSV.
//!
//! The expected layout is `country,year,value`, one row per country-year,
//! values in current US$. Rows may appear in any order; each country's
//! years must be contiguous and unique.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const HEADER: [&str; 3] = ["country", "year", "value"];

#[derive(Debug, Error, PartialEq)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("{country}: missing year {missing}")]
    YearGap { country: String, missing: i32 },
    #[error("{country}: duplicate row for year {year} (line {line})")]
    DuplicateYear { country: String, year: i32, line: u64 },
    #[error("{country}: negative value {value} for year {year} (line {line})")]
    NegativeValue {
        country: String,
        year: i32,
        value: f64,
        line: u64,
    },
    #[error(
        "{country}: span mismatch, observed {observed_start}+{observed_len} years, \
         expected {expected_start}+{expected_len}"
    )]
    SpanMismatch {
        country: String,
        observed_start: i32,
        observed_len: usize,
        expected_start: i32,
        expected_len: usize,
    },
    #[error("series {0} is empty")]
    Empty(String),
}

/// One country's annual imports, contiguous from `start_year`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnualSeries {
    pub country_code: String,
    pub start_year: i32,
    pub values: Vec<f64>,
}

impl AnnualSeries {
    /// Builds a series, checking the non-empty, finite and non-negative invariants.
    pub fn new(
        country_code: impl Into<String>,
        start_year: i32,
        values: Vec<f64>,
    ) -> Result<Self, IngestError> {
        let country_code = country_code.into();
        if values.is_empty() {
            return Err(IngestError::Empty(country_code));
        }
        for (offset, &value) in values.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(IngestError::NegativeValue {
                    country: country_code,
                    year: start_year + offset as i32,
                    value,
                    line: 0,
                });
            }
        }
        Ok(Self {
            country_code,
            start_year,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn end_year(&self) -> i32 {
        self.start_year + self.values.len() as i32 - 1
    }
}

fn is_country_code(code: &str) -> bool {
    code.len() == 3 && code.bytes().all(|b| b.is_ascii_alphabetic())
}

/// Parses `country,year,value` text into one series per country, sorted by code.
pub fn parse_annual_csv(text: &str) -> Result<Vec<AnnualSeries>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let header = reader.headers().map_err(|e| IngestError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(IngestError::Parse {
            line: 1,
            message: format!(
                "expected header `country,year,value`, found `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    // country -> year -> (value, line)
    let mut rows: BTreeMap<String, BTreeMap<i32, (f64, u64)>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| IngestError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(IngestError::Parse {
                line,
                message: format!("expected 3 columns, found {}", record.len()),
            });
        }
        let country = &record[0];
        if !is_country_code(country) {
            return Err(IngestError::Parse {
                line,
                message: format!("invalid country code `{country}`"),
            });
        }
        let year: i32 = record[1].parse().map_err(|_| IngestError::Parse {
            line,
            message: format!("invalid year `{}`", &record[1]),
        })?;
        let value: f64 = record[2]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| IngestError::Parse {
                line,
                message: format!("invalid value `{}`", &record[2]),
            })?;
        if value < 0.0 {
            return Err(IngestError::NegativeValue {
                country: country.to_string(),
                year,
                value,
                line,
            });
        }
        let years = rows.entry(country.to_string()).or_default();
        if years.insert(year, (value, line)).is_some() {
            return Err(IngestError::DuplicateYear {
                country: country.to_string(),
                year,
                line,
            });
        }
    }

    rows.into_iter()
        .map(|(country, years)| {
            let start_year = *years.keys().next().expect("country has at least one row");
            let mut values = Vec::with_capacity(years.len());
            for (expected, (year, (value, _))) in (start_year..).zip(years) {
                if year != expected {
                    return Err(IngestError::YearGap {
                        country,
                        missing: expected,
                    });
                }
                values.push(value);
            }
            Ok(AnnualSeries {
                country_code: country,
                start_year,
                values,
            })
        })
        .collect()
}

/// Writes series back out in the `country,year,value` layout.
pub fn write_annual_csv(series: &[AnnualSeries]) -> String {
    let mut out = String::from("country,year,value\n");
    for s in series {
        for (offset, value) in s.values.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{:e}",
                s.country_code,
                s.start_year + offset as i32,
                value
            );
        }
    }
    out
}

/// Checks that a series covers exactly `expected_len` years from `expected_start`.
pub fn validate_span(
    series: AnnualSeries,
    expected_start: i32,
    expected_len: usize,
) -> Result<AnnualSeries, IngestError> {
    if series.start_year != expected_start || series.values.len() != expected_len {
        return Err(IngestError::SpanMismatch {
            country: series.country_code,
            observed_start: series.start_year,
            observed_len: series.values.len(),
            expected_start,
            expected_len,
        });
    }
    Ok(series)
}
