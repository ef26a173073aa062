//! Min-max normalization onto [0, 1].

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScalerError {
    #[error("cannot fit a scaler on an empty list")]
    Empty,
    #[error("degenerate scaler: all values equal {0}")]
    Degenerate(f64),
    #[error("non-finite value in scaler input")]
    NonFinite,
}

/// Range captured from the training portion of a series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min_value: f64,
    pub max_value: f64,
}

impl ScalerParams {
    pub fn fit(values: &[f64]) -> Result<Self, ScalerError> {
        fit_minmax(values)
    }

    fn span(&self) -> f64 {
        self.max_value - self.min_value
    }

    /// Values outside the fitted range map outside [0, 1].
    pub fn transform(&self, x: f64) -> f64 {
        (x - self.min_value) / self.span()
    }

    pub fn inverse_transform(&self, z: f64) -> f64 {
        z * self.span() + self.min_value
    }

    pub fn transform_all(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.transform(x)).collect()
    }
}

pub fn fit_minmax(values: &[f64]) -> Result<ScalerParams, ScalerError> {
    if values.is_empty() {
        return Err(ScalerError::Empty);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ScalerError::NonFinite);
    }
    let min_value = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max_value = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max_value <= min_value {
        return Err(ScalerError::Degenerate(min_value));
    }
    Ok(ScalerParams {
        min_value,
        max_value,
    })
}
