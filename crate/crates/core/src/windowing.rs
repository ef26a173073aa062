//! Supervised (lookback window -> next value) samples with a chronological split.

use thiserror::Error;

/// Fraction of samples assigned to training; the rest is the test tail.
pub const TRAIN_FRACTION: f64 = 0.75;

#[derive(Debug, Error, PartialEq)]
pub enum WindowError {
    #[error("lookback must be at least 1")]
    ZeroLookback,
    #[error("series of length {len} too short for lookback {lookback}; need at least {min}")]
    TooShort {
        len: usize,
        lookback: usize,
        min: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowedDataset {
    pub lookback: usize,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    /// Index of the first test sample.
    pub split_index: usize,
}

/// Borrowed view over a contiguous run of samples.
#[derive(Clone, Copy, Debug)]
pub struct Samples<'a> {
    pub inputs: &'a [Vec<f64>],
    pub targets: &'a [f64],
}

impl Samples<'_> {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn train(&self) -> Samples<'_> {
        Samples {
            inputs: &self.inputs[..self.split_index],
            targets: &self.targets[..self.split_index],
        }
    }

    pub fn test(&self) -> Samples<'_> {
        Samples {
            inputs: &self.inputs[self.split_index..],
            targets: &self.targets[self.split_index..],
        }
    }

    pub fn all(&self) -> Samples<'_> {
        Samples {
            inputs: &self.inputs,
            targets: &self.targets,
        }
    }
}

/// Split point for `samples` windowed samples.
pub fn split_index(samples: usize) -> usize {
    (TRAIN_FRACTION * samples as f64).floor() as usize
}

/// Number of raw series points touched by the training samples
/// (their windows plus their targets).
pub fn train_point_count(series_len: usize, lookback: usize) -> usize {
    split_index(series_len.saturating_sub(lookback)) + lookback
}

pub fn make_windows(series: &[f64], lookback: usize) -> Result<WindowedDataset, WindowError> {
    if lookback == 0 {
        return Err(WindowError::ZeroLookback);
    }
    if series.len() < lookback + 1 {
        return Err(WindowError::TooShort {
            len: series.len(),
            lookback,
            min: lookback + 1,
        });
    }
    let (inputs, targets) = series
        .windows(lookback + 1)
        .map(|w| (w[..lookback].to_vec(), w[lookback]))
        .unzip::<_, _, Vec<_>, Vec<_>>();
    let split_index = split_index(targets.len());
    Ok(WindowedDataset {
        lookback,
        inputs,
        targets,
        split_index,
    })
}
