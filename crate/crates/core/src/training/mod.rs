//! Full-batch BPTT training with Adam and best-epoch model selection.

mod adam;
mod bptt;
pub mod gradcheck;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{adam_step, clip_global_norm, global_norm, AdamConfig, AdamState};
pub use bptt::{batch_loss, bptt_gradients, BatchGradient};
pub use gradcheck::{compare_gradients, finite_diff_check, Discrepancy};

use crate::lstm::{init_params, predict, CandidateMode, LstmError, LstmParams};
use crate::windowing::{Samples, WindowedDataset};

/// Fewest training samples [`train`] accepts.
pub const MIN_TRAIN_SAMPLES: usize = 8;
/// Train MSE above this counts as divergence.
pub const DIVERGENCE_MSE: f64 = 1e6;

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("length mismatch: {preds} predictions vs {targets} targets")]
    LengthMismatch { preds: usize, targets: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("need at least {min} training samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("training diverged at epoch {epoch} (train MSE {mse})")]
    Diverged { epoch: usize, mse: f64 },
    #[error("non-finite gradient in {block}")]
    NonFiniteGradient { block: String },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] LstmError),
}

fn check_lengths(preds: &[f64], targets: &[f64]) -> Result<(), TrainError> {
    if preds.len() != targets.len() {
        return Err(TrainError::LengthMismatch {
            preds: preds.len(),
            targets: targets.len(),
        });
    }
    if preds.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    Ok(())
}

pub fn mse(preds: &[f64], targets: &[f64]) -> Result<f64, TrainError> {
    check_lengths(preds, targets)?;
    let sum: f64 = preds.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / preds.len() as f64)
}

pub fn mae(preds: &[f64], targets: &[f64]) -> Result<f64, TrainError> {
    check_lengths(preds, targets)?;
    let sum: f64 = preds.iter().zip(targets).map(|(p, t)| (p - t).abs()).sum();
    Ok(sum / preds.len() as f64)
}

pub fn predict_all(
    params: &LstmParams,
    windows: &[Vec<f64>],
    mode: CandidateMode,
) -> Result<Vec<f64>, LstmError> {
    windows.iter().map(|w| predict(params, w, mode)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden_sizes: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub grad_clip_norm: f64,
    pub seed: u64,
    pub candidate_mode: CandidateMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![16, 16, 16],
            epochs: 200,
            learning_rate: 1e-2,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            grad_clip_norm: 5.0,
            seed: 42,
            candidate_mode: CandidateMode::PaperSigmoid,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::InvalidConfig(msg));
        if self.epochs < 1 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        for (name, beta) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(beta > 0.0 && beta < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {beta}"));
            }
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return bad(format!("adam_eps must be > 0, got {}", self.adam_eps));
        }
        if self.grad_clip_norm.is_nan() || self.grad_clip_norm <= 0.0 {
            return bad(format!("grad_clip_norm must be > 0, got {}", self.grad_clip_norm));
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return bad(format!("hidden_sizes must be non-empty and positive, got {:?}", self.hidden_sizes));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
            clip_norm: self.grad_clip_norm,
        }
    }
}

/// Errors on both splits after one epoch's update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_mse: f64,
    pub train_mae: f64,
    pub test_mse: f64,
    pub test_mae: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainTrace {
    pub epochs: Vec<EpochMetrics>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_params: LstmParams,
}

impl TrainTrace {
    pub fn best(&self) -> &EpochMetrics {
        &self.epochs[self.best_epoch - 1]
    }
}

/// Lexicographic selection key: train MSE, then train MAE, then earliest epoch.
fn improves(candidate: &EpochMetrics, incumbent: &EpochMetrics) -> bool {
    (candidate.train_mse, candidate.train_mae) < (incumbent.train_mse, incumbent.train_mae)
}

fn evaluate(params: &LstmParams, samples: Samples<'_>, mode: CandidateMode) -> Result<(f64, f64), TrainError> {
    let preds = predict_all(params, samples.inputs, mode)?;
    Ok((mse(&preds, samples.targets)?, mae(&preds, samples.targets)?))
}

/// Runs `config.epochs` full-batch Adam epochs on the training split.
///
/// After every update both splits are evaluated; the kept parameters are
/// those of the epoch with the lowest train MSE (train MAE breaks ties,
/// then the earliest epoch). The test split never influences selection.
pub fn train(dataset: &WindowedDataset, config: &TrainConfig) -> Result<TrainTrace, TrainError> {
    config.validate()?;
    let train_set = dataset.train();
    let test_set = dataset.test();
    if train_set.len() < MIN_TRAIN_SAMPLES {
        return Err(TrainError::TooFewSamples {
            min: MIN_TRAIN_SAMPLES,
            got: train_set.len(),
        });
    }
    if test_set.is_empty() {
        return Err(TrainError::EmptyBatch);
    }

    let mode = config.candidate_mode;
    let adam = config.adam();
    let mut params = init_params(&config.hidden_sizes, config.seed)?;
    let mut state = AdamState::new(&params);
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut best: Option<(EpochMetrics, LstmParams)> = None;

    for epoch in 1..=config.epochs {
        let mut grads = bptt_gradients(&params, train_set, mode)?.grads;
        adam_step(&mut params, &mut grads, &mut state, &adam);

        let diverged = |mse: f64| TrainError::Diverged { epoch, mse };
        let (train_mse, train_mae) = evaluate(&params, train_set, mode).map_err(|e| match e {
            TrainError::Model(LstmError::NonFinite { .. }) => diverged(f64::NAN),
            other => other,
        })?;
        if !train_mse.is_finite() || train_mse > DIVERGENCE_MSE {
            return Err(diverged(train_mse));
        }
        let (test_mse, test_mae) = evaluate(&params, test_set, mode)?;
        let metrics = EpochMetrics {
            epoch,
            train_mse,
            train_mae,
            test_mse,
            test_mae,
        };
        if best.as_ref().is_none_or(|(incumbent, _)| improves(&metrics, incumbent)) {
            best = Some((metrics, params.clone()));
        }
        epochs.push(metrics);
    }

    let (best_metrics, best_params) = best.expect("at least one epoch ran");
    Ok(TrainTrace {
        epochs,
        best_epoch: best_metrics.epoch,
        best_params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::windowing::make_windows;

    #[test]
    fn error_metrics() {
        assert_eq!(mse(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!((mse(&[0.1, 0.2], &[0.0, 0.0]).unwrap() - 0.025).abs() < 1e-15);
        assert_eq!(mae(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
        assert!((mae(&[0.1, 0.2], &[0.0, 0.0]).unwrap() - 0.15).abs() < 1e-15);
        assert_eq!(
            mse(&[1.0], &[1.0, 2.0]),
            Err(TrainError::LengthMismatch { preds: 1, targets: 2 })
        );
        assert_eq!(mae(&[], &[]), Err(TrainError::EmptyBatch));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { adam_beta1: 1.0, ..Default::default() },
            TrainConfig { adam_beta2: 0.0, ..Default::default() },
            TrainConfig { hidden_sizes: vec![], ..Default::default() },
        ];
        for config in bad {
            assert!(matches!(config.validate(), Err(TrainError::InvalidConfig(_))), "{config:?}");
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        let series: Vec<f64> = (0..12).map(|i| i as f64 / 12.0).collect();
        let ds = make_windows(&series, 4).unwrap();
        assert_eq!(ds.split_index, 6);
        assert_eq!(
            train(&ds, &TrainConfig::default()),
            Err(TrainError::TooFewSamples { min: 8, got: 6 })
        );
    }

    #[test]
    fn divergence_detected() {
        let series: Vec<f64> = (0..40).map(|i| 1e5 * (i as f64).sin()).collect();
        let ds = make_windows(&series, 4).unwrap();
        let config = TrainConfig {
            hidden_sizes: vec![2],
            epochs: 3,
            ..Default::default()
        };
        assert!(matches!(train(&ds, &config), Err(TrainError::Diverged { epoch: 1, .. })));
    }

    #[test]
    fn selection_is_trace_minimum() {
        let series: Vec<f64> = (0..60).map(|i| 0.5 + 0.4 * (i as f64 * 0.4).sin()).collect();
        let ds = make_windows(&series, 4).unwrap();
        let config = TrainConfig {
            hidden_sizes: vec![4],
            epochs: 30,
            ..Default::default()
        };
        let trace = train(&ds, &config).unwrap();
        assert_eq!(trace.epochs.len(), 30);
        let min = trace.epochs.iter().map(|m| m.train_mse).fold(f64::INFINITY, f64::min);
        assert_eq!(trace.best().train_mse, min);
        let first_at_min = trace.epochs.iter().find(|m| m.train_mse == min).unwrap().epoch;
        assert!(trace.best_epoch <= first_at_min);
        // Best params reproduce the recorded best metrics.
        let preds = predict_all(&trace.best_params, ds.train().inputs, config.candidate_mode).unwrap();
        assert_eq!(mse(&preds, ds.train().targets).unwrap(), trace.best().train_mse);
    }
}
