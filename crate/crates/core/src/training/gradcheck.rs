//! Central finite-difference verification of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::Serialize;

use super::{batch_loss, bptt_gradients, TrainError};
use crate::lstm::{init_params, CandidateMode, LstmParams};
use crate::windowing::Samples;

pub const DEFAULT_EPSILON: f64 = 1e-5;
/// Step used by [`run_suite`]. Deep stacks have gradients near 1e-9 where a
/// 1e-5 step is dominated by round-off in the loss difference.
pub const SUITE_EPSILON: f64 = 1e-4;
/// Acceptance threshold for the maximum relative discrepancy.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
/// Largest network the checker is meant for.
pub const MAX_CHECK_PARAMS: usize = 500;

/// Worst parameter found by a check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Discrepancy {
    pub max_relative: f64,
    pub worst_block: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Compares `analytic` against `(L(θ+ε) − L(θ−ε)) / 2ε` for every parameter.
pub fn compare_gradients(
    params: &LstmParams,
    analytic: &LstmParams,
    batch: Samples<'_>,
    mode: CandidateMode,
    epsilon: f64,
) -> Result<Discrepancy, TrainError> {
    let analytic = analytic.to_flat();
    let mut probe = params.clone();
    let mut worst = Discrepancy {
        max_relative: 0.0,
        worst_block: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    for (index, &a) in analytic.iter().enumerate() {
        let original = *probe.flat_mut(index).expect("index within parameter count");
        *probe.flat_mut(index).unwrap() = original + epsilon;
        let plus = batch_loss(&probe, batch, mode)?;
        *probe.flat_mut(index).unwrap() = original - epsilon;
        let minus = batch_loss(&probe, batch, mode)?;
        *probe.flat_mut(index).unwrap() = original;

        let numeric = (plus - minus) / (2.0 * epsilon);
        let relative = (a - numeric).abs() / f64::max(1e-8, a.abs() + numeric.abs());
        if relative > worst.max_relative || index == 0 {
            worst = Discrepancy {
                max_relative: relative,
                worst_block: params.block_name_of(index).unwrap_or_default(),
                worst_index: index,
                analytic: a,
                numeric,
            };
        }
    }
    Ok(worst)
}

/// Maximum relative discrepancy between BPTT and central differences.
pub fn finite_diff_check(
    params: &LstmParams,
    batch: Samples<'_>,
    mode: CandidateMode,
    epsilon: f64,
) -> Result<Discrepancy, TrainError> {
    let analytic = bptt_gradients(params, batch, mode)?.grads;
    compare_gradients(params, &analytic, batch, mode, epsilon)
}

/// One configuration of the standard gradient-check suite.
#[derive(Clone, Debug, Serialize)]
pub struct GradCheckCase {
    pub seed: u64,
    pub epsilon: f64,
    pub candidate_mode: CandidateMode,
    pub hidden_sizes: Vec<usize>,
    pub num_params: usize,
    pub samples: usize,
    pub discrepancy: Discrepancy,
}

impl GradCheckCase {
    pub fn passed(&self) -> bool {
        self.discrepancy.max_relative < GRADCHECK_TOLERANCE
    }
}

/// Random windows and targets in [0, 1], drawn from a seeded generator.
pub fn random_batch(seed: u64, samples: usize, lookback: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let inputs = (0..samples)
        .map(|_| (0..lookback).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let targets = (0..samples).map(|_| rng.gen::<f64>()).collect();
    (inputs, targets)
}

/// Both candidate modes over 1-, 2- and 3-layer stacks of width 4,
/// 8 samples of lookback 4 each.
pub fn run_suite(seed: u64, epsilon: f64) -> Result<Vec<GradCheckCase>, TrainError> {
    let stacks: [&[usize]; 3] = [&[4], &[4, 4], &[4, 4, 4]];
    let mut cases = Vec::new();
    for mode in CandidateMode::ALL {
        for (offset, sizes) in stacks.iter().enumerate() {
            let case_seed = seed.wrapping_add(offset as u64);
            let params = init_params(sizes, case_seed)?;
            debug_assert!(params.num_params() <= MAX_CHECK_PARAMS);
            let (inputs, targets) = random_batch(case_seed ^ 0x5eed, 8, 4);
            let batch = Samples {
                inputs: &inputs,
                targets: &targets,
            };
            let discrepancy = finite_diff_check(&params, batch, mode, epsilon)?;
            cases.push(GradCheckCase {
                seed: case_seed,
                epsilon,
                candidate_mode: mode,
                hidden_sizes: sizes.to_vec(),
                num_params: params.num_params(),
                samples: targets.len(),
                discrepancy,
            });
        }
    }
    Ok(cases)
}
