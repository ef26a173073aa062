//! Stacked LSTM with a linear output head.
//!
//! Each layer follows the usual gated recurrence:
//!
//! ```text
//! f_t  = σ(W_f x_t + U_f h_{t-1} + b_f)
//! i_t  = σ(W_i x_t + U_i h_{t-1} + b_i)
//! c̃_t  = g(W_c x_t + U_c h_{t-1} + b_c)
//! c_t  = f_t ⊙ c_{t-1} + i_t ⊙ c̃_t
//! o_t  = σ(W_o x_t + U_o h_{t-1} + b_o)
//! h_t  = o_t ⊙ tanh(c_t)
//! ```
//!
//! where `g` is selected by [`CandidateMode`]: a sigmoid in the literal
//! reading of the published recurrence, or the conventional `tanh`.

mod checkpoint;
mod forward;
mod matrix;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointError, CHECKPOINT_MAGIC};
pub use forward::{
    cell_forward, predict, sequence_forward, ForwardCache, GateActivations, LstmState, StepCache,
};
pub use matrix::Matrix;

/// Activation applied to the candidate cell state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateMode {
    /// Sigmoid candidate, as the recurrence is printed in the source model.
    #[default]
    PaperSigmoid,
    /// Conventional `tanh` candidate.
    StandardTanh,
}

impl CandidateMode {
    pub const ALL: [CandidateMode; 2] = [CandidateMode::PaperSigmoid, CandidateMode::StandardTanh];

    pub fn as_str(self) -> &'static str {
        match self {
            CandidateMode::PaperSigmoid => "paper-sigmoid",
            CandidateMode::StandardTanh => "standard-tanh",
        }
    }
}

impl fmt::Display for CandidateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CandidateMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper-sigmoid" => Ok(CandidateMode::PaperSigmoid),
            "standard-tanh" => Ok(CandidateMode::StandardTanh),
            other => Err(format!(
                "unknown candidate mode `{other}` (paper-sigmoid|standard-tanh)"
            )),
        }
    }
}

/// Identifies a gate (or derived quantity) in error messages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Forget,
    Input,
    Candidate,
    Output,
    Cell,
    Hidden,
    Head,
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Gate::Forget => "forget gate",
            Gate::Input => "input gate",
            Gate::Candidate => "candidate state",
            Gate::Output => "output gate",
            Gate::Cell => "cell state",
            Gate::Hidden => "hidden state",
            Gate::Head => "output head",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LstmError {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value in {gate} of layer {layer}")]
    NonFinite { layer: usize, gate: Gate },
    #[error("empty input window")]
    EmptyWindow,
    #[error("invalid layer sizes {0:?}: need at least one positive size")]
    InvalidSizes(Vec<usize>),
}

/// Weights and biases of a single LSTM layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmLayerParams {
    pub w_f: Matrix,
    pub w_i: Matrix,
    pub w_c: Matrix,
    pub w_o: Matrix,
    pub u_f: Matrix,
    pub u_i: Matrix,
    pub u_c: Matrix,
    pub u_o: Matrix,
    pub b_f: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
}

/// Block names in canonical order, matching [`LstmLayerParams::blocks`].
const LAYER_BLOCK_NAMES: [&str; 12] = [
    "W_f", "W_i", "W_c", "W_o", "U_f", "U_i", "U_c", "U_o", "b_f", "b_i", "b_c", "b_o",
];

impl LstmLayerParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let w = || Matrix::zeros(hidden_size, input_size);
        let u = || Matrix::zeros(hidden_size, hidden_size);
        let b = || vec![0.0; hidden_size];
        Self {
            w_f: w(),
            w_i: w(),
            w_c: w(),
            w_o: w(),
            u_f: u(),
            u_i: u(),
            u_c: u(),
            u_o: u(),
            b_f: b(),
            b_i: b(),
            b_c: b(),
            b_o: b(),
        }
    }

    pub fn input_size(&self) -> usize {
        self.w_f.cols
    }

    pub fn hidden_size(&self) -> usize {
        self.w_f.rows
    }

    /// `(rows, cols, data)` for each block in canonical order.
    fn blocks(&self) -> [(usize, usize, &[f64]); 12] {
        fn m(m: &Matrix) -> (usize, usize, &[f64]) {
            (m.rows, m.cols, &m.data)
        }
        fn v(v: &[f64]) -> (usize, usize, &[f64]) {
            (v.len(), 1, v)
        }
        [
            m(&self.w_f),
            m(&self.w_i),
            m(&self.w_c),
            m(&self.w_o),
            m(&self.u_f),
            m(&self.u_i),
            m(&self.u_c),
            m(&self.u_o),
            v(&self.b_f),
            v(&self.b_i),
            v(&self.b_c),
            v(&self.b_o),
        ]
    }

    fn blocks_mut(&mut self) -> [&mut [f64]; 12] {
        [
            &mut self.w_f.data,
            &mut self.w_i.data,
            &mut self.w_c.data,
            &mut self.w_o.data,
            &mut self.u_f.data,
            &mut self.u_i.data,
            &mut self.u_c.data,
            &mut self.u_o.data,
            &mut self.b_f,
            &mut self.b_i,
            &mut self.b_c,
            &mut self.b_o,
        ]
    }
}

/// A named, shaped view of one parameter array.
#[derive(Clone, Debug)]
pub struct ParamBlock<'a> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [f64],
}

/// Full model: LSTM stack plus `prediction = head_w · h_T + head_b`.
///
/// The same type doubles as the gradient container in training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub layers: Vec<LstmLayerParams>,
    pub head_w: Vec<f64>,
    pub head_b: f64,
}

impl LstmParams {
    /// All-zero parameters for a univariate input and the given hidden sizes.
    pub fn zeros(hidden_sizes: &[usize]) -> Result<Self, LstmError> {
        if hidden_sizes.is_empty() || hidden_sizes.contains(&0) {
            return Err(LstmError::InvalidSizes(hidden_sizes.to_vec()));
        }
        let mut input_size = 1;
        let layers = hidden_sizes
            .iter()
            .map(|&hidden| {
                let layer = LstmLayerParams::zeros(input_size, hidden);
                input_size = hidden;
                layer
            })
            .collect();
        Ok(Self {
            layers,
            head_w: vec![0.0; input_size],
            head_b: 0.0,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.hidden_sizes()).expect("existing params have valid sizes")
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.hidden_size()).collect()
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.data.len()).sum()
    }

    /// Every parameter array with its checkpoint name (`layer0.W_f`, ..., `head.b`).
    pub fn blocks(&self) -> Vec<ParamBlock<'_>> {
        let mut out = Vec::with_capacity(12 * self.layers.len() + 2);
        for (k, layer) in self.layers.iter().enumerate() {
            for (name, (rows, cols, data)) in LAYER_BLOCK_NAMES.iter().zip(layer.blocks()) {
                out.push(ParamBlock {
                    name: format!("layer{k}.{name}"),
                    rows,
                    cols,
                    data,
                });
            }
        }
        out.push(ParamBlock {
            name: "head.w".into(),
            rows: 1,
            cols: self.head_w.len(),
            data: &self.head_w,
        });
        out.push(ParamBlock {
            name: "head.b".into(),
            rows: 1,
            cols: 1,
            data: std::slice::from_ref(&self.head_b),
        });
        out
    }

    /// Mutable arrays in the same order as [`LstmParams::blocks`].
    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(12 * self.layers.len() + 2);
        for layer in &mut self.layers {
            out.extend(layer.blocks_mut());
        }
        out.push(&mut self.head_w);
        out.push(std::slice::from_mut(&mut self.head_b));
        out
    }

    /// All parameters flattened in block order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.blocks()
            .iter()
            .flat_map(|b| b.data.iter().copied())
            .collect()
    }

    /// Mutable reference to the parameter at `index` in [`LstmParams::to_flat`] order.
    pub fn flat_mut(&mut self, mut index: usize) -> Option<&mut f64> {
        for block in self.blocks_mut() {
            if index < block.len() {
                return Some(&mut block[index]);
            }
            index -= block.len();
        }
        None
    }

    /// Name of the block holding flat parameter `index`.
    pub fn block_name_of(&self, mut index: usize) -> Option<String> {
        for block in self.blocks() {
            if index < block.data.len() {
                return Some(block.name);
            }
            index -= block.data.len();
        }
        None
    }

    pub fn is_finite(&self) -> bool {
        self.blocks()
            .iter()
            .all(|b| b.data.iter().all(|v| v.is_finite()))
    }
}

/// Seeded initialization.
///
/// Every weight is drawn from `U(-1/√fan_in, 1/√fan_in)`, where `fan_in` is
/// the column count of its matrix (input size for `W`, hidden size for `U`
/// and the head). Forget biases start at 1, every other bias at 0. The
/// generator is Xoshiro256++ seeded from `seed`, so identical seeds yield
/// bit-identical parameters.
pub fn init_params(hidden_sizes: &[usize], seed: u64) -> Result<LstmParams, LstmError> {
    let mut params = LstmParams::zeros(hidden_sizes)?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut fill = |data: &mut [f64], fan_in: usize| {
        let bound = 1.0 / (fan_in as f64).sqrt();
        data.iter_mut()
            .for_each(|v| *v = rng.gen_range(-bound..=bound));
    };
    for layer in &mut params.layers {
        let (input, hidden) = (layer.input_size(), layer.hidden_size());
        for w in [&mut layer.w_f, &mut layer.w_i, &mut layer.w_c, &mut layer.w_o] {
            fill(&mut w.data, input);
        }
        for u in [&mut layer.u_f, &mut layer.u_i, &mut layer.u_c, &mut layer.u_o] {
            fill(&mut u.data, hidden);
        }
        layer.b_f.iter_mut().for_each(|b| *b = 1.0);
    }
    let head_fan_in = params.head_w.len();
    fill(&mut params.head_w, head_fan_in);
    Ok(params)
}

/// Parameters bundled with the candidate activation they were trained under.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub params: LstmParams,
    pub candidate_mode: CandidateMode,
}

impl TrainedModel {
    pub fn predict(&self, window: &[f64]) -> Result<f64, LstmError> {
        predict(&self.params, window, self.candidate_mode)
    }
}
