use super::{CandidateMode, Gate, LstmError, LstmLayerParams, LstmParams, Matrix};

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl CandidateMode {
    pub(crate) fn activate(self, z: f64) -> f64 {
        match self {
            CandidateMode::PaperSigmoid => sigmoid(z),
            CandidateMode::StandardTanh => z.tanh(),
        }
    }

    /// Derivative of the candidate activation, expressed through its output.
    pub(crate) fn derivative_from_output(self, g: f64) -> f64 {
        match self {
            CandidateMode::PaperSigmoid => g * (1.0 - g),
            CandidateMode::StandardTanh => 1.0 - g * g,
        }
    }
}

/// Gate outputs for one layer at one timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct GateActivations {
    pub forget: Vec<f64>,
    pub input: Vec<f64>,
    pub candidate: Vec<f64>,
    pub output: Vec<f64>,
}

/// Hidden and cell vectors for every layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl LstmState {
    pub fn zeros(params: &LstmParams) -> Self {
        let zeros = || -> Vec<Vec<f64>> {
            params.layers.iter().map(|l| vec![0.0; l.hidden_size()]).collect()
        };
        Self {
            h: zeros(),
            c: zeros(),
        }
    }
}

/// Everything one layer needs at one timestep for the backward pass.
#[derive(Clone, Debug)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub gates: GateActivations,
    pub tanh_c: Vec<f64>,
}

/// Caches of a full window, indexed `[timestep][layer]`.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub steps: Vec<Vec<StepCache>>,
    /// Last layer's hidden state after the final timestep.
    pub h_last: Vec<f64>,
    pub prediction: f64,
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), LstmError> {
    if expected == got {
        Ok(())
    } else {
        Err(LstmError::Shape {
            what,
            expected,
            got,
        })
    }
}

fn gate(
    w: &Matrix,
    u: &Matrix,
    b: &[f64],
    x: &[f64],
    h_prev: &[f64],
    activation: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let mut z = b.to_vec();
    w.mul_vec_add(x, &mut z);
    u.mul_vec_add(h_prev, &mut z);
    z.into_iter().map(activation).collect()
}

fn ensure_finite(values: &[f64], layer: usize, gate: Gate) -> Result<(), LstmError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LstmError::NonFinite { layer, gate })
    }
}

/// `(h, c, gates, tanh(c))` of one step.
type CellOutput = (Vec<f64>, Vec<f64>, GateActivations, Vec<f64>);

fn cell_forward_indexed(
    layer: &LstmLayerParams,
    index: usize,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    mode: CandidateMode,
) -> Result<CellOutput, LstmError> {
    let hidden = layer.hidden_size();
    check_len("input vector", layer.input_size(), x.len())?;
    check_len("previous hidden state", hidden, h_prev.len())?;
    check_len("previous cell state", hidden, c_prev.len())?;

    let forget = gate(&layer.w_f, &layer.u_f, &layer.b_f, x, h_prev, sigmoid);
    ensure_finite(&forget, index, Gate::Forget)?;
    let input = gate(&layer.w_i, &layer.u_i, &layer.b_i, x, h_prev, sigmoid);
    ensure_finite(&input, index, Gate::Input)?;
    let candidate = gate(&layer.w_c, &layer.u_c, &layer.b_c, x, h_prev, |z| {
        mode.activate(z)
    });
    ensure_finite(&candidate, index, Gate::Candidate)?;
    let output = gate(&layer.w_o, &layer.u_o, &layer.b_o, x, h_prev, sigmoid);
    ensure_finite(&output, index, Gate::Output)?;

    let c: Vec<f64> = (0..hidden)
        .map(|j| forget[j] * c_prev[j] + input[j] * candidate[j])
        .collect();
    ensure_finite(&c, index, Gate::Cell)?;
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = output.iter().zip(&tanh_c).map(|(o, t)| o * t).collect();
    ensure_finite(&h, index, Gate::Hidden)?;

    Ok((
        h,
        c,
        GateActivations {
            forget,
            input,
            candidate,
            output,
        },
        tanh_c,
    ))
}

/// One LSTM step: returns `(h_t, c_t, gates)`.
pub fn cell_forward(
    layer: &LstmLayerParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    mode: CandidateMode,
) -> Result<(Vec<f64>, Vec<f64>, GateActivations), LstmError> {
    let (h, c, gates, _) = cell_forward_indexed(layer, 0, x, h_prev, c_prev, mode)?;
    Ok((h, c, gates))
}

fn check_params(params: &LstmParams) -> Result<(), LstmError> {
    let mut input = 1;
    for layer in &params.layers {
        check_len("layer input size", input, layer.input_size())?;
        input = layer.hidden_size();
    }
    check_len("head weights", input, params.head_w.len())
}

/// Runs the window through the stack from a zero state, one element per
/// timestep, and applies the head to the last layer's final hidden state.
pub fn sequence_forward(
    params: &LstmParams,
    window: &[f64],
    mode: CandidateMode,
) -> Result<ForwardCache, LstmError> {
    if window.is_empty() {
        return Err(LstmError::EmptyWindow);
    }
    check_params(params)?;
    let mut state = LstmState::zeros(params);
    let mut steps = Vec::with_capacity(window.len());
    let mut x = Vec::new();
    for &x_t in window {
        x = vec![x_t];
        let mut layer_caches = Vec::with_capacity(params.layers.len());
        for (k, layer) in params.layers.iter().enumerate() {
            let (h, c, gates, tanh_c) =
                cell_forward_indexed(layer, k, &x, &state.h[k], &state.c[k], mode)?;
            let h_prev = std::mem::replace(&mut state.h[k], h);
            let c_prev = std::mem::replace(&mut state.c[k], c);
            layer_caches.push(StepCache {
                x: std::mem::replace(&mut x, state.h[k].clone()),
                h_prev,
                c_prev,
                gates,
                tanh_c,
            });
        }
        steps.push(layer_caches);
    }
    let h_last = x;
    let prediction = params.head_b
        + params
            .head_w
            .iter()
            .zip(&h_last)
            .map(|(w, h)| w * h)
            .sum::<f64>();
    if !prediction.is_finite() {
        return Err(LstmError::NonFinite {
            layer: params.layers.len(),
            gate: Gate::Head,
        });
    }
    Ok(ForwardCache {
        steps,
        h_last,
        prediction,
    })
}

/// One-step prediction without retaining caches.
pub fn predict(params: &LstmParams, window: &[f64], mode: CandidateMode) -> Result<f64, LstmError> {
    sequence_forward(params, window, mode).map(|cache| cache.prediction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::init_params;

    fn zero_layer(hidden: usize) -> LstmLayerParams {
        LstmLayerParams::zeros(1, hidden)
    }

    #[test]
    fn zero_params_sigmoid_candidate() {
        let (h, c, gates) =
            cell_forward(&zero_layer(3), &[0.0], &[0.0; 3], &[0.0; 3], CandidateMode::PaperSigmoid)
                .unwrap();
        assert_eq!(gates.forget, vec![0.5; 3]);
        assert_eq!(gates.input, vec![0.5; 3]);
        assert_eq!(gates.output, vec![0.5; 3]);
        assert_eq!(gates.candidate, vec![0.5; 3]);
        assert_eq!(c, vec![0.25; 3]);
        for v in h {
            assert!((v - 0.5 * 0.25f64.tanh()).abs() < 1e-15);
            assert!((v - 0.122459).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_params_standard_mode() {
        let (h, c, gates) =
            cell_forward(&zero_layer(2), &[0.0], &[0.0; 2], &[0.0; 2], CandidateMode::StandardTanh)
                .unwrap();
        assert_eq!(gates.candidate, vec![0.0; 2]);
        assert_eq!(c, vec![0.0; 2]);
        assert_eq!(h, vec![0.0; 2]);
        // Only the candidate differs between modes on zero pre-activations.
        let (_, _, sigmoid) =
            cell_forward(&zero_layer(2), &[0.0], &[0.0; 2], &[0.0; 2], CandidateMode::PaperSigmoid)
                .unwrap();
        assert_eq!(sigmoid.forget, gates.forget);
        assert_eq!(sigmoid.input, gates.input);
        assert_eq!(sigmoid.output, gates.output);
        assert_eq!(sigmoid.candidate, vec![0.5; 2]);
    }

    #[test]
    fn cell_update_with_unit_memory() {
        let (_, c, _) =
            cell_forward(&zero_layer(2), &[0.0], &[0.0; 2], &[1.0; 2], CandidateMode::PaperSigmoid)
                .unwrap();
        assert_eq!(c, vec![0.75; 2]);
    }

    #[test]
    fn shape_mismatch_is_error() {
        let err = cell_forward(&zero_layer(2), &[0.0, 1.0], &[0.0; 2], &[0.0; 2], CandidateMode::PaperSigmoid)
            .unwrap_err();
        assert!(matches!(err, LstmError::Shape { what: "input vector", .. }));
    }

    #[test]
    fn nan_names_the_gate() {
        let mut layer = zero_layer(1);
        layer.b_f[0] = f64::NAN;
        let err = cell_forward(&layer, &[0.0], &[0.0], &[0.0], CandidateMode::PaperSigmoid).unwrap_err();
        assert_eq!(err, LstmError::NonFinite { layer: 0, gate: Gate::Forget });
    }

    #[test]
    fn head_only_models() {
        let mut params = LstmParams::zeros(&[4, 4]).unwrap();
        for mode in CandidateMode::ALL {
            assert_eq!(predict(&params, &[0.3, 0.9, 0.1], mode).unwrap(), 0.0);
        }
        params.head_b = 0.7;
        assert_eq!(predict(&params, &[0.3, 0.9], CandidateMode::PaperSigmoid).unwrap(), 0.7);
        assert_eq!(predict(&params, &[], CandidateMode::PaperSigmoid), Err(LstmError::EmptyWindow));
    }

    #[test]
    fn hidden_state_bounded_and_deterministic() {
        let params = init_params(&[6, 5, 4], 11).unwrap();
        let window = [0.1, 0.8, -0.4, 1.7, 0.2];
        for mode in CandidateMode::ALL {
            let cache = sequence_forward(&params, &window, mode).unwrap();
            for step in &cache.steps {
                for layer in step {
                    for g in [&layer.gates.forget, &layer.gates.input, &layer.gates.output] {
                        assert!(g.iter().all(|&v| v > 0.0 && v < 1.0));
                    }
                    let lo = if mode == CandidateMode::PaperSigmoid { 0.0 } else { -1.0 };
                    assert!(layer.gates.candidate.iter().all(|&v| v > lo && v < 1.0));
                }
            }
            assert!(cache.h_last.iter().all(|v| v.abs() <= 1.0));
            let again = predict(&params, &window, mode).unwrap();
            assert_eq!(again.to_bits(), cache.prediction.to_bits());
        }
    }
}
