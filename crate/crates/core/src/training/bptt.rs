//! Reverse-mode gradients of the batch MSE through the unrolled stack.

use super::TrainError;
use crate::lstm::{sequence_forward, CandidateMode, ForwardCache, LstmParams};
use crate::windowing::Samples;

/// Loss and gradient for one batch.
#[derive(Clone, Debug)]
pub struct BatchGradient {
    pub loss: f64,
    pub grads: LstmParams,
    pub predictions: Vec<f64>,
}

/// Batch MSE without gradients.
pub fn batch_loss(
    params: &LstmParams,
    batch: Samples<'_>,
    mode: CandidateMode,
) -> Result<f64, TrainError> {
    let preds = super::predict_all(params, batch.inputs, mode)?;
    super::mse(&preds, batch.targets)
}

/// Exact gradients of `mean((pred - target)^2)` with respect to every parameter.
pub fn bptt_gradients(
    params: &LstmParams,
    batch: Samples<'_>,
    mode: CandidateMode,
) -> Result<BatchGradient, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let n = batch.len() as f64;
    let mut grads = params.zeros_like();
    let mut loss = 0.0;
    let mut predictions = Vec::with_capacity(batch.len());
    for (window, &target) in batch.inputs.iter().zip(batch.targets) {
        let cache = sequence_forward(params, window, mode)?;
        let residual = cache.prediction - target;
        loss += residual * residual;
        predictions.push(cache.prediction);
        accumulate_sample(params, &cache, 2.0 * residual / n, mode, &mut grads);
    }
    if let Some(index) = grads.to_flat().iter().position(|g| !g.is_finite()) {
        return Err(TrainError::NonFiniteGradient {
            block: grads.block_name_of(index).unwrap_or_default(),
        });
    }
    Ok(BatchGradient {
        loss: loss / n,
        grads,
        predictions,
    })
}

/// Adds one sample's contribution, given `d_pred = dL/d(prediction)`.
fn accumulate_sample(
    params: &LstmParams,
    cache: &ForwardCache,
    d_pred: f64,
    mode: CandidateMode,
    grads: &mut LstmParams,
) {
    grads.head_b += d_pred;
    for (g, h) in grads.head_w.iter_mut().zip(&cache.h_last) {
        *g += d_pred * h;
    }

    let num_layers = params.layers.len();
    let steps = cache.steps.len();
    // Gradients flowing backwards in time, per layer.
    let mut dh_next: Vec<Vec<f64>> = params.layers.iter().map(|l| vec![0.0; l.hidden_size()]).collect();
    let mut dc_next = dh_next.clone();

    for t in (0..steps).rev() {
        // Gradient arriving at the current layer's h_t from the layer above
        // (or from the head, for the top layer at the final step).
        let mut dh_above: Vec<f64> = if t + 1 == steps {
            params.head_w.iter().map(|w| w * d_pred).collect()
        } else {
            vec![0.0; params.layers[num_layers - 1].hidden_size()]
        };
        for k in (0..num_layers).rev() {
            let layer = &params.layers[k];
            let step = &cache.steps[t][k];
            let gates = &step.gates;
            let hidden = layer.hidden_size();

            let mut dz_f = vec![0.0; hidden];
            let mut dz_i = vec![0.0; hidden];
            let mut dz_c = vec![0.0; hidden];
            let mut dz_o = vec![0.0; hidden];
            for j in 0..hidden {
                let dh = dh_above[j] + dh_next[k][j];
                let (f, i, g, o) = (
                    gates.forget[j],
                    gates.input[j],
                    gates.candidate[j],
                    gates.output[j],
                );
                let tc = step.tanh_c[j];
                let d_o = dh * tc;
                let dc = dh * o * (1.0 - tc * tc) + dc_next[k][j];
                dz_f[j] = dc * step.c_prev[j] * f * (1.0 - f);
                dz_i[j] = dc * g * i * (1.0 - i);
                dz_c[j] = dc * i * mode.derivative_from_output(g);
                dz_o[j] = d_o * o * (1.0 - o);
                dc_next[k][j] = dc * f;
            }

            let layer_grads = &mut grads.layers[k];
            let mut dx = vec![0.0; layer.input_size()];
            let mut dh_prev = vec![0.0; hidden];
            for (dz, w, u, gw, gu, gb) in [
                (&dz_f, &layer.w_f, &layer.u_f, &mut layer_grads.w_f, &mut layer_grads.u_f, &mut layer_grads.b_f),
                (&dz_i, &layer.w_i, &layer.u_i, &mut layer_grads.w_i, &mut layer_grads.u_i, &mut layer_grads.b_i),
                (&dz_c, &layer.w_c, &layer.u_c, &mut layer_grads.w_c, &mut layer_grads.u_c, &mut layer_grads.b_c),
                (&dz_o, &layer.w_o, &layer.u_o, &mut layer_grads.w_o, &mut layer_grads.u_o, &mut layer_grads.b_o),
            ] {
                gw.add_outer(dz, &step.x);
                gu.add_outer(dz, &step.h_prev);
                gb.iter_mut().zip(dz).for_each(|(b, d)| *b += d);
                w.tmul_vec_add(dz, &mut dx);
                u.tmul_vec_add(dz, &mut dh_prev);
            }
            dh_next[k] = dh_prev;
            dh_above = dx;
        }
    }
}
