use crate::lstm::LstmParams;

/// Hyperparameters for [`adam_step`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global L2 norm cap applied to the gradient before the update.
    pub clip_norm: f64,
}

/// First and second moment estimates plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: LstmParams,
    pub v: LstmParams,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &LstmParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

pub fn global_norm(grads: &LstmParams) -> f64 {
    grads
        .blocks()
        .iter()
        .flat_map(|b| b.data.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt()
}

/// Rescales `grads` in place so its global norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut LstmParams, max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for block in grads.blocks_mut() {
            block.iter_mut().for_each(|g| *g *= scale);
        }
    }
    norm
}

/// One bias-corrected Adam update. `grads` is clipped in place first.
pub fn adam_step(
    params: &mut LstmParams,
    grads: &mut LstmParams,
    state: &mut AdamState,
    config: &AdamConfig,
) {
    clip_global_norm(grads, config.clip_norm);
    state.t += 1;
    let t = state.t as i32;
    let correction1 = 1.0 - config.beta1.powi(t);
    let correction2 = 1.0 - config.beta2.powi(t);
    let blocks = params
        .blocks_mut()
        .into_iter()
        .zip(grads.blocks_mut())
        .zip(state.m.blocks_mut().into_iter().zip(state.v.blocks_mut()));
    for ((p, g), (m, v)) in blocks {
        for j in 0..p.len() {
            m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
            v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
            let m_hat = m[j] / correction1;
            let v_hat = v[j] / correction2;
            p[j] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::init_params;

    fn config() -> AdamConfig {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: 5.0,
        }
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut params = init_params(&[3], 1).unwrap();
        let before = params.clone();
        let mut state = AdamState::new(&params);
        state.m.head_b = 1.0;
        state.v.head_b = 1.0;
        let mut grads = params.zeros_like();
        // Only head_b carries stale moments; every other entry must stay put.
        adam_step(&mut params, &mut grads, &mut state, &config());
        assert_eq!(params.layers, before.layers);
        assert_eq!(params.head_w, before.head_w);
        assert_eq!(state.m.head_b, 0.9);
        assert_eq!(state.v.head_b, 0.999);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate_against_sign() {
        let mut params = init_params(&[2], 4).unwrap();
        let before = params.to_flat();
        let mut grads = params.zeros_like();
        let n = grads.num_params();
        for (i, block) in grads.blocks_mut().into_iter().flatten().enumerate() {
            let magnitude = 1e-3 * (1 + i) as f64;
            *block = if i % 2 == 0 { magnitude } else { -magnitude };
        }
        assert!(global_norm(&grads) < 5.0);
        let mut state = AdamState::new(&params);
        adam_step(&mut params, &mut grads, &mut state, &config());
        for (i, (after, before)) in params.to_flat().iter().zip(&before).enumerate() {
            let g = 1e-3 * (1 + i) as f64 * if i % 2 == 0 { 1.0 } else { -1.0 };
            // m̂ = g, v̂ = g², so the step is lr·g/(|g| + eps).
            let expected = -1e-3 * g / (g.abs() + 1e-8);
            assert!((after - before - expected).abs() < 1e-12, "param {i} of {n}");
        }
    }

    #[test]
    fn clipping_caps_global_norm() {
        let params = init_params(&[2], 4).unwrap();
        let mut grads = params.zeros_like();
        let count = grads.num_params() as f64;
        for block in grads.blocks_mut() {
            block.iter_mut().for_each(|g| *g = 50.0 / count.sqrt());
        }
        assert!((global_norm(&grads) - 50.0).abs() < 1e-9);
        let before = clip_global_norm(&mut grads, 5.0);
        assert!((before - 50.0).abs() < 1e-9);
        assert!((global_norm(&grads) - 5.0).abs() < 1e-12);
    }
}
