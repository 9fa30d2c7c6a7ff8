use super::network::NetworkParams;
use super::TrainConfig;

/// First and second moment estimates, shaped like the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: NetworkParams,
    pub v: NetworkParams,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &NetworkParams) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

/// Bias-corrected Adam update of one tensor at step `step` (1-based).
pub fn adam_step(params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64], step: u64, cfg: &TrainConfig) {
    let c1 = 1.0 - cfg.beta1.powf(step as f64);
    let c2 = 1.0 - cfg.beta2.powf(step as f64);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        *p -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
    }
}

pub fn adam_update(params: &mut NetworkParams, grads: &NetworkParams, state: &mut AdamState, cfg: &TrainConfig) {
    state.step += 1;
    let step = state.step;
    let tensors = params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.m.tensors_mut())
        .zip(state.v.tensors_mut());
    for (((p, g), m), v) in tensors {
        adam_step(p, g, m, v, step, cfg);
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::model::{Model, ModelConfig};

    fn run(g: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; g.len()];
        let (mut m, mut v) = (vec![0.0; g.len()], vec![0.0; g.len()]);
        adam_step(&mut p, g, &mut m, &mut v, 1, &TrainConfig::default());
        p
    }

    #[test]
    fn first_step_is_learning_rate_times_sign() {
        assert_abs_diff_eq!(run(&[0.37])[0], -0.001, epsilon = 1e-9);
        assert_abs_diff_eq!(run(&[-5.0])[0], 0.001, epsilon = 1e-9);
    }

    #[test]
    fn first_step_is_scale_invariant() {
        let p = run(&[0.2, 0.4]);
        assert_abs_diff_eq!(p[0], p[1], epsilon = 1e-9);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let model = Model::new(
            ModelConfig {
                layers: 1,
                hidden: 3,
                input_dim: 2,
                ..Default::default()
            },
            1,
        )
        .unwrap();
        let mut params = model.params.clone();
        let mut state = AdamState::new(&params);
        let zeros = params.zeros_like();
        adam_update(&mut params, &zeros, &mut state, &TrainConfig::default());
        assert_eq!(params, model.params);
        assert_eq!(state.step, 1);
    }
}
