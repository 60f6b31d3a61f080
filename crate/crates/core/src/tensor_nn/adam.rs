use serde::{Deserialize, Serialize};

use super::network::LayerState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.0005,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of every parameter in `state`, using the
/// gradients currently accumulated there.
pub fn adam_step(state: &mut LayerState, cfg: &AdamConfig) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for p in &mut state.params {
        let grads = p.grad.data();
        let m = p.m.data_mut();
        for (mi, &g) in m.iter_mut().zip(grads) {
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * g;
        }
        let v = p.v.data_mut();
        for (vi, &g) in v.iter_mut().zip(grads) {
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * g * g;
        }
        let (m, v) = (p.m.data(), p.v.data());
        for ((theta, &mi), &vi) in p.value.data_mut().iter_mut().zip(m).zip(v) {
            let m_hat = mi / c1;
            let v_hat = vi / c2;
            *theta -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_nn::{Param, Tensor};

    fn scalar_state(theta: f64) -> LayerState {
        LayerState::new(vec![Param::new("theta", Tensor::from_vec(vec![theta]))])
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let cfg = AdamConfig::default();
        let mut s = LayerState::new(vec![Param::new("w", Tensor::from_vec(vec![1.0, 1.0]))]);
        s.params[0].grad = Tensor::from_vec(vec![3.0, -0.02]);
        adam_step(&mut s, &cfg);
        let w = s.params[0].value.data();
        assert!((w[0] - (1.0 - cfg.lr)).abs() < 1e-9);
        assert!((w[1] - (1.0 + cfg.lr)).abs() < 1e-9);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = scalar_state(0.75);
        for _ in 0..10 {
            adam_step(&mut s, &AdamConfig::default());
        }
        assert_eq!(s.params[0].value.data(), &[0.75]);
        assert_eq!(s.step, 10);
    }

    #[test]
    fn minimizes_a_parabola() {
        let cfg = AdamConfig {
            lr: 0.05,
            ..AdamConfig::default()
        };
        let mut s = scalar_state(1.0);
        for _ in 0..100 {
            let theta = s.params[0].value.data()[0];
            s.params[0].grad = Tensor::from_vec(vec![2.0 * theta]);
            adam_step(&mut s, &cfg);
        }
        assert!(s.params[0].value.data()[0].abs() < 0.1);
    }

    #[test]
    fn first_direction_is_gradient_scale_invariant() {
        let cfg = AdamConfig {
            epsilon: 1e-12,
            ..AdamConfig::default()
        };
        let g = [0.3, -1.7, 0.004];
        let run = |c: f64| {
            let mut s = LayerState::new(vec![Param::new("w", Tensor::zeros(&[3]))]);
            s.params[0].grad = Tensor::from_vec(g.iter().map(|v| v * c).collect());
            adam_step(&mut s, &cfg);
            s.params[0].value.clone()
        };
        let base = run(1.0);
        for c in [0.01, 7.0, 1e4] {
            assert!(run(c).max_abs_diff(&base) < 1e-6);
        }
    }
}
