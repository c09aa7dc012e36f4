use serde::{Deserialize, Serialize};

use super::{Gradients, Mlp};
use crate::error::{ensure_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(mut self, lr: f64) -> Self {
        self.lr = lr;
        self
    }
}

/// Moment estimates for one parameter buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step_count: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize, config: AdamConfig) -> Self {
        AdamState {
            config,
            step_count: 0,
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
        }
    }

    pub fn for_net(net: &Mlp, config: AdamConfig) -> Self {
        Self::new(net.n_params(), config)
    }

    /// Bias-corrected Adam update of a raw parameter slice.
    pub fn update_slice(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        ensure_len("adam gradient", params.len(), grads.len())?;
        ensure_len("adam moments", self.first_moment.len(), params.len())?;
        if !(self.config.lr >= 0.0 && self.config.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "adam learning rate must be non-negative and finite, got {}",
                self.config.lr
            )));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("adam gradient at parameter {i}"),
            });
        }
        self.step_count += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step_count as f64;
        let c1 = 1.0 - beta1.powf(t);
        let c2 = 1.0 - beta2.powf(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

/// One Adam step on a network. A non-finite gradient aborts the update
/// before anything is modified and names the layer it came from.
pub fn adam_step(net: &mut Mlp, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    ensure_len("adam gradient", net.n_params(), grads.as_slice().len())?;
    if let Some(i) = grads.as_slice().iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("gradient of layer {} (parameter {i})", net.layer_of_param(i)),
        });
    }
    state.update_slice(net.params_mut(), grads.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;

    /// Independent transcription of the textbook update.
    fn reference_adam(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], t: i32) {
        let (lr, b1, b2, eps) = (1e-3, 0.9, 0.999, 1e-8);
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let mh = m[i] / (1.0 - f64::powi(b1, t));
            let vh = v[i] / (1.0 - f64::powi(b2, t));
            p[i] -= lr * mh / (vh.sqrt() + eps);
        }
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut net = Mlp::from_flat(&[2, 1], Activation::Identity, Activation::Identity, vec![0.5, -1.5, 2.0]).unwrap();
        let before = net.clone();
        let mut state = AdamState::for_net(&net, AdamConfig::default());
        let grads = Gradients::zeros_like(&net);
        adam_step(&mut net, &grads, &mut state).unwrap();
        assert_eq!(net, before);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn first_step_matches_hand_computation() {
        // After one step m_hat = g and v_hat = g^2, so the update is
        // lr * g / (|g| + eps).
        let g = 0.3;
        let mut p = [1.0];
        let mut state = AdamState::new(1, AdamConfig::default());
        state.update_slice(&mut p, &[g]).unwrap();
        let expected = 1.0 - 1e-3 * g / (g.abs() + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15, "{} vs {}", p[0], expected);
    }

    #[test]
    fn two_steps_match_reference() {
        let mut p = vec![0.2, -0.4, 1.1];
        let mut q = p.clone();
        let g1 = [0.5, -0.1, 2.0];
        let g2 = [-0.3, 0.7, 0.01];
        let mut state = AdamState::new(3, AdamConfig::default());
        let (mut m, mut v) = (vec![0.0; 3], vec![0.0; 3]);
        state.update_slice(&mut p, &g1).unwrap();
        reference_adam(&mut q, &g1, &mut m, &mut v, 1);
        state.update_slice(&mut p, &g2).unwrap();
        reference_adam(&mut q, &g2, &mut m, &mut v, 2);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert_eq!(state.step_count, 2);
    }

    #[test]
    fn non_finite_gradient_names_layer() {
        let mut net = Mlp::zeros(&[2, 2, 1], Activation::Tanh, Activation::Identity).unwrap();
        let mut grads = Gradients::zeros_like(&net);
        // first parameter of layer 1
        grads.as_mut_slice()[6] = f64::INFINITY;
        let mut state = AdamState::for_net(&net, AdamConfig::default());
        let err = adam_step(&mut net, &grads, &mut state).unwrap_err();
        assert!(err.to_string().contains("layer 1"), "{err}");
        assert_eq!(state.step_count, 0);
    }
}
