use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::nn::{Activation, Mlp};

const POLICY_OUTPUT_GAIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    Sample,
    Deterministic,
}

/// Separate policy and value networks plus a state-independent log std.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub pi_net: Mlp,
    pub v_net: Mlp,
    pub log_std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActOutput {
    pub head: Vec<f64>,
    pub mean: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
}

pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], x: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(x)
        .map(|((m, ls), x)| {
            let z = (x - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| 0.5 + 0.5 * (2.0 * PI).ln() + ls).sum()
}

impl PolicyParams {
    pub fn new(obs_dim: usize, head_dim: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = |out: usize| {
            let mut s = vec![obs_dim];
            s.extend_from_slice(hidden);
            s.push(out);
            s
        };
        let mut pi_net = Mlp::new(&sizes(head_dim), Activation::Tanh, Activation::Identity, &mut rng)?;
        // near-zero initial mean action
        let last = pi_net.n_layers() - 1;
        pi_net.weights_mut(last).iter_mut().for_each(|w| *w *= POLICY_OUTPUT_GAIN);
        let v_net = Mlp::new(&sizes(1), Activation::Tanh, Activation::Identity, &mut rng)?;
        Ok(PolicyParams {
            pi_net,
            v_net,
            log_std: vec![0.0; head_dim],
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.pi_net.input_dim()
    }

    pub fn head_dim(&self) -> usize {
        self.pi_net.output_dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.pi_net.validate()?;
        self.v_net.validate()?;
        ensure_len("value net input", self.obs_dim(), self.v_net.input_dim())?;
        ensure_len("value net output", 1, self.v_net.output_dim())?;
        ensure_len("log_std", self.head_dim(), self.log_std.len())?;
        if !self.log_std.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "log_std".into(),
            });
        }
        Ok(())
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.v_net.forward(obs)?[0])
    }

    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], mode: ActMode, rng: &mut R) -> Result<ActOutput> {
        let mean = self.pi_net.forward(obs)?;
        let value = self.value(obs)?;
        if !(mean.iter().all(|v| v.is_finite()) && value.is_finite()) {
            return Err(Error::NonFinite {
                context: "policy network output".into(),
            });
        }
        let head: Vec<f64> = match mode {
            ActMode::Deterministic => mean.clone(),
            ActMode::Sample => mean
                .iter()
                .zip(&self.log_std)
                .map(|(m, ls)| {
                    let e: f64 = StandardNormal.sample(rng);
                    m + ls.exp() * e
                })
                .collect(),
        };
        let log_prob = gaussian_log_prob(&mean, &self.log_std, &head);
        Ok(ActOutput {
            head,
            mean,
            log_prob,
            value,
        })
    }
}

/// Splits a policy head into its latent part (clipped to `[-1, 1]`) and the
/// raw residual part. Without a prior (`a_l = 0`) the whole head is residual.
pub fn split_action_head(head: &[f64], a_l: usize, a_full: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    ensure_len("action head", a_l + a_full, head.len())?;
    let (latent, residual) = head.split_at(a_l);
    Ok((
        latent.iter().map(|z| z.clamp(-1.0, 1.0)).collect(),
        residual.to_vec(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_actions_repeat() {
        let p = PolicyParams::new(3, 2, &[8, 8], 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = p.act(&[0.1, 0.2, 0.3], ActMode::Deterministic, &mut rng).unwrap();
        let b = p.act(&[0.1, 0.2, 0.3], ActMode::Deterministic, &mut rng).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.head, a.mean);
    }

    #[test]
    fn log_prob_at_mean() {
        let mut p = PolicyParams::new(2, 3, &[4], 0).unwrap();
        p.log_std = vec![0.0, -0.5, 0.7];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = p.act(&[0.5, -0.5], ActMode::Deterministic, &mut rng).unwrap();
        let expect: f64 = p.log_std.iter().map(|ls| -ls - 0.5 * (2.0 * PI).ln()).sum();
        assert!((out.log_prob - expect).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_seeded() {
        let p = PolicyParams::new(2, 2, &[4], 0).unwrap();
        let draw = |s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            p.act(&[0.0, 1.0], ActMode::Sample, &mut rng).unwrap()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9).head, draw(10).head);
    }

    #[test]
    fn log_prob_matches_density_formula() {
        // one dimension, sigma = e^0.3
        let lp = gaussian_log_prob(&[0.2], &[0.3], &[1.0]);
        let s = 0.3f64.exp();
        let density = (-(0.8f64).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt());
        assert!((lp - density.ln()).abs() < 1e-12);
    }

    #[test]
    fn split_examples() {
        let (z, r) = split_action_head(&[0.1, 0.2, 0.3, 0.4, 0.5], 2, 3).unwrap();
        assert_eq!(z, vec![0.1, 0.2]);
        assert_eq!(r, vec![0.3, 0.4, 0.5]);
        let (z, _) = split_action_head(&[1.7, -3.0, 0.0], 2, 1).unwrap();
        assert_eq!(z, vec![1.0, -1.0]);
        let (z, r) = split_action_head(&[0.4, 0.5], 0, 2).unwrap();
        assert!(z.is_empty());
        assert_eq!(r, vec![0.4, 0.5]);
        assert!(split_action_head(&[0.0; 4], 2, 3).is_err());
    }

    #[test]
    fn initial_policy_mean_is_small() {
        let p = PolicyParams::new(5, 4, &[64, 64], 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = p.act(&[1.0, -1.0, 0.5, 0.0, 2.0], ActMode::Deterministic, &mut rng).unwrap();
        assert!(out.mean.iter().all(|m| m.abs() < 0.1), "{:?}", out.mean);
    }
}
