//! On-policy PPO with a diagonal Gaussian policy, running observation
//! normalisation, GAE, and an optional latent + residual action head.

mod buffer;
mod norm;
mod policy;
mod train;
mod update;

pub use buffer::{compute_gae, RolloutBuffer};
pub use norm::RunningNorm;
pub use policy::{gaussian_entropy, gaussian_log_prob, split_action_head, ActMode, ActOutput, PolicyParams};
pub use train::{
    evaluate, train, ActionRecord, Agent, Composed, EpisodeStats, EvalReport, LogRow, TrainOptions,
    TrainOutput, LOG_HEADER,
};
pub use update::{ppo_update, PpoOptimizer, UpdateStats};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub lr: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_range: f64,
    pub n_epochs: usize,
    pub minibatch_size: usize,
    pub vf_coef: f64,
    pub ent_coef: f64,
    pub max_grad_norm: f64,
    /// Steps collected per environment between updates.
    pub rollout_length: usize,
    pub total_steps: usize,
    pub seed: u64,
    /// Environments stepped in lockstep; results depend on this count.
    pub n_envs: usize,
    pub hidden: Vec<usize>,
    pub adam_epsilon: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            lr: 3e-4,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_range: 0.2,
            n_epochs: 10,
            minibatch_size: 64,
            vf_coef: 0.5,
            ent_coef: 0.0,
            max_grad_norm: 0.5,
            rollout_length: 2048,
            total_steps: 200_000,
            seed: 0,
            n_envs: 1,
            hidden: vec![64, 64],
            adam_epsilon: 1e-5,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("ppo: {what}")));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(&format!("lr must be >= 0, got {}", self.lr));
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gamma and gae_lambda must be in [0, 1]");
        }
        if !(self.clip_range > 0.0 && self.clip_range < 1.0) {
            return bad(&format!("clip_range must be in (0, 1), got {}", self.clip_range));
        }
        if self.n_epochs == 0 || self.minibatch_size == 0 || self.rollout_length == 0 || self.n_envs == 0 {
            return bad("n_epochs, minibatch_size, rollout_length and n_envs must be positive");
        }
        if self.total_steps == 0 {
            return bad("total_steps must be positive");
        }
        if !(self.vf_coef >= 0.0 && self.ent_coef >= 0.0 && self.max_grad_norm > 0.0) {
            return bad("vf_coef and ent_coef must be >= 0 and max_grad_norm > 0");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        if self.adam_epsilon.is_nan() || self.adam_epsilon <= 0.0 {
            return bad("adam_epsilon must be positive");
        }
        Ok(())
    }

    pub fn batch_size(&self) -> usize {
        self.rollout_length * self.n_envs
    }

    pub fn n_updates(&self) -> usize {
        self.total_steps.div_ceil(self.batch_size())
    }
}
