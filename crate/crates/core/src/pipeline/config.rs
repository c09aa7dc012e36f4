use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::envs::Variant;
use crate::error::{Error, Result};
use crate::imitation::RewardWeights;
use crate::latent::PriorTrainingConfig;
use crate::ppo::PpoConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Ppo,
    PpoStyle,
    PpoLatent,
    PpoLatentStyle,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Ppo, Mode::PpoStyle, Mode::PpoLatent, Mode::PpoLatentStyle];

    pub fn uses_prior(self) -> bool {
        matches!(self, Mode::PpoLatent | Mode::PpoLatentStyle)
    }

    pub fn uses_style(self) -> bool {
        matches!(self, Mode::PpoStyle | Mode::PpoLatentStyle)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Ppo => "ppo",
            Mode::PpoStyle => "ppo_style",
            Mode::PpoLatent => "ppo_latent",
            Mode::PpoLatentStyle => "ppo_latent_style",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode `{s}` (expected ppo, ppo_style, ppo_latent or ppo_latent_style)")))
    }
}

/// One experiment: environment, mode, inputs, and PPO overrides, as a flat
/// TOML table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: String,
    pub speed_multiplier: u32,
    pub any_direction: bool,
    pub tracking: bool,
    pub mode: Mode,
    pub demo: Option<PathBuf>,
    pub prior: Option<PathBuf>,
    pub w_full: f64,
    pub latent_dim: Option<usize>,
    pub prior_epochs: usize,
    pub prior_lr: f64,
    pub prior_seed: u64,
    pub w_task: f64,
    pub w_style: f64,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub eval_episodes: usize,
    pub record_wall_time: bool,
    pub record_actions: bool,

    pub lr: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_range: f64,
    pub n_epochs: usize,
    pub minibatch_size: usize,
    pub vf_coef: f64,
    pub ent_coef: f64,
    pub max_grad_norm: f64,
    pub rollout_length: usize,
    pub total_steps: usize,
    pub n_envs: usize,
    pub hidden: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let ppo = PpoConfig::default();
        let prior = PriorTrainingConfig::default();
        let weights = RewardWeights::default();
        ExperimentConfig {
            env: "point_gait".into(),
            speed_multiplier: 1,
            any_direction: false,
            tracking: false,
            mode: Mode::PpoLatentStyle,
            demo: None,
            prior: None,
            w_full: prior.full_action_weight,
            latent_dim: None,
            prior_epochs: prior.epochs,
            prior_lr: prior.lr,
            prior_seed: prior.seed,
            w_task: weights.w_task,
            w_style: weights.w_style,
            seeds: vec![0],
            out_dir: PathBuf::from("out"),
            eval_episodes: 10,
            record_wall_time: false,
            record_actions: false,
            lr: ppo.lr,
            gamma: ppo.gamma,
            gae_lambda: ppo.gae_lambda,
            clip_range: ppo.clip_range,
            n_epochs: ppo.n_epochs,
            minibatch_size: ppo.minibatch_size,
            vf_coef: ppo.vf_coef,
            ent_coef: ppo.ent_coef,
            max_grad_norm: ppo.max_grad_norm,
            rollout_length: ppo.rollout_length,
            total_steps: ppo.total_steps,
            n_envs: ppo.n_envs,
            hidden: ppo.hidden,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialise config: {e}")))
    }

    pub fn variant(&self) -> Variant {
        Variant {
            speed_multiplier: self.speed_multiplier,
            any_direction: self.any_direction,
            tracking: self.tracking,
        }
    }

    /// Reward weights actually used: the configured ones in style modes,
    /// task-only otherwise.
    pub fn reward_weights(&self) -> RewardWeights {
        if self.mode.uses_style() {
            RewardWeights {
                w_task: self.w_task,
                w_style: self.w_style,
            }
        } else {
            RewardWeights::task_only()
        }
    }

    pub fn ppo(&self, seed: u64) -> PpoConfig {
        PpoConfig {
            lr: self.lr,
            gamma: self.gamma,
            gae_lambda: self.gae_lambda,
            clip_range: self.clip_range,
            n_epochs: self.n_epochs,
            minibatch_size: self.minibatch_size,
            vf_coef: self.vf_coef,
            ent_coef: self.ent_coef,
            max_grad_norm: self.max_grad_norm,
            rollout_length: self.rollout_length,
            total_steps: self.total_steps,
            seed,
            n_envs: self.n_envs,
            hidden: self.hidden.clone(),
            ..PpoConfig::default()
        }
    }

    pub fn prior_training(&self) -> PriorTrainingConfig {
        PriorTrainingConfig {
            epochs: self.prior_epochs,
            lr: self.prior_lr,
            seed: self.prior_seed,
            full_action_weight: self.w_full,
            ..PriorTrainingConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if !(0.0..=1.0).contains(&self.w_full) {
            return Err(Error::Config(format!("w_full must be in [0, 1], got {}", self.w_full)));
        }
        if self.eval_episodes == 0 {
            return Err(Error::Config("eval_episodes must be positive".into()));
        }
        if self.mode.uses_style() && self.demo.is_none() {
            return Err(Error::Config(format!("mode {} needs a demo", self.mode)));
        }
        if self.mode.uses_prior() && self.demo.is_none() && self.prior.is_none() {
            return Err(Error::Config(format!("mode {} needs a prior or a demo", self.mode)));
        }
        self.reward_weights().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.ppo(0).validate()
    }
}

/// Output directory: command-line flag, then environment variable, then the
/// config file, then the default.
pub fn resolve_out_dir(flag: Option<&Path>, env_var: Option<&str>, config: &ExperimentConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match env_var {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => config.out_dir.clone(),
    }
}
