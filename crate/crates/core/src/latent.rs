//! Latent action priors.
//!
//! An autoencoder is fit to the demonstration's actions. The encoder maps a
//! full action `a` (dimension `a_full`) to a latent `z` (dimension `a_l`), the
//! decoder maps it back to `â`. Both halves have a single `tanh` hidden layer
//! of width `2·a_l` and a linear output. Training minimises
//!
//! ```text
//! L(a, â, z) = ||a - â||²  +  L_norm(z)
//!
//! L_norm(z) = 0                                   if max_i |z_i| < 0.8
//!           = Σ_i ( exp((z_i / 1.2)^10) - 1 )      otherwise
//! ```
//!
//! The penalty keeps latent values inside roughly `[-1, 1]` so a policy can
//! emit them with the same action bounds as any other continuous action.
//!
//! During reinforcement learning the decoder is frozen. The action actually
//! applied is a blend of the decoded latent command and a full-dimensional
//! residual:
//!
//! ```text
//! applied = clip( w_full · residual + (1 - w_full) · â , [-1, 1] )
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::demo::Demonstration;
use crate::error::{ensure_len, Error, Result};
use crate::nn::{adam_step, Activation, AdamConfig, AdamState, Gradients, Mlp};

/// Below this infinity norm the latent penalty is exactly zero.
pub const NORM_GATE: f64 = 0.8;
const NORM_SCALE: f64 = 1.2;
const NORM_POWER: i32 = 10;

/// Penalty that keeps latent actions within the unit box.
pub fn norm_loss(latent: &[f64]) -> f64 {
    let inf_norm = latent.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    if inf_norm < NORM_GATE {
        return 0.0;
    }
    latent
        .iter()
        .map(|z| (z / NORM_SCALE).powi(NORM_POWER).exp() - 1.0)
        .sum()
}

/// Gradient of [`norm_loss`]; zero wherever the gate is closed.
pub fn norm_loss_gradient(latent: &[f64]) -> Vec<f64> {
    let inf_norm = latent.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    if inf_norm < NORM_GATE {
        return vec![0.0; latent.len()];
    }
    latent
        .iter()
        .map(|z| {
            let u = z / NORM_SCALE;
            u.powi(NORM_POWER).exp() * NORM_POWER as f64 * u.powi(NORM_POWER - 1) / NORM_SCALE
        })
        .collect()
}

/// Squared reconstruction error plus the latent penalty.
pub fn reconstruction_loss(action: &[f64], reconstructed: &[f64], latent: &[f64]) -> Result<f64> {
    ensure_len("reconstruction", action.len(), reconstructed.len())?;
    let sq: f64 = action
        .iter()
        .zip(reconstructed)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sq + norm_loss(latent))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorTrainingConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Training stops once the mean loss falls below this value.
    pub early_stop_loss: f64,
    pub full_action_weight: f64,
}

impl Default for PriorTrainingConfig {
    fn default() -> Self {
        PriorTrainingConfig {
            epochs: 10_000,
            lr: 1e-3,
            seed: 0,
            early_stop_loss: 1e-6,
            full_action_weight: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentActionPrior {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub latent_dim: usize,
    pub full_action_weight: f64,
    pub source_demo_id: String,
    /// Frames in the source gait cycle; drives the phase clock when the prior
    /// is used without its demonstration.
    pub source_cycle_frames: usize,
    pub final_loss: f64,
    pub epochs_run: usize,
}

impl LatentActionPrior {
    /// Fresh, untrained encoder/decoder pair for `a_full` actions.
    pub fn untrained(a_full: usize, latent_dim: usize, seed: u64) -> Result<Self> {
        if latent_dim == 0 || latent_dim > a_full {
            return Err(Error::InvalidArgument(format!(
                "latent dimension must be in [1, {a_full}], got {latent_dim}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hidden = 2 * latent_dim;
        let encoder = Mlp::new(
            &[a_full, hidden, latent_dim],
            Activation::Tanh,
            Activation::Identity,
            &mut rng,
        )?;
        let decoder = Mlp::new(
            &[latent_dim, hidden, a_full],
            Activation::Tanh,
            Activation::Identity,
            &mut rng,
        )?;
        Ok(LatentActionPrior {
            encoder,
            decoder,
            latent_dim,
            full_action_weight: 0.1,
            source_demo_id: String::new(),
            source_cycle_frames: 0,
            final_loss: f64::NAN,
            epochs_run: 0,
        })
    }

    pub fn action_dim(&self) -> usize {
        self.decoder.output_dim()
    }

    pub fn with_full_action_weight(mut self, w_full: f64) -> Result<Self> {
        check_weight(w_full)?;
        self.full_action_weight = w_full;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.decoder.validate()?;
        let a_full = self.encoder.input_dim();
        ensure_len("encoder output", self.latent_dim, self.encoder.output_dim())?;
        ensure_len("decoder input", self.latent_dim, self.decoder.input_dim())?;
        ensure_len("decoder output", a_full, self.decoder.output_dim())?;
        check_weight(self.full_action_weight)
    }

    pub fn encode(&self, action: &[f64]) -> Result<Vec<f64>> {
        self.encoder.forward(action)
    }

    pub fn decode(&self, latent: &[f64]) -> Result<Vec<f64>> {
        self.decoder.forward(latent)
    }

    /// Mean autoencoder loss over a set of actions.
    pub fn mean_loss<'a>(&self, actions: impl IntoIterator<Item = &'a [f64]>) -> Result<f64> {
        let mut total = 0.0;
        let mut n = 0usize;
        for a in actions {
            let z = self.encode(a)?;
            let a_hat = self.decode(&z)?;
            total += reconstruction_loss(a, &a_hat, &z)?;
            n += 1;
        }
        Ok(total / n.max(1) as f64)
    }

    /// Root mean squared reconstruction error per action component.
    pub fn reconstruction_rmse<'a>(
        &self,
        actions: impl IntoIterator<Item = &'a [f64]>,
    ) -> Result<f64> {
        let mut sq = 0.0;
        let mut count = 0usize;
        for a in actions {
            let a_hat = self.decode(&self.encode(a)?)?;
            sq += a.iter().zip(&a_hat).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
            count += a.len();
        }
        Ok((sq / count.max(1) as f64).sqrt())
    }
}

fn check_weight(w_full: f64) -> Result<()> {
    if (0.0..=1.0).contains(&w_full) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "full action weight must lie in [0, 1], got {w_full}"
        )))
    }
}

/// Record of a prior training run.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorTrainingReport {
    pub prior: LatentActionPrior,
    /// Mean loss before each epoch's update.
    pub loss_history: Vec<f64>,
}

/// Full-batch Adam on the mean autoencoder loss over every demo frame.
pub fn train_autoencoder(
    demo: &Demonstration,
    latent_dim: usize,
    config: &PriorTrainingConfig,
) -> Result<PriorTrainingReport> {
    demo.validate()?;
    let actions: Vec<&[f64]> = demo.actions().collect();
    let mut prior = LatentActionPrior::untrained(demo.action_dim(), latent_dim, config.seed)?
        .with_full_action_weight(config.full_action_weight)?;
    prior.source_demo_id = demo.id();
    prior.source_cycle_frames = demo.n_frames();

    let adam = AdamConfig::default().with_lr(config.lr);
    let mut enc_state = AdamState::for_net(&prior.encoder, adam);
    let mut dec_state = AdamState::for_net(&prior.decoder, adam);
    let mut enc_grads = Gradients::zeros_like(&prior.encoder);
    let mut dec_grads = Gradients::zeros_like(&prior.decoder);
    let inv_n = 1.0 / actions.len() as f64;
    let mut history = Vec::with_capacity(config.epochs);
    let mut epochs_run = 0;

    for epoch in 0..config.epochs {
        enc_grads.zero();
        dec_grads.zero();
        let mut loss = 0.0;
        for a in &actions {
            let enc_trace = prior.encoder.forward_trace(a)?;
            let z = enc_trace.output();
            let dec_trace = prior.decoder.forward_trace(z)?;
            let a_hat = dec_trace.output();
            loss += reconstruction_loss(a, a_hat, z)? * inv_n;

            let upstream: Vec<f64> = a_hat
                .iter()
                .zip(a.iter())
                .map(|(y, t)| 2.0 * (y - t) * inv_n)
                .collect();
            let mut dz = prior.decoder.backward_trace(&dec_trace, &upstream, &mut dec_grads)?;
            for (d, g) in dz.iter_mut().zip(norm_loss_gradient(z)) {
                *d += g * inv_n;
            }
            prior.encoder.backward_trace(&enc_trace, &dz, &mut enc_grads)?;
        }
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        history.push(loss);
        if loss < config.early_stop_loss {
            break;
        }
        adam_step(&mut prior.encoder, &enc_grads, &mut enc_state)
            .and_then(|_| adam_step(&mut prior.decoder, &dec_grads, &mut dec_state))
            .map_err(|_| Error::Diverged { epoch, loss })?;
        epochs_run = epoch + 1;
    }

    let final_loss = prior.mean_loss(actions.iter().copied())?;
    if !final_loss.is_finite() {
        return Err(Error::Diverged {
            epoch: epochs_run,
            loss: final_loss,
        });
    }
    prior.final_loss = final_loss;
    prior.epochs_run = epochs_run;
    Ok(PriorTrainingReport {
        prior,
        loss_history: history,
    })
}

/// `w_full · residual + (1 - w_full) · decoded`, before any clipping.
pub fn blend_action(decoded: &[f64], residual: &[f64], w_full: f64) -> Result<Vec<f64>> {
    check_weight(w_full)?;
    ensure_len("residual action", decoded.len(), residual.len())?;
    Ok(decoded
        .iter()
        .zip(residual)
        .map(|(d, r)| w_full * r + (1.0 - w_full) * d)
        .collect())
}

/// Blended action clipped to the `[-1, 1]` action box.
pub fn compose_action(decoded: &[f64], residual: &[f64], w_full: f64) -> Result<Vec<f64>> {
    let mut out = blend_action(decoded, residual, w_full)?;
    clip_unit(&mut out);
    Ok(out)
}

pub(crate) fn clip_unit(values: &mut [f64]) {
    values.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
}
