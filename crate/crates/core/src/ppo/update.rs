use rand::seq::SliceRandom;
use rand::Rng;

use super::policy::{gaussian_entropy, gaussian_log_prob, PolicyParams};
use super::{PpoConfig, RolloutBuffer};
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, AdamState, Gradients};

/// Averages over every minibatch of every epoch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// Largest `|ρ - 1|` in the first minibatch of the first epoch.
    pub first_ratio_deviation: f64,
}

/// Adam moments for the three parameter groups.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoOptimizer {
    pub pi: AdamState,
    pub v: AdamState,
    pub log_std: AdamState,
}

impl PpoOptimizer {
    pub fn new(params: &PolicyParams, cfg: &PpoConfig) -> Self {
        let adam = AdamConfig {
            lr: cfg.lr,
            epsilon: cfg.adam_epsilon,
            ..AdamConfig::default()
        };
        PpoOptimizer {
            pi: AdamState::for_net(&params.pi_net, adam),
            v: AdamState::for_net(&params.v_net, adam),
            log_std: AdamState::new(params.log_std.len(), adam),
        }
    }
}

/// Mean-zero, unit-std copy of `adv`; a single sample is left as is.
pub(crate) fn standardize(adv: &[f64]) -> Vec<f64> {
    if adv.len() < 2 {
        return adv.to_vec();
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    adv.iter().map(|a| (a - mean) / (std + 1e-8)).collect()
}

/// `n_epochs` passes of shuffled minibatch Adam on the clipped surrogate,
/// value and entropy losses.
pub fn ppo_update<R: Rng + ?Sized>(
    params: &mut PolicyParams,
    opt: &mut PpoOptimizer,
    buffer: &RolloutBuffer,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    if buffer.advantages.len() != buffer.len() || buffer.is_empty() {
        return Err(Error::InvalidArgument(
            "ppo update needs a full buffer with computed advantages".into(),
        ));
    }
    let n = buffer.len();
    let mb = cfg.minibatch_size.min(n);
    let eps = cfg.clip_range;
    let mut indices: Vec<usize> = (0..n).collect();
    let mut totals = UpdateStats::default();
    let mut n_minibatches = 0usize;

    let mut g_pi = Gradients::zeros_like(&params.pi_net);
    let mut g_v = Gradients::zeros_like(&params.v_net);
    let mut g_ls = vec![0.0; params.log_std.len()];

    for epoch in 0..cfg.n_epochs {
        indices.shuffle(rng);
        for (k, chunk) in indices.chunks(mb).enumerate() {
            let adv = standardize(&chunk.iter().map(|&i| buffer.advantages[i]).collect::<Vec<_>>());
            let m = chunk.len() as f64;
            g_pi.zero();
            g_v.zero();
            g_ls.iter_mut().for_each(|g| *g = 0.0);
            let std: Vec<f64> = params.log_std.iter().map(|l| l.exp()).collect();
            let (mut pg_loss, mut v_loss, mut kl, mut clipped, mut max_dev) = (0.0, 0.0, 0.0, 0.0, 0.0f64);

            for (&i, &a) in chunk.iter().zip(&adv) {
                let obs = &buffer.observations[i];
                let x = &buffer.actions[i];
                let trace = params.pi_net.forward_trace(obs)?;
                let mean = trace.output();
                let log_ratio = gaussian_log_prob(mean, &params.log_std, x) - buffer.log_probs[i];
                let ratio = log_ratio.exp();
                max_dev = max_dev.max((ratio - 1.0).abs());
                let surr1 = ratio * a;
                let surr2 = ratio.clamp(1.0 - eps, 1.0 + eps) * a;
                pg_loss -= surr1.min(surr2);
                kl += (ratio - 1.0) - log_ratio;
                if (ratio - 1.0).abs() > eps {
                    clipped += 1.0;
                }
                // d(loss)/d(log π) for this sample
                let d_lp = if surr1 <= surr2 { -ratio * a / m } else { 0.0 };
                let mut up = vec![0.0; mean.len()];
                for j in 0..mean.len() {
                    let z = (x[j] - mean[j]) / std[j];
                    up[j] = d_lp * z / std[j];
                    g_ls[j] += d_lp * (z * z - 1.0);
                }
                params.pi_net.backward_trace(&trace, &up, &mut g_pi)?;

                let v_trace = params.v_net.forward_trace(obs)?;
                let v = v_trace.output()[0];
                let err = v - buffer.returns[i];
                v_loss += err * err;
                params
                    .v_net
                    .backward_trace(&v_trace, &[cfg.vf_coef * 2.0 * err / m], &mut g_v)?;
            }
            let entropy = gaussian_entropy(&params.log_std);
            g_ls.iter_mut().for_each(|g| *g -= cfg.ent_coef);
            pg_loss /= m;
            v_loss /= m;
            if !(pg_loss.is_finite() && v_loss.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!(
                        "ppo loss in epoch {epoch}, minibatch {k}: policy {pg_loss}, value {v_loss}"
                    ),
                });
            }

            let norm = (g_pi.squared_norm() + g_v.squared_norm() + g_ls.iter().map(|g| g * g).sum::<f64>()).sqrt();
            if norm > cfg.max_grad_norm {
                let s = cfg.max_grad_norm / (norm + 1e-6);
                g_pi.scale(s);
                g_v.scale(s);
                g_ls.iter_mut().for_each(|g| *g *= s);
            }
            opt.pi.update_slice(params.pi_net.params_mut(), g_pi.as_slice())?;
            opt.v.update_slice(params.v_net.params_mut(), g_v.as_slice())?;
            opt.log_std.update_slice(&mut params.log_std, &g_ls)?;

            if epoch == 0 && k == 0 {
                totals.first_ratio_deviation = max_dev;
            }
            totals.policy_loss += pg_loss;
            totals.value_loss += v_loss;
            totals.entropy += entropy;
            totals.approx_kl += kl / m;
            totals.clip_fraction += clipped / m;
            n_minibatches += 1;
        }
    }
    let c = n_minibatches as f64;
    Ok(UpdateStats {
        policy_loss: totals.policy_loss / c,
        value_loss: totals.value_loss / c,
        entropy: totals.entropy / c,
        approx_kl: totals.approx_kl / c,
        clip_fraction: totals.clip_fraction / c,
        first_ratio_deviation: totals.first_ratio_deviation,
    })
}
