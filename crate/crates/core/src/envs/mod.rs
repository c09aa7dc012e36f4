//! Desk-scale locomotion environments.
//!
//! Three small analytic simulators stand in for the usual physics-engine
//! benchmarks:
//!
//! - `point_gait`: a 1-D walker whose thrust comes from two alternating
//!   "limbs". Each limb is driven by an antagonistic action pair, which
//!   embeds an exact rank-2 synergy in its 4-D action space.
//! - `point_gait_2d`: the same walker on a plane with a steering pair and a
//!   target direction resampled every episode.
//! - `planar_hopper`: a pitching body on two massless servo legs with
//!   spring-damper ground contact.
//!
//! All actions live in `[-1, 1]^a_full` and are clipped on entry.

mod hopper;
mod oscillator;
mod point_gait;
mod point_gait_2d;

pub use hopper::PlanarHopper;
pub use oscillator::{
    default_oscillator, generate_demonstration, oscillator_action, record_cycles,
    reference_speed, OscillatorConfig,
};
pub use point_gait::PointGait;
pub use point_gait_2d::PointGait2d;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imitation::PoseFeatures;

pub const ENV_IDS: [&str; 3] = ["point_gait", "point_gait_2d", "planar_hopper"];

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub id: String,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub dt: f64,
    pub max_episode_steps: usize,
    pub pose_names: Vec<String>,
    /// Pose components compared as angles by the style reward.
    pub pose_angular: Vec<bool>,
}

impl EnvSpec {
    pub fn pose_dim(&self) -> usize {
        self.pose_names.len()
    }
}

/// Task variant: target speed multiple of the demonstration speed, and
/// whether the heading target is resampled every episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub speed_multiplier: u32,
    pub any_direction: bool,
    /// Reward tracks `speed_multiplier × v_ref` instead of maximising speed.
    /// Always on when `speed_multiplier > 1`.
    pub tracking: bool,
}

impl Default for Variant {
    fn default() -> Self {
        Variant {
            speed_multiplier: 1,
            any_direction: false,
            tracking: false,
        }
    }
}

impl Variant {
    /// Speed-multiple variant; multiples above 1 are tracking tasks.
    pub fn speed(multiplier: u32) -> Self {
        Variant {
            speed_multiplier: multiplier,
            any_direction: false,
            tracking: multiplier > 1,
        }
    }

    pub fn is_tracking(&self) -> bool {
        self.tracking || self.speed_multiplier > 1
    }

    fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.speed_multiplier) {
            return Err(Error::Config(format!(
                "speed multiplier must be 1, 2, 3 or 4, got {}",
                self.speed_multiplier
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub task_reward: f64,
    pub pose: PoseFeatures,
    pub terminated: bool,
    pub truncated: bool,
    /// Set when the state became non-finite; the episode is over.
    pub error: bool,
}

impl Transition {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

pub trait Env: Send {
    fn spec(&self) -> &EnvSpec;

    fn reset(&mut self, seed: u64) -> Vec<f64>;

    fn step(&mut self, action: &[f64]) -> Transition;

    /// Pose features of the current state.
    fn pose(&self) -> PoseFeatures;

    /// Speed along the task direction, used to measure demonstrations.
    fn forward_speed(&self) -> f64;
}

/// Resolves `id` (plus the `any_direction` flag) to a concrete environment.
/// Tracking variants measure their reference speed from the environment's
/// default oscillator expert.
pub fn make_env(id: &str, variant: Variant, seed: u64) -> Result<Box<dyn Env>> {
    variant.validate()?;
    let target = if variant.is_tracking() {
        Some(variant.speed_multiplier as f64 * reference_speed(base_id(id, variant)?)?)
    } else {
        None
    };
    let mut env: Box<dyn Env> = match base_id(id, variant)? {
        "point_gait" => Box::new(PointGait::new(target)),
        "point_gait_2d" => Box::new(PointGait2d::new(target)),
        "planar_hopper" => Box::new(PlanarHopper::new(target)),
        _ => unreachable!(),
    };
    env.reset(seed);
    Ok(env)
}

/// Builds the environment family without reference-speed lookups; used when
/// generating the demonstration that defines the reference speed.
pub(crate) fn make_untargeted(id: &str) -> Result<Box<dyn Env>> {
    Ok(match id {
        "point_gait" => Box::new(PointGait::new(None)),
        "point_gait_2d" => Box::new(PointGait2d::new(None)),
        "planar_hopper" => Box::new(PlanarHopper::new(None)),
        other => return Err(unknown(other)),
    })
}

fn base_id(id: &str, variant: Variant) -> Result<&'static str> {
    match (id, variant.any_direction) {
        ("point_gait", false) => Ok("point_gait"),
        ("point_gait", true) | ("point_gait_2d", _) => Ok("point_gait_2d"),
        ("planar_hopper", false) => Ok("planar_hopper"),
        ("planar_hopper", true) => Err(Error::Config(
            "planar_hopper has no any-direction variant".into(),
        )),
        (other, _) => Err(unknown(other)),
    }
}

fn unknown(id: &str) -> Error {
    Error::UnknownEnv {
        id: id.to_string(),
        available: ENV_IDS.join(", "),
    }
}

pub(crate) fn clip_action(action: &[f64], dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|i| action.get(i).copied().unwrap_or(0.0))
        .map(|a| if a.is_nan() { 0.0 } else { a.clamp(-1.0, 1.0) })
        .collect()
}

pub(crate) fn control_cost(action: &[f64]) -> f64 {
    0.05 * crate::linalg::squared_norm(action)
}

pub(crate) fn tracking_reward(speed: f64, target: f64) -> f64 {
    (-(speed - target) * (speed - target)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_gait_has_four_actions() {
        let env = make_env("point_gait", Variant::default(), 0).unwrap();
        assert_eq!(env.spec().action_dim, 4);
    }

    #[test]
    fn unknown_env_lists_ids() {
        let err = make_env("cheetah", Variant::default(), 0).err().unwrap();
        let msg = err.to_string();
        for id in ENV_IDS {
            assert!(msg.contains(id), "{msg}");
        }
    }

    #[test]
    fn bad_variants_rejected() {
        assert!(make_env("point_gait", Variant::speed(5), 0).is_err());
        assert!(make_env("point_gait", Variant { speed_multiplier: 0, ..Default::default() }, 0).is_err());
        let any = Variant { any_direction: true, ..Default::default() };
        assert!(make_env("planar_hopper", any, 0).is_err());
        assert_eq!(make_env("point_gait", any, 0).unwrap().spec().id, "point_gait_2d");
    }

    #[test]
    fn every_env_resets_deterministically_and_truncates() {
        for id in ENV_IDS {
            let mut env = make_env(id, Variant::default(), 3).unwrap();
            let a = env.reset(17);
            let b = env.reset(17);
            assert_eq!(a, b, "{id}");
            assert_eq!(a.len(), env.spec().obs_dim);
            let max = env.spec().max_episode_steps;
            let mut last = None;
            for _ in 0..max {
                let t = env.step(&vec![0.0; env.spec().action_dim]);
                assert!(t.observation.iter().all(|v| v.is_finite()));
                assert!(t.task_reward.is_finite());
                assert_eq!(t.pose.len(), env.spec().pose_dim());
                if t.terminated {
                    last = None;
                    break;
                }
                last = Some(t);
            }
            if let Some(t) = last {
                assert!(t.truncated, "{id}");
            }
        }
    }
}
