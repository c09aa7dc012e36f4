//! Phase-clocked style reward.
//!
//! A single recorded gait cycle of `N` frames is replayed throughout an
//! episode: the [`PhaseClock`] advances by one each environment step and wraps
//! at `N`, selecting which expert pose the agent is compared against. The
//! style reward is `exp(-||q_expert - q||²)`, and the training reward mixes it
//! with the task reward using fixed scalar weights.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::demo::Demonstration;
use crate::error::{ensure_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseClock {
    n_frames: usize,
    t: u64,
}

impl PhaseClock {
    pub fn new(n_frames: usize) -> Result<Self> {
        if n_frames == 0 {
            return Err(Error::InvalidArgument("phase clock needs at least one frame".into()));
        }
        Ok(PhaseClock { n_frames, t: 0 })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn tick(&mut self) {
        self.t += 1;
    }

    pub fn reset(&mut self) {
        self.t = 0;
    }

    /// Current frame index, `t mod N`.
    pub fn value(&self) -> usize {
        (self.t % self.n_frames as u64) as usize
    }

    /// Phase as a policy input in `[0, 1)`.
    pub fn normalized(&self) -> f64 {
        self.value() as f64 / self.n_frames as f64
    }

    /// Clock that has been ticked `t` times since reset.
    pub fn at(n_frames: usize, t: u64) -> Result<Self> {
        let mut c = Self::new(n_frames)?;
        c.t = t;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub w_task: f64,
    pub w_style: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            w_task: 0.67,
            w_style: 0.33,
        }
    }
}

impl RewardWeights {
    pub fn task_only() -> Self {
        RewardWeights {
            w_task: 1.0,
            w_style: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.w_task >= 0.0 && self.w_style >= 0.0 && self.w_task.is_finite() && self.w_style.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "reward weights must be non-negative, got {self:?}"
            )))
        }
    }
}

/// World-position-free pose: joint positions plus torso orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseFeatures(pub Vec<f64>);

impl PoseFeatures {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn expert_pose_at(demo: &Demonstration, phase: usize) -> Result<PoseFeatures> {
    demo.frames
        .get(phase)
        .map(|f| PoseFeatures(f.q.clone()))
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "phase {phase} out of range for a {}-frame demonstration",
                demo.n_frames()
            ))
        })
}

/// `exp(-||expert - pose||²)`.
pub fn style_reward(pose: &PoseFeatures, expert: &PoseFeatures) -> Result<f64> {
    ensure_len("style reward pose", expert.len(), pose.len())?;
    let sq: f64 = pose
        .0
        .iter()
        .zip(&expert.0)
        .map(|(q, e)| (e - q) * (e - q))
        .sum();
    Ok((-sq).exp())
}

/// Wraps an angle difference into `(-π, π]`.
pub fn wrap_angle(d: f64) -> f64 {
    let w = d.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Style reward where the components flagged in `angular` are compared as
/// angles (difference wrapped into `(-π, π]` before squaring).
pub fn style_reward_wrapped(
    pose: &PoseFeatures,
    expert: &PoseFeatures,
    angular: &[bool],
) -> Result<f64> {
    ensure_len("style reward pose", expert.len(), pose.len())?;
    ensure_len("angular mask", pose.len(), angular.len())?;
    let sq: f64 = pose
        .0
        .iter()
        .zip(&expert.0)
        .zip(angular)
        .map(|((q, e), &is_angle)| {
            let d = if is_angle { wrap_angle(e - q) } else { e - q };
            d * d
        })
        .sum();
    Ok((-sq).exp())
}

pub fn mix_rewards(r_task: f64, r_style: f64, weights: &RewardWeights) -> f64 {
    if weights.w_style == 0.0 {
        // exact task-only reward regardless of r_style
        return weights.w_task * r_task;
    }
    weights.w_task * r_task + weights.w_style * r_style
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::Frame;
    use proptest::prelude::*;

    fn demo(n: usize) -> Demonstration {
        let frames = (0..n)
            .map(|t| Frame {
                a: vec![0.0, 1.0],
                q: vec![t as f64, -(t as f64)],
            })
            .collect();
        Demonstration::new("e", 0.02, vec!["a".into(), "b".into()], frames).unwrap()
    }

    #[test]
    fn clock_wraps() {
        assert_eq!(PhaseClock::at(5, 7).unwrap().value(), 2);
        let mut one = PhaseClock::new(1).unwrap();
        for _ in 0..4 {
            assert_eq!(one.value(), 0);
            one.tick();
        }
        let mut c = PhaseClock::new(5).unwrap();
        let seq: Vec<usize> = (0..10)
            .map(|_| {
                let v = c.value();
                c.tick();
                v
            })
            .collect();
        assert_eq!(&seq[..5], &seq[5..]);
        assert_eq!(&seq[..5], &[0, 1, 2, 3, 4]);
        c.reset();
        assert_eq!(c.value(), 0);
        assert!(PhaseClock::new(0).is_err());
    }

    #[test]
    fn expert_pose_lookup() {
        let d = demo(4);
        assert_eq!(expert_pose_at(&d, 0).unwrap().0, d.frames[0].q);
        assert_eq!(expert_pose_at(&d, 3).unwrap().0, d.frames[3].q);
        assert!(expert_pose_at(&d, 4).is_err());
        let mut clock = PhaseClock::new(4).unwrap();
        let mut seen = vec![0; 4];
        for _ in 0..4 {
            let q = expert_pose_at(&d, clock.value()).unwrap();
            seen[q.0[0] as usize] += 1;
            clock.tick();
        }
        assert_eq!(seen, vec![1; 4]);
    }

    #[test]
    fn style_reward_examples() {
        let a = PoseFeatures(vec![0.2, -0.4, 1.0]);
        assert_eq!(style_reward(&a, &a).unwrap(), 1.0);
        let b = PoseFeatures(vec![1.2, -0.4, 1.0]);
        assert!((style_reward(&a, &b).unwrap() - 0.367879441).abs() < 1e-9);
        assert!(style_reward(&a, &PoseFeatures(vec![0.0])).is_err());
    }

    #[test]
    fn wrapped_angles() {
        let a = PoseFeatures(vec![PI - 0.1]);
        let b = PoseFeatures(vec![-PI + 0.1]);
        let r = style_reward_wrapped(&a, &b, &[true]).unwrap();
        assert!((r - (-0.04f64).exp()).abs() < 1e-12);
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
    }

    #[test]
    fn mixing() {
        assert!((mix_rewards(1.0, 1.0, &RewardWeights::default()) - 1.0).abs() < 1e-12);
        assert_eq!(mix_rewards(0.37, 0.9, &RewardWeights::task_only()), 0.37);
        assert_eq!(mix_rewards(0.37, f64::NAN, &RewardWeights::task_only()), 0.37);
        assert!(RewardWeights { w_task: -1.0, w_style: 0.0 }.validate().is_err());
    }

    proptest! {
        #[test]
        fn style_reward_in_unit_interval(
            q in proptest::collection::vec(-3.0f64..3.0, 4),
            e in proptest::collection::vec(-3.0f64..3.0, 4),
        ) {
            let r = style_reward(&PoseFeatures(q.clone()), &PoseFeatures(e.clone())).unwrap();
            prop_assert!(r > 0.0 && r <= 1.0);
            prop_assert_eq!(r == 1.0, q == e);
        }

        #[test]
        fn style_reward_decreases_with_distance(d in 0.0f64..2.0, extra in 1e-3f64..1.0) {
            let e = PoseFeatures(vec![0.5, 0.0]);
            let near = style_reward(&PoseFeatures(vec![0.5 + d, 0.0]), &e).unwrap();
            let far = style_reward(&PoseFeatures(vec![0.5 + d + extra, 0.0]), &e).unwrap();
            prop_assert!(far < near);
        }
    }
}
