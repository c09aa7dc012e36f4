use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{clip_action, control_cost, tracking_reward, Env, EnvSpec, Transition};
use crate::imitation::PoseFeatures;

pub const DT: f64 = 0.02;
pub const DRAG: f64 = 0.5;
/// Natural limb frequency, rad/s.
pub const OMEGA0: f64 = TAU;
pub const MAX_EPISODE_STEPS: usize = 500;

/// 1-D two-limb walker.
///
/// Limb `i` is driven by the action pair `(a[2i], a[2i+1])` through their
/// difference `d_i`. The limb phase advances at `(1 + d_i)·ω₀` and, while
/// the limb is in stance (`sin p_i ≥ 0`), it pushes with `0.5·d_i`.
pub struct PointGait {
    spec: EnvSpec,
    target_speed: Option<f64>,
    x: f64,
    v: f64,
    phase: [f64; 2],
    steps: usize,
}

impl PointGait {
    pub fn new(target_speed: Option<f64>) -> Self {
        PointGait {
            spec: EnvSpec {
                id: "point_gait".into(),
                obs_dim: 5,
                action_dim: 4,
                dt: DT,
                max_episode_steps: MAX_EPISODE_STEPS,
                pose_names: ["sin_p1", "cos_p1", "sin_p2", "cos_p2", "v"]
                    .map(String::from)
                    .to_vec(),
                pose_angular: vec![false; 5],
            },
            target_speed,
            x: 0.0,
            v: 0.0,
            phase: [0.0, PI],
            steps: 0,
        }
    }

    pub fn position(&self) -> f64 {
        self.x
    }

    pub fn velocity(&self) -> f64 {
        self.v
    }

    pub fn limb_phases(&self) -> [f64; 2] {
        self.phase
    }

    /// Net thrust produced by `action` in the current limb state.
    pub fn thrust(&self, action: &[f64]) -> f64 {
        let a = clip_action(action, 4);
        (0..2)
            .filter(|&i| self.phase[i].sin() >= 0.0)
            .map(|i| 0.5 * (a[2 * i] - a[2 * i + 1]))
            .sum()
    }

    fn observation(&self) -> Vec<f64> {
        let [p1, p2] = self.phase;
        vec![p1.sin(), p1.cos(), p2.sin(), p2.cos(), self.v]
    }
}

impl Env for PointGait {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.x = 0.0;
        self.v = 0.0;
        self.phase = [rng.random_range(-0.1..0.1), PI + rng.random_range(-0.1..0.1)];
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Transition {
        let a = clip_action(action, 4);
        let thrust = self.thrust(&a);
        self.v += DT * (thrust - DRAG * self.v);
        self.x += DT * self.v;
        for i in 0..2 {
            let d = a[2 * i] - a[2 * i + 1];
            self.phase[i] = (self.phase[i] + (1.0 + d) * OMEGA0 * DT).rem_euclid(TAU);
        }
        self.steps += 1;

        let task_reward = match self.target_speed {
            Some(target) => tracking_reward(self.v, target),
            None => self.v - control_cost(&a),
        };
        let observation = self.observation();
        let error = !(observation.iter().all(|v| v.is_finite()) && task_reward.is_finite());
        Transition {
            observation,
            task_reward: if error { 0.0 } else { task_reward },
            pose: self.pose(),
            terminated: error,
            truncated: !error && self.steps >= MAX_EPISODE_STEPS,
            error,
        }
    }

    fn pose(&self) -> PoseFeatures {
        PoseFeatures(self.observation())
    }

    fn forward_speed(&self) -> f64 {
        self.v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_action_from_rest_stays_at_rest() {
        let mut env = PointGait::new(None);
        env.reset(0);
        for _ in 0..50 {
            let t = env.step(&[0.0; 4]);
            assert_eq!(t.task_reward, 0.0);
            assert_eq!(t.observation[4], 0.0);
        }
        assert_eq!(env.position(), 0.0);
    }

    #[test]
    fn truncates_at_horizon() {
        let mut env = PointGait::new(None);
        env.reset(1);
        for k in 1..=MAX_EPISODE_STEPS {
            let t = env.step(&[0.3, -0.2, 0.1, 0.0]);
            assert_eq!(t.truncated, k == MAX_EPISODE_STEPS);
            assert!(!t.terminated);
        }
    }

    #[test]
    fn full_push_reaches_expected_speed() {
        // Both limbs spend about half of each cycle in stance with unit thrust,
        // so the steady-state speed is close to 1 / drag = 2.
        let mut env = PointGait::new(None);
        env.reset(0);
        for _ in 0..2000 {
            env.step(&[1.0, -1.0, 1.0, -1.0]);
        }
        assert!((env.velocity() - 2.0).abs() < 0.1, "{}", env.velocity());
    }

    #[test]
    fn same_seed_same_episode() {
        let run = |seed| {
            let mut env = PointGait::new(Some(1.0));
            env.reset(seed);
            (0..100)
                .map(|k| env.step(&[(k as f64 * 0.1).sin(), 0.2, -0.4, 0.9]).task_reward)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
    }

    proptest! {
        #[test]
        fn common_mode_in_a_pair_does_not_change_thrust(
            a in proptest::collection::vec(-0.5f64..0.5, 4),
            delta in -0.5f64..0.5,
            p1 in 0.0f64..TAU,
            p2 in 0.0f64..TAU,
        ) {
            let mut env = PointGait::new(None);
            env.phase = [p1, p2];
            let shifted = [a[0] + delta, a[1] + delta, a[2], a[3]];
            prop_assert!((env.thrust(&a) - env.thrust(&shifted)).abs() < 1e-12);
        }
    }
}
