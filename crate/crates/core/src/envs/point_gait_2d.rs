use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::point_gait::{DRAG, DT, OMEGA0};
use super::{clip_action, control_cost, tracking_reward, Env, EnvSpec, Transition};
use crate::imitation::PoseFeatures;

pub const MAX_EPISODE_STEPS: usize = 500;
/// Yaw rate at full steering, rad/s.
pub const TURN_RATE: f64 = 1.5;

/// Planar version of the two-limb walker.
///
/// Actions 0..4 drive the limbs exactly as in `point_gait`, thrusting along
/// the heading. The pair `(a[4], a[5])` steers. Each episode draws a target
/// direction; the reward is velocity along it.
pub struct PointGait2d {
    spec: EnvSpec,
    target_speed: Option<f64>,
    pos: [f64; 2],
    vel: [f64; 2],
    heading: f64,
    target_dir: f64,
    phase: [f64; 2],
    steps: usize,
}

impl PointGait2d {
    pub fn new(target_speed: Option<f64>) -> Self {
        PointGait2d {
            spec: EnvSpec {
                id: "point_gait_2d".into(),
                obs_dim: 8,
                action_dim: 6,
                dt: DT,
                max_episode_steps: MAX_EPISODE_STEPS,
                pose_names: ["sin_p1", "cos_p1", "sin_p2", "cos_p2", "v_forward"]
                    .map(String::from)
                    .to_vec(),
                pose_angular: vec![false; 5],
            },
            target_speed,
            pos: [0.0; 2],
            vel: [0.0; 2],
            heading: 0.0,
            target_dir: 0.0,
            phase: [0.0, PI],
            steps: 0,
        }
    }

    pub fn target_direction(&self) -> f64 {
        self.target_dir
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    fn body_velocity(&self) -> (f64, f64) {
        let (s, c) = self.heading.sin_cos();
        (
            c * self.vel[0] + s * self.vel[1],
            -s * self.vel[0] + c * self.vel[1],
        )
    }

    fn speed_along_target(&self) -> f64 {
        let (s, c) = self.target_dir.sin_cos();
        c * self.vel[0] + s * self.vel[1]
    }

    fn observation(&self) -> Vec<f64> {
        let [p1, p2] = self.phase;
        let (vf, vl) = self.body_velocity();
        let rel = self.target_dir - self.heading;
        vec![p1.sin(), p1.cos(), p2.sin(), p2.cos(), vf, vl, rel.cos(), rel.sin()]
    }
}

impl Env for PointGait2d {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.pos = [0.0; 2];
        self.vel = [0.0; 2];
        self.heading = 0.0;
        self.phase = [rng.random_range(-0.1..0.1), PI + rng.random_range(-0.1..0.1)];
        self.target_dir = rng.random_range(-PI..PI);
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Transition {
        let a = clip_action(action, 6);
        let thrust: f64 = (0..2)
            .filter(|&i| self.phase[i].sin() >= 0.0)
            .map(|i| 0.5 * (a[2 * i] - a[2 * i + 1]))
            .sum();
        self.heading = (self.heading + 0.5 * (a[4] - a[5]) * TURN_RATE * DT).rem_euclid(TAU);
        let (s, c) = self.heading.sin_cos();
        let accel = [thrust * c, thrust * s];
        for ((v, p), acc) in self.vel.iter_mut().zip(self.pos.iter_mut()).zip(accel) {
            *v += DT * (acc - DRAG * *v);
            *p += DT * *v;
        }
        for i in 0..2 {
            let d = a[2 * i] - a[2 * i + 1];
            self.phase[i] = (self.phase[i] + (1.0 + d) * OMEGA0 * DT).rem_euclid(TAU);
        }
        self.steps += 1;

        let along = self.speed_along_target();
        let task_reward = match self.target_speed {
            Some(target) => tracking_reward(along, target),
            None => along - control_cost(&a),
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
        let [p1, p2] = self.phase;
        PoseFeatures(vec![p1.sin(), p1.cos(), p2.sin(), p2.cos(), self.body_velocity().0])
    }

    fn forward_speed(&self) -> f64 {
        self.body_velocity().0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets_vary_between_episodes() {
        let mut env = PointGait2d::new(None);
        let dirs: Vec<f64> = (0..5)
            .map(|s| {
                env.reset(s);
                env.target_direction()
            })
            .collect();
        assert!(dirs.windows(2).all(|w| w[0] != w[1]));
        assert!(dirs.iter().all(|d| (-PI..PI).contains(d)));
    }

    #[test]
    fn steering_towards_target_beats_ignoring_it() {
        let mut env = PointGait2d::new(None);
        let run = |env: &mut PointGait2d, steer: bool| {
            env.reset(2);
            let mut total = 0.0;
            for _ in 0..MAX_EPISODE_STEPS {
                let o = env.observation();
                let turn = if steer { o[7].clamp(-1.0, 1.0) } else { 0.0 };
                total += env.step(&[1.0, -1.0, 1.0, -1.0, turn, -turn]).task_reward;
            }
            total
        };
        let steered = run(&mut env, true);
        let blind = run(&mut env, false);
        assert!(steered > blind, "{steered} vs {blind}");
    }

    #[test]
    fn straight_line_matches_one_dimensional_walker() {
        use super::super::PointGait;
        let mut flat = PointGait::new(None);
        let mut plane = PointGait2d::new(None);
        flat.reset(4);
        plane.reset(4);
        // identical rng draws for the limb phases
        assert_eq!(flat.limb_phases(), plane.phase);
        for k in 0..200 {
            let x = (k as f64 * 0.3).sin();
            flat.step(&[x, -x, 0.5, 0.1]);
            plane.step(&[x, -x, 0.5, 0.1, 0.0, 0.0]);
        }
        assert!((flat.velocity() - plane.forward_speed()).abs() < 1e-12);
    }
}
