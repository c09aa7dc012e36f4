use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{clip_action, control_cost, tracking_reward, Env, EnvSpec, Transition};
use crate::imitation::{wrap_angle, PoseFeatures};

pub const DT: f64 = 0.01;
pub const MAX_EPISODE_STEPS: usize = 1000;
pub const GRAVITY: f64 = 9.81;
pub const MASS: f64 = 10.0;
pub const INERTIA: f64 = 1.0;
pub const HIP_OFFSET: f64 = 0.2;
pub const REST_LENGTH: f64 = 0.5;
pub const LEG_RANGE: (f64, f64) = (0.35, 0.65);
pub const HIP_RANGE: f64 = 0.8;
pub const TORQUE_MAX: f64 = 20.0;
pub const FORCE_MAX: f64 = 200.0;
/// Servo damping: joint rate equals command over damping.
pub const HIP_DAMPING: f64 = 4.0;
pub const LEG_DAMPING: f64 = 200.0;
pub const GROUND_STIFFNESS: f64 = 4000.0;
pub const GROUND_DAMPING: f64 = 100.0;
pub const FRICTION: f64 = 1.0;
pub const TANGENTIAL_DAMPING: f64 = 100.0;
pub const ALIVE_BONUS: f64 = 0.5;
pub const MIN_HEIGHT: f64 = 0.3;
pub const MAX_PITCH: f64 = 1.0;

/// Rigid body on two massless servo legs, hips at ±`HIP_OFFSET` along the
/// body axis.
///
/// Actions are `(τ₁, τ₂, F₁, F₂)` scaled to `[-1, 1]`: hip commands set the
/// leg swing rate, extension commands the leg length rate. Feet touch the
/// ground through a spring-damper with clamped viscous friction.
pub struct PlanarHopper {
    spec: EnvSpec,
    target_speed: Option<f64>,
    state: HopperState,
    steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopperState {
    pub x: f64,
    pub z: f64,
    pub pitch: f64,
    pub vx: f64,
    pub vz: f64,
    pub omega: f64,
    pub hip: [f64; 2],
    pub leg: [f64; 2],
    pub contact: [bool; 2],
}

impl HopperState {
    pub fn energy(&self) -> f64 {
        0.5 * MASS * (self.vx * self.vx + self.vz * self.vz)
            + 0.5 * INERTIA * self.omega * self.omega
            + MASS * GRAVITY * self.z
    }

    pub fn lowest_foot(&self) -> f64 {
        (0..2).map(|i| self.foot(i).1).fold(f64::INFINITY, f64::min)
    }

    fn hip_point(&self, i: usize) -> (f64, f64) {
        let side = if i == 0 { 1.0 } else { -1.0 };
        let (s, c) = self.pitch.sin_cos();
        (self.x + side * HIP_OFFSET * c, self.z + side * HIP_OFFSET * s)
    }

    fn foot(&self, i: usize) -> (f64, f64) {
        let (hx, hz) = self.hip_point(i);
        let psi = self.pitch + self.hip[i];
        (hx + self.leg[i] * psi.sin(), hz - self.leg[i] * psi.cos())
    }
}

impl PlanarHopper {
    pub fn new(target_speed: Option<f64>) -> Self {
        PlanarHopper {
            spec: EnvSpec {
                id: "planar_hopper".into(),
                obs_dim: 11,
                action_dim: 4,
                dt: DT,
                max_episode_steps: MAX_EPISODE_STEPS,
                pose_names: ["z", "pitch", "hip1", "hip2", "leg1", "leg2"]
                    .map(String::from)
                    .to_vec(),
                pose_angular: vec![false, true, true, true, false, false],
            },
            target_speed,
            state: Self::rest_state(),
            steps: 0,
        }
    }

    fn rest_state() -> HopperState {
        HopperState {
            x: 0.0,
            z: REST_LENGTH + 0.02,
            pitch: 0.0,
            vx: 0.0,
            vz: 0.0,
            omega: 0.0,
            hip: [0.0; 2],
            leg: [REST_LENGTH; 2],
            contact: [false; 2],
        }
    }

    pub fn state(&self) -> &HopperState {
        &self.state
    }

    pub fn set_state(&mut self, state: HopperState) {
        self.state = state;
    }

    fn observation(&self) -> Vec<f64> {
        let s = &self.state;
        vec![
            s.z,
            s.pitch,
            s.vx,
            s.vz,
            s.omega,
            s.hip[0],
            s.hip[1],
            s.leg[0],
            s.leg[1],
            s.contact[0] as u8 as f64,
            s.contact[1] as u8 as f64,
        ]
    }

    /// Advances the dynamics by one step without any episode bookkeeping.
    pub fn integrate(&mut self, action: &[f64]) {
        let a = clip_action(action, 4);
        let s = self.state;
        let hip_rate = [
            TORQUE_MAX * a[0] / HIP_DAMPING,
            TORQUE_MAX * a[1] / HIP_DAMPING,
        ];
        let leg_rate = [FORCE_MAX * a[2] / LEG_DAMPING, FORCE_MAX * a[3] / LEG_DAMPING];

        let (mut fx, mut fz, mut torque) = (0.0, 0.0, 0.0);
        let mut contact = [false; 2];
        for i in 0..2 {
            let (px, pz) = s.foot(i);
            if pz >= 0.0 {
                continue;
            }
            contact[i] = true;
            let psi = s.pitch + s.hip[i];
            let (rx, rz) = (px - s.x, pz - s.z);
            let swing = (psi.cos(), psi.sin());
            let dir = (psi.sin(), -psi.cos());
            let swing_speed = s.leg[i] * hip_rate[i];
            let ux = s.vx - s.omega * rz + leg_rate[i] * dir.0 + swing_speed * swing.0;
            let uz = s.vz + s.omega * rx + leg_rate[i] * dir.1 + swing_speed * swing.1;
            let normal = (-GROUND_STIFFNESS * pz - GROUND_DAMPING * uz).max(0.0);
            let limit = FRICTION * normal;
            let tangent = (-TANGENTIAL_DAMPING * ux).clamp(-limit, limit);
            fx += tangent;
            fz += normal;
            torque += rx * normal - rz * tangent;
        }

        let mut n = s;
        n.vx += DT * fx / MASS;
        n.vz += DT * (fz / MASS - GRAVITY);
        n.omega += DT * torque / INERTIA;
        n.x += DT * n.vx;
        // exact for the constant gravity term, so free flight conserves energy
        n.z += DT * n.vz + 0.5 * GRAVITY * DT * DT;
        n.pitch += DT * n.omega;
        for i in 0..2 {
            n.hip[i] = (n.hip[i] + DT * hip_rate[i]).clamp(-HIP_RANGE, HIP_RANGE);
            n.leg[i] = (n.leg[i] + DT * leg_rate[i]).clamp(LEG_RANGE.0, LEG_RANGE.1);
        }
        n.contact = contact;
        self.state = n;
    }
}

impl Env for PlanarHopper {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.state = Self::rest_state();
        self.state.pitch = rng.random_range(-0.01..0.01);
        for i in 0..2 {
            self.state.hip[i] = rng.random_range(-0.01..0.01);
        }
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Transition {
        let a = clip_action(action, 4);
        self.integrate(&a);
        self.steps += 1;
        let s = &self.state;
        let fell = s.z < MIN_HEIGHT || s.pitch.abs() > MAX_PITCH;
        let speed_term = match self.target_speed {
            Some(target) => tracking_reward(s.vx, target),
            None => s.vx,
        };
        let task_reward = speed_term + ALIVE_BONUS - control_cost(&a);
        let observation = self.observation();
        let error = !(observation.iter().all(|v| v.is_finite()) && task_reward.is_finite());
        Transition {
            observation,
            task_reward: if error { 0.0 } else { task_reward },
            pose: self.pose(),
            terminated: error || fell,
            truncated: !(error || fell) && self.steps >= MAX_EPISODE_STEPS,
            error,
        }
    }

    fn pose(&self) -> PoseFeatures {
        let s = &self.state;
        PoseFeatures(vec![
            s.z,
            wrap_angle(s.pitch),
            wrap_angle(s.hip[0]),
            wrap_angle(s.hip[1]),
            s.leg[0],
            s.leg[1],
        ])
    }

    fn forward_speed(&self) -> f64 {
        self.state.vx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn airborne(vx: f64, vz: f64, omega: f64) -> HopperState {
        HopperState {
            z: 5.0,
            vx,
            vz,
            omega,
            ..PlanarHopper::rest_state()
        }
    }

    #[test]
    fn free_flight_conserves_energy() {
        let mut env = PlanarHopper::new(None);
        env.set_state(airborne(0.7, 1.5, 0.3));
        let e0 = env.state().energy();
        // one simulated second, well clear of the ground
        for _ in 0..100 {
            env.integrate(&[0.0; 4]);
            assert!(env.state().lowest_foot() > 0.0);
        }
        let drift = (env.state().energy() - e0).abs() / e0.abs();
        assert!(drift < 0.01, "relative drift {drift}");
    }

    #[test]
    fn settles_standing_under_zero_action() {
        let mut env = PlanarHopper::new(None);
        env.reset(0);
        for _ in 0..300 {
            let t = env.step(&[0.0; 4]);
            assert!(!t.terminated);
        }
        let s = env.state();
        // stored vertical velocity trails by half a gravity step at rest
        assert!((s.vz + 0.5 * GRAVITY * DT).abs() < 1e-3 && s.vx.abs() < 1e-3, "{s:?}");
        let static_sink = MASS * GRAVITY / (2.0 * GROUND_STIFFNESS);
        assert!((s.lowest_foot() + static_sink).abs() < 2e-3, "{s:?}");
        assert!(s.contact[0] && s.contact[1]);
    }

    #[test]
    fn falling_over_terminates() {
        let mut env = PlanarHopper::new(None);
        env.reset(0);
        env.set_state(HopperState {
            pitch: 1.2,
            ..*env.state()
        });
        assert!(env.step(&[0.0; 4]).terminated);
    }

    #[test]
    fn joint_limits_hold() {
        let mut env = PlanarHopper::new(None);
        env.reset(0);
        for _ in 0..200 {
            env.integrate(&[1.0, -1.0, 1.0, -1.0]);
        }
        let s = env.state();
        assert_eq!(s.hip, [HIP_RANGE, -HIP_RANGE]);
        assert_eq!(s.leg, [LEG_RANGE.1, LEG_RANGE.0]);
    }

    #[test]
    fn pose_angles_are_wrapped() {
        let mut env = PlanarHopper::new(None);
        env.set_state(HopperState {
            pitch: 7.0,
            ..airborne(0.0, 0.0, 0.0)
        });
        let p = env.pose();
        assert!((p.0[1] - wrap_angle(7.0)).abs() < 1e-15);
        assert!(p.0[1] <= std::f64::consts::PI);
    }
}
