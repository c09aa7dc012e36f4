use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{make_untargeted, Env};
use crate::demo::{Demonstration, Frame};
use crate::error::{Error, Result};

/// Open-loop sinusoidal expert: `a_i(t) = b_i + A_i sin(2π f t + ψ_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillatorConfig {
    pub env_id: String,
    pub frequency: f64,
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
    pub offsets: Vec<f64>,
    /// Whole cycles run before the recorded one.
    #[serde(default = "default_settle")]
    pub settle_cycles: usize,
}

fn default_settle() -> usize {
    4
}

impl OscillatorConfig {
    pub fn action_dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.amplitudes.len();
        if d == 0 || self.phases.len() != d || self.offsets.len() != d {
            return Err(Error::Config(format!(
                "oscillator needs equal-length amplitudes, phases and offsets, got {}, {}, {}",
                d,
                self.phases.len(),
                self.offsets.len()
            )));
        }
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(Error::Config(format!(
                "oscillator frequency must be positive, got {}",
                self.frequency
            )));
        }
        for i in 0..d {
            let (a, b, p) = (self.amplitudes[i], self.offsets[i], self.phases[i]);
            if !(a.is_finite() && b.is_finite() && p.is_finite()) {
                return Err(Error::Config(format!("oscillator channel {i} is not finite")));
            }
            if a.abs() + b.abs() > 1.0 + 1e-12 {
                return Err(Error::Config(format!(
                    "oscillator channel {i} leaves [-1, 1]: |A| + |b| = {}",
                    a.abs() + b.abs()
                )));
            }
        }
        Ok(())
    }

    /// Steps per cycle, if the period is a whole number of steps.
    pub fn cycle_frames(&self, dt: f64) -> Result<usize> {
        let steps = 1.0 / (self.frequency * dt);
        let n = steps.round();
        if (steps - n).abs() > 1e-9 * steps.max(1.0) || n < 2.0 {
            return Err(Error::Config(format!(
                "oscillator period 1/{} s is not a whole number (>= 2) of {dt} s steps",
                self.frequency
            )));
        }
        Ok(n as usize)
    }

    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let cfg: OscillatorConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }
}

/// The oscillator action at time `t` seconds.
pub fn oscillator_action(cfg: &OscillatorConfig, t: f64) -> Vec<f64> {
    (0..cfg.action_dim())
        .map(|i| {
            let a = cfg.offsets[i] + cfg.amplitudes[i] * (TAU * cfg.frequency * t + cfg.phases[i]).sin();
            a.clamp(-1.0, 1.0)
        })
        .collect()
}

/// Shipped expert for each environment.
pub fn default_oscillator(env_id: &str) -> Result<OscillatorConfig> {
    let text = match env_id {
        "point_gait" => include_str!("../../data/point_gait_expert.toml"),
        "point_gait_2d" => include_str!("../../data/point_gait_2d_expert.toml"),
        "planar_hopper" => include_str!("../../data/planar_hopper_expert.toml"),
        other => {
            return Err(Error::UnknownEnv {
                id: other.into(),
                available: super::ENV_IDS.join(", "),
            })
        }
    };
    OscillatorConfig::from_toml(text, Path::new(env_id))
}

struct Rollout {
    frames: Vec<Frame>,
    speeds: Vec<f64>,
    n: usize,
}

fn rollout(
    env: &mut dyn Env,
    cfg: &OscillatorConfig,
    settle_cycles: usize,
    capture_cycles: usize,
) -> Result<Rollout> {
    cfg.validate()?;
    let spec = env.spec().clone();
    if !cfg.env_id.is_empty() && cfg.env_id != spec.id {
        return Err(Error::Config(format!(
            "oscillator is for '{}' but the environment is '{}'",
            cfg.env_id, spec.id
        )));
    }
    if cfg.action_dim() != spec.action_dim {
        return Err(Error::dim("oscillator channels", spec.action_dim, cfg.action_dim()));
    }
    let n = cfg.cycle_frames(spec.dt)?;
    env.reset(0);
    let total = (settle_cycles + capture_cycles) * n;
    let start = settle_cycles * n;
    let mut frames = Vec::with_capacity(capture_cycles * n);
    let mut speeds = Vec::with_capacity(capture_cycles * n);
    for k in 0..total {
        // time taken modulo the period keeps later cycles bit-identical
        let a = oscillator_action(cfg, (k % n) as f64 * spec.dt);
        let t = env.step(&a);
        if t.error || t.terminated || (t.truncated && k + 1 < total) {
            return Err(Error::UnstableRollout(format!(
                "expert episode on {} ended at step {} of {total}",
                spec.id,
                k + 1
            )));
        }
        if k >= start {
            frames.push(Frame { a, q: t.pose.0 });
            speeds.push(env.forward_speed());
        }
    }
    Ok(Rollout { frames, speeds, n })
}

/// Runs the expert from a fixed reset and records one cycle after
/// `settle_cycles` warm-up cycles.
pub fn generate_demonstration(
    env: &mut dyn Env,
    cfg: &OscillatorConfig,
    settle_cycles: usize,
) -> Result<Demonstration> {
    let r = rollout(env, cfg, settle_cycles, 1)?;
    let spec = env.spec();
    Demonstration::new(&spec.id, spec.dt, spec.pose_names.clone(), r.frames)
}

/// Consecutive recorded cycles, for checking that the expert has settled.
pub fn record_cycles(
    env: &mut dyn Env,
    cfg: &OscillatorConfig,
    settle_cycles: usize,
    capture_cycles: usize,
) -> Result<Vec<Vec<Frame>>> {
    let r = rollout(env, cfg, settle_cycles, capture_cycles)?;
    Ok(r.frames.chunks(r.n).map(<[Frame]>::to_vec).collect())
}

/// Mean forward speed of the shipped expert over its recorded cycle.
pub fn reference_speed(env_id: &str) -> Result<f64> {
    let cfg = default_oscillator(env_id)?;
    let mut env = make_untargeted(env_id)?;
    let r = rollout(env.as_mut(), &cfg, cfg.settle_cycles, 1)?;
    Ok(r.speeds.iter().sum::<f64>() / r.speeds.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::ENV_IDS;

    fn cfg(f: f64) -> OscillatorConfig {
        OscillatorConfig {
            env_id: "point_gait".into(),
            frequency: f,
            amplitudes: vec![0.5; 4],
            phases: vec![0.0; 4],
            offsets: vec![0.0; 4],
            settle_cycles: 1,
        }
    }

    #[test]
    fn cycle_length_examples() {
        assert_eq!(cfg(2.0).cycle_frames(0.02).unwrap(), 25);
        assert_eq!(cfg(1.0).cycle_frames(0.01).unwrap(), 100);
        assert!(cfg(3.0).cycle_frames(0.02).is_err());
    }

    #[test]
    fn channel_bounds_enforced() {
        let mut c = cfg(1.0);
        c.offsets[2] = 0.6;
        assert!(c.validate().is_err());
        c.offsets[2] = 0.5;
        assert!(c.validate().is_ok());
        c.phases.pop();
        assert!(c.validate().is_err());
    }

    #[test]
    fn oscillator_examples() {
        let mut c = cfg(1.0);
        c.amplitudes = vec![1.0, 0.0, 0.5, 0.5];
        c.offsets = vec![0.0, 0.3, 0.0, 0.0];
        let a = oscillator_action(&c, 0.25);
        assert!((a[0] - 1.0).abs() < 1e-15);
        assert_eq!(a[1], 0.3);
        for k in 0..20 {
            let t = k as f64 * 0.037;
            let (x, y) = (oscillator_action(&c, t), oscillator_action(&c, t + 1.0));
            assert!(x.iter().zip(&y).all(|(p, q)| (p - q).abs() < 1e-12));
        }
    }

    #[test]
    fn shipped_experts_produce_demonstrations() {
        for id in ENV_IDS {
            let c = default_oscillator(id).unwrap();
            let mut env = make_untargeted(id).unwrap();
            let demo = generate_demonstration(env.as_mut(), &c, c.settle_cycles).unwrap();
            assert_eq!(demo.n_frames(), c.cycle_frames(env.spec().dt).unwrap());
            assert_eq!(demo.action_dim(), env.spec().action_dim);
            assert_eq!(demo.pose_dim(), env.spec().pose_dim());
            let again = generate_demonstration(env.as_mut(), &c, c.settle_cycles).unwrap();
            for (k, f) in demo.frames.iter().enumerate() {
                assert_eq!(f.a, oscillator_action(&c, k as f64 * env.spec().dt), "{id} frame {k}");
            }
            assert_eq!(demo, again, "{id}");
            assert!(reference_speed(id).unwrap() > 0.05, "{id}");
        }
    }

    #[test]
    fn consecutive_cycles_repeat_actions() {
        for id in ENV_IDS {
            let c = default_oscillator(id).unwrap();
            let mut env = make_untargeted(id).unwrap();
            let cycles = record_cycles(env.as_mut(), &c, 1, 2).unwrap();
            let same = cycles[0].iter().zip(&cycles[1]).all(|(x, y)| x.a == y.a);
            assert!(same, "{id}");
        }
    }

    #[test]
    fn mismatched_expert_rejected() {
        let c = default_oscillator("point_gait").unwrap();
        let mut env = make_untargeted("planar_hopper").unwrap();
        assert!(generate_demonstration(env.as_mut(), &c, 1).is_err());
    }
}
