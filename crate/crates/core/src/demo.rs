//! Expert demonstrations: one gait cycle of `(action, pose)` frames.
//!
//! On disk a demonstration is a TOML document with a `[meta]` table and an
//! array of `[[frames]]` tables:
//!
//! ```toml
//! [meta]
//! env_id = "point_gait"
//! dt = 0.02
//! n_frames = 25
//! action_dim = 4
//! pose_dim = 5
//! pose_names = ["sin_p1", "cos_p1", "sin_p2", "cos_p2", "v"]
//!
//! [[frames]]
//! a = [0.0, -0.0, 0.6, -0.6]
//! q = [0.05, 0.99, -0.05, -0.99, 0.7]
//! ```
//!
//! Floats are written in shortest round-trip form, so a save/load cycle
//! reproduces every value bit for bit. The format also accepts `nan` and
//! `inf` so that broken recordings are caught by validation with a frame
//! index instead of an anonymous parse error.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoMeta {
    pub env_id: String,
    pub dt: f64,
    pub n_frames: usize,
    pub action_dim: usize,
    pub pose_dim: usize,
    pub pose_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// Action applied at this frame.
    pub a: Vec<f64>,
    /// Pose features (joint positions and torso orientation, never world
    /// translation).
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub meta: DemoMeta,
    pub frames: Vec<Frame>,
}

impl Demonstration {
    /// Builds and validates a demonstration from its parts.
    pub fn new(
        env_id: impl Into<String>,
        dt: f64,
        pose_names: Vec<String>,
        frames: Vec<Frame>,
    ) -> Result<Self> {
        let action_dim = frames.first().map_or(0, |f| f.a.len());
        let demo = Demonstration {
            meta: DemoMeta {
                env_id: env_id.into(),
                dt,
                n_frames: frames.len(),
                action_dim,
                pose_dim: pose_names.len(),
                pose_names,
            },
            frames,
        };
        demo.validate()?;
        Ok(demo)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.meta;
        let bad = |msg: String| Err(Error::InvalidDemonstration(msg));
        if !(m.dt > 0.0 && m.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", m.dt));
        }
        if m.n_frames < 2 {
            return bad(format!("need at least 2 frames, got n_frames = {}", m.n_frames));
        }
        if m.n_frames != self.frames.len() {
            return bad(format!(
                "meta declares {} frames but the file holds {}",
                m.n_frames,
                self.frames.len()
            ));
        }
        if m.action_dim == 0 || m.pose_dim == 0 {
            return bad("action_dim and pose_dim must be positive".into());
        }
        if m.pose_names.len() != m.pose_dim {
            return bad(format!(
                "pose_dim is {} but {} pose names are given",
                m.pose_dim,
                m.pose_names.len()
            ));
        }
        for (i, f) in self.frames.iter().enumerate() {
            if f.a.len() != m.action_dim {
                return bad(format!(
                    "frame {i}: action has length {}, expected {}",
                    f.a.len(),
                    m.action_dim
                ));
            }
            if f.q.len() != m.pose_dim {
                return bad(format!(
                    "frame {i}: pose has length {}, expected {}",
                    f.q.len(),
                    m.pose_dim
                ));
            }
            if let Some(j) = f.a.iter().position(|v| !v.is_finite()) {
                return bad(format!("frame {i}: non-finite action component {j}"));
            }
            if let Some(j) = f.q.iter().position(|v| !v.is_finite()) {
                return bad(format!("frame {i}: non-finite pose component {j}"));
            }
        }
        Ok(())
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn action_dim(&self) -> usize {
        self.meta.action_dim
    }

    pub fn pose_dim(&self) -> usize {
        self.meta.pose_dim
    }

    pub fn env_id(&self) -> &str {
        &self.meta.env_id
    }

    /// Identifier recorded in priors and checkpoints trained from this demo.
    pub fn id(&self) -> String {
        format!("{}:{}x{}", self.meta.env_id, self.meta.n_frames, self.meta.action_dim)
    }

    pub fn actions(&self) -> impl Iterator<Item = &[f64]> {
        self.frames.iter().map(|f| f.a.as_slice())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidDemonstration(e.to_string()))
    }

    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let demo: Demonstration = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        demo.validate()?;
        Ok(demo)
    }
}

pub fn load_demonstration(path: impl AsRef<Path>) -> Result<Demonstration> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Demonstration::from_toml(&text, path)
}

pub fn save_demonstration(demo: &Demonstration, path: impl AsRef<Path>) -> Result<()> {
    demo.validate()?;
    let path = path.as_ref();
    std::fs::write(path, demo.to_toml()?).map_err(|e| Error::io(path, e))
}

/// `N × a_full` matrix whose row `t` is the action of frame `t`.
pub fn actions_matrix(demo: &Demonstration) -> Matrix {
    Matrix::from_rows(&demo.frames.iter().map(|f| f.a.clone()).collect::<Vec<_>>())
}
