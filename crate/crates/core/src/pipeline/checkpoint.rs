use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::demo::Demonstration;
use crate::envs::Variant;
use crate::error::{Error, Result};
use crate::latent::LatentActionPrior;
use crate::ppo::Agent;

use super::config::Mode;

pub const CHECKPOINT_MAGIC: &str = "gaitprior-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointKind {
    Prior,
    Policy,
}

/// A trained policy together with everything needed to run and score it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyCheckpoint {
    pub env_id: String,
    pub variant: Variant,
    pub mode: Mode,
    pub seed: u64,
    /// The experiment config that produced this policy, as TOML.
    pub config: String,
    pub agent: Agent,
    /// Kept so evaluation can report the style score.
    pub demo: Option<Demonstration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub magic: String,
    pub format_version: u32,
    pub kind: CheckpointKind,
    /// Empty when no demonstration was involved.
    pub source_demo_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<LatentActionPrior>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyCheckpoint>,
}

impl Checkpoint {
    pub fn prior(prior: LatentActionPrior) -> Self {
        Checkpoint {
            magic: CHECKPOINT_MAGIC.into(),
            format_version: CHECKPOINT_VERSION,
            kind: CheckpointKind::Prior,
            source_demo_id: prior.source_demo_id.clone(),
            prior: Some(prior),
            policy: None,
        }
    }

    pub fn policy(policy: PolicyCheckpoint) -> Self {
        let source_demo_id = match (&policy.demo, &policy.agent.prior) {
            (Some(d), _) => d.id(),
            (None, Some(p)) => p.source_demo_id.clone(),
            (None, None) => String::new(),
        };
        Checkpoint {
            magic: CHECKPOINT_MAGIC.into(),
            format_version: CHECKPOINT_VERSION,
            kind: CheckpointKind::Policy,
            source_demo_id,
            prior: None,
            policy: Some(policy),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Checkpoint(format!("cannot serialise: {e}")))
    }

    /// Parses and validates; the magic string and version are checked before
    /// anything else.
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            message,
        };
        let table: toml::Table = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
        match table.get("magic").and_then(|v| v.as_str()) {
            Some(CHECKPOINT_MAGIC) => {}
            other => {
                return Err(Error::Checkpoint(format!(
                    "{} is not a checkpoint (magic = {:?})",
                    origin.display(),
                    other.unwrap_or("<missing>")
                )))
            }
        }
        match table.get("format_version").and_then(|v| v.as_integer()) {
            Some(v) if v == i64::from(CHECKPOINT_VERSION) => {}
            other => {
                return Err(Error::Checkpoint(format!(
                    "{}: unsupported format_version {:?} (this build reads {CHECKPOINT_VERSION})",
                    origin.display(),
                    other
                )))
            }
        }
        let ckpt: Checkpoint = table.try_into().map_err(|e: toml::de::Error| parse_err(e.to_string()))?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, &self.prior, &self.policy) {
            (CheckpointKind::Prior, Some(p), None) => p.validate(),
            (CheckpointKind::Policy, None, Some(p)) => {
                p.agent.validate()?;
                if let Some(d) = &p.demo {
                    d.validate()?;
                }
                Ok(())
            }
            _ => Err(Error::Checkpoint(format!("{:?} checkpoint has the wrong payload", self.kind))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_toml()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn into_prior(self) -> Result<LatentActionPrior> {
        match self.prior {
            Some(p) if self.kind == CheckpointKind::Prior => Ok(p),
            _ => Err(Error::Checkpoint(format!("expected a prior checkpoint, found {:?}", self.kind))),
        }
    }

    pub fn into_policy(self) -> Result<PolicyCheckpoint> {
        match self.policy {
            Some(p) if self.kind == CheckpointKind::Policy => Ok(p),
            _ => Err(Error::Checkpoint(format!("expected a policy checkpoint, found {:?}", self.kind))),
        }
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}
