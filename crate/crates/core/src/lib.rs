//! Latent action priors learned from a single gait cycle, a phase-clocked
//! style reward, and a from-scratch PPO learner, on small analytic
//! locomotion environments.
//!
//! The guide under `book/` walks through each module; its code samples are
//! compiled as doctests of this crate.

pub mod demo;
pub mod envs;
pub mod error;
pub mod imitation;
pub mod latent;
pub mod linalg;
pub mod nn;
pub mod pipeline;
pub mod ppo;
pub mod synergy;

pub use error::{Error, Result};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/quickstart.md")]
    struct Quickstart;
    #[doc = include_str!("../../../book/src/environments.md")]
    struct Environments;
    #[doc = include_str!("../../../book/src/demonstrations.md")]
    struct Demonstrations;
    #[doc = include_str!("../../../book/src/latent_prior.md")]
    struct LatentPrior;
    #[doc = include_str!("../../../book/src/style_reward.md")]
    struct StyleReward;
    #[doc = include_str!("../../../book/src/ppo.md")]
    struct Ppo;
    #[doc = include_str!("../../../book/src/experiments.md")]
    struct Experiments;
}
