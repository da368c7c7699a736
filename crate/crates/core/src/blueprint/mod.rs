//! Blueprint training: PPO actor-critic and double-Q learning, plus the GAE
//! and Bellman primitives shared with the decision-time fine-tuners.

mod gae;
mod loss;
pub mod policy;
mod ppo;
mod qlearn;
mod replay;

pub use gae::{compute_gae, gae_direct};
pub use loss::{bellman_grad, bellman_loss, bellman_targets, ppo_grad, ppo_loss, PpoCoeffs, PpoMinibatch, PpoStats};
pub(crate) use ppo::ppo_epochs;
pub use ppo::{collect_rollouts, PpoConfig, PpoTrainer, RolloutBatch, RolloutTrajectory};
pub use qlearn::{QConfig, QTrainer};
pub use replay::{ReplayBuffer, Transition};

use alloc::string::String;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EnvError;
use crate::nn::NnError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlueprintError {
    #[error("length mismatch: {0} rewards vs {1} values")]
    Length(usize, usize),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// One training-curve point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub step: u64,
    pub mean_return: f64,
    pub sem: f64,
    pub samples: u64,
    pub wall_ms: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainerKind {
    Ppo,
    Qlearn,
}
