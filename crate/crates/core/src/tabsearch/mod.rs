//! Tabular decision-time search: SPARTA-style Monte Carlo action values over a
//! belief, and PUCT tree search guided by a blueprint.

mod mcts;
mod sparta;

pub use mcts::{puct_score, puct_select, Guide, LeafValue, Mcts, MctsConfig, MctsNode, NetGuide, RootStats, UniformGuide};
pub use sparta::{blueprint_rollout, sparta_q, sparta_select, QEstimate, SpartaDecision};

use thiserror::Error;

use crate::belief::BeliefError;
use crate::env::EnvError;
use crate::nn::NnError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("search root is terminal")]
    TerminalRoot,
}
