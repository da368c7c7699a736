//! Decision-time fine-tuning of a blueprint: policy-gradient and Q-value
//! improvement, paired evaluation with an adoption gate, and the single-agent,
//! joint multi-agent and replanning controllers built on them.

mod controller;
mod eval;
mod finetune;

pub use controller::{
    amortized_replan_controller, multi_agent_search_move, run_episode, single_agent_search_move, Blueprint, EpisodeReport, Mode,
    MoveLog, PlayPlan, RunConfig,
};
pub use eval::{evaluate_pair, evaluate_policy, gate, EvalReport, Scope};
pub use finetune::{collect_q_trajectories, pg_finetune, q_finetune, truncate_with_blueprint, QTrajectory};

use alloc::string::String;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{BeliefError, ParticleBelief};
use crate::blueprint::policy::{greedy, sample_index};
use crate::blueprint::{BlueprintError, PpoCoeffs};
use crate::env::{EnvError, Observation, Simulator};
use crate::math;
use crate::nn::{HeadKind, NetParams, NnError};
use crate::tabsearch::SearchError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RlError {
    #[error("invalid search config: {0}")]
    Config(String),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Blueprint(#[from] BlueprintError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Single,
    Multi,
}

/// How a policy-logits network picks actions; Q networks always act greedily.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionRule {
    Greedy,
    Sample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub mode: SearchMode,
    /// Environment turns covered by fine-tuning rollouts and by an adopted plan.
    pub horizon: usize,
    /// Gradient steps (Q) or PPO iterations (policy gradient).
    pub gradient_steps: usize,
    /// Trajectories per collection.
    pub rollouts: usize,
    pub eval_rollouts: usize,
    pub gate_eps: f64,
    /// Probability that a batch element comes from the global buffer.
    pub buffer_mix: f64,
    pub batch: usize,
    /// Discount for Bellman targets and GAE; the environment's own when absent.
    pub gamma: Option<f64>,
    pub q_lr: f64,
    pub pg_lr: f64,
    /// Epsilon-greedy rate of Q fine-tuning rollouts.
    pub explore: f64,
    pub target_refresh: usize,
    pub max_grad_norm: f64,
    pub pg_max_grad_norm: f64,
    pub ppo: PpoCoeffs,
    pub lambda: f64,
    pub ppo_epochs: usize,
    pub ppo_minibatch: usize,
    pub policy_play: ActionRule,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self::for_mode(SearchMode::Single)
    }
}

impl SearchConfig {
    pub fn for_mode(mode: SearchMode) -> Self {
        let (horizon, gradient_steps, gate_eps) = match mode {
            SearchMode::Single => (3, 5000, 0.05),
            SearchMode::Multi => (1, 10_000, 0.035),
        };
        Self {
            mode,
            horizon,
            gradient_steps,
            rollouts: 256,
            eval_rollouts: 10_000,
            gate_eps,
            buffer_mix: 0.25,
            batch: 64,
            gamma: None,
            q_lr: 5e-4,
            pg_lr: 1e-3,
            explore: 0.05,
            target_refresh: 50,
            max_grad_norm: 10.0,
            pg_max_grad_norm: 0.5,
            ppo: PpoCoeffs::default(),
            lambda: 0.95,
            ppo_epochs: 4,
            ppo_minibatch: 256,
            policy_play: ActionRule::Sample,
        }
    }

    /// Policy-gradient replanning for single-agent MDPs.
    pub fn replan() -> Self {
        Self { horizon: 30, gradient_steps: 10, rollouts: 16, ..Self::for_mode(SearchMode::Single) }
    }

    pub fn validate(&self) -> Result<(), RlError> {
        let bad = |m: &str| Err(RlError::Config(m.into()));
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        if self.rollouts == 0 || self.eval_rollouts == 0 || self.batch == 0 || self.target_refresh == 0 || self.ppo_epochs == 0 || self.ppo_minibatch == 0 {
            return bad("rollouts, eval_rollouts, batch, target_refresh, ppo_epochs and ppo_minibatch must be positive");
        }
        if !(0.0..=1.0).contains(&self.buffer_mix) || !(0.0..=1.0).contains(&self.explore) {
            return bad("buffer_mix and explore must lie in [0, 1]");
        }
        if self.gate_eps < 0.0 || !self.gate_eps.is_finite() {
            return bad("gate_eps must be finite and non-negative");
        }
        if let Some(g) = self.gamma {
            if !(0.0..=1.0).contains(&g) {
                return bad("gamma must lie in [0, 1]");
            }
        }
        if self.q_lr <= 0.0 || self.pg_lr <= 0.0 {
            return bad("learning rates must be positive");
        }
        Ok(())
    }
}

/// Where fine-tuning and evaluation rollouts start.
#[derive(Debug)]
pub enum Roots<'a, S> {
    /// A known state; each draw is a clone with a fresh chance stream.
    State(&'a S),
    Belief(&'a ParticleBelief<S>),
}

impl<S> Clone for Roots<'_, S> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<S> Copy for Roots<'_, S> {}

impl<S: Simulator> Roots<'_, S> {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<S, RlError> {
        match self {
            Roots::State(s) => {
                let mut c = (*s).clone();
                c.reseed(rng.gen());
                Ok(c)
            }
            Roots::Belief(b) => Ok(b.sample(rng)?),
        }
    }

    pub fn env_gamma(&self) -> f64 {
        match self {
            Roots::State(s) => s.spec().gamma,
            Roots::Belief(b) => b.particles().first().map_or(1.0, |p| p.traj.last().spec().gamma),
        }
    }
}

/// A network together with its acting rule.
#[derive(Clone, Copy, Debug)]
pub struct Actor<'a> {
    pub net: &'a NetParams,
    pub rule: ActionRule,
}

impl<'a> Actor<'a> {
    pub fn greedy(net: &'a NetParams) -> Self {
        Self { net, rule: ActionRule::Greedy }
    }

    pub fn act<R: Rng + ?Sized>(&self, obs: &Observation, rng: &mut R) -> Result<usize, RlError> {
        let out = self.net.forward(&obs.features)?;
        if self.rule == ActionRule::Sample && self.net.arch.head == HeadKind::PolicyLogits {
            let p = math::masked_softmax(&out, &obs.legal);
            Ok(sample_index(&p, &obs.legal, rng)?)
        } else {
            Ok(greedy(&out, &obs.legal)?)
        }
    }
}

#[cfg(test)]
mod tests;
