//! Simulator interface and the bundled environments.
//!
//! All environments are turn-based: exactly one agent acts per step, so a
//! joint action is the pair `(acting agent, action)`. States are plain values
//! carrying their own chance stream; cloning a state and replaying the same
//! actions reproduces the same successors.

mod coordgame;
mod gridpacman;
mod minihanabi;
pub mod toy;

pub use coordgame::CoordGame;
pub use gridpacman::GridPacman;
pub use minihanabi::{Card, MiniHanabi};

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("unknown env kind `{0}` (expected gridpacman, minihanabi or coordgame)")]
    UnknownKind(String),
    #[error("step called on a terminated state")]
    Terminated,
    #[error("illegal action {action} for agent {agent} at turn {turn}")]
    IllegalAction { agent: usize, action: usize, turn: u32 },
    #[error("agent {0} out of range")]
    InvalidAgent(usize),
    #[error("state space of {0} is not enumerable")]
    Intractable(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    GridPacman,
    MiniHanabi,
    CoordGame,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::GridPacman => "gridpacman",
            EnvKind::MiniHanabi => "minihanabi",
            EnvKind::CoordGame => "coordgame",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = EnvError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gridpacman" => Ok(EnvKind::GridPacman),
            "minihanabi" => Ok(EnvKind::MiniHanabi),
            "coordgame" => Ok(EnvKind::CoordGame),
            other => Err(EnvError::UnknownKind(other.into())),
        }
    }
}

/// Static description of an environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub num_agents: usize,
    pub num_actions: usize,
    pub obs_len: usize,
    pub public_obs_len: usize,
    pub max_episode_len: u32,
    pub gamma: f64,
    /// Agents' observations jointly determine the state (MDP-like).
    pub fully_observable: bool,
}

/// Who an observation belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Viewer {
    Agent(usize),
    Public,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// `None` for the public observation.
    pub agent: Option<usize>,
    pub features: Vec<f64>,
    /// Legal actions of the agent to move (all false once terminated).
    pub legal: Vec<bool>,
}

impl Observation {
    /// Bitwise equality, treating `-0.0` and `0.0` as different like the replay check does.
    pub fn same_as(&self, other: &Observation) -> bool {
        self.agent == other.agent
            && self.legal == other.legal
            && self.features.len() == other.features.len()
            && self.features.iter().zip(&other.features).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub reward: f64,
    pub terminated: bool,
}

/// One enumerated chance outcome of taking an action.
#[derive(Clone, Debug)]
pub struct Branch<S> {
    pub prob: f64,
    pub state: S,
    pub step: Step,
}

pub trait Simulator: Clone {
    fn spec(&self) -> EnvSpec;

    /// A fresh episode of the same environment configuration.
    fn fresh(&self, seed: u64) -> Self;

    fn turn(&self) -> u32;

    fn is_terminal(&self) -> bool;

    fn current_agent(&self) -> usize;

    fn legal_actions(&self) -> Vec<bool>;

    fn observe(&self, agent: usize) -> Observation;

    fn public_observe(&self) -> Observation;

    /// Derive the public observation from any agent's private observation.
    fn public_of(obs: &Observation) -> Observation;

    fn step(&mut self, action: usize) -> Result<Step, EnvError>;

    /// Replace the chance stream (future draws) without touching the visible state.
    fn reseed(&mut self, seed: u64);

    /// Every chance outcome of `action` with its probability, for environments
    /// small enough to enumerate one step.
    fn chance_outcomes(&self, _action: usize) -> Option<Result<Vec<Branch<Self>>, EnvError>> {
        None
    }

    fn view(&self, viewer: Viewer) -> Observation {
        match viewer {
            Viewer::Agent(i) => self.observe(i),
            Viewer::Public => self.public_observe(),
        }
    }

    /// Hash of the full state as seen by the acting agent; used to key tree nodes.
    fn state_key(&self) -> u64 {
        let obs = self.observe(self.current_agent());
        crate::math::fnv1a(
            obs.features
                .iter()
                .flat_map(|f| f.to_bits().to_le_bytes())
                .chain(obs.legal.iter().map(|&b| b as u8))
                .chain(self.turn().to_le_bytes()),
        )
    }

    fn check_legal(&self, action: usize) -> Result<(), EnvError> {
        if self.is_terminal() {
            return Err(EnvError::Terminated);
        }
        let legal = self.legal_actions();
        if action >= legal.len() || !legal[action] {
            return Err(EnvError::IllegalAction { agent: self.current_agent(), action, turn: self.turn() });
        }
        Ok(())
    }
}

/// Environments whose initial distribution can be listed exhaustively.
pub trait Enumerable: Simulator {
    /// Every initial state of this configuration with its probability.
    fn initial_distribution(&self) -> Result<Vec<(f64, Self)>, EnvError>;
}

/// One step of an action-observation history: who acted, what they did, the
/// team reward, and the viewer's observation afterwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AohRecord {
    pub actor: usize,
    pub action: usize,
    pub reward: f64,
    pub obs: Observation,
}

/// Action-observation history for an agent or for the public view.
/// `records.len()` equals the turn counter of the state it was built from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aoh {
    pub viewer: Viewer,
    pub initial: Observation,
    pub records: Vec<AohRecord>,
}

impl Aoh {
    pub fn start<S: Simulator>(state: &S, viewer: Viewer) -> Self {
        Self { viewer, initial: state.view(viewer), records: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Append the record produced by `actor` taking `action` and landing in `next`.
    pub fn push<S: Simulator>(&mut self, actor: usize, action: usize, reward: f64, next: &S) -> &AohRecord {
        self.records.push(AohRecord { actor, action, reward, obs: next.view(self.viewer) });
        self.records.last().expect("just pushed")
    }

    pub fn latest_obs(&self) -> &Observation {
        self.records.last().map(|r| &r.obs).unwrap_or(&self.initial)
    }

    /// Drop private fields.
    pub fn to_public<S: Simulator>(&self) -> Aoh {
        Aoh {
            viewer: Viewer::Public,
            initial: S::public_of(&self.initial),
            records: self
                .records
                .iter()
                .map(|r| AohRecord { actor: r.actor, action: r.action, reward: r.reward, obs: S::public_of(&r.obs) })
                .collect(),
        }
    }

    /// The history of `viewer` along a sequence of visited states.
    pub fn from_trajectory<S: Simulator>(viewer: Viewer, traj: &Trajectory<S>) -> Self {
        let mut aoh = Self::start(&traj.states[0], viewer);
        for (i, &(actor, action)) in traj.actions.iter().enumerate() {
            aoh.push(actor, action, traj.rewards[i], &traj.states[i + 1]);
        }
        aoh
    }

    /// True when every observation matches exactly (see [`Observation::same_as`]).
    pub fn same_as(&self, other: &Aoh) -> bool {
        self.viewer == other.viewer
            && self.initial.same_as(&other.initial)
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.actor == b.actor && a.action == b.action && a.reward.to_bits() == b.reward.to_bits() && a.obs.same_as(&b.obs)
            })
    }
}

/// Visited states with the joint actions and rewards between them.
#[derive(Clone, Debug)]
pub struct Trajectory<S> {
    pub states: Vec<S>,
    pub actions: Vec<(usize, usize)>,
    pub rewards: Vec<f64>,
}

impl<S: Simulator> Trajectory<S> {
    pub fn new(start: S) -> Self {
        Self { states: alloc::vec![start], actions: Vec::new(), rewards: Vec::new() }
    }

    pub fn last(&self) -> &S {
        self.states.last().expect("trajectory holds at least the start state")
    }

    pub fn step(&mut self, action: usize) -> Result<Step, EnvError> {
        let mut next = self.last().clone();
        let actor = next.current_agent();
        let step = next.step(action)?;
        self.actions.push((actor, action));
        self.rewards.push(step.reward);
        self.states.push(next);
        Ok(step)
    }

    /// Record a successor produced elsewhere (e.g. a chosen chance branch).
    pub fn push(&mut self, actor: usize, action: usize, reward: f64, next: S) {
        self.actions.push((actor, action));
        self.rewards.push(reward);
        self.states.push(next);
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

macro_rules! any_state {
    ($($variant:ident($ty:ty)),* $(,)?) => {
        /// Runtime-selected environment state.
        #[derive(Clone, Debug)]
        pub enum AnyState {
            $($variant($ty)),*
        }

        impl Simulator for AnyState {
            fn spec(&self) -> EnvSpec { match self { $(AnyState::$variant(s) => s.spec()),* } }
            fn fresh(&self, seed: u64) -> Self { match self { $(AnyState::$variant(s) => AnyState::$variant(s.fresh(seed))),* } }
            fn turn(&self) -> u32 { match self { $(AnyState::$variant(s) => s.turn()),* } }
            fn is_terminal(&self) -> bool { match self { $(AnyState::$variant(s) => s.is_terminal()),* } }
            fn current_agent(&self) -> usize { match self { $(AnyState::$variant(s) => s.current_agent()),* } }
            fn legal_actions(&self) -> Vec<bool> { match self { $(AnyState::$variant(s) => s.legal_actions()),* } }
            fn observe(&self, agent: usize) -> Observation { match self { $(AnyState::$variant(s) => s.observe(agent)),* } }
            fn public_observe(&self) -> Observation { match self { $(AnyState::$variant(s) => s.public_observe()),* } }
            fn public_of(_obs: &Observation) -> Observation {
                // The layout depends on the variant, which an observation alone does not carry.
                unimplemented!("use the concrete environment type for public projection")
            }
            fn step(&mut self, action: usize) -> Result<Step, EnvError> { match self { $(AnyState::$variant(s) => s.step(action)),* } }
            fn reseed(&mut self, seed: u64) { match self { $(AnyState::$variant(s) => s.reseed(seed)),* } }
            fn state_key(&self) -> u64 { match self { $(AnyState::$variant(s) => s.state_key()),* } }
            fn chance_outcomes(&self, action: usize) -> Option<Result<Vec<Branch<Self>>, EnvError>> {
                match self {
                    $(AnyState::$variant(s) => s.chance_outcomes(action).map(|r| r.map(|bs| {
                        bs.into_iter().map(|b| Branch { prob: b.prob, state: AnyState::$variant(b.state), step: b.step }).collect()
                    }))),*
                }
            }
        }

        impl Enumerable for AnyState {
            fn initial_distribution(&self) -> Result<Vec<(f64, Self)>, EnvError> {
                match self {
                    $(AnyState::$variant(s) => Ok(s.initial_distribution()?.into_iter().map(|(p, x)| (p, AnyState::$variant(x))).collect())),*
                }
            }
        }
    };
}

any_state!(GridPacman(GridPacman), MiniHanabi(MiniHanabi), CoordGame(CoordGame));

impl AnyState {
    pub fn kind(&self) -> EnvKind {
        match self {
            AnyState::GridPacman(_) => EnvKind::GridPacman,
            AnyState::MiniHanabi(_) => EnvKind::MiniHanabi,
            AnyState::CoordGame(_) => EnvKind::CoordGame,
        }
    }
}

/// Initial state of `kind` drawn with `seed`.
pub fn reset(kind: EnvKind, seed: u64) -> AnyState {
    match kind {
        EnvKind::GridPacman => AnyState::GridPacman(GridPacman::reset(seed)),
        EnvKind::MiniHanabi => AnyState::MiniHanabi(MiniHanabi::reset(seed)),
        EnvKind::CoordGame => AnyState::CoordGame(CoordGame::reset(seed)),
    }
}

/// Parse an env kind name and reset it.
pub fn reset_named(name: &str, seed: u64) -> Result<AnyState, EnvError> {
    Ok(reset(name.parse()?, seed))
}

pub(crate) fn one_hot(out: &mut Vec<f64>, index: Option<usize>, width: usize) {
    let start = out.len();
    out.extend(core::iter::repeat_n(0.0, width));
    if let Some(i) = index {
        out[start + i] = 1.0;
    }
}

#[cfg(test)]
mod tests;
