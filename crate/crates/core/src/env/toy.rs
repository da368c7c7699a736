//! Tiny table-driven environments with known optima, used as oracles.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;

use super::{one_hot, Branch, Enumerable, EnvError, EnvSpec, Observation, Simulator, Step};

/// One state, one step: action `a` pays `rewards[a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bandit {
    rewards: Arc<Vec<f64>>,
    done: bool,
}

impl Bandit {
    pub fn new(rewards: Vec<f64>) -> Self {
        Self { rewards: Arc::new(rewards), done: false }
    }
}

impl Simulator for Bandit {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            num_agents: 1,
            num_actions: self.rewards.len(),
            obs_len: 1,
            public_obs_len: 1,
            max_episode_len: 1,
            gamma: 1.0,
            fully_observable: true,
        }
    }

    fn fresh(&self, _seed: u64) -> Self {
        Self { rewards: self.rewards.clone(), done: false }
    }

    fn turn(&self) -> u32 {
        self.done as u32
    }

    fn is_terminal(&self) -> bool {
        self.done
    }

    fn current_agent(&self) -> usize {
        0
    }

    fn legal_actions(&self) -> Vec<bool> {
        vec![!self.done; self.rewards.len()]
    }

    fn observe(&self, _agent: usize) -> Observation {
        Observation { agent: Some(0), features: vec![1.0], legal: self.legal_actions() }
    }

    fn public_observe(&self) -> Observation {
        Observation { agent: None, ..self.observe(0) }
    }

    fn public_of(obs: &Observation) -> Observation {
        Observation { agent: None, ..obs.clone() }
    }

    fn step(&mut self, action: usize) -> Result<Step, EnvError> {
        self.check_legal(action)?;
        self.done = true;
        Ok(Step { reward: self.rewards[action], terminated: true })
    }

    fn reseed(&mut self, _seed: u64) {}

    fn state_key(&self) -> u64 {
        self.done as u64
    }
}

/// One step whose reward is Bernoulli(`p`) regardless of the action.
#[derive(Clone, Debug)]
pub struct CoinFlip {
    p: f64,
    done: bool,
    rng: Pcg64Mcg,
}

impl CoinFlip {
    pub fn new(p: f64, seed: u64) -> Self {
        Self { p, done: false, rng: Pcg64Mcg::seed_from_u64(seed) }
    }
}

impl Simulator for CoinFlip {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            num_agents: 1,
            num_actions: 1,
            obs_len: 1,
            public_obs_len: 1,
            max_episode_len: 1,
            gamma: 1.0,
            fully_observable: true,
        }
    }

    fn fresh(&self, seed: u64) -> Self {
        Self::new(self.p, seed)
    }

    fn turn(&self) -> u32 {
        self.done as u32
    }

    fn is_terminal(&self) -> bool {
        self.done
    }

    fn current_agent(&self) -> usize {
        0
    }

    fn legal_actions(&self) -> Vec<bool> {
        vec![!self.done]
    }

    fn observe(&self, _agent: usize) -> Observation {
        Observation { agent: Some(0), features: vec![1.0], legal: self.legal_actions() }
    }

    fn public_observe(&self) -> Observation {
        Observation { agent: None, ..self.observe(0) }
    }

    fn public_of(obs: &Observation) -> Observation {
        Observation { agent: None, ..obs.clone() }
    }

    fn step(&mut self, action: usize) -> Result<Step, EnvError> {
        self.check_legal(action)?;
        self.done = true;
        let hit = self.rng.gen_bool(self.p);
        Ok(Step { reward: hit as u8 as f64, terminated: true })
    }

    fn reseed(&mut self, seed: u64) {
        self.rng = Pcg64Mcg::seed_from_u64(seed);
    }

    fn state_key(&self) -> u64 {
        self.done as u64
    }
}

/// Outcome of taking an action in a [`TreeNode`].
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub prob: f64,
    pub reward: f64,
    pub child: usize,
}

/// Node of a finite stochastic decision tree; no actions means terminal.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct TreeNode {
    pub actions: Vec<Vec<Outcome>>,
}

/// Walks a fixed transition table from node 0.
#[derive(Clone, Debug)]
pub struct DecisionTree {
    nodes: Arc<Vec<TreeNode>>,
    num_actions: usize,
    node: usize,
    turn: u32,
    rng: Pcg64Mcg,
}

impl DecisionTree {
    pub fn new(nodes: Vec<TreeNode>, seed: u64) -> Self {
        let num_actions = nodes.iter().map(|n| n.actions.len()).max().unwrap_or(1).max(1);
        Self { nodes: Arc::new(nodes), num_actions, node: 0, turn: 0, rng: Pcg64Mcg::seed_from_u64(seed) }
    }

    /// Two actions at the root, each splitting by chance into one of four
    /// decision nodes whose two actions end in one of four leaves.
    pub fn depth_two() -> Self {
        let o = |prob: f64, reward: f64, child: usize| Outcome { prob, reward, child };
        let mut nodes = vec![TreeNode::default(); 9];
        nodes[0].actions = vec![vec![o(0.5, 0.0, 1), o(0.5, 0.0, 2)], vec![o(0.7, 0.0, 3), o(0.3, 0.0, 4)]];
        nodes[1].actions = vec![vec![o(1.0, 0.9, 5)], vec![o(0.5, 1.0, 6), o(0.5, 0.0, 7)]];
        nodes[2].actions = vec![vec![o(0.6, 0.0, 5), o(0.4, 0.5, 8)], vec![o(1.0, 0.1, 6)]];
        nodes[3].actions = vec![vec![o(0.5, 1.0, 7), o(0.5, 0.1, 8)], vec![o(1.0, 0.5, 5)]];
        nodes[4].actions = vec![vec![o(1.0, 0.1, 6)], vec![o(0.2, 1.0, 7), o(0.8, 0.0, 8)]];
        Self::new(nodes, 0)
    }

    pub fn node(&self) -> usize {
        self.node
    }

    pub fn table(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Optimal expected return from `node` and the best action there.
    pub fn expectimax(nodes: &[TreeNode], node: usize) -> (f64, Option<usize>) {
        let mut best: Option<(f64, usize)> = None;
        for (a, outcomes) in nodes[node].actions.iter().enumerate() {
            let v: f64 = outcomes.iter().map(|o| o.prob * (o.reward + Self::expectimax(nodes, o.child).0)).sum();
            if best.is_none_or(|(bv, _)| v > bv) {
                best = Some((v, a));
            }
        }
        best.map_or((0.0, None), |(v, a)| (v, Some(a)))
    }
}

impl Simulator for DecisionTree {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            num_agents: 1,
            num_actions: self.num_actions,
            obs_len: self.nodes.len(),
            public_obs_len: self.nodes.len(),
            max_episode_len: self.nodes.len() as u32,
            gamma: 1.0,
            fully_observable: true,
        }
    }

    fn fresh(&self, seed: u64) -> Self {
        Self { nodes: self.nodes.clone(), num_actions: self.num_actions, node: 0, turn: 0, rng: Pcg64Mcg::seed_from_u64(seed) }
    }

    fn turn(&self) -> u32 {
        self.turn
    }

    fn is_terminal(&self) -> bool {
        self.nodes[self.node].actions.is_empty()
    }

    fn current_agent(&self) -> usize {
        0
    }

    fn legal_actions(&self) -> Vec<bool> {
        let n = self.nodes[self.node].actions.len();
        (0..self.num_actions).map(|a| a < n).collect()
    }

    fn observe(&self, _agent: usize) -> Observation {
        let mut f = Vec::with_capacity(self.nodes.len());
        one_hot(&mut f, Some(self.node), self.nodes.len());
        Observation { agent: Some(0), features: f, legal: self.legal_actions() }
    }

    fn public_observe(&self) -> Observation {
        Observation { agent: None, ..self.observe(0) }
    }

    fn public_of(obs: &Observation) -> Observation {
        Observation { agent: None, ..obs.clone() }
    }

    fn step(&mut self, action: usize) -> Result<Step, EnvError> {
        self.check_legal(action)?;
        let outcomes = &self.nodes[self.node].actions[action];
        let u: f64 = self.rng.gen();
        let mut acc = 0.0;
        let mut pick = outcomes.len() - 1;
        for (i, o) in outcomes.iter().enumerate() {
            acc += o.prob;
            if u < acc {
                pick = i;
                break;
            }
        }
        let o = &outcomes[pick];
        let reward = o.reward;
        self.node = o.child;
        self.turn += 1;
        Ok(Step { reward, terminated: self.is_terminal() })
    }

    fn reseed(&mut self, seed: u64) {
        self.rng = Pcg64Mcg::seed_from_u64(seed);
    }

    fn chance_outcomes(&self, action: usize) -> Option<Result<Vec<Branch<Self>>, EnvError>> {
        if let Err(e) = self.check_legal(action) {
            return Some(Err(e));
        }
        let mut base = self.clone();
        let _: f64 = base.rng.gen();
        Some(Ok(self.nodes[self.node].actions[action]
            .iter()
            .map(|o| {
                let mut s = base.clone();
                s.node = o.child;
                s.turn += 1;
                let step = Step { reward: o.reward, terminated: s.is_terminal() };
                Branch { prob: o.prob, state: s, step }
            })
            .collect()))
    }

    fn state_key(&self) -> u64 {
        crate::math::fnv1a((self.node as u64).to_le_bytes().into_iter().chain(self.turn.to_le_bytes()))
    }
}

impl Enumerable for Bandit {
    fn initial_distribution(&self) -> Result<Vec<(f64, Self)>, EnvError> {
        Ok(vec![(1.0, self.fresh(0))])
    }
}

impl Enumerable for DecisionTree {
    fn initial_distribution(&self) -> Result<Vec<(f64, Self)>, EnvError> {
        Ok(vec![(1.0, self.fresh(0))])
    }
}
