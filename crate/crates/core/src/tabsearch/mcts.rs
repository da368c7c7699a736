use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SearchError;
use crate::blueprint::policy::{max_q, probs, state_value};
use crate::env::Simulator;
use crate::math;
use crate::nn::NetParams;

/// Action priors and leaf values for tree search.
pub trait Guide<S> {
    /// Probabilities over all actions, zero for illegal ones.
    fn prior(&self, s: &S) -> Result<Vec<f64>, SearchError>;
    fn value(&self, s: &S) -> Result<f64, SearchError>;
}

/// Uniform priors over legal actions and zero leaf values.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformGuide;

impl<S: Simulator> Guide<S> for UniformGuide {
    fn prior(&self, s: &S) -> Result<Vec<f64>, SearchError> {
        let legal = s.legal_actions();
        let n = legal.iter().filter(|&&l| l).count().max(1) as f64;
        Ok(legal.iter().map(|&l| if l { 1.0 / n } else { 0.0 }).collect())
    }

    fn value(&self, _s: &S) -> Result<f64, SearchError> {
        Ok(0.0)
    }
}

#[derive(Clone, Copy, Debug)]
pub enum LeafValue<'a> {
    /// A state-value network.
    Value(&'a NetParams),
    /// Largest legal output of a Q network.
    MaxQ(&'a NetParams),
    Zero,
}

/// Priors from the softmax of a blueprint network, leaf values from `leaf`.
#[derive(Clone, Copy, Debug)]
pub struct NetGuide<'a> {
    pub policy: &'a NetParams,
    pub leaf: LeafValue<'a>,
}

impl<S: Simulator> Guide<S> for NetGuide<'_> {
    fn prior(&self, s: &S) -> Result<Vec<f64>, SearchError> {
        Ok(probs(self.policy, &s.observe(s.current_agent()))?)
    }

    fn value(&self, s: &S) -> Result<f64, SearchError> {
        let obs = s.observe(s.current_agent());
        Ok(match self.leaf {
            LeafValue::Value(v) => state_value(v, &obs)?,
            LeafValue::MaxQ(q) => max_q(q, &obs)?,
            LeafValue::Zero => 0.0,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MctsConfig {
    pub simulations: usize,
    pub depth_limit: usize,
    pub c: f64,
    pub beta: f64,
    /// Keep the subtree of the executed action between moves.
    pub amortize: bool,
    /// Stop early once this many simulator steps are spent; 0 means no cap.
    pub step_budget: u64,
}

impl Default for MctsConfig {
    fn default() -> Self {
        Self { simulations: 1000, depth_limit: 100, c: 5.0, beta: 0.1, amortize: false, step_budget: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MctsNode {
    pub key: u64,
    pub n: Vec<u32>,
    pub q: Vec<f64>,
    pub prior: Vec<f64>,
    pub legal: Vec<bool>,
    /// (action, key of the sampled successor) to arena index.
    pub children: BTreeMap<(usize, u64), usize>,
}

impl MctsNode {
    pub fn new(key: u64, prior: Vec<f64>, legal: Vec<bool>) -> Self {
        let k = legal.len();
        Self { key, n: vec![0; k], q: vec![0.0; k], prior, legal, children: BTreeMap::new() }
    }

    pub fn visits(&self) -> u32 {
        self.n.iter().sum()
    }
}

/// `Q + c * prior^beta * sqrt(max(sum N, 1)) / (1 + N)` for one action.
pub fn puct_score(node: &MctsNode, a: usize, c: f64, beta: f64) -> f64 {
    let total = node.visits().max(1) as f64;
    node.q[a] + c * math::powf(node.prior[a], beta) * math::sqrt(total) / (1.0 + node.n[a] as f64)
}

/// Highest PUCT score among legal actions; ties go to the lowest index.
pub fn puct_select(node: &MctsNode, c: f64, beta: f64) -> Option<usize> {
    let scores: Vec<f64> = (0..node.n.len()).map(|a| puct_score(node, a, c, beta)).collect();
    math::argmax_masked(&scores, &node.legal)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootStats {
    pub visits: Vec<u32>,
    pub q: Vec<f64>,
    pub prior: Vec<f64>,
    pub simulations: usize,
    pub nodes: usize,
    pub steps: u64,
}

/// PUCT search tree over an arena of nodes, keyed open-loop over chance.
#[derive(Clone, Debug)]
pub struct Mcts {
    pub cfg: MctsConfig,
    nodes: Vec<MctsNode>,
    root: Option<usize>,
}

impl Mcts {
    pub fn new(cfg: MctsConfig) -> Self {
        Self { cfg, nodes: Vec::new(), root: None }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> Option<&MctsNode> {
        self.root.map(|i| &self.nodes[i])
    }

    pub fn nodes(&self) -> &[MctsNode] {
        &self.nodes
    }

    /// Run the configured number of simulations from `state` and return the
    /// most visited root action.
    pub fn search<S: Simulator, G: Guide<S>, R: Rng + ?Sized>(
        &mut self,
        state: &S,
        guide: &G,
        rng: &mut R,
    ) -> Result<(usize, RootStats), SearchError> {
        if state.is_terminal() {
            return Err(SearchError::TerminalRoot);
        }
        let key = state.state_key();
        let reuse = self.cfg.amortize && self.root.is_some_and(|r| self.nodes[r].key == key);
        if !reuse {
            self.nodes.clear();
            self.nodes.push(MctsNode::new(key, guide.prior(state)?, state.legal_actions()));
            self.root = Some(0);
        }
        let root = self.root.expect("root set");
        let mut steps = 0;
        let mut done = 0;
        while done < self.cfg.simulations && (self.cfg.step_budget == 0 || steps < self.cfg.step_budget) {
            steps += self.simulate(root, state, guide, rng)?;
            done += 1;
        }
        let r = &self.nodes[root];
        let visits: Vec<f64> = r.n.iter().map(|&n| n as f64).collect();
        let action = math::argmax_masked(&visits, &r.legal).ok_or(SearchError::TerminalRoot)?;
        let stats = RootStats {
            visits: r.n.clone(),
            q: r.q.clone(),
            prior: r.prior.clone(),
            simulations: done,
            nodes: self.nodes.len(),
            steps,
        };
        Ok((action, stats))
    }

    fn simulate<S: Simulator, G: Guide<S>, R: Rng + ?Sized>(
        &mut self,
        root: usize,
        state: &S,
        guide: &G,
        rng: &mut R,
    ) -> Result<u64, SearchError> {
        let mut s = state.clone();
        s.reseed(rng.gen());
        let mut node = root;
        let mut path: Vec<(usize, usize, f64)> = Vec::new();
        let mut leaf = 0.0;
        loop {
            let a = puct_select(&self.nodes[node], self.cfg.c, self.cfg.beta).ok_or(SearchError::TerminalRoot)?;
            let r = s.step(a)?.reward;
            path.push((node, a, r));
            if s.is_terminal() {
                break;
            }
            let key = s.state_key();
            match self.nodes[node].children.get(&(a, key)) {
                Some(&child) if path.len() < self.cfg.depth_limit => node = child,
                Some(_) => {
                    leaf = guide.value(&s)?;
                    break;
                }
                None => {
                    let idx = self.nodes.len();
                    self.nodes.push(MctsNode::new(key, guide.prior(&s)?, s.legal_actions()));
                    self.nodes[node].children.insert((a, key), idx);
                    leaf = guide.value(&s)?;
                    break;
                }
            }
        }
        let steps = path.len() as u64;
        let mut g = leaf;
        for (n, a, r) in path.into_iter().rev() {
            g += r;
            let nd = &mut self.nodes[n];
            nd.n[a] += 1;
            nd.q[a] += (g - nd.q[a]) / nd.n[a] as f64;
        }
        Ok(steps)
    }

    /// Move the root to the subtree reached by `action` landing in `next`
    /// (amortized mode only); otherwise the tree is discarded.
    pub fn advance<S: Simulator>(&mut self, action: usize, next: &S) {
        let child = if self.cfg.amortize {
            self.root.and_then(|r| self.nodes[r].children.get(&(action, next.state_key())).copied())
        } else {
            None
        };
        match child {
            Some(c) => self.root = Some(c),
            None => {
                self.nodes.clear();
                self.root = None;
            }
        }
    }
}
