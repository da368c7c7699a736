//! Two sequential moves: player A then player B, who sees A's choice.
//! Payoff `(a0,b0) = 1`, `(a1,b1) = 2`, mismatches `0`.

use alloc::vec;
use alloc::vec::Vec;

use super::{one_hot, Branch, Enumerable, EnvError, EnvSpec, Observation, Simulator, Step};

pub const PUBLIC_OBS_LEN: usize = 3 + 2;
pub const OBS_LEN: usize = PUBLIC_OBS_LEN + 2;

pub fn payoff(a: usize, b: usize) -> f64 {
    match (a, b) {
        (0, 0) => 1.0,
        (1, 1) => 2.0,
        _ => 0.0,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoordGame {
    turn: u32,
    a: Option<u8>,
    b: Option<u8>,
}

impl CoordGame {
    pub fn reset(_seed: u64) -> Self {
        Self { turn: 0, a: None, b: None }
    }

    pub fn choices(&self) -> (Option<usize>, Option<usize>) {
        (self.a.map(usize::from), self.b.map(usize::from))
    }

    fn features(&self) -> Vec<f64> {
        let mut f = Vec::with_capacity(OBS_LEN);
        one_hot(&mut f, Some(self.turn as usize), 3);
        one_hot(&mut f, self.a.map(usize::from), 2);
        f
    }
}

impl Simulator for CoordGame {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            num_agents: 2,
            num_actions: 2,
            obs_len: OBS_LEN,
            public_obs_len: PUBLIC_OBS_LEN,
            max_episode_len: 2,
            gamma: 1.0,
            fully_observable: true,
        }
    }

    fn fresh(&self, seed: u64) -> Self {
        Self::reset(seed)
    }

    fn turn(&self) -> u32 {
        self.turn
    }

    fn is_terminal(&self) -> bool {
        self.turn >= 2
    }

    fn current_agent(&self) -> usize {
        (self.turn as usize).min(1)
    }

    fn legal_actions(&self) -> Vec<bool> {
        vec![!self.is_terminal(); 2]
    }

    fn observe(&self, agent: usize) -> Observation {
        let mut f = self.features();
        one_hot(&mut f, Some(agent), 2);
        Observation { agent: Some(agent), features: f, legal: self.legal_actions() }
    }

    fn public_observe(&self) -> Observation {
        Observation { agent: None, features: self.features(), legal: self.legal_actions() }
    }

    fn public_of(obs: &Observation) -> Observation {
        Observation { agent: None, features: obs.features[..PUBLIC_OBS_LEN].to_vec(), legal: obs.legal.clone() }
    }

    fn step(&mut self, action: usize) -> Result<Step, EnvError> {
        self.check_legal(action)?;
        if self.turn == 0 {
            self.a = Some(action as u8);
            self.turn = 1;
            Ok(Step { reward: 0.0, terminated: false })
        } else {
            self.b = Some(action as u8);
            self.turn = 2;
            Ok(Step { reward: payoff(self.a.unwrap_or(0) as usize, action), terminated: true })
        }
    }

    fn reseed(&mut self, _seed: u64) {}

    fn chance_outcomes(&self, action: usize) -> Option<Result<Vec<Branch<Self>>, EnvError>> {
        let mut s = self.clone();
        Some(s.step(action).map(|step| vec![Branch { prob: 1.0, state: s, step }]))
    }

    fn state_key(&self) -> u64 {
        crate::math::fnv1a([self.turn as u8, self.a.unwrap_or(9), self.b.unwrap_or(9)])
    }
}

impl Enumerable for CoordGame {
    fn initial_distribution(&self) -> Result<Vec<(f64, Self)>, EnvError> {
        Ok(vec![(1.0, Self::reset(0))])
    }
}
