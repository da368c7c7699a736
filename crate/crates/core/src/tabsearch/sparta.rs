use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SearchError;
use crate::belief::ParticleBelief;
use crate::blueprint::policy::greedy_q;
use crate::env::{Observation, Simulator};
use crate::math;
use crate::nn::NetParams;

/// Monte Carlo action value with its standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QEstimate {
    pub mean: f64,
    pub sem: f64,
    pub count: u64,
    /// Fraction of rollouts where the probed action was illegal in the sampled
    /// state and the blueprint action was used instead.
    pub flagged: f64,
    /// Environment steps consumed.
    pub steps: u64,
}

impl QEstimate {
    pub fn from_returns(returns: &[f64], flagged: u64, steps: u64) -> Self {
        let (mean, sem) = math::mean_sem(returns);
        let n = returns.len() as u64;
        Self { mean, sem, count: n, flagged: if n == 0 { 0.0 } else { flagged as f64 / n as f64 }, steps }
    }
}

/// Every agent acts greedily on `blueprint` until the episode ends. Returns the
/// summed reward and the number of steps taken.
pub fn blueprint_rollout<S: Simulator>(s: &mut S, blueprint: &NetParams) -> Result<(f64, u64), SearchError> {
    let mut ret = 0.0;
    let mut steps = 0;
    while !s.is_terminal() {
        let a = greedy_q(blueprint, &s.observe(s.current_agent()))?;
        ret += s.step(a)?.reward;
        steps += 1;
    }
    Ok((ret, steps))
}

/// Value of taking `action` now and following the blueprint afterwards,
/// averaged over `rollouts` belief samples.
pub fn sparta_q<S: Simulator, R: Rng + ?Sized>(
    belief: &ParticleBelief<S>,
    action: usize,
    blueprint: &NetParams,
    rollouts: usize,
    rng: &mut R,
) -> Result<QEstimate, SearchError> {
    let mut returns = Vec::with_capacity(rollouts);
    let (mut flagged, mut steps) = (0, 0);
    for _ in 0..rollouts {
        let mut s = belief.sample(rng)?;
        let mut a = action;
        if s.check_legal(a).is_err() {
            a = greedy_q(blueprint, &s.observe(s.current_agent()))?;
            flagged += 1;
        }
        let first = s.step(a)?.reward;
        let (rest, n) = blueprint_rollout(&mut s, blueprint)?;
        steps += n + 1;
        returns.push(first + rest);
    }
    Ok(QEstimate::from_returns(&returns, flagged, steps))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpartaDecision {
    pub action: usize,
    pub blueprint_action: usize,
    /// Per action; `None` for actions illegal in the true observation.
    pub estimates: Vec<Option<QEstimate>>,
    pub steps: u64,
}

impl SpartaDecision {
    pub fn deviated(&self) -> bool {
        self.action != self.blueprint_action
    }
}

/// Deviate from the blueprint action only if the best estimate beats the
/// blueprint's by strictly more than `eps`.
pub fn sparta_select<S: Simulator, R: Rng + ?Sized>(
    belief: &ParticleBelief<S>,
    obs: &Observation,
    blueprint: &NetParams,
    eps: f64,
    rollouts: usize,
    rng: &mut R,
) -> Result<SpartaDecision, SearchError> {
    let bp = greedy_q(blueprint, obs)?;
    let mut estimates = Vec::with_capacity(obs.legal.len());
    let mut steps = 0;
    for (a, &legal) in obs.legal.iter().enumerate() {
        if legal {
            let q = sparta_q(belief, a, blueprint, rollouts, rng)?;
            steps += q.steps;
            estimates.push(Some(q));
        } else {
            estimates.push(None);
        }
    }
    let means: Vec<f64> = estimates.iter().map(|e| e.map_or(f64::NEG_INFINITY, |q| q.mean)).collect();
    let best = math::argmax_masked(&means, &obs.legal).unwrap_or(bp);
    let bp_mean = means[bp];
    let action = if means[best] - bp_mean > eps { best } else { bp };
    Ok(SpartaDecision { action, blueprint_action: bp, estimates, steps })
}
