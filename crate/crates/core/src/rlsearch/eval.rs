use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;
use serde::{Deserialize, Serialize};

use super::{Actor, RlError, Roots};
use crate::env::Simulator;
use crate::math;

/// Which agents use the candidate during the first `horizon` turns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Searcher(usize),
    All,
}

impl Scope {
    pub fn covers(&self, agent: usize) -> bool {
        match self {
            Scope::Searcher(i) => *i == agent,
            Scope::All => true,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean: f64,
    pub sem: f64,
    pub count: u64,
    pub steps: u64,
}

/// Mean forward return over one rollout per seed. Covered agents act with
/// `policy` for the first `horizon` turns, everyone else and every later turn
/// uses `blueprint`. Each seed fixes the root draw, chance and action sampling.
pub fn evaluate_policy<S: Simulator>(
    policy: Actor<'_>,
    blueprint: Actor<'_>,
    roots: Roots<'_, S>,
    scope: Scope,
    horizon: usize,
    seeds: &[u64],
) -> Result<EvalReport, RlError> {
    let mut returns = Vec::with_capacity(seeds.len());
    let mut steps = 0;
    for &seed in seeds {
        let mut rng = Pcg64Mcg::seed_from_u64(seed);
        let mut s = roots.draw(&mut rng)?;
        let t0 = s.turn();
        let mut ret = 0.0;
        while !s.is_terminal() {
            let agent = s.current_agent();
            let actor = if ((s.turn() - t0) as usize) < horizon && scope.covers(agent) { policy } else { blueprint };
            let a = actor.act(&s.observe(agent), &mut rng)?;
            ret += s.step(a)?.reward;
            steps += 1;
        }
        returns.push(ret);
    }
    let (mean, sem) = math::mean_sem(&returns);
    Ok(EvalReport { mean, sem, count: returns.len() as u64, steps })
}

/// Candidate and blueprint evaluated on the same `e` seeds.
pub fn evaluate_pair<S: Simulator, R: Rng + ?Sized>(
    candidate: Actor<'_>,
    blueprint: Actor<'_>,
    roots: Roots<'_, S>,
    scope: Scope,
    horizon: usize,
    e: usize,
    rng: &mut R,
) -> Result<(EvalReport, EvalReport), RlError> {
    let seeds: Vec<u64> = (0..e).map(|_| rng.gen()).collect();
    let c = evaluate_policy(candidate, blueprint, roots, scope, horizon, &seeds)?;
    let b = evaluate_policy(blueprint, blueprint, roots, scope, horizon, &seeds)?;
    Ok((c, b))
}

/// Adopt when the candidate is at least `eps` better.
pub fn gate(candidate: &EvalReport, blueprint: &EvalReport, eps: f64) -> bool {
    candidate.mean - blueprint.mean >= eps
}
