//! Particle beliefs over trajectories, conditioned on a private or public
//! action-observation history, and an exact enumeration oracle.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Aoh, AohRecord, EnvError, Enumerable, Simulator, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeliefError {
    #[error("no trajectory consistent with the history within the attempt bound")]
    EmptyBelief,
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeliefConfig {
    pub particles: usize,
    /// Rejection rollouts allowed per replenishment.
    pub max_attempts: u64,
    /// Replenish when survivors fall below this fraction of `particles`.
    pub replenish_below: f64,
}

impl Default for BeliefConfig {
    fn default() -> Self {
        Self { particles: 10_000, max_attempts: 1_000_000, replenish_below: 0.1 }
    }
}

#[derive(Clone, Debug)]
pub struct Particle<S> {
    pub traj: Trajectory<S>,
    /// Unnormalized likelihood of the conditioning history along this particle's
    /// chance branches. Survivors and replenished particles share one scale.
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BeliefStats {
    pub deleted: u64,
    pub replenished: u64,
    pub attempts: u64,
}

#[derive(Clone, Debug)]
pub struct ParticleBelief<S> {
    template: S,
    aoh: Aoh,
    particles: Vec<Particle<S>>,
    cfg: BeliefConfig,
    rng: Pcg64Mcg,
    pub stats: BeliefStats,
}

/// Advance `traj` by one conditioning record, filtering chance branches when the
/// environment can enumerate them. Returns the likelihood factor, or `None` on mismatch.
fn advance<S: Simulator, R: Rng + ?Sized>(traj: &mut Trajectory<S>, aoh: &Aoh, rec: &AohRecord, rng: &mut R) -> Option<f64> {
    let cur = traj.last();
    if cur.is_terminal() || cur.current_agent() != rec.actor || cur.check_legal(rec.action).is_err() {
        return None;
    }
    let matches = |s: &S, r: f64| r.to_bits() == rec.reward.to_bits() && s.view(aoh.viewer).same_as(&rec.obs);
    match cur.chance_outcomes(rec.action) {
        Some(Ok(branches)) => {
            let mut keep: Vec<_> = branches.into_iter().filter(|b| b.prob > 0.0 && matches(&b.state, b.step.reward)).collect();
            let total: f64 = keep.iter().map(|b| b.prob).sum();
            if keep.is_empty() {
                return None;
            }
            let mut u = rng.gen::<f64>() * total;
            let mut pick = keep.len() - 1;
            for (i, b) in keep.iter().enumerate() {
                if u < b.prob {
                    pick = i;
                    break;
                }
                u -= b.prob;
            }
            let b = keep.swap_remove(pick);
            traj.push(rec.actor, rec.action, b.step.reward, b.state);
            Some(total)
        }
        Some(Err(_)) => None,
        None => {
            let mut next = cur.clone();
            let step = next.step(rec.action).ok()?;
            if !matches(&next, step.reward) {
                return None;
            }
            traj.push(rec.actor, rec.action, step.reward, next);
            Some(1.0)
        }
    }
}

impl<S: Simulator> ParticleBelief<S> {
    /// Belief at the start of a game, conditioned on the viewer's first observation of `truth`.
    pub fn init(truth: &S, viewer: crate::env::Viewer, cfg: BeliefConfig, seed: u64) -> Result<Self, BeliefError> {
        Self::from_aoh(truth, Aoh::start(truth, viewer), cfg, seed)
    }

    /// Belief conditioned on an arbitrary history, filled by rejection sampling.
    pub fn from_aoh(template: &S, aoh: Aoh, cfg: BeliefConfig, seed: u64) -> Result<Self, BeliefError> {
        let mut b = Self {
            template: template.fresh(0),
            aoh,
            particles: Vec::with_capacity(cfg.particles),
            cfg,
            rng: Pcg64Mcg::seed_from_u64(seed),
            stats: BeliefStats::default(),
        };
        b.replenish()?;
        Ok(b)
    }

    /// Belief built from explicit weighted trajectories, e.g. an exact posterior.
    pub fn from_weighted(template: &S, aoh: Aoh, items: Vec<(Trajectory<S>, f64)>, cfg: BeliefConfig, seed: u64) -> Result<Self, BeliefError> {
        let particles: Vec<_> = items.into_iter().filter(|(_, w)| *w > 0.0).map(|(traj, weight)| Particle { traj, weight }).collect();
        if particles.is_empty() {
            return Err(BeliefError::EmptyBelief);
        }
        Ok(Self { template: template.fresh(0), aoh, particles, cfg, rng: Pcg64Mcg::seed_from_u64(seed), stats: BeliefStats::default() })
    }

    pub fn aoh(&self) -> &Aoh {
        &self.aoh
    }

    pub fn config(&self) -> &BeliefConfig {
        &self.cfg
    }

    pub fn particles(&self) -> &[Particle<S>] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    /// Normalized weights in particle order.
    pub fn weights(&self) -> Vec<f64> {
        let z = self.total_weight();
        self.particles.iter().map(|p| p.weight / z).collect()
    }

    /// Effective sample size `(sum w)^2 / sum w^2`.
    pub fn ess(&self) -> f64 {
        let z = self.total_weight();
        let sq: f64 = self.particles.iter().map(|p| p.weight * p.weight).sum();
        if sq == 0.0 {
            0.0
        } else {
            z * z / sq
        }
    }

    /// Condition on one more record of the history.
    pub fn update(&mut self, rec: AohRecord) -> Result<(), BeliefError> {
        let before = self.particles.len();
        let mut kept = Vec::with_capacity(before);
        for mut p in core::mem::take(&mut self.particles) {
            if let Some(f) = advance(&mut p.traj, &self.aoh, &rec, &mut self.rng) {
                p.weight *= f;
                kept.push(p);
            }
        }
        self.stats.deleted += (before - kept.len()) as u64;
        self.particles = kept;
        self.aoh.records.push(rec);
        if (self.particles.len() as f64) < self.cfg.replenish_below * self.cfg.particles as f64 {
            self.replenish()?;
        }
        if self.particles.is_empty() {
            return Err(BeliefError::EmptyBelief);
        }
        Ok(())
    }

    /// Replay the whole history from fresh initial states until the target count
    /// is reached or the attempt bound runs out.
    fn replenish(&mut self) -> Result<(), BeliefError> {
        let mut attempts = 0;
        let mut added = Vec::new();
        while self.particles.len() + added.len() < self.cfg.particles && attempts < self.cfg.max_attempts {
            attempts += 1;
            let start = self.template.fresh(self.rng.gen());
            if !start.view(self.aoh.viewer).same_as(&self.aoh.initial) {
                continue;
            }
            let mut traj = Trajectory::new(start);
            let mut w = 1.0;
            let ok = self.aoh.records.iter().all(|rec| match advance(&mut traj, &self.aoh, rec, &mut self.rng) {
                Some(f) => {
                    w *= f;
                    true
                }
                None => false,
            });
            if ok {
                added.push(Particle { traj, weight: w });
            }
        }
        self.stats.attempts += attempts;
        self.stats.replenished += added.len() as u64;
        self.particles.extend(added);
        if self.particles.is_empty() {
            return Err(BeliefError::EmptyBelief);
        }
        Ok(())
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize, BeliefError> {
        if self.particles.is_empty() {
            return Err(BeliefError::EmptyBelief);
        }
        let mut u = rng.gen::<f64>() * self.total_weight();
        for (i, p) in self.particles.iter().enumerate() {
            if u < p.weight {
                return Ok(i);
            }
            u -= p.weight;
        }
        Ok(self.particles.len() - 1)
    }

    /// Weighted draw of a particle's current state, returned as an independent
    /// clone with a fresh chance stream.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<S, BeliefError> {
        let i = self.sample_index(rng)?;
        let mut s = self.particles[i].traj.last().clone();
        s.reseed(rng.gen());
        Ok(s)
    }

    pub fn sample_trajectory<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<&Trajectory<S>, BeliefError> {
        Ok(&self.particles[self.sample_index(rng)?].traj)
    }

    /// Normalized weight mass grouped by `key` of each particle's current state.
    pub fn distribution_by<K: Ord>(&self, key: impl Fn(&S) -> K) -> BTreeMap<K, f64> {
        let z = self.total_weight();
        let mut out = BTreeMap::new();
        for p in &self.particles {
            *out.entry(key(p.traj.last())).or_insert(0.0) += p.weight / z;
        }
        out
    }
}

/// Exhaustive posterior over current states consistent with `aoh`, each with
/// one representative trajectory. States with equal `state_key` are merged.
pub fn exact_posterior<S: Enumerable>(template: &S, aoh: &Aoh) -> Result<Vec<(Trajectory<S>, f64)>, BeliefError> {
    let mut layer: Vec<(Trajectory<S>, f64)> = template
        .initial_distribution()?
        .into_iter()
        .filter(|(p, s)| *p > 0.0 && s.view(aoh.viewer).same_as(&aoh.initial))
        .map(|(p, s)| (Trajectory::new(s), p))
        .collect();
    layer = merge(layer);
    for rec in &aoh.records {
        let mut next = Vec::new();
        for (traj, p) in layer {
            let cur = traj.last();
            if cur.is_terminal() || cur.current_agent() != rec.actor || cur.check_legal(rec.action).is_err() {
                continue;
            }
            let branches = match cur.chance_outcomes(rec.action) {
                Some(r) => r?,
                None => {
                    let mut s = cur.clone();
                    let step = s.step(rec.action)?;
                    alloc::vec![crate::env::Branch { prob: 1.0, state: s, step }]
                }
            };
            for b in branches {
                if b.prob > 0.0 && b.step.reward.to_bits() == rec.reward.to_bits() && b.state.view(aoh.viewer).same_as(&rec.obs) {
                    let mut t = traj.clone();
                    t.push(rec.actor, rec.action, b.step.reward, b.state);
                    next.push((t, p * b.prob));
                }
            }
        }
        layer = merge(next);
    }
    let z: f64 = layer.iter().map(|(_, p)| p).sum();
    if layer.is_empty() || z <= 0.0 {
        return Err(BeliefError::EmptyBelief);
    }
    for item in &mut layer {
        item.1 /= z;
    }
    Ok(layer)
}

fn merge<S: Simulator>(items: Vec<(Trajectory<S>, f64)>) -> Vec<(Trajectory<S>, f64)> {
    let mut index: BTreeMap<u64, usize> = BTreeMap::new();
    let mut out: Vec<(Trajectory<S>, f64)> = Vec::new();
    for (t, p) in items {
        let k = t.last().state_key();
        match index.get(&k) {
            Some(&i) => out[i].1 += p,
            None => {
                index.insert(k, out.len());
                out.push((t, p));
            }
        }
    }
    out
}

/// Total-variation distance between two distributions over the same key type.
pub fn total_variation<K: Ord + Clone>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let mut d = 0.0;
    for (k, &pa) in a {
        d += (pa - b.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, &pb) in b {
        if !a.contains_key(k) {
            d += pb;
        }
    }
    d / 2.0
}

#[cfg(test)]
mod tests;
