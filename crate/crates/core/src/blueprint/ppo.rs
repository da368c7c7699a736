use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;
use serde::{Deserialize, Serialize};

use super::loss::{ppo_grad, PpoCoeffs, PpoMinibatch, PpoStats};
use super::policy::{sample_policy, stack, state_value};
use super::{compute_gae, BlueprintError, CurveRow};
use crate::clock::Clock;
use crate::env::{Observation, Simulator};
use crate::math;
use crate::nn::{clip_grad_norm, Arch, HeadKind, NetParams, OptState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub coeffs: PpoCoeffs,
    pub epochs: usize,
    pub rollout_steps: usize,
    pub minibatch: usize,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
    pub output_scale: f64,
    pub curve_window: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            hidden: alloc::vec![128, 128],
            lr: 3e-4,
            gamma: 0.99,
            lambda: 0.95,
            coeffs: PpoCoeffs::default(),
            epochs: 4,
            rollout_steps: 2048,
            minibatch: 256,
            max_grad_norm: 0.5,
            normalize_advantages: true,
            output_scale: 0.01,
            curve_window: 100,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), BlueprintError> {
        let bad = |m: &str| Err(BlueprintError::Config(m.into()));
        if self.epochs == 0 || self.rollout_steps == 0 || self.minibatch == 0 {
            return bad("epochs, rollout_steps and minibatch must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.lambda) {
            return bad("gamma and lambda must lie in [0, 1]");
        }
        if self.lr <= 0.0 || self.coeffs.clip <= 0.0 {
            return bad("lr and clip must be positive");
        }
        Ok(())
    }
}

/// Up to `H` steps from one root, with the quantities PPO needs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RolloutTrajectory {
    pub obs: Vec<Observation>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub logps: Vec<f64>,
    pub terminated: bool,
    /// Value of the state after the last step; `None` exactly when terminated.
    pub bootstrap: Option<f64>,
}

impl RolloutTrajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RolloutBatch {
    pub trajectories: Vec<RolloutTrajectory>,
}

impl RolloutBatch {
    pub fn steps(&self) -> usize {
        self.trajectories.iter().map(|t| t.len()).sum()
    }

    /// Flatten into a PPO minibatch source using GAE per trajectory.
    pub fn to_samples(&self, gamma: f64, lambda: f64) -> Result<PpoMinibatch, BlueprintError> {
        let mut rows: Vec<&[f64]> = Vec::new();
        let mut mb = PpoMinibatch {
            obs: crate::nn::Matrix::zeros(0, 0),
            legal: Vec::new(),
            actions: Vec::new(),
            old_logp: Vec::new(),
            advantages: Vec::new(),
            returns: Vec::new(),
        };
        for t in &self.trajectories {
            let (adv, ret) = compute_gae(&t.rewards, &t.values, t.bootstrap.unwrap_or(0.0), gamma, lambda)?;
            for o in &t.obs {
                rows.push(&o.features);
                mb.legal.push(o.legal.clone());
            }
            mb.actions.extend_from_slice(&t.actions);
            mb.old_logp.extend_from_slice(&t.logps);
            mb.advantages.extend(adv);
            mb.returns.extend(ret);
        }
        mb.obs = stack(&rows)?;
        Ok(mb)
    }
}

/// Collect `m` trajectories of at most `h` steps. Actions come from `policy`,
/// per-step values from `value`, and the truncation bootstrap from `bootstrap_value`.
#[allow(clippy::too_many_arguments)]
pub fn collect_rollouts<S, R, F>(
    mut root: F,
    policy: &NetParams,
    value: &NetParams,
    bootstrap_value: &NetParams,
    m: usize,
    h: usize,
    rng: &mut R,
    samples: &mut u64,
) -> Result<RolloutBatch, BlueprintError>
where
    S: Simulator,
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Result<S, BlueprintError>,
{
    let mut batch = RolloutBatch::default();
    for _ in 0..m {
        let mut s = root(rng)?;
        let mut t = RolloutTrajectory::default();
        while t.len() < h && !s.is_terminal() {
            let obs = s.observe(s.current_agent());
            let (a, lp) = sample_policy(policy, &obs, rng)?;
            let v = state_value(value, &obs)?;
            let step = s.step(a)?;
            *samples += 1;
            t.obs.push(obs);
            t.actions.push(a);
            t.rewards.push(step.reward);
            t.values.push(v);
            t.logps.push(lp);
        }
        t.terminated = s.is_terminal();
        if !t.terminated {
            t.bootstrap = Some(state_value(bootstrap_value, &s.observe(s.current_agent()))?);
        }
        batch.trajectories.push(t);
    }
    Ok(batch)
}

/// Run `epochs` passes of shuffled minibatch PPO updates over `samples`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn ppo_epochs<R: Rng + ?Sized>(
    policy: &mut NetParams,
    value: &mut NetParams,
    popt: &mut OptState,
    vopt: &mut OptState,
    samples: &PpoMinibatch,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<PpoStats, BlueprintError> {
    let n = samples.actions.len();
    if n == 0 {
        return Ok(PpoStats::default());
    }
    let mut adv = samples.advantages.clone();
    if cfg.normalize_advantages && n > 1 {
        let (mean, sem) = math::mean_sem(&adv);
        let std = sem * math::sqrt(n as f64);
        for a in adv.iter_mut() {
            *a = (*a - mean) / (std + 1e-8);
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut last = PpoStats::default();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch) {
            let rows: Vec<&[f64]> = chunk.iter().map(|&i| samples.obs.row(i)).collect();
            let mb = PpoMinibatch {
                obs: stack(&rows)?,
                legal: chunk.iter().map(|&i| samples.legal[i].clone()).collect(),
                actions: chunk.iter().map(|&i| samples.actions[i]).collect(),
                old_logp: chunk.iter().map(|&i| samples.old_logp[i]).collect(),
                advantages: chunk.iter().map(|&i| adv[i]).collect(),
                returns: chunk.iter().map(|&i| samples.returns[i]).collect(),
            };
            let (stats, mut gp, mut gv) = ppo_grad(policy, value, &mb, &cfg.coeffs)?;
            clip_grad_norm(&mut gp, cfg.max_grad_norm);
            clip_grad_norm(&mut gv, cfg.max_grad_norm);
            popt.step(policy, &gp)?;
            vopt.step(value, &gv)?;
            last = stats;
        }
    }
    Ok(last)
}

/// Single-process PPO actor-critic loop over one environment stream.
#[derive(Clone, Debug)]
pub struct PpoTrainer<S> {
    pub cfg: PpoConfig,
    pub policy: NetParams,
    pub value: NetParams,
    pub curve: Vec<CurveRow>,
    pub samples: u64,
    pub iterations: u64,
    pub last_stats: PpoStats,
    popt: OptState,
    vopt: OptState,
    template: S,
    env: S,
    rng: Pcg64Mcg,
    episode_return: f64,
    finished: Vec<f64>,
}

impl<S: Simulator> PpoTrainer<S> {
    pub fn new(template: S, cfg: PpoConfig, seed: u64) -> Result<Self, BlueprintError> {
        let spec = template.spec();
        let mut rng = Pcg64Mcg::seed_from_u64(seed);
        let parch = Arch::default_for(HeadKind::PolicyLogits, spec.obs_len, spec.num_actions).with_hidden(cfg.hidden.clone());
        let varch = Arch::default_for(HeadKind::StateValue, spec.obs_len, 1).with_hidden(cfg.hidden.clone());
        let policy = NetParams::init(parch, cfg.output_scale, &mut rng);
        let value = NetParams::init(varch, 1.0, &mut rng);
        Self::from_nets(template, cfg, policy, value, rng.gen())
    }

    /// Resume from existing networks with fresh optimizer moments.
    pub fn from_nets(template: S, cfg: PpoConfig, policy: NetParams, value: NetParams, seed: u64) -> Result<Self, BlueprintError> {
        cfg.validate()?;
        let mut rng = Pcg64Mcg::seed_from_u64(seed);
        let env = template.fresh(rng.gen());
        Ok(Self {
            popt: OptState::for_net(&policy, cfg.lr),
            vopt: OptState::for_net(&value, cfg.lr),
            cfg,
            policy,
            value,
            curve: Vec::new(),
            samples: 0,
            iterations: 0,
            last_stats: PpoStats::default(),
            template,
            env,
            rng,
            episode_return: 0.0,
            finished: Vec::new(),
        })
    }

    /// Train until `budget` more environment steps have been consumed.
    pub fn run(&mut self, budget: u64, clock: &dyn Clock) -> Result<(), BlueprintError> {
        let start = clock.elapsed_ms();
        let target = self.samples + budget;
        while self.samples < target {
            let len = (self.cfg.rollout_steps as u64).min(target - self.samples) as usize;
            self.iteration(len)?;
            if !self.finished.is_empty() {
                let w = self.finished.len().saturating_sub(self.cfg.curve_window);
                let (mean, sem) = math::mean_sem(&self.finished[w..]);
                self.curve.push(CurveRow {
                    step: self.iterations,
                    mean_return: mean,
                    sem,
                    samples: self.samples,
                    wall_ms: clock.elapsed_ms().saturating_sub(start),
                });
            }
        }
        Ok(())
    }

    fn iteration(&mut self, len: usize) -> Result<(), BlueprintError> {
        let mut batch = RolloutBatch::default();
        let mut cur = RolloutTrajectory::default();
        for _ in 0..len {
            let obs = self.env.observe(self.env.current_agent());
            let (a, lp) = sample_policy(&self.policy, &obs, &mut self.rng)?;
            let v = state_value(&self.value, &obs)?;
            let step = self.env.step(a)?;
            self.samples += 1;
            self.episode_return += step.reward;
            cur.obs.push(obs);
            cur.actions.push(a);
            cur.rewards.push(step.reward);
            cur.values.push(v);
            cur.logps.push(lp);
            if step.terminated {
                cur.terminated = true;
                batch.trajectories.push(core::mem::take(&mut cur));
                self.finished.push(self.episode_return);
                self.episode_return = 0.0;
                self.env = self.template.fresh(self.rng.gen());
            }
        }
        if !cur.is_empty() {
            cur.bootstrap = Some(state_value(&self.value, &self.env.observe(self.env.current_agent()))?);
            batch.trajectories.push(cur);
        }
        let samples = batch.to_samples(self.cfg.gamma, self.cfg.lambda)?;
        self.last_stats = ppo_epochs(
            &mut self.policy,
            &mut self.value,
            &mut self.popt,
            &mut self.vopt,
            &samples,
            &self.cfg,
            &mut self.rng,
        )?;
        self.iterations += 1;
        Ok(())
    }

    pub fn finished_returns(&self) -> &[f64] {
        &self.finished
    }
}
