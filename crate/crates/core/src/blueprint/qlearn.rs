use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;
use serde::{Deserialize, Serialize};

use super::loss::bellman_grad;
use super::policy::{epsilon_greedy, greedy_q};
use super::{BlueprintError, CurveRow, ReplayBuffer, Transition};
use crate::clock::Clock;
use crate::env::Simulator;
use crate::math;
use crate::nn::{clip_grad_norm, Arch, HeadKind, NetParams, OptState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub gamma: f64,
    pub batch: usize,
    pub buffer_capacity: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_decay_samples: u64,
    pub learning_starts: u64,
    /// Environment steps per gradient step.
    pub train_every: u64,
    /// Gradient steps between target-network refreshes.
    pub target_refresh: u64,
    pub max_grad_norm: f64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub output_scale: f64,
}

impl Default for QConfig {
    fn default() -> Self {
        Self {
            hidden: alloc::vec![128, 128],
            lr: 5e-4,
            gamma: 1.0,
            batch: 64,
            buffer_capacity: 100_000,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_samples: 200_000,
            learning_starts: 1_000,
            train_every: 4,
            target_refresh: 500,
            max_grad_norm: 10.0,
            eval_every: 20_000,
            eval_episodes: 200,
            output_scale: 0.1,
        }
    }
}

impl QConfig {
    pub fn validate(&self) -> Result<(), BlueprintError> {
        let bad = |m: &str| Err(BlueprintError::Config(m.into()));
        if self.batch == 0 || self.buffer_capacity == 0 || self.train_every == 0 || self.target_refresh == 0 {
            return bad("batch, buffer_capacity, train_every and target_refresh must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.eps_start) || !(0.0..=1.0).contains(&self.eps_end) {
            return bad("gamma and exploration rates must lie in [0, 1]");
        }
        if self.lr <= 0.0 {
            return bad("lr must be positive");
        }
        Ok(())
    }

    pub fn epsilon_at(&self, samples: u64) -> f64 {
        if self.eps_decay_samples == 0 || samples >= self.eps_decay_samples {
            return self.eps_end;
        }
        let f = samples as f64 / self.eps_decay_samples as f64;
        self.eps_start + f * (self.eps_end - self.eps_start)
    }
}

/// Shared-network Q-learning with double-Q targets and uniform replay. Every
/// agent acts greedily on its own observation; each transition bootstraps
/// from the observation of whoever acts next (the team value).
#[derive(Clone, Debug)]
pub struct QTrainer<S> {
    pub cfg: QConfig,
    pub online: NetParams,
    pub target: NetParams,
    pub buffer: ReplayBuffer,
    pub curve: Vec<CurveRow>,
    pub samples: u64,
    pub grad_steps: u64,
    opt: OptState,
    template: S,
    env: S,
    rng: Pcg64Mcg,
    episode_return: f64,
    finished: Vec<f64>,
    next_eval: u64,
}

impl<S: Simulator> QTrainer<S> {
    pub fn new(template: S, cfg: QConfig, seed: u64) -> Result<Self, BlueprintError> {
        let spec = template.spec();
        let mut rng = Pcg64Mcg::seed_from_u64(seed);
        let arch = Arch::default_for(HeadKind::QValues, spec.obs_len, spec.num_actions).with_hidden(cfg.hidden.clone());
        let online = NetParams::init(arch, cfg.output_scale, &mut rng);
        Self::from_net(template, cfg, online, rng.gen())
    }

    pub fn from_net(template: S, cfg: QConfig, online: NetParams, seed: u64) -> Result<Self, BlueprintError> {
        cfg.validate()?;
        let mut rng = Pcg64Mcg::seed_from_u64(seed);
        let env = template.fresh(rng.gen());
        Ok(Self {
            opt: OptState::for_net(&online, cfg.lr),
            target: online.clone(),
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            next_eval: cfg.eval_every,
            cfg,
            online,
            curve: Vec::new(),
            samples: 0,
            grad_steps: 0,
            template,
            env,
            rng,
            episode_return: 0.0,
            finished: Vec::new(),
        })
    }

    /// Train for `budget` more environment steps.
    pub fn run(&mut self, budget: u64, clock: &dyn Clock) -> Result<(), BlueprintError> {
        self.run_until(budget, clock, |_| false).map(|_| ())
    }

    /// Train for up to `budget` steps, stopping after any evaluation where
    /// `stop` returns true. Returns whether it stopped early.
    pub fn run_until(
        &mut self,
        budget: u64,
        clock: &dyn Clock,
        mut stop: impl FnMut(&Self) -> bool,
    ) -> Result<bool, BlueprintError> {
        let start = clock.elapsed_ms();
        let target = self.samples + budget;
        while self.samples < target {
            self.env_step()?;
            if self.samples >= self.cfg.learning_starts && self.samples.is_multiple_of(self.cfg.train_every) {
                self.grad_step()?;
            }
            if self.cfg.eval_every > 0 && self.samples >= self.next_eval {
                self.next_eval += self.cfg.eval_every;
                let returns = self.evaluate_greedy(self.cfg.eval_episodes)?;
                let (mean, sem) = math::mean_sem(&returns);
                self.curve.push(CurveRow {
                    step: self.grad_steps,
                    mean_return: mean,
                    sem,
                    samples: self.samples,
                    wall_ms: clock.elapsed_ms().saturating_sub(start),
                });
                if stop(self) {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    fn env_step(&mut self) -> Result<(), BlueprintError> {
        let eps = self.cfg.epsilon_at(self.samples);
        let obs = self.env.observe(self.env.current_agent());
        let a = epsilon_greedy(&self.online, &obs, eps, &mut self.rng)?;
        let step = self.env.step(a)?;
        self.samples += 1;
        self.episode_return += step.reward;
        let next = self.env.observe(self.env.current_agent());
        self.buffer.push(Transition {
            obs: obs.features,
            legal: obs.legal,
            action: a,
            reward: step.reward,
            next_obs: next.features,
            next_legal: next.legal,
            terminated: step.terminated,
        });
        if step.terminated {
            self.finished.push(self.episode_return);
            self.episode_return = 0.0;
            self.env = self.template.fresh(self.rng.gen());
        }
        Ok(())
    }

    fn grad_step(&mut self) -> Result<(), BlueprintError> {
        if self.buffer.is_empty() {
            return Ok(());
        }
        let idx: Vec<usize> = (0..self.cfg.batch).filter_map(|_| self.buffer.sample_index(&mut self.rng)).collect();
        let batch: Vec<&Transition> = idx.iter().map(|&i| self.buffer.get(i).expect("sampled index")).collect();
        let (_, mut g) = bellman_grad(&self.online, &self.target, &batch, self.cfg.gamma)?;
        clip_grad_norm(&mut g, self.cfg.max_grad_norm);
        self.opt.step(&mut self.online, &g)?;
        self.grad_steps += 1;
        if self.grad_steps.is_multiple_of(self.cfg.target_refresh) {
            self.target = self.online.clone();
        }
        Ok(())
    }

    /// Greedy self-play returns on fresh episodes (not counted as training samples).
    pub fn evaluate_greedy(&mut self, episodes: usize) -> Result<Vec<f64>, BlueprintError> {
        let mut out = Vec::with_capacity(episodes);
        for _ in 0..episodes {
            let mut s = self.template.fresh(self.rng.gen());
            let mut ret = 0.0;
            while !s.is_terminal() {
                let a = greedy_q(&self.online, &s.observe(s.current_agent()))?;
                ret += s.step(a)?.reward;
            }
            out.push(ret);
        }
        Ok(out)
    }

    pub fn finished_returns(&self) -> &[f64] {
        &self.finished
    }
}
