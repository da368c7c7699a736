//! Blueprint training and global-buffer regeneration.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;
use rlsearch_core::blueprint::policy::{epsilon_greedy, greedy_q};
use rlsearch_core::blueprint::{CurveRow, PpoTrainer, QTrainer, ReplayBuffer, TrainerKind, Transition};
use rlsearch_core::clock::Clock;
use rlsearch_core::env::{self, AnyState, EnvKind, Simulator};
use rlsearch_core::nn::NetParams;

use crate::checkpoint::{Checkpoint, Meta};
use crate::config::{check_version, StopRule, TrainConfig};
use crate::error::Result;
use crate::results::write_jsonl;

#[derive(Clone, Debug)]
pub struct TrainOutput {
    /// File stem and checkpoint: `policy` and `value` for PPO, `q` for Q-learning.
    pub checkpoints: Vec<(String, Checkpoint)>,
    pub curve: Vec<CurveRow>,
    pub samples: u64,
    pub stopped_early: bool,
}

impl TrainOutput {
    pub fn net(&self, name: &str) -> Option<NetParams> {
        self.checkpoints.iter().find(|(n, _)| n == name).and_then(|(_, c)| c.to_net().ok())
    }

    /// Write `<stem>.json` for every network and `curve.jsonl`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(crate::error::Error::io(dir))?;
        let mut paths = Vec::new();
        for (name, c) in &self.checkpoints {
            let p = dir.join(format!("{name}.json"));
            c.save(&p)?;
            paths.push(p);
        }
        let p = dir.join("curve.jsonl");
        write_jsonl(&p, &self.curve)?;
        paths.push(p);
        Ok(paths)
    }
}

/// Greedy choices (a, b after a0, b after a1) of a CoordGame Q net.
pub fn coord_convention(q: &NetParams) -> Result<(usize, usize, usize)> {
    let g = env::CoordGame::reset(0);
    let a = greedy_q(q, &g.observe(0))?;
    let reply = |first| -> Result<usize> {
        let mut s = g.clone();
        s.step(first)?;
        Ok(greedy_q(q, &s.observe(1))?)
    };
    Ok((a, reply(0)?, reply(1)?))
}

/// Train a blueprint on `kind` for `cfg.budget` steps (or `budget` when given).
pub fn train_blueprint(kind: EnvKind, trainer: TrainerKind, cfg: &TrainConfig, budget: Option<u64>, clock: &dyn Clock) -> Result<TrainOutput> {
    check_version(cfg.version)?;
    let template = env::reset(kind, cfg.seed);
    let budget = budget.unwrap_or(cfg.budget);
    let meta = |samples| Meta { env: Some(kind), trainer: Some(format!("{trainer:?}").to_lowercase()), samples, seed: cfg.seed, note: String::new() };
    match trainer {
        TrainerKind::Ppo => {
            let mut t = PpoTrainer::new(template, cfg.ppo.clone(), cfg.seed)?;
            t.run(budget, clock)?;
            Ok(TrainOutput {
                checkpoints: vec![("policy".into(), Checkpoint::new(&t.policy, meta(t.samples))), ("value".into(), Checkpoint::new(&t.value, meta(t.samples)))],
                curve: t.curve,
                samples: t.samples,
                stopped_early: false,
            })
        }
        TrainerKind::Qlearn => {
            let mut t = QTrainer::new(template, cfg.qlearn.clone(), cfg.seed)?;
            let stopped = match &cfg.stop {
                None => {
                    t.run(budget, clock)?;
                    false
                }
                Some(StopRule::CoordConvention { min_samples }) => {
                    let min = *min_samples;
                    t.run_until(budget, clock, |t| t.samples >= min && coord_convention(&t.online).is_ok_and(|c| c == (0, 0, 0)))?
                }
            };
            Ok(TrainOutput { checkpoints: vec![("q".into(), Checkpoint::new(&t.online, meta(t.samples)))], curve: t.curve, samples: t.samples, stopped_early: stopped })
        }
    }
}

/// Fill a buffer with `n` team transitions from epsilon-greedy blueprint play
/// on fresh episodes of `template`'s environment.
pub fn regenerate_buffer<S: Simulator>(template: &S, theta: &NetParams, n: usize, explore: f64, seed: u64) -> Result<ReplayBuffer> {
    let mut rng = Pcg64Mcg::seed_from_u64(seed);
    let mut buf = ReplayBuffer::new(n.max(1));
    let mut s = template.fresh(rng.gen());
    while buf.len() < n {
        if s.is_terminal() {
            s = template.fresh(rng.gen());
        }
        let obs = s.observe(s.current_agent());
        let a = epsilon_greedy(theta, &obs, explore, &mut rng)?;
        let step = s.step(a)?;
        let next = s.observe(s.current_agent());
        buf.push(Transition {
            obs: obs.features,
            legal: obs.legal,
            action: a,
            reward: step.reward,
            next_obs: next.features,
            next_legal: next.legal,
            terminated: step.terminated,
        });
    }
    Ok(buf)
}

/// Continue PPO training of existing networks for `budget` steps.
pub fn continue_ppo(template: AnyState, cfg: &TrainConfig, policy: NetParams, value: NetParams, budget: u64, seed: u64, clock: &dyn Clock) -> Result<(NetParams, NetParams)> {
    let mut t = PpoTrainer::from_nets(template, cfg.ppo.clone(), policy, value, seed)?;
    t.run(budget, clock)?;
    Ok((t.policy, t.value))
}
