//! Experiment orchestration: paired multi-mode comparisons, the weak-blueprint
//! study and summary emission.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;
use rlsearch_core::blueprint::ReplayBuffer;
use rlsearch_core::clock::{Clock, NoClock};
use rlsearch_core::env::{self, AnyState, EnvKind, Simulator};
use rlsearch_core::math;
use rlsearch_core::nn::{HeadKind, NetParams};
use rlsearch_core::rlsearch::{run_episode, Blueprint, EpisodeReport, Mode, RunConfig, SearchConfig};
use serde::{Deserialize, Serialize};

use crate::checkpoint::load_net;
use crate::clock::MonotonicClock;
use crate::config::{BufferSource, Budget, ExperimentConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::results::{read_jsonl_lenient, to_jsonl, write_jsonl, EpisodeRow, MoveRow};
use crate::train::{continue_ppo, regenerate_buffer};

/// Environment seed of episode `i`; identical across modes.
pub fn episode_seed(master: u64, i: usize) -> u64 {
    Pcg64Mcg::seed_from_u64(master.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))).gen()
}

fn controller_seed(env_seed: u64) -> u64 {
    env_seed ^ 0xD1B5_4A32_D192_ED03
}

/// Blueprint networks owned by the harness.
#[derive(Clone, Debug)]
pub struct Nets {
    pub net: NetParams,
    pub value: Option<NetParams>,
    pub buffer: Option<ReplayBuffer>,
}

impl Nets {
    pub fn blueprint(&self) -> Blueprint<'_> {
        Blueprint { net: &self.net, value: self.value.as_ref(), buffer: self.buffer.as_ref() }
    }

    pub fn load(kind: EnvKind, blueprint: &Path, value: Option<&Path>, buffer: &BufferSource) -> Result<Self> {
        let spec = env::reset(kind, 0).spec();
        let net = load_net(blueprint, &spec, None)?;
        if net.arch.head == HeadKind::StateValue {
            return Err(Error::Checkpoint("the blueprint must be a policy or Q network".into()));
        }
        let value = value.map(|p| load_net(p, &spec, Some(HeadKind::StateValue))).transpose()?;
        let buffer = match buffer {
            BufferSource::None => None,
            BufferSource::Regenerate { transitions, explore, seed } => {
                if net.arch.head != HeadKind::QValues {
                    return Err(Error::Config("buffer regeneration needs a Q network blueprint".into()));
                }
                Some(regenerate_buffer(&env::reset(kind, *seed), &net, *transitions, *explore, *seed)?)
            }
        };
        Ok(Self { net, value, buffer })
    }
}

/// Tighten `run` so a move stays within the per-move sample cap.
pub fn apply_budget(run: &RunConfig, kind: EnvKind, head: HeadKind, budget: &Budget) -> Result<RunConfig> {
    let mut r = run.clone();
    let Some(cap) = budget.max_samples_per_move else { return Ok(r) };
    let spec = env::reset(kind, 0).spec();
    let len = spec.max_episode_len as u64;
    let too_small = || Error::Config(format!("sample cap {cap} is too small for mode {}", run.mode.name()));
    match r.mode {
        Mode::Blueprint => {}
        Mode::Mcts => r.mcts.step_budget = cap,
        Mode::Sparta => {
            let per = spec.num_actions as u64 * len;
            r.sparta_rollouts = r.sparta_rollouts.min((cap / per) as usize);
            if r.sparta_rollouts == 0 {
                return Err(too_small());
            }
        }
        Mode::RlSingle if head == HeadKind::PolicyLogits => {
            // One iteration costs at most M*H steps; a replan covers H moves.
            r.search.gradient_steps = r.search.gradient_steps.min((cap / r.search.rollouts as u64) as usize);
        }
        Mode::RlSingle | Mode::RlMulti => {
            let collect = (r.search.rollouts * r.search.horizon) as u64;
            let e = cap.checked_sub(collect).map(|rest| rest / (2 * len)).unwrap_or(0);
            r.search.eval_rollouts = r.search.eval_rollouts.min(e as usize);
            if r.search.eval_rollouts == 0 {
                return Err(too_small());
            }
        }
    }
    Ok(r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub mode: Mode,
    pub mean_return: f64,
    pub sem: f64,
    pub mean_samples_per_move: f64,
    pub mean_wall_ms_per_move: f64,
    pub episodes: usize,
}

impl ComparisonRow {
    pub fn from_rows(mode: Mode, rows: &[EpisodeRow]) -> Self {
        let rets: Vec<f64> = rows.iter().map(|r| r.ret).collect();
        let (mean_return, sem) = math::mean_sem(&rets);
        let steps = rows.iter().map(|r| r.steps).sum::<u64>().max(1) as f64;
        Self {
            mode,
            mean_return,
            sem,
            mean_samples_per_move: rows.iter().map(|r| r.samples).sum::<u64>() as f64 / steps,
            mean_wall_ms_per_move: rows.iter().map(|r| r.wall_ms).sum::<u64>() as f64 / steps,
            episodes: rows.len(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub episodes: Vec<EpisodeRow>,
    pub moves: Vec<MoveRow>,
    pub reports: Vec<(Mode, u64, EpisodeReport)>,
}

impl Comparison {
    pub fn row(&self, mode: Mode) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.mode == mode)
    }

    pub fn episodes_of(&self, mode: Mode) -> Vec<&EpisodeRow> {
        self.episodes.iter().filter(|r| r.mode == mode).collect()
    }

    pub fn results_jsonl(&self) -> String {
        to_jsonl(&self.episodes)
    }
}

/// Run one episode of `template`'s environment per seed.
fn play(kind: EnvKind, nets: &Nets, run: &RunConfig, seeds: &[u64], deterministic: bool) -> Result<Vec<(u64, EpisodeReport)>> {
    let one = |&seed: &u64| -> Result<(u64, EpisodeReport)> {
        let start = env::reset(kind, seed);
        let clock: Box<dyn Clock> = if deterministic { Box::new(NoClock) } else { Box::new(MonotonicClock::start()) };
        Ok((seed, run_episode(start, &nets.blueprint(), run, clock.as_ref(), controller_seed(seed))?))
    };
    if deterministic {
        seeds.iter().map(one).collect()
    } else {
        seeds.par_iter().map(one).collect()
    }
}

/// Evaluate `runs` on the same `episodes` environment seeds.
pub fn compare(kind: EnvKind, nets: &Nets, runs: &[RunConfig], budget: &Budget, episodes: usize, master: u64, deterministic: bool) -> Result<Comparison> {
    let seeds: Vec<u64> = (0..episodes).map(|i| episode_seed(master, i)).collect();
    let mut out = Comparison::default();
    for run in runs {
        let run = apply_budget(run, kind, nets.net.arch.head, budget)?;
        let played = play(kind, nets, &run, &seeds, deterministic)?;
        let rows: Vec<EpisodeRow> = played.iter().map(|(s, r)| EpisodeRow::new(*s, run.mode, r)).collect();
        out.rows.push(ComparisonRow::from_rows(run.mode, &rows));
        out.episodes.extend(rows);
        for (seed, rep) in played {
            out.moves.extend(rep.moves.iter().map(|m| MoveRow { seed, mode: run.mode, log: m.clone() }));
            out.reports.push((run.mode, seed, rep));
        }
    }
    Ok(out)
}

/// Load the config's networks, compare every mode and write
/// `results.jsonl`, `comparison.json` and `moves/moves.jsonl` under `out_dir`.
pub fn run_comparison(cfg: &ExperimentConfig, deterministic: bool) -> Result<Comparison> {
    cfg.validate()?;
    let nets = Nets::load(cfg.env, &cfg.blueprint, cfg.value.as_deref(), &cfg.buffer)?;
    let runs: Vec<RunConfig> = cfg.modes.iter().map(|m| cfg.run_for(*m)).collect();
    let c = compare(cfg.env, &nets, &runs, &cfg.budget, cfg.episodes, cfg.seed, deterministic)?;
    write_comparison(&cfg.out_dir, &c)?;
    Ok(c)
}

pub fn write_comparison(dir: &Path, c: &Comparison) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    write_jsonl(&dir.join("results.jsonl"), &c.episodes)?;
    write_jsonl(&dir.join("moves").join("moves.jsonl"), &c.moves)?;
    let p = dir.join("comparison.json");
    fs::write(&p, serde_json::to_string_pretty(&c.rows).expect("rows serialize")).map_err(Error::io(&p))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakStudyConfig {
    pub version: u32,
    /// Extra samples per episode.
    pub budgets: Vec<u64>,
    pub seeds: Vec<u64>,
    pub episodes_per_seed: usize,
    /// PPO settings for continued training.
    pub train: TrainConfig,
    /// Replanning settings; `gradient_steps` is derived from each budget.
    pub search: SearchConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakRow {
    pub budget: u64,
    pub continued_mean: f64,
    pub continued_sem: f64,
    pub finetune_mean: f64,
    pub finetune_sem: f64,
    /// Fine-tuning samples actually spent per episode.
    pub finetune_samples: f64,
    pub gradient_steps: usize,
}

/// For each budget `b`: continue PPO training for `b` samples, and separately
/// fine-tune at decision time with `b` samples per episode on average.
/// Both arms play the same episode seeds.
pub fn weak_blueprint_study(kind: EnvKind, policy: &NetParams, value: &NetParams, cfg: &WeakStudyConfig, deterministic: bool) -> Result<Vec<WeakRow>> {
    crate::config::check_version(cfg.version)?;
    let clock = NoClock;
    let base = RunConfig { mode: Mode::Blueprint, search: cfg.search.clone(), ..RunConfig::default() };
    let seeds_for = |s: u64| -> Vec<u64> { (0..cfg.episodes_per_seed).map(|i| episode_seed(s, i)).collect() };
    let weak = Nets { net: policy.clone(), value: Some(value.clone()), buffer: None };
    let mut lengths = Vec::new();
    for &s in &cfg.seeds {
        lengths.extend(play(kind, &weak, &base, &seeds_for(s), deterministic)?.into_iter().map(|(_, r)| r.steps as f64));
    }
    let mean_len = math::mean_sem(&lengths).0.max(1.0);
    let h = cfg.search.horizon as f64;
    let per_iter = (cfg.search.horizon * cfg.search.rollouts) as f64;
    let mut out = Vec::new();
    for &b in &cfg.budgets {
        let replans = (mean_len / h).ceil();
        let n = (b as f64 / (replans * per_iter)).round() as usize;
        let fine = RunConfig { mode: Mode::RlSingle, search: SearchConfig { gradient_steps: n, ..cfg.search.clone() }, ..RunConfig::default() };
        let (mut cont, mut ft, mut spent) = (Vec::new(), Vec::new(), Vec::new());
        for &s in &cfg.seeds {
            let seeds = seeds_for(s);
            let (p, v) = continue_ppo(env::reset(kind, s), &cfg.train, policy.clone(), value.clone(), b, s, &clock)?;
            let trained = Nets { net: p, value: Some(v), buffer: None };
            cont.extend(play(kind, &trained, &base, &seeds, deterministic)?.into_iter().map(|(_, r)| r.ret));
            for (_, r) in play(kind, &weak, &fine, &seeds, deterministic)? {
                ft.push(r.ret);
                spent.push(r.samples as f64);
            }
        }
        let (cm, cs) = math::mean_sem(&cont);
        let (fm, fs) = math::mean_sem(&ft);
        out.push(WeakRow {
            budget: b,
            continued_mean: cm,
            continued_sem: cs,
            finetune_mean: fm,
            finetune_sem: fs,
            finetune_samples: math::mean_sem(&spent).0,
            gradient_steps: n,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub source: String,
    pub mode: Mode,
    pub budget_samples: f64,
    pub budget_ms: f64,
    pub mean_return: f64,
    pub sem: f64,
    pub episodes: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub skipped: usize,
}

pub const SUMMARY_HEADER: &str = "mode,budget_samples,budget_ms,mean_return,sem";

impl Summary {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(SUMMARY_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{},{}\n", r.mode.name(), r.budget_samples, r.budget_ms, r.mean_return, r.sem));
        }
        s
    }
}

/// Aggregate every `*.jsonl` file directly in `dir` into one row per (file,
/// mode), then write `summary.json` and `summary.csv` there.
pub fn emit_summary(dir: &Path) -> Result<Summary> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(Error::io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    let mut summary = Summary::default();
    for f in &files {
        let (rows, skipped) = read_jsonl_lenient::<EpisodeRow>(f)?;
        summary.skipped += skipped;
        let mut by_mode: BTreeMap<Mode, Vec<EpisodeRow>> = BTreeMap::new();
        for r in rows {
            by_mode.entry(r.mode).or_default().push(r);
        }
        let source = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        for (mode, rows) in by_mode {
            let c = ComparisonRow::from_rows(mode, &rows);
            summary.rows.push(SummaryRow {
                source: source.clone(),
                mode,
                budget_samples: c.mean_samples_per_move,
                budget_ms: c.mean_wall_ms_per_move,
                mean_return: c.mean_return,
                sem: c.sem,
                episodes: c.episodes,
            });
        }
    }
    let p = dir.join("summary.json");
    fs::write(&p, serde_json::to_string_pretty(&summary).expect("summary serializes")).map_err(Error::io(&p))?;
    let p = dir.join("summary.csv");
    fs::write(&p, summary.to_csv()).map_err(Error::io(&p))?;
    Ok(summary)
}

/// Environment template for `kind`.
pub fn template(kind: EnvKind) -> AnyState {
    env::reset(kind, 0)
}
