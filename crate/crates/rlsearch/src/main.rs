use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rlsearch::checkpoint::load_net;
use rlsearch::clock::{deterministic_from_env, MonotonicClock};
use rlsearch::config::{self, preset, ExperimentConfig, SearchFile, TrainConfig};
use rlsearch::harness::{self, compare, emit_summary, run_comparison, weak_blueprint_study, Nets, WeakStudyConfig};
use rlsearch::results::{trajectory_rows, write_jsonl};
use rlsearch::train::train_blueprint;
use rlsearch::{Error, Result};
use rlsearch_core::blueprint::TrainerKind;
use rlsearch_core::env::{self, EnvKind, Simulator};
use rlsearch_core::nn::HeadKind;
use rlsearch_core::rlsearch::Mode;

#[derive(Parser)]
#[command(name = "rlsearch", version, about = "Decision-time fine-tuning experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a blueprint and write its checkpoints and curve.
    Train {
        #[arg(long)]
        env: EnvKind,
        #[arg(long, value_parser = parse_trainer)]
        trainer: TrainerKind,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        sample_budget: Option<u64>,
    },
    /// Play episodes with one controller.
    Search {
        #[arg(long)]
        env: EnvKind,
        #[arg(long)]
        mode: Mode,
        #[arg(long)]
        blueprint: PathBuf,
        #[arg(long)]
        value: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-step trajectory records here.
        #[arg(long)]
        trajectories: Option<PathBuf>,
    },
    /// Compare modes on paired episodes.
    Compare {
        #[arg(long)]
        config: PathBuf,
    },
    /// Continued training versus fine-tuning of a weak blueprint.
    Weakstudy {
        #[arg(long)]
        env: EnvKind,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        value: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate results files into summary JSON and CSV.
    Summarize {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn parse_trainer(s: &str) -> std::result::Result<TrainerKind, String> {
    match s {
        "ppo" => Ok(TrainerKind::Ppo),
        "qlearn" => Ok(TrainerKind::Qlearn),
        _ => Err(format!("unknown trainer {s:?}")),
    }
}

fn search(
    kind: EnvKind,
    mode: Mode,
    blueprint: &Path,
    value: Option<&Path>,
    cfg: Option<&Path>,
    episodes: usize,
    seed: u64,
    out: &Path,
    trajectories: Option<&Path>,
) -> Result<()> {
    let file: Option<SearchFile> = cfg.map(config::read).transpose()?;
    if let Some(f) = &file {
        config::check_version(f.version)?;
    }
    let mut run = file.as_ref().and_then(|f| f.run.clone()).unwrap_or_else(|| preset(kind, mode));
    run.mode = mode;
    let buffer = file.as_ref().map(|f| f.buffer.clone()).unwrap_or_default();
    let budget = file.as_ref().map(|f| f.budget).unwrap_or_default();
    let nets = Nets::load(kind, blueprint, value, &buffer)?;
    let det = deterministic_from_env();
    let c = compare(kind, &nets, &[run], &budget, episodes, seed, det)?;
    write_jsonl(out, &c.episodes)?;
    if let Some(path) = trajectories {
        let mut rows = Vec::new();
        for (_, s, rep) in &c.reports {
            let actions: Vec<usize> = rep.moves.iter().map(|m| m.action).collect();
            rows.extend(trajectory_rows(&env::reset(kind, *s), &actions)?);
        }
        write_jsonl(path, &rows)?;
    }
    for r in &c.rows {
        println!("{} mean {:.4} sem {:.4} samples/move {:.1}", r.mode.name(), r.mean_return, r.sem, r.mean_samples_per_move);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Train { env, trainer, config: cfg, out, sample_budget } => {
            let tc: TrainConfig = config::read(&cfg)?;
            let clock = MonotonicClock::start();
            let o = train_blueprint(env, trainer, &tc, sample_budget, &clock)?;
            for p in o.write(&out)? {
                println!("wrote {}", p.display());
            }
            if let Some(last) = o.curve.last() {
                println!("samples {} mean return {:.4} sem {:.4}", o.samples, last.mean_return, last.sem);
            }
        }
        Cmd::Search { env, mode, blueprint, value, config: cfg, episodes, seed, out, trajectories } => {
            search(env, mode, &blueprint, value.as_deref(), cfg.as_deref(), episodes, seed, &out, trajectories.as_deref())?;
        }
        Cmd::Compare { config: cfg } => {
            let ec: ExperimentConfig = config::read_experiment(&cfg)?;
            if ec.budget.max_wall_ms_per_move.is_some() {
                eprintln!("warning: wall-time caps are recorded, not enforced");
            }
            let c = run_comparison(&ec, deterministic_from_env())?;
            for r in &c.rows {
                println!(
                    "{} mean {:.4} sem {:.4} samples/move {:.1} ms/move {:.2} episodes {}",
                    r.mode.name(),
                    r.mean_return,
                    r.sem,
                    r.mean_samples_per_move,
                    r.mean_wall_ms_per_move,
                    r.episodes
                );
            }
        }
        Cmd::Weakstudy { env: kind, policy, value, config: cfg, out } => {
            let wc: WeakStudyConfig = config::read(&cfg)?;
            let spec = harness::template(kind).spec();
            let p = load_net(&policy, &spec, Some(HeadKind::PolicyLogits))?;
            let v = load_net(&value, &spec, Some(HeadKind::StateValue))?;
            let rows = weak_blueprint_study(kind, &p, &v, &wc, deterministic_from_env())?;
            write_jsonl(&out, &rows)?;
            println!("budget,continued_mean,continued_sem,finetune_mean,finetune_sem,finetune_samples");
            for r in rows {
                println!("{},{},{},{},{},{}", r.budget, r.continued_mean, r.continued_sem, r.finetune_mean, r.finetune_sem, r.finetune_samples);
            }
        }
        Cmd::Summarize { dir } => {
            let s = emit_summary(&dir)?;
            println!("{} rows, {} skipped", s.rows.len(), s.skipped);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[allow(dead_code)]
fn _assert_error_is_send(e: Error) -> Box<dyn std::error::Error + Send + Sync> {
    Box::new(e)
}
