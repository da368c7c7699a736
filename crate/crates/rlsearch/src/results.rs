//! JSONL records: per-episode results, per-move logs, trajectories and
//! training curves.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rlsearch_core::env::{EnvError, Simulator};
use rlsearch_core::rlsearch::{EpisodeReport, Mode, MoveLog};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeRow {
    pub seed: u64,
    pub mode: Mode,
    #[serde(rename = "return")]
    pub ret: f64,
    pub steps: u64,
    pub samples: u64,
    pub wall_ms: u64,
    pub moves_searched: u64,
    pub gate_pass_rate: f64,
    pub empty_belief_fallbacks: u64,
}

impl EpisodeRow {
    pub fn new(seed: u64, mode: Mode, r: &EpisodeReport) -> Self {
        Self {
            seed,
            mode,
            ret: r.ret,
            steps: r.steps,
            samples: r.samples,
            wall_ms: r.wall_ms,
            moves_searched: r.moves_searched,
            gate_pass_rate: r.gate_pass_rate(),
            empty_belief_fallbacks: r.empty_belief_fallbacks,
        }
    }
}

/// One move with belief diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveRow {
    pub seed: u64,
    pub mode: Mode,
    #[serde(flatten)]
    pub log: MoveLog,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: u32,
    pub agent: usize,
    pub action: usize,
    pub reward: f64,
    pub obs: Vec<f64>,
    pub public_obs: Vec<f64>,
}

/// Replay `actions` from `start` and record each step; `obs` is what the
/// actor saw before acting.
pub fn trajectory_rows<S: Simulator>(start: &S, actions: &[usize]) -> Result<Vec<TrajectoryRow>, EnvError> {
    let mut s = start.clone();
    let mut rows = Vec::with_capacity(actions.len());
    for &a in actions {
        let t = s.turn();
        let agent = s.current_agent();
        let obs = s.observe(agent).features;
        let public_obs = s.public_observe().features;
        let reward = s.step(a)?.reward;
        rows.push(TrajectoryRow { t, agent, action: a, reward, obs, public_obs });
    }
    Ok(rows)
}

pub fn to_jsonl<T: Serialize>(rows: &[T]) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("row serializes"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    let f = File::create(path).map_err(Error::io(path))?;
    let mut w = BufWriter::new(f);
    w.write_all(to_jsonl(rows).as_bytes()).map_err(Error::io(path))?;
    w.flush().map_err(Error::io(path))
}

/// Parse every line that decodes as `T`; returns the rows and the number of
/// lines skipped as corrupt.
pub fn read_jsonl_lenient<T: DeserializeOwned>(path: &Path) -> Result<(Vec<T>, usize)> {
    let f = File::open(path).map_err(Error::io(path))?;
    let mut rows = Vec::new();
    let mut skipped = 0;
    for line in BufReader::new(f).lines() {
        let line = line.map_err(Error::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(r) => rows.push(r),
            Err(_) => skipped += 1,
        }
    }
    Ok((rows, skipped))
}
