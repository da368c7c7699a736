//! Strict JSON config files. Every file carries `"version": 1`; unknown keys
//! are rejected.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rlsearch_core::blueprint::{PpoConfig, QConfig};
use rlsearch_core::env::EnvKind;
use rlsearch_core::rlsearch::{Mode, RunConfig, SearchConfig, SearchMode};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const VERSION: u32 = 1;

/// Where the global replay buffer used by Q fine-tuning comes from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "kind")]
pub enum BufferSource {
    #[default]
    None,
    /// Epsilon-greedy blueprint rollouts generated before play.
    Regenerate { transitions: usize, explore: f64, seed: u64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budget {
    pub max_samples_per_move: Option<u64>,
    /// Recorded against, not enforced.
    pub max_wall_ms_per_move: Option<u64>,
}

/// Early stop for Q-learning blueprints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "kind")]
pub enum StopRule {
    /// CoordGame: stop at the first evaluation past `min_samples` where the
    /// greedy net plays a0 and answers b0 to either first move.
    CoordConvention { min_samples: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    /// Environment steps; the CLI's `--sample-budget` overrides it.
    pub budget: u64,
    #[serde(default)]
    pub ppo: PpoConfig,
    #[serde(default)]
    pub qlearn: QConfig,
    #[serde(default)]
    pub stop: Option<StopRule>,
}

/// Settings for the `search` subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchFile {
    pub version: u32,
    #[serde(default)]
    pub run: Option<RunConfig>,
    #[serde(default)]
    pub buffer: BufferSource,
    #[serde(default)]
    pub budget: Budget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub env: EnvKind,
    pub modes: Vec<Mode>,
    pub blueprint: PathBuf,
    #[serde(default)]
    pub value: Option<PathBuf>,
    /// Per-mode settings; missing modes use [`preset`].
    #[serde(default)]
    pub runs: BTreeMap<Mode, RunConfig>,
    #[serde(default)]
    pub buffer: BufferSource,
    pub episodes: usize,
    pub seed: u64,
    #[serde(default)]
    pub budget: Budget,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        check_version(self.version)?;
        if self.modes.is_empty() || self.episodes == 0 {
            return Err(Error::Config("modes and episodes must be non-empty".into()));
        }
        for m in &self.modes {
            self.run_for(*m).search.validate()?;
        }
        Ok(())
    }

    pub fn run_for(&self, mode: Mode) -> RunConfig {
        let mut r = self.runs.get(&mode).cloned().unwrap_or_else(|| preset(self.env, mode));
        r.mode = mode;
        r
    }

    /// Resolve relative paths against the directory holding the config file.
    pub fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.blueprint);
        if let Some(v) = self.value.as_mut() {
            fix(v);
        }
        fix(&mut self.out_dir);
    }
}

/// Default run settings for a mode on an environment.
pub fn preset(env: EnvKind, mode: Mode) -> RunConfig {
    let search = match (env, mode) {
        (EnvKind::GridPacman, _) => SearchConfig::replan(),
        (_, Mode::RlMulti) => SearchConfig::for_mode(SearchMode::Multi),
        _ => SearchConfig::for_mode(SearchMode::Single),
    };
    RunConfig { mode, search, ..RunConfig::default() }
}

pub fn check_version(v: u32) -> Result<()> {
    if v == VERSION {
        Ok(())
    } else {
        Err(Error::Config(format!("unsupported config version {v}")))
    }
}

pub fn parse<T: DeserializeOwned>(s: &str) -> Result<T> {
    serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
}

pub fn read<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse(&s)
}

pub fn read_experiment(path: &Path) -> Result<ExperimentConfig> {
    let mut c: ExperimentConfig = read(path)?;
    if let Some(dir) = path.parent() {
        c.rebase(dir);
    }
    c.validate()?;
    Ok(c)
}
