//! Network checkpoints as one JSON document per network.

use std::fs;
use std::path::Path;

use rlsearch_core::env::{EnvKind, EnvSpec};
use rlsearch_core::nn::{Arch, HeadKind, NetParams};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Meta {
    pub env: Option<EnvKind>,
    pub trainer: Option<String>,
    pub samples: u64,
    pub seed: u64,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub arch: Arch,
    pub params: Vec<f64>,
    #[serde(default)]
    pub meta: Meta,
}

impl Checkpoint {
    pub fn new(net: &NetParams, meta: Meta) -> Self {
        Self { version: VERSION, arch: net.arch.clone(), params: net.params.clone(), meta }
    }

    pub fn to_net(&self) -> Result<NetParams> {
        if self.version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", self.version)));
        }
        NetParams::from_parts(self.arch.clone(), self.params.clone()).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(Error::io(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(Error::io(path))?;
        Self::from_json(&s)
    }

    /// Check the network fits `spec` and has the expected head.
    pub fn check(&self, spec: &EnvSpec, head: Option<HeadKind>) -> Result<()> {
        let want_out = match self.arch.head {
            HeadKind::StateValue => 1,
            _ => spec.num_actions,
        };
        if self.arch.input != spec.obs_len || self.arch.output != want_out {
            return Err(Error::Checkpoint(format!(
                "network is {}->{}, environment needs {}->{}",
                self.arch.input, self.arch.output, spec.obs_len, want_out
            )));
        }
        if let Some(h) = head {
            if h != self.arch.head {
                return Err(Error::Checkpoint(format!("expected a {h:?} head, found {:?}", self.arch.head)));
            }
        }
        Ok(())
    }
}

/// Load a checkpoint and verify it against `spec`.
pub fn load_net(path: &Path, spec: &EnvSpec, head: Option<HeadKind>) -> Result<NetParams> {
    let c = Checkpoint::load(path)?;
    c.check(spec, head)?;
    c.to_net()
}
