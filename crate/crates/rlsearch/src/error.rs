use std::io;
use std::path::PathBuf;

use rlsearch_core::blueprint::BlueprintError;
use rlsearch_core::env::EnvError;
use rlsearch_core::nn::NnError;
use rlsearch_core::rlsearch::RlError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Search(#[from] RlError),
    #[error(transparent)]
    Blueprint(#[from] BlueprintError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

impl Error {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Env(EnvError::UnknownKind(_)) => 2,
            Error::Search(RlError::Config(_)) | Error::Blueprint(BlueprintError::Config(_)) => 2,
            Error::Checkpoint(_) => 3,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
