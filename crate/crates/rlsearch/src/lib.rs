//! File formats, experiment harness and command-line front end for
//! `rlsearch-core`.

pub mod checkpoint;
pub mod clock;
pub mod config;
pub mod error;
pub mod harness;
pub mod results;
pub mod train;

pub use error::{Error, Result};
