#![cfg_attr(not(test), no_std)]
//! Decision-time fine-tuning of blueprint networks, with tabular baselines
//! (SPARTA-style rollouts and PUCT tree search) and three small environments.

extern crate alloc;

pub mod math;
pub mod env;
pub mod nn;
pub mod clock;
pub mod blueprint;
pub mod belief;
pub mod tabsearch;
pub mod rlsearch;
