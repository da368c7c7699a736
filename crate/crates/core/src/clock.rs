//! Elapsed-time source; the core crate has no clock of its own.

pub trait Clock {
    fn elapsed_ms(&self) -> u64;
}

/// Always reports zero; used in deterministic runs and tests.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed_ms(&self) -> u64 {
        0
    }
}
