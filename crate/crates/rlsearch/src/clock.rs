use std::time::Instant;

use rlsearch_core::clock::Clock;

/// Milliseconds since construction, from the monotonic clock.
#[derive(Clone, Copy, Debug)]
pub struct MonotonicClock(Instant);

impl MonotonicClock {
    pub fn start() -> Self {
        Self(Instant::now())
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::start()
    }
}

impl Clock for MonotonicClock {
    fn elapsed_ms(&self) -> u64 {
        self.0.elapsed().as_millis() as u64
    }
}

pub const DETERMINISTIC_VAR: &str = "RLSEARCH_DETERMINISTIC";

/// True when `RLSEARCH_DETERMINISTIC=1`.
pub fn deterministic_from_env() -> bool {
    std::env::var(DETERMINISTIC_VAR).is_ok_and(|v| v == "1")
}
