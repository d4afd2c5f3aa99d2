use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    /// Time moves only through [`SimClock::advance`].
    #[default]
    Manual,
    /// Every backend operation also advances time by one tick.
    Auto,
}

/// Deterministic tick counter shared by every backend of a deployment.
#[derive(Debug)]
pub struct SimClock {
    now: AtomicU64,
    mode: ClockMode,
}

impl SimClock {
    pub fn new(start: u64, mode: ClockMode) -> Self {
        Self {
            now: AtomicU64::new(start),
            mode,
        }
    }

    pub fn manual() -> Self {
        Self::new(0, ClockMode::Manual)
    }

    pub fn mode(&self) -> ClockMode {
        self.mode
    }

    pub fn now(&self) -> u64 {
        self.now.load(Ordering::SeqCst)
    }

    /// Step forward and return the new time.
    pub fn advance(&self, ticks: u64) -> u64 {
        self.now.fetch_add(ticks, Ordering::SeqCst) + ticks
    }

    /// Hook called at the start of each backend operation. Returns the time
    /// the operation observes.
    pub fn on_operation(&self) -> u64 {
        match self.mode {
            ClockMode::Manual => self.now(),
            ClockMode::Auto => self.advance(1),
        }
    }
}

impl Default for SimClock {
    fn default() -> Self {
        Self::manual()
    }
}
