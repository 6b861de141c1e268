//! Monotonic time as seen by layers and the multiplexer.
//!
//! Layers never read a clock themselves; the caller passes `now` in. This
//! lets the same stack run against the system clock or a virtual one.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Elapsed time since an arbitrary origin.
pub type Time = Duration;

pub trait Clock: Send + Sync {
    fn now(&self) -> Time;
}

/// Wall-clock monotonic time measured from construction.
#[derive(Debug, Clone)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> SystemClock {
        SystemClock {
            origin: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Time {
        self.origin.elapsed()
    }
}

/// A clock that only moves when told to. Cloning shares the same time.
#[derive(Debug, Clone, Default)]
pub struct ManualClock {
    nanos: Arc<AtomicU64>,
}

impl ManualClock {
    pub fn new() -> ManualClock {
        ManualClock::default()
    }

    pub fn advance(&self, by: Duration) {
        self.nanos.fetch_add(by.as_nanos() as u64, Ordering::SeqCst);
    }

    pub fn set(&self, to: Time) {
        let to = to.as_nanos() as u64;
        let prev = self.nanos.fetch_max(to, Ordering::SeqCst);
        debug_assert!(prev <= to, "manual clock moved backwards");
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Time {
        Duration::from_nanos(self.nanos.load(Ordering::SeqCst))
    }
}
