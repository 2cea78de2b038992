//! Time source abstraction.
//!
//! Everything that depends on time takes a [`Micros`] timestamp or a
//! [`Clock`], so that the same runtime code runs against wall-clock time when
//! serving and against a [`ManualClock`] in deterministic simulations.

use std::ops::{Add, Sub};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

/// Microseconds since the Unix epoch (or since an arbitrary origin for durations).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Micros(pub u64);

impl Micros {
    pub const ZERO: Micros = Micros(0);

    pub const fn from_ms(ms: u64) -> Self {
        Micros(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        Micros(s * 1_000_000)
    }

    pub fn from_secs_f64(s: f64) -> Self {
        Micros((s * 1e6).round().max(0.0) as u64)
    }

    pub fn as_ms_f64(self) -> f64 {
        self.0 as f64 / 1_000.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn as_millis(self) -> u64 {
        self.0 / 1_000
    }

    pub fn as_secs(self) -> u64 {
        self.0 / 1_000_000
    }

    pub fn saturating_sub(self, rhs: Micros) -> Micros {
        Micros(self.0.saturating_sub(rhs.0))
    }
}

impl From<Micros> for std::time::Duration {
    fn from(m: Micros) -> Self {
        std::time::Duration::from_micros(m.0)
    }
}

impl Add for Micros {
    type Output = Micros;
    fn add(self, rhs: Micros) -> Micros {
        Micros(self.0 + rhs.0)
    }
}

impl Sub for Micros {
    type Output = Micros;
    fn sub(self, rhs: Micros) -> Micros {
        Micros(self.0 - rhs.0)
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> Micros;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Micros {
        let d = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
        Micros(d.as_micros() as u64)
    }
}

/// A clock that only moves when told to. Clones share the same time.
#[derive(Debug, Clone, Default)]
pub struct ManualClock {
    now: Arc<AtomicU64>,
}

impl ManualClock {
    pub fn new(start: Micros) -> Self {
        Self { now: Arc::new(AtomicU64::new(start.0)) }
    }

    pub fn advance(&self, by: Micros) {
        self.now.fetch_add(by.0, Ordering::AcqRel);
    }

    /// Moves the clock to `t`; never moves it backwards.
    pub fn set(&self, t: Micros) {
        self.now.fetch_max(t.0, Ordering::AcqRel);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Micros {
        Micros(self.now.load(Ordering::Acquire))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manual_clock_advances_and_never_rewinds() {
        let c = ManualClock::new(Micros::from_secs(10));
        c.advance(Micros::from_ms(500));
        assert_eq!(c.now(), Micros(10_500_000));
        c.set(Micros::from_secs(1));
        assert_eq!(c.now(), Micros(10_500_000));
        let shared = c.clone();
        shared.advance(Micros(1));
        assert_eq!(c.now(), Micros(10_500_001));
    }

    #[test]
    fn unit_conversions() {
        assert_eq!(Micros::from_ms(3).as_ms_f64(), 3.0);
        assert_eq!(Micros::from_secs_f64(0.0015), Micros(1_500));
        assert_eq!(Micros::from_secs(2).as_millis(), 2_000);
    }
}
