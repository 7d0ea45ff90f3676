//! Virtual time for the discrete-event engine.
//!
//! Instants are integer picoseconds so that event algebra (sums, maxima,
//! differences) is exact. Durations coming from the floating-point cost model
//! are rounded once, at the point where they enter the clock.

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

const PS_PER_SEC: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    /// Converts a non-negative, finite duration in seconds.
    ///
    /// Panics on negative or non-finite input; every cost-model path hands in
    /// validated rates, so this only fires on a programming error.
    pub fn from_secs(secs: f64) -> SimTime {
        assert!(
            secs.is_finite() && secs >= 0.0,
            "virtual durations must be finite and non-negative, got {secs}"
        );
        SimTime((secs * PS_PER_SEC).round() as u64)
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / PS_PER_SEC
    }

    pub fn picos(self) -> u64 {
        self.0
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.9}s", self.as_secs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_millisecond_values() {
        let t = SimTime::from_secs(0.042);
        assert_eq!(t.picos(), 42_000_000_000);
        assert_eq!(t.as_secs(), 0.042);
    }

    #[test]
    fn sums_are_exact() {
        let a = SimTime::from_secs(0.010);
        let b = SimTime::from_secs(0.004);
        assert_eq!(a + a + a + b + b + b, SimTime::from_secs(0.042));
    }

    #[test]
    #[should_panic]
    fn rejects_negative() {
        SimTime::from_secs(-1.0);
    }
}
