use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default fast-tier size: one 80 GB accelerator.
pub const DEFAULT_FAST_CAPACITY: u64 = 80_000_000_000;

/// A bounded fast tier behind a bandwidth/latency channel to an unbounded slow tier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierSpec {
    /// Bytes.
    pub fast_capacity: u64,
    /// Bytes per second; `f64::INFINITY` makes transfers free.
    pub channel_bandwidth: f64,
    /// Seconds of fixed setup cost per transfer.
    pub channel_latency: f64,
}

impl TierSpec {
    pub fn new(fast_capacity: u64, channel_bandwidth: f64, channel_latency: f64) -> Result<Self> {
        let t = TierSpec { fast_capacity, channel_bandwidth, channel_latency };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fast_capacity == 0 {
            return Err(Error::InvalidConfig("fast-tier capacity must be positive".into()));
        }
        if !(self.channel_bandwidth > 0.0) {
            return Err(Error::InvalidConfig("channel bandwidth must be positive".into()));
        }
        if !(self.channel_latency.is_finite() && self.channel_latency >= 0.0) {
            return Err(Error::InvalidConfig("channel latency must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// PCIe gen4 host link: 32 GB/s, 10 µs per transfer.
    pub fn pcie4() -> Self {
        TierSpec { fast_capacity: DEFAULT_FAST_CAPACITY, channel_bandwidth: 32e9, channel_latency: 10e-6 }
    }

    /// NVMe-class storage: 3 GB/s, 100 µs per transfer.
    pub fn ssd() -> Self {
        TierSpec { fast_capacity: DEFAULT_FAST_CAPACITY, channel_bandwidth: 3e9, channel_latency: 100e-6 }
    }

    pub fn infinite() -> Self {
        TierSpec { fast_capacity: DEFAULT_FAST_CAPACITY, channel_bandwidth: f64::INFINITY, channel_latency: 0.0 }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "pcie4" => Some(Self::pcie4()),
            "ssd" => Some(Self::ssd()),
            "infinite" => Some(Self::infinite()),
            _ => None,
        }
    }

    pub fn with_capacity(mut self, fast_capacity: u64) -> Self {
        self.fast_capacity = fast_capacity;
        self
    }
}

/// `latency + bytes / bandwidth`. A batch of experts issued together is one
/// transfer of their summed size.
pub fn transfer_duration(bytes: u64, tier: &TierSpec) -> f64 {
    tier.channel_latency + bytes as f64 / tier.channel_bandwidth
}
