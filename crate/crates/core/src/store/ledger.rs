use serde::{Deserialize, Serialize};

use super::placement::GroupId;
use crate::error::{Error, Result};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEvent {
    pub time: SimTime,
    pub group: GroupId,
    pub delta: i64,
    pub fast_bytes: u64,
}

/// Time-ordered fast-tier residency with running and peak byte counts.
///
/// Events must arrive in non-decreasing time; events at the same instant
/// apply in arrival order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MemoryLedger {
    events: Vec<LedgerEvent>,
    fast_bytes: u64,
    peak_bytes: u64,
}

impl MemoryLedger {
    pub fn record(&mut self, time: SimTime, group: GroupId, delta: i64) -> Result<u64> {
        if let Some(last) = self.events.last() {
            if time < last.time {
                return Err(Error::Wiring(format!(
                    "ledger event at {time} precedes the previous event at {}",
                    last.time
                )));
            }
        }
        let next = self.fast_bytes as i64 + delta;
        if next < 0 {
            return Err(Error::Wiring(format!("{group:?} released more bytes than it held")));
        }
        self.fast_bytes = next as u64;
        self.peak_bytes = self.peak_bytes.max(self.fast_bytes);
        self.events.push(LedgerEvent { time, group, delta, fast_bytes: self.fast_bytes });
        Ok(self.fast_bytes)
    }

    pub fn fast_bytes(&self) -> u64 {
        self.fast_bytes
    }

    pub fn peak_bytes(&self) -> u64 {
        self.peak_bytes
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    /// Fast-tier bytes just after the last event at or before `t`.
    pub fn bytes_at(&self, t: SimTime) -> u64 {
        let idx = self.events.partition_point(|e| e.time <= t);
        idx.checked_sub(1).map_or(0, |i| self.events[i].fast_bytes)
    }
}

/// Analytic peak for the pre-gated strategy: resident non-MoE bytes plus the
/// largest active-expert footprint of two adjacent blocks.
pub fn pair_peak(non_moe_bytes: u64, active_bytes: &[u64], num_blocks: usize) -> u64 {
    assert_eq!(active_bytes.len(), num_blocks, "one active-byte entry per block");
    match num_blocks {
        0 => non_moe_bytes,
        1 => non_moe_bytes + active_bytes[0],
        _ => non_moe_bytes + active_bytes.windows(2).map(|w| w[0] + w[1]).max().unwrap_or(0),
    }
}

/// Generalization to a lookahead of `window - 1` blocks: `window` consecutive
/// blocks can be resident at once.
pub fn window_peak(non_moe_bytes: u64, active_bytes: &[u64], window: usize) -> u64 {
    let window = window.clamp(1, active_bytes.len().max(1));
    non_moe_bytes + active_bytes.windows(window).map(|w| w.iter().sum::<u64>()).max().unwrap_or(0)
}
