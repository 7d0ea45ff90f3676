use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ledger::MemoryLedger;
use crate::error::{Error, Result};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExpertKey {
    pub block: usize,
    pub expert: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GroupId {
    /// Dense layers, routers, and the model-level remainder.
    NonMoe,
    /// Fixed region set aside for the expert cache.
    CacheReserve,
    Expert(ExpertKey),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Residency {
    Fast,
    Slow,
    InFlight { start: SimTime, end: SimTime },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSizes {
    /// Everything that is not an expert: always fast-resident.
    pub non_moe_bytes: u64,
    pub expert_bytes: u64,
    pub num_blocks: usize,
    pub num_experts: usize,
}

impl ParamSizes {
    pub fn total_expert_bytes(&self) -> u64 {
        self.expert_bytes * self.num_blocks as u64 * self.num_experts as u64
    }

    pub fn total_bytes(&self) -> u64 {
        self.non_moe_bytes + self.total_expert_bytes()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlacementMode {
    /// Every parameter in the fast tier; nothing moves.
    AllResident,
    /// Non-MoE parameters fast, every expert in the slow tier.
    OffloadExperts,
}

/// Which parameter groups live where, with a ledger of every change.
///
/// Bytes count against the fast tier from the start of their transfer.
#[derive(Debug, Clone)]
pub struct PlacementState {
    sizes: ParamSizes,
    capacity: u64,
    residency: HashMap<ExpertKey, Residency>,
    /// Fast-tier bytes held on behalf of each expert. Cache hits hold none.
    charged: HashMap<ExpertKey, u64>,
    ledger: MemoryLedger,
}

pub fn initial_placement(sizes: &ParamSizes, mode: PlacementMode, fast_capacity: u64) -> Result<PlacementState> {
    let mut state = PlacementState {
        sizes: *sizes,
        capacity: fast_capacity,
        residency: HashMap::new(),
        charged: HashMap::new(),
        ledger: MemoryLedger::default(),
    };
    let needed = match mode {
        PlacementMode::AllResident => sizes.total_bytes(),
        PlacementMode::OffloadExperts => sizes.non_moe_bytes,
    };
    if needed > fast_capacity {
        return Err(Error::Oom { needed, capacity: fast_capacity });
    }
    state.ledger.record(SimTime::ZERO, GroupId::NonMoe, sizes.non_moe_bytes as i64)?;
    for block in 0..sizes.num_blocks {
        for expert in 0..sizes.num_experts {
            let key = ExpertKey { block, expert };
            match mode {
                PlacementMode::AllResident => {
                    state.residency.insert(key, Residency::Fast);
                    state.charged.insert(key, sizes.expert_bytes);
                    state.ledger.record(SimTime::ZERO, GroupId::Expert(key), sizes.expert_bytes as i64)?;
                }
                PlacementMode::OffloadExperts => {
                    state.residency.insert(key, Residency::Slow);
                }
            }
        }
    }
    Ok(state)
}

impl PlacementState {
    pub fn sizes(&self) -> &ParamSizes {
        &self.sizes
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn ledger(&self) -> &MemoryLedger {
        &self.ledger
    }

    pub fn residency(&self, key: ExpertKey) -> Residency {
        self.residency.get(&key).copied().unwrap_or(Residency::Slow)
    }

    fn charge(&mut self, at: SimTime, group: GroupId, bytes: u64) -> Result<()> {
        let needed = self.ledger.fast_bytes() + bytes;
        if needed > self.capacity {
            return Err(Error::Oom { needed, capacity: self.capacity });
        }
        self.ledger.record(at, group, bytes as i64)?;
        Ok(())
    }

    /// Sets aside a fixed fast-tier region for the expert cache.
    pub fn reserve_cache(&mut self, at: SimTime, bytes: u64) -> Result<()> {
        self.charge(at, GroupId::CacheReserve, bytes)
    }

    /// Reserves fast-tier room for `experts` at `issued`; they become usable at `end`.
    /// Room is held from issue rather than from channel start, since the
    /// destination buffer must exist before the copy is queued.
    pub fn begin_transfer(&mut self, experts: &[ExpertKey], issued: SimTime, end: SimTime) -> Result<()> {
        let start = issued;
        for &key in experts {
            if self.residency(key) != Residency::Slow {
                return Err(Error::Wiring(format!("expert {key:?} transferred while already resident")));
            }
            self.charge(start, GroupId::Expert(key), self.sizes.expert_bytes)?;
            self.residency.insert(key, Residency::InFlight { start, end });
            self.charged.insert(key, self.sizes.expert_bytes);
        }
        Ok(())
    }

    /// Marks `key` usable straight out of the cache region. Costs no bytes.
    pub fn mark_cached(&mut self, key: ExpertKey) -> Result<()> {
        if self.residency(key) != Residency::Slow {
            return Err(Error::Wiring(format!("expert {key:?} cached while already resident")));
        }
        self.residency.insert(key, Residency::Fast);
        Ok(())
    }

    pub fn is_available(&self, key: ExpertKey, at: SimTime) -> bool {
        match self.residency(key) {
            Residency::Fast => true,
            Residency::InFlight { end, .. } => end <= at,
            Residency::Slow => false,
        }
    }

    /// Returns `experts` to the slow tier at `at`, freeing their bytes.
    pub fn release(&mut self, experts: &[ExpertKey], at: SimTime) -> Result<()> {
        for &key in experts {
            if !self.is_available(key, at) {
                return Err(Error::Wiring(format!("expert {key:?} released before it was resident")));
            }
            self.residency.insert(key, Residency::Slow);
            if let Some(bytes) = self.charged.remove(&key) {
                self.ledger.record(at, GroupId::Expert(key), -(bytes as i64))?;
            }
        }
        Ok(())
    }
}
