use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::ops::RoutingDecision;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    ComputedByGate,
    Synthetic,
}

/// Routing consumed by `block` in `iteration`, and the block whose gate made it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub block: usize,
    pub origin_block: usize,
    pub decision: RoutingDecision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingTrace {
    pub num_blocks: usize,
    pub provenance: Provenance,
    /// Iteration-major, block-minor.
    pub entries: Vec<TraceEntry>,
}

impl RoutingTrace {
    pub fn new(num_blocks: usize, provenance: Provenance) -> Self {
        RoutingTrace { num_blocks, provenance, entries: Vec::new() }
    }

    pub fn iterations(&self) -> usize {
        self.entries.len() / self.num_blocks.max(1)
    }

    pub fn get(&self, iteration: usize, block: usize) -> Option<&TraceEntry> {
        self.entries.get(iteration * self.num_blocks + block)
    }

    /// Checks length, ordering, and that every decision was produced `L`
    /// blocks earlier within the same iteration (or by the block's own gate).
    pub fn check_wiring(&self, config: &ModelConfig) -> Result<()> {
        if self.num_blocks != config.num_blocks || !self.entries.len().is_multiple_of(self.num_blocks) {
            return Err(Error::Wiring(format!(
                "trace of {} entries does not tile {} blocks",
                self.entries.len(),
                config.num_blocks
            )));
        }
        for (i, e) in self.entries.iter().enumerate() {
            let (it, b) = (i / self.num_blocks, i % self.num_blocks);
            if e.iteration != it || e.block != b {
                return Err(Error::Wiring(format!("trace entry {i} is out of order")));
            }
            if e.origin_block != config.routing_origin(b) {
                return Err(Error::Wiring(format!(
                    "block {b} consumed routing from block {}, expected {}",
                    e.origin_block,
                    config.routing_origin(b)
                )));
            }
            if e.decision.len() != config.top_k {
                return Err(Error::Wiring(format!("block {b} routed to {} experts", e.decision.len())));
            }
            e.decision.validate(config.num_experts)?;
        }
        Ok(())
    }
}

/// Synthetic routing: each decision draws `top_k` distinct experts without
/// replacement from a Zipf(`skew`) law over expert ids (`skew = 0` is uniform).
/// Combine weights are uniform.
pub fn gen_routing_trace(config: &ModelConfig, iterations: usize, skew: f64, seed: u64) -> Result<RoutingTrace> {
    config.validate()?;
    if iterations == 0 {
        return Err(Error::InvalidConfig("iterations must be at least 1".into()));
    }
    if !(skew.is_finite() && skew >= 0.0) {
        return Err(Error::InvalidConfig(format!("skew must be finite and non-negative, got {skew}")));
    }
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let base: Vec<f64> = (0..config.num_experts).map(|k| ((k + 1) as f64).powf(-skew)).collect();
    let weight = 1.0 / config.top_k as f64;
    let mut trace = RoutingTrace::new(config.num_blocks, Provenance::Synthetic);
    for iteration in 0..iterations {
        for block in 0..config.num_blocks {
            let mut remaining = base.clone();
            let mut ids = Vec::with_capacity(config.top_k);
            for _ in 0..config.top_k {
                let total: f64 = remaining.iter().sum();
                let mut u = rng.gen::<f64>() * total;
                let mut pick = None;
                for (id, &w) in remaining.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    pick = Some(id);
                    if u < w {
                        break;
                    }
                    u -= w;
                }
                let id = pick.expect("fewer candidates than top_k");
                remaining[id] = 0.0;
                ids.push(id);
            }
            trace.entries.push(TraceEntry {
                iteration,
                block,
                origin_block: config.routing_origin(block),
                decision: RoutingDecision { combine_weights: vec![weight; ids.len()], expert_ids: ids },
            });
        }
    }
    Ok(trace)
}
