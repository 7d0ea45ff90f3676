use serde::{Deserialize, Serialize};

use super::strategy::Strategy;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::store::{transfer_duration, ParamSizes, TierSpec};

const DEFAULT_CALIBRATION: &str = include_str!("../../calibration/default.cfg");

/// Compute durations as `flops / rate`, one rate per operation class.
/// A rate of `+inf` makes that class free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub gate_rate: f64,
    pub expert_rate: f64,
    pub dense_rate: f64,
    /// Per-iteration non-MoE remainder (embeddings and the like).
    pub head_rate: f64,
}

impl CostModel {
    pub fn new(gate_rate: f64, expert_rate: f64, dense_rate: f64, head_rate: f64) -> Result<Self> {
        let c = CostModel { gate_rate, expert_rate, dense_rate, head_rate };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in self.rates() {
            if !(r > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {r}")));
            }
        }
        Ok(())
    }

    fn rates(&self) -> [(&'static str, f64); 4] {
        [
            ("gate_rate", self.gate_rate),
            ("expert_rate", self.expert_rate),
            ("dense_rate", self.dense_rate),
            ("head_rate", self.head_rate),
        ]
    }

    /// The frozen calibration shipped in `calibration/default.cfg`.
    pub fn calibrated() -> Self {
        Self::parse_calibration(DEFAULT_CALIBRATION).expect("bundled calibration parses")
    }

    /// Reads `key = value` lines; `#` starts a comment. All four rates are required.
    pub fn parse_calibration(text: &str) -> Result<Self> {
        let mut rates: [Option<f64>; 4] = [None; 4];
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("calibration line '{line}' is not key = value")))?;
            let slot = match key.trim() {
                "gate_rate" => 0,
                "expert_rate" => 1,
                "dense_rate" => 2,
                "head_rate" => 3,
                other => return Err(Error::InvalidConfig(format!("unknown calibration key '{other}'"))),
            };
            let v = value
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("bad rate '{}' for {}", value.trim(), key.trim())))?;
            rates[slot] = Some(v);
        }
        let get = |i: usize, name: &str| rates[i].ok_or_else(|| Error::InvalidConfig(format!("calibration lacks {name}")));
        CostModel::new(get(0, "gate_rate")?, get(1, "expert_rate")?, get(2, "dense_rate")?, get(3, "head_rate")?)
    }
}

/// Byte and FLOP sizes that the scheduler charges, independent of the
/// dimensions the math actually runs at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Footprint {
    pub expert_bytes: u64,
    /// Dense layers, routers, and the model-level remainder.
    pub non_moe_bytes: u64,
    pub gate_flops: u64,
    pub expert_flops: u64,
    pub dense_flops: u64,
    pub head_flops: u64,
}

impl Footprint {
    pub fn of(config: &ModelConfig) -> Self {
        let dt = config.dtype_bytes as u64;
        let nb = config.num_blocks as u64;
        let non_moe_params = nb * config.dense_params()
            + config.gates_per_iteration() as u64 * config.gate_params()
            + config.extra_non_moe_params;
        Footprint {
            expert_bytes: config.expert_params() * dt,
            non_moe_bytes: non_moe_params * dt,
            gate_flops: 2 * config.gate_params(),
            expert_flops: 2 * config.expert_params(),
            dense_flops: 2 * config.dense_params(),
            head_flops: 2 * config.extra_non_moe_params,
        }
    }

    pub fn param_sizes(&self, config: &ModelConfig) -> ParamSizes {
        ParamSizes {
            non_moe_bytes: self.non_moe_bytes,
            expert_bytes: self.expert_bytes,
            num_blocks: config.num_blocks,
            num_experts: config.num_experts,
        }
    }

    pub fn gate_secs(&self, cost: &CostModel) -> f64 {
        self.gate_flops as f64 / cost.gate_rate
    }

    pub fn expert_secs(&self, cost: &CostModel) -> f64 {
        self.expert_flops as f64 / cost.expert_rate
    }

    pub fn dense_secs(&self, cost: &CostModel) -> f64 {
        self.dense_flops as f64 / cost.dense_rate
    }

    pub fn head_secs(&self, cost: &CostModel) -> f64 {
        self.head_flops as f64 / cost.head_rate
    }
}

/// Per-block stage durations in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockCosts {
    /// Every gate function the block evaluates.
    pub gate: f64,
    /// All activated experts.
    pub expert: f64,
    pub dense: f64,
    /// One coalesced transfer of the activated experts.
    pub transfer_active: f64,
    /// One coalesced transfer of every expert in the block.
    pub transfer_all: f64,
}

impl BlockCosts {
    pub fn for_block(config: &ModelConfig, fp: &Footprint, cost: &CostModel, tier: &TierSpec, block: usize) -> Self {
        let gates = config.has_conventional_gate(block) as u32 + config.has_pre_gate(block) as u32;
        BlockCosts {
            gate: gates as f64 * fp.gate_secs(cost),
            expert: config.top_k as f64 * fp.expert_secs(cost),
            dense: fp.dense_secs(cost),
            transfer_active: transfer_duration(config.top_k as u64 * fp.expert_bytes, tier),
            transfer_all: transfer_duration(config.num_experts as u64 * fp.expert_bytes, tier),
        }
    }

    pub fn compute(&self) -> f64 {
        self.gate + self.expert + self.dense
    }
}

/// Closed-form per-block latency once the pipeline has filled.
pub fn steady_state_latency(strategy: Strategy, c: &BlockCosts) -> f64 {
    match strategy {
        Strategy::ResidentOnly => c.compute(),
        Strategy::FetchOnDemand => c.gate + c.transfer_active + c.expert + c.dense,
        Strategy::PrefetchAll => c.compute().max(c.transfer_all),
        Strategy::PreGated => c.compute().max(c.transfer_active),
    }
}
