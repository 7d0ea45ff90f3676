use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape and wiring of a pre-gated MoE decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Hidden width.
    pub d_model: usize,
    /// Expert inner width.
    pub d_ff: usize,
    /// MoE blocks per decoder iteration.
    pub num_blocks: usize,
    /// Experts per block.
    pub num_experts: usize,
    /// Experts activated per token.
    pub top_k: usize,
    /// How many blocks ahead a pre-gate selects for. `0` is conventional gating.
    pub activation_level: usize,
    /// Bytes per parameter.
    pub dtype_bytes: usize,
    pub seed: u64,
    /// Parameters that live outside the modeled blocks (embeddings, attention,
    /// interleaved dense FFNs). Counted for memory and per-iteration compute only.
    #[serde(default)]
    pub extra_non_moe_params: u64,
}

impl ModelConfig {
    pub fn new(
        d_model: usize,
        d_ff: usize,
        num_blocks: usize,
        num_experts: usize,
        top_k: usize,
        activation_level: usize,
    ) -> Result<Self> {
        let config = ModelConfig {
            d_model,
            d_ff,
            num_blocks,
            num_experts,
            top_k,
            activation_level,
            dtype_bytes: 4,
            seed: 0,
            extra_non_moe_params: 0,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("d_model", self.d_model),
            ("d_ff", self.d_ff),
            ("num_blocks", self.num_blocks),
            ("num_experts", self.num_experts),
            ("top_k", self.top_k),
            ("dtype_bytes", self.dtype_bytes),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if self.top_k > self.num_experts {
            return Err(Error::InvalidConfig(format!(
                "top_k ({}) exceeds the number of experts ({})",
                self.top_k, self.num_experts
            )));
        }
        if self.activation_level >= self.num_blocks {
            return Err(Error::InvalidConfig(format!(
                "activation_level ({}) must be below num_blocks ({})",
                self.activation_level, self.num_blocks
            )));
        }
        Ok(())
    }

    /// Whether block `b` evaluates a gate that routes its own experts.
    ///
    /// With lookahead `L >= 1`, the first `L` blocks have no earlier block
    /// that could have selected for them.
    pub fn has_conventional_gate(&self, block: usize) -> bool {
        self.activation_level == 0 || block < self.activation_level
    }

    /// Whether block `b` carries a pre-gate selecting for block `b + L`.
    pub fn has_pre_gate(&self, block: usize) -> bool {
        self.activation_level > 0 && block + self.activation_level < self.num_blocks
    }

    /// The block whose gate produces the routing consumed by `block`.
    pub fn routing_origin(&self, block: usize) -> usize {
        if self.has_conventional_gate(block) {
            block
        } else {
            block - self.activation_level
        }
    }

    pub fn expert_params(&self) -> u64 {
        2 * self.d_model as u64 * self.d_ff as u64
    }

    pub fn gate_params(&self) -> u64 {
        self.d_model as u64 * self.num_experts as u64
    }

    pub fn dense_params(&self) -> u64 {
        self.d_model as u64 * self.d_model as u64
    }

    /// Gate functions evaluated per iteration. Always `num_blocks`: the extra
    /// gate in the first `L` blocks balances the missing pre-gates at the tail.
    pub fn gates_per_iteration(&self) -> usize {
        (0..self.num_blocks)
            .map(|b| self.has_conventional_gate(b) as usize + self.has_pre_gate(b) as usize)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_top_k_above_experts() {
        assert!(ModelConfig::new(4, 4, 2, 8, 9, 1).is_err());
    }

    #[test]
    fn rejects_lookahead_past_last_block() {
        assert!(ModelConfig::new(4, 4, 2, 8, 1, 2).is_err());
        assert!(ModelConfig::new(4, 4, 3, 8, 1, 2).is_ok());
    }

    #[test]
    fn rejects_zero_dims() {
        assert!(ModelConfig::new(0, 4, 2, 8, 1, 1).is_err());
        assert!(ModelConfig::new(4, 4, 2, 8, 0, 1).is_err());
    }

    #[test]
    fn level_one_wiring() {
        let c = ModelConfig::new(4, 4, 3, 4, 1, 1).unwrap();
        let conv: Vec<_> = (0..3).map(|b| c.has_conventional_gate(b)).collect();
        let pre: Vec<_> = (0..3).map(|b| c.has_pre_gate(b)).collect();
        assert_eq!(conv, [true, false, false]);
        assert_eq!(pre, [true, true, false]);
        assert_eq!(c.routing_origin(2), 1);
        assert_eq!(c.gates_per_iteration(), 3);
    }

    #[test]
    fn level_two_wiring() {
        let c = ModelConfig::new(4, 4, 5, 4, 1, 2).unwrap();
        let origins: Vec<_> = (0..5).map(|b| c.routing_origin(b)).collect();
        assert_eq!(origins, [0, 1, 0, 1, 2]);
        assert_eq!(c.gates_per_iteration(), 5);
    }
}
