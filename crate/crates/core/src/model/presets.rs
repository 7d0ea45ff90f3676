use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::error::{Error, Result};

/// Vocabulary size of the encoder-decoder family the presets follow.
const VOCAB: u64 = 32128;

pub const PRESET_NAMES: [&str; 5] = ["base8", "base64", "base128", "base256", "large128"];

/// Default ratio between full-size and math dimensions.
pub const DEFAULT_SCALE: usize = 64;

/// A named model size. `full` drives byte and FLOP accounting; the math runs
/// on [`Preset::toy`], which divides the widths by `scale` but keeps the
/// expert and block counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preset {
    pub name: &'static str,
    pub full: ModelConfig,
    pub scale: usize,
}

impl Preset {
    pub fn toy(&self) -> ModelConfig {
        ModelConfig {
            d_model: (self.full.d_model / self.scale).max(1),
            d_ff: (self.full.d_ff / self.scale).max(1),
            extra_non_moe_params: 0,
            ..self.full
        }
    }

    /// Replaces the routing shape in both the full and the toy config.
    pub fn with_routing(mut self, num_experts: usize, top_k: usize, activation_level: usize) -> Result<Self> {
        self.full.num_experts = num_experts;
        self.full.top_k = top_k;
        self.full.activation_level = activation_level;
        self.full.validate()?;
        Ok(self)
    }
}

/// Non-MoE parameters the blocks do not model: embeddings, attention (self
/// and cross), and the dense FFNs interleaved with MoE layers. The blocks'
/// own `d x d` stand-in is subtracted so nothing is counted twice.
pub fn extra_non_moe_params(d_model: usize, d_ff: usize, num_blocks: usize) -> u64 {
    let (d, f, nb) = (d_model as u64, d_ff as u64, num_blocks as u64);
    let attention = 3 * nb * 4 * d * d;
    let dense_ffn = nb * 2 * d * f;
    VOCAB * d + attention + dense_ffn - nb * d * d
}

fn build(name: &'static str, d: usize, f: usize, nb: usize, e: usize) -> Preset {
    let mut full = ModelConfig::new(d, f, nb, e, 1, 1).expect("preset dimensions are valid");
    full.extra_non_moe_params = extra_non_moe_params(d, f, nb);
    Preset { name, full, scale: DEFAULT_SCALE }
}

pub fn preset(name: &str) -> Result<Preset> {
    Ok(match name {
        "base8" => build("base8", 768, 3072, 12, 8),
        "base64" => build("base64", 768, 3072, 12, 64),
        "base128" => build("base128", 768, 3072, 12, 128),
        "base256" => build("base256", 768, 3072, 12, 256),
        "large128" => build("large128", 1024, 4096, 24, 128),
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown preset '{other}' (expected one of {})",
                PRESET_NAMES.join(", ")
            )))
        }
    })
}
