use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use super::config::ModelConfig;
use super::tensor::Matrix;
use crate::error::Result;

/// One FFN expert: `W2 · relu(W1 · x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertParams {
    /// `d_ff × d_model`
    pub w1: Matrix,
    /// `d_model × d_ff`
    pub w2: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    /// Routes this block's own experts. `d_model × E`.
    pub gate: Option<Matrix>,
    /// Routes the experts of block `b + L`. `d_model × E`.
    pub pre_gate: Option<Matrix>,
    pub experts: Vec<ExpertParams>,
    /// Dense stand-in for the block's non-MoE compute. `d_model × d_model`.
    pub dense: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub blocks: Vec<BlockParams>,
}

impl ModelParams {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(|b| {
            b.gate.as_ref().is_none_or(Matrix::is_finite)
                && b.pre_gate.as_ref().is_none_or(Matrix::is_finite)
                && b.dense.is_finite()
                && b.experts.iter().all(|e| e.w1.is_finite() && e.w2.is_finite())
        })
    }
}

/// Uniform `[-0.1, 0.1)` weights from a SplitMix64-seeded xoshiro256** stream.
///
/// Fill order per block: gate, pre-gate, experts (`W1` then `W2`), dense.
pub fn init_model(config: &ModelConfig) -> Result<ModelParams> {
    config.validate()?;
    let mut rng = Xoshiro256StarStar::seed_from_u64(config.seed);
    let mut next = move || {
        let u = (rng.next_u64() >> 40) as f64 / (1u64 << 24) as f64;
        (0.2 * u - 0.1) as f32
    };
    let (d, f, e) = (config.d_model, config.d_ff, config.num_experts);
    let blocks = (0..config.num_blocks)
        .map(|b| {
            let gate = config.has_conventional_gate(b).then(|| Matrix::from_fn(d, e, &mut next));
            let pre_gate = config.has_pre_gate(b).then(|| Matrix::from_fn(d, e, &mut next));
            let experts = (0..e)
                .map(|_| ExpertParams {
                    w1: Matrix::from_fn(f, d, &mut next),
                    w2: Matrix::from_fn(d, f, &mut next),
                })
                .collect();
            let dense = Matrix::from_fn(d, d, &mut next);
            BlockParams { gate, pre_gate, experts, dense }
        })
        .collect();
    Ok(ModelParams { config: *config, blocks })
}

/// First-iteration input in `[-1, 1)`, drawn from its own seeded stream.
pub fn init_input(d_model: usize, seed: u64) -> Vec<f64> {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed.rotate_left(32) ^ 0x9e37_79b9_7f4a_7c15);
    (0..d_model).map(|_| 2.0 * ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64) - 1.0).collect()
}
