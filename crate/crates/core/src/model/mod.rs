//! Deterministic numerical semantics of a pre-gated MoE decoder.

mod config;
mod decoder;
mod ops;
mod params;
mod presets;
mod stats;
mod tensor;
mod trace;
pub mod weights;

pub use config::ModelConfig;
pub use decoder::{decode, decoder_iteration, next_input, DecodeOutput};
pub use ops::{
    expert_forward, gate_forward, mix_into, moe_block_forward, non_moe_forward, pre_gate_forward, route_logits,
    softmax, RoutingDecision,
};
pub use params::{init_input, init_model, BlockParams, ExpertParams, ModelParams};
pub use presets::{extra_non_moe_params, preset, Preset, DEFAULT_SCALE, PRESET_NAMES};
pub use stats::{model_stats, StatsReport};
pub use tensor::Matrix;
pub use trace::{gen_routing_trace, Provenance, RoutingTrace, TraceEntry};
