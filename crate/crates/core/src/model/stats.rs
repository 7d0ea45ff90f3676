use serde::{Deserialize, Serialize};

use super::config::ModelConfig;

/// Closed-form parameter and FLOP counts.
///
/// `params_moe` holds expert and router weights. `flops_per_token` counts
/// multiply-adds as two FLOPs over the activated experts and the non-MoE
/// layers; router cost is reported separately in `router_flops_per_token`
/// because it is the only term that scales with the expert count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsReport {
    pub params_total: u64,
    pub params_moe: u64,
    pub params_experts: u64,
    pub params_non_moe: u64,
    pub flops_per_token: u64,
    pub router_flops_per_token: u64,
}

pub fn model_stats(config: &ModelConfig) -> StatsReport {
    let nb = config.num_blocks as u64;
    let params_experts = nb * config.num_experts as u64 * config.expert_params();
    let params_router = config.gates_per_iteration() as u64 * config.gate_params();
    let params_non_moe = nb * config.dense_params() + config.extra_non_moe_params;
    let params_moe = params_experts + params_router;
    let flops_per_token = nb * (config.top_k as u64 * 2 * config.expert_params() + 2 * config.dense_params())
        + 2 * config.extra_non_moe_params;
    StatsReport {
        params_total: params_moe + params_non_moe,
        params_moe,
        params_experts,
        params_non_moe,
        flops_per_token,
        router_flops_per_token: 2 * params_router,
    }
}
