//! Per-block numerical semantics: gating, experts, and the non-MoE proxy layer.

use serde::{Deserialize, Serialize};

use super::params::{BlockParams, ExpertParams};
use super::tensor::Matrix;
use crate::error::{Error, Result};

/// Experts selected for one token at one block, strongest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub expert_ids: Vec<usize>,
    pub combine_weights: Vec<f64>,
}

impl RoutingDecision {
    pub fn len(&self) -> usize {
        self.expert_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.expert_ids.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.expert_ids.iter().copied().zip(self.combine_weights.iter().copied())
    }

    /// Checks the decision against a block with `num_experts` experts.
    pub fn validate(&self, num_experts: usize) -> Result<()> {
        if self.expert_ids.len() != self.combine_weights.len() {
            return Err(Error::Wiring("routing ids and weights differ in length".into()));
        }
        let mut seen = vec![false; num_experts];
        for &id in &self.expert_ids {
            if id >= num_experts || std::mem::replace(&mut seen[id], true) {
                return Err(Error::Wiring(format!(
                    "routing selects invalid or repeated expert {id}"
                )));
            }
        }
        Ok(())
    }
}

/// Full softmax over `logits`, max-shifted.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Top-`k` routing from raw logits: descending logit, ties to the lower id.
pub fn route_logits(logits: &[f64], k: usize) -> Result<RoutingDecision> {
    if k > logits.len() {
        return Err(Error::ShapeMismatch(format!(
            "top-{k} requested from {} experts",
            logits.len()
        )));
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::GateOverflow);
    }
    let probs = softmax(logits);
    let mut order: Vec<usize> = (0..logits.len()).collect();
    order.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]).then(a.cmp(&b)));
    order.truncate(k);
    let combine_weights = order.iter().map(|&i| probs[i]).collect();
    Ok(RoutingDecision { expert_ids: order, combine_weights })
}

/// `logits = gateᵀ · x`, softmax, top-`k`.
pub fn gate_forward(x: &[f64], gate: &Matrix, k: usize) -> Result<RoutingDecision> {
    let logits = gate.matvec_transposed(x)?;
    route_logits(&logits, k)
}

pub fn expert_forward(x: &[f64], expert: &ExpertParams) -> Result<Vec<f64>> {
    if expert.w1.rows() != expert.w2.cols() {
        return Err(Error::ShapeMismatch(format!(
            "expert inner widths disagree: W1 has {} rows, W2 has {} cols",
            expert.w1.rows(),
            expert.w2.cols()
        )));
    }
    let hidden: Vec<f64> = expert.w1.matvec(x)?.into_iter().map(|h| h.max(0.0)).collect();
    expert.w2.matvec(&hidden)
}

/// `acc += weight · expert_out`.
pub fn mix_into(acc: &mut [f64], weight: f64, expert_out: &[f64]) {
    for (a, &v) in acc.iter_mut().zip(expert_out) {
        *a += weight * v;
    }
}

pub fn non_moe_forward(dense: &Matrix, mixed: &[f64]) -> Result<Vec<f64>> {
    dense.matvec(mixed)
}

/// Pre-gate evaluation only, without touching any expert.
///
/// This is all the scheduler needs to start migrating the next block's
/// experts; it reads nothing but the block input.
pub fn pre_gate_forward(x: &[f64], block: &BlockParams, k: usize) -> Result<Option<RoutingDecision>> {
    block.pre_gate.as_ref().map(|g| gate_forward(x, g, k)).transpose()
}

/// One MoE block: experts mixed by `routing_in`, then the dense layer.
/// Returns the block output and, if the block has a pre-gate, the routing it
/// emits for a later block.
pub fn moe_block_forward(
    x: &[f64],
    block: &BlockParams,
    routing_in: Option<&RoutingDecision>,
    k: usize,
) -> Result<(Vec<f64>, Option<RoutingDecision>)> {
    let routing_out = pre_gate_forward(x, block, k)?;
    let routing = routing_in.ok_or(Error::MissingRouting)?;
    routing.validate(block.experts.len())?;
    let mut acc = vec![0.0; x.len()];
    for (id, w) in routing.iter() {
        let out = expert_forward(x, &block.experts[id])?;
        mix_into(&mut acc, w, &out);
    }
    let y = non_moe_forward(&block.dense, &acc)?;
    Ok((y, routing_out))
}
