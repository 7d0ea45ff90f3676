use super::ops::{gate_forward, moe_block_forward, RoutingDecision};
use super::params::ModelParams;
use super::trace::{Provenance, RoutingTrace, TraceEntry};
use crate::error::{Error, Result};

/// One decoder iteration through every block.
///
/// Blocks that own a conventional gate route themselves; every other block
/// consumes the decision emitted by the pre-gate `L` blocks earlier. Pending
/// decisions never outlive the iteration.
pub fn decoder_iteration(x: &[f64], model: &ModelParams, iteration: usize) -> Result<(Vec<f64>, Vec<TraceEntry>)> {
    let cfg = &model.config;
    if x.len() != cfg.d_model {
        return Err(Error::ShapeMismatch(format!("input of length {} for d_model {}", x.len(), cfg.d_model)));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::ShapeMismatch("input activation is not finite".into()));
    }
    let mut pending: Vec<Option<(RoutingDecision, usize)>> = vec![None; cfg.num_blocks];
    let mut entries = Vec::with_capacity(cfg.num_blocks);
    let mut act = x.to_vec();
    for (b, block) in model.blocks.iter().enumerate() {
        if cfg.has_conventional_gate(b) {
            let gate = block
                .gate
                .as_ref()
                .ok_or_else(|| Error::Wiring(format!("block {b} is missing its conventional gate")))?;
            if pending[b].is_some() {
                return Err(Error::Wiring(format!("block {b} was routed twice")));
            }
            pending[b] = Some((gate_forward(&act, gate, cfg.top_k)?, b));
        }
        let (routing, origin) = pending[b].take().ok_or(Error::MissingRouting)?;
        let (y, emitted) = moe_block_forward(&act, block, Some(&routing), cfg.top_k)?;
        if let Some(next) = emitted {
            let target = b + cfg.activation_level;
            match pending.get_mut(target) {
                Some(slot @ None) if target > b => *slot = Some((next, b)),
                _ => return Err(Error::Wiring(format!("block {b} pre-gates an invalid block {target}"))),
            }
        }
        entries.push(TraceEntry { iteration, block: b, origin_block: origin, decision: routing });
        act = y;
    }
    if pending.iter().any(Option::is_some) {
        return Err(Error::Wiring("a routing decision crossed the iteration boundary".into()));
    }
    Ok((act, entries))
}

/// Input for the next iteration: the previous output scaled to unit max-norm.
/// Stands in for embedding the generated token.
pub fn next_input(y: &[f64]) -> Vec<f64> {
    let m = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m > 0.0 && m.is_finite() {
        y.iter().map(|v| v / m).collect()
    } else {
        vec![0.0; y.len()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    /// Output activation of each iteration.
    pub outputs: Vec<Vec<f64>>,
    pub trace: RoutingTrace,
}

/// Runs `iterations` decoder iterations, feeding each output back through
/// [`next_input`].
pub fn decode(model: &ModelParams, input: &[f64], iterations: usize) -> Result<DecodeOutput> {
    let mut trace = RoutingTrace::new(model.config.num_blocks, Provenance::ComputedByGate);
    let mut outputs = Vec::with_capacity(iterations);
    let mut x = input.to_vec();
    for it in 0..iterations {
        let (y, entries) = decoder_iteration(&x, model, it)?;
        trace.entries.extend(entries);
        x = next_input(&y);
        outputs.push(y);
    }
    Ok(DecodeOutput { outputs, trace })
}
