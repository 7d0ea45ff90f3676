//! Checks every simulated row must pass before it is reported.

use pregate_core::model::{DecodeOutput, ModelConfig};
use pregate_core::sched::{steady_state_latency, BlockCosts, CostModel, Footprint, SimConfig, SimOutput, Strategy};
use pregate_core::store::{pair_peak, window_peak, TierSpec};

use crate::error::{HarnessError, Result};

/// Tolerance for closed-form latency agreement, seconds.
pub const ORACLE_TOLERANCE: f64 = 1e-9;

pub struct Context<'a> {
    pub label: String,
    pub config: &'a ModelConfig,
    pub footprint: &'a Footprint,
    pub sim: &'a SimConfig,
}

fn fail(property: &'static str, cx: &Context<'_>, detail: String) -> HarnessError {
    HarnessError::Invariant { property, context: cx.label.clone(), detail }
}

/// Outputs and routing must match the serial reference bit for bit.
pub fn output_equivalence(cx: &Context<'_>, out: &SimOutput, reference: &DecodeOutput) -> Result<()> {
    let outputs = out.outputs.as_ref().ok_or_else(|| fail("output_equivalence", cx, "no outputs recorded".into()))?;
    if outputs.len() != reference.outputs.len() {
        return Err(fail("output_equivalence", cx, "iteration count differs".into()));
    }
    for (it, (a, b)) in outputs.iter().zip(&reference.outputs).enumerate() {
        if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.to_bits() != y.to_bits()) {
            return Err(fail("output_equivalence", cx, format!("iteration {it} output differs from reference")));
        }
    }
    if out.trace.entries != reference.trace.entries {
        return Err(fail("output_equivalence", cx, "routing trace differs from reference".into()));
    }
    Ok(())
}

pub fn timeline(cx: &Context<'_>, out: &SimOutput) -> Result<()> {
    out.timeline.check().map_err(|e| fail("timeline", cx, e.to_string()))
}

/// Per-iteration active bytes of every block.
fn active_bytes(cx: &Context<'_>, out: &SimOutput, iteration: usize) -> Vec<u64> {
    (0..cx.config.num_blocks)
        .map(|b| out.trace.get(iteration, b).map_or(0, |e| e.decision.len() as u64) * cx.footprint.expert_bytes)
        .collect()
}

/// Pre-gated peak equals the adjacent-pair bound at lookahead 1 and stays
/// within the lookahead window otherwise. Only meaningful without a cache.
pub fn ledger_peak(cx: &Context<'_>, out: &SimOutput) -> Result<()> {
    if cx.sim.strategy != Strategy::PreGated || cx.sim.cache.is_some() {
        return Ok(());
    }
    let level = cx.config.activation_level;
    let nm = cx.footprint.non_moe_bytes;
    let its = out.trace.iterations();
    let got = out.ledger.peak_bytes();
    if level == 1 {
        let want = (0..its).map(|it| pair_peak(nm, &active_bytes(cx, out, it), cx.config.num_blocks)).max().unwrap_or(nm);
        if got != want {
            return Err(fail("ledger_peak", cx, format!("ledger peak {got} != adjacent-pair bound {want}")));
        }
    } else {
        let bound = (0..its).map(|it| window_peak(nm, &active_bytes(cx, out, it), level + 1)).max().unwrap_or(nm);
        if got > bound {
            return Err(fail("ledger_peak", cx, format!("ledger peak {got} exceeds window bound {bound}")));
        }
    }
    Ok(())
}

/// First block whose latency is a pure steady-state quantity.
pub fn first_steady_block(strategy: Strategy, config: &ModelConfig) -> usize {
    match strategy {
        Strategy::ResidentOnly | Strategy::FetchOnDemand => 0,
        Strategy::PrefetchAll => 1,
        Strategy::PreGated => config.activation_level,
    }
}

/// Simulated steady-state block latencies agree with the closed form.
///
/// With a pre-gate lookahead of two or more, the channel starts several
/// blocks ahead and the slack drains over more blocks than an iteration
/// has, so there the closed form is only an upper bound.
pub fn oracle_agreement(cx: &Context<'_>, out: &SimOutput, cost: &CostModel, tier: &TierSpec) -> Result<()> {
    if cx.sim.cache.is_some() {
        return Ok(());
    }
    let s = cx.sim.strategy;
    for (it, lats) in out.block_latencies.iter().enumerate() {
        for (b, lat) in lats.iter().enumerate().skip(first_steady_block(s, cx.config)) {
            let want = steady_state_latency(s, &BlockCosts::for_block(cx.config, cx.footprint, cost, tier, b));
            let got = lat.as_secs();
            let bound_only = s == Strategy::PreGated && cx.config.activation_level >= 2;
            let bad = if bound_only { got > want + ORACLE_TOLERANCE } else { (got - want).abs() > ORACLE_TOLERANCE };
            if bad {
                return Err(fail(
                    "oracle_agreement",
                    cx,
                    format!("iteration {it} block {b}: simulated {got:.12} s, closed form {want:.12} s"),
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use pregate_core::model::{decode, init_model};
    use pregate_core::sched::simulate;
    use pregate_core::SimTime;

    fn setup() -> (ModelConfig, Footprint, SimConfig) {
        let cfg = ModelConfig::new(6, 12, 4, 4, 1, 1).unwrap();
        let sim = SimConfig::new(Strategy::PreGated, CostModel::calibrated(), TierSpec::pcie4(), 2);
        (cfg, Footprint::of(&cfg), sim)
    }

    #[test]
    fn tampering_is_caught() {
        let (cfg, fp, sim) = setup();
        let model = init_model(&cfg).unwrap();
        let input = [0.5; 6];
        let reference = decode(&model, &input, 2).unwrap();
        let mut out = simulate(&model, &fp, &sim, &input).unwrap();
        let cx = Context { label: "t".into(), config: &cfg, footprint: &fp, sim: &sim };
        output_equivalence(&cx, &out, &reference).unwrap();
        ledger_peak(&cx, &out).unwrap();
        oracle_agreement(&cx, &out, &sim.cost, &sim.tier).unwrap();

        let good = out.clone();
        out.outputs.as_mut().unwrap()[1][0] += 1e-12;
        let err = output_equivalence(&cx, &out, &reference).unwrap_err();
        assert_eq!(err.exit_code(), 3);

        let mut out = good.clone();
        out.block_latencies[0][2] = out.block_latencies[0][2] + SimTime(10_000);
        assert!(oracle_agreement(&cx, &out, &sim.cost, &sim.tier).is_err());

        let mut out = good;
        let i = out.timeline.events.iter().position(|e| matches!(e.op, pregate_core::sched::Op::Expert { .. })).unwrap();
        out.timeline.events[i].start = SimTime(0);
        assert!(timeline(&cx, &out).is_err());
    }
}
