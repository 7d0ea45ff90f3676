//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export takes plain arguments and returns a JSON string, so the page
//! needs no generated type glue. The `*_json` functions are the same
//! operations for native callers and tests.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use pregate_core::model::{gen_routing_trace, preset, Preset};
use pregate_core::sched::{simulate_trace, CostModel, Footprint, Lane, SimConfig, SimOutput, Strategy};
use pregate_core::store::TierSpec;

const SKEW: f64 = 1.0;
const SEED: u64 = 0;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn setup(model: &str, top_k: usize, tier: &str) -> Result<(Preset, TierSpec), String> {
    let p = preset(model).map_err(err)?;
    let p = p.with_routing(p.full.num_experts, top_k, 1).map_err(err)?;
    let tier = TierSpec::preset(tier).ok_or_else(|| format!("unknown tier '{tier}'"))?;
    Ok((p, tier))
}

fn run(p: &Preset, tier: TierSpec, strategy: Strategy, iterations: usize) -> Result<SimOutput, String> {
    let toy = p.toy();
    let trace = gen_routing_trace(&toy, iterations, SKEW, SEED).map_err(err)?;
    let sim = SimConfig::new(strategy, CostModel::calibrated(), tier, iterations);
    simulate_trace(&toy, &trace, &Footprint::of(&p.full), &sim).map_err(err)
}

#[derive(Serialize)]
struct EventJson<'a> {
    lane: Lane,
    label: &'a str,
    block: Option<usize>,
    start_s: f64,
    end_s: f64,
}

#[derive(Serialize)]
struct TimelineJson<'a> {
    strategy: &'static str,
    total_s: f64,
    avg_block_latency_s: f64,
    peak_bytes: u64,
    events: Vec<EventJson<'a>>,
}

/// Event timeline of one strategy, or `{"oom": ...}` if it does not fit.
pub fn simulate_timeline_json(model: &str, strategy: &str, top_k: usize, tier: &str, iterations: usize) -> Result<String, String> {
    let (p, tier) = setup(model, top_k, tier)?;
    let strategy: Strategy = strategy.parse().map_err(err)?;
    let out = match run(&p, tier, strategy, iterations.clamp(1, 8)) {
        Ok(out) => out,
        Err(e) if e.starts_with("OOM") => return serde_json::to_string(&serde_json::json!({ "oom": e })).map_err(err),
        Err(e) => return Err(e),
    };
    let events = out
        .timeline
        .events
        .iter()
        .map(|e| EventJson {
            lane: e.lane,
            label: &e.label,
            block: e.block,
            start_s: e.start.as_secs(),
            end_s: e.end.as_secs(),
        })
        .collect();
    let json = TimelineJson {
        strategy: strategy.name(),
        total_s: out.metrics.total_time,
        avg_block_latency_s: out.metrics.avg_moe_block_latency,
        peak_bytes: out.metrics.peak_fast_bytes,
        events,
    };
    serde_json::to_string(&json).map_err(err)
}

#[derive(Serialize)]
struct Series {
    strategy: &'static str,
    /// `None` where the strategy does not fit the fast tier.
    values: Vec<Option<f64>>,
}

/// Mean block latency of every strategy for top_k = 1, 2, 4, ... E.
pub fn topk_sweep_json(model: &str, tier: &str) -> Result<String, String> {
    let (p, tier) = setup(model, 1, tier)?;
    let e = p.full.num_experts;
    let ks: Vec<usize> = std::iter::successors(Some(1usize), |k| (k * 2 <= e).then_some(k * 2)).collect();
    let mut series = Vec::new();
    for s in Strategy::ALL {
        let mut values = Vec::new();
        for &k in &ks {
            let pk = p.with_routing(e, k, 1).map_err(err)?;
            values.push(run(&pk, tier, s, 2).ok().map(|o| o.metrics.avg_moe_block_latency));
        }
        series.push(Series { strategy: s.name(), values });
    }
    serde_json::to_string(&serde_json::json!({ "top_k": ks, "series": series })).map_err(err)
}

#[derive(Serialize)]
struct MemoryJson {
    strategy: &'static str,
    peak_bytes: Option<u64>,
    /// `(seconds, fast-tier bytes)` after every ledger change.
    curve: Vec<(f64, u64)>,
}

/// Peak fast-tier bytes and the ledger curve of one iteration, per strategy.
pub fn peak_memory_json(model: &str, top_k: usize, capacity_gb: f64) -> Result<String, String> {
    let (p, tier) = setup(model, top_k, "pcie4")?;
    if !(capacity_gb > 0.0) {
        return Err("capacity must be positive".into());
    }
    let tier = tier.with_capacity((capacity_gb * 1e9) as u64);
    let rows: Vec<MemoryJson> = Strategy::ALL
        .iter()
        .map(|&s| match run(&p, tier, s, 1) {
            Ok(out) => MemoryJson {
                strategy: s.name(),
                peak_bytes: Some(out.ledger.peak_bytes()),
                curve: out.ledger.events().iter().map(|e| (e.time.as_secs(), e.fast_bytes)).collect(),
            },
            Err(_) => MemoryJson { strategy: s.name(), peak_bytes: None, curve: vec![] },
        })
        .collect();
    serde_json::to_string(&serde_json::json!({ "capacity_bytes": tier.fast_capacity, "strategies": rows })).map_err(err)
}

#[wasm_bindgen]
pub fn simulate_timeline(model: &str, strategy: &str, top_k: usize, tier: &str, iterations: usize) -> Result<String, JsValue> {
    simulate_timeline_json(model, strategy, top_k, tier, iterations).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn topk_sweep(model: &str, tier: &str) -> Result<String, JsValue> {
    topk_sweep_json(model, tier).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn peak_memory(model: &str, top_k: usize, capacity_gb: f64) -> Result<String, JsValue> {
    peak_memory_json(model, top_k, capacity_gb).map_err(|e| JsValue::from_str(&e))
}
