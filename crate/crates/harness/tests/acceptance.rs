//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.
//!
//! Expected values come from oracles written here, independent of the crate
//! internals: a naive serial decoder, hand-derived latency formulas, a
//! brute-force cache replay, and direct parameter arithmetic.

use std::collections::BTreeMap;
use std::fs;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use pregate_core::model::{gen_routing_trace, init_model, model_stats, preset, ModelConfig, ModelParams};
use pregate_core::sched::{simulate, simulate_trace, CostModel, Footprint, SimConfig, SimOutput, Strategy};
use pregate_core::store::{CacheOutcome, CachePolicy, ExpertCache, ExpertKey, TierSpec};
use pregate_core::SimTime;
use pregate_harness::{run_experiment, ExperimentConfig, Outcome, Report};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

// ---------- naive serial reference ----------

struct Routed {
    ids: Vec<usize>,
    weights: Vec<f64>,
    origin: usize,
}

fn naive_route(x: &[f64], g: &pregate_core::model::Matrix, k: usize) -> (Vec<usize>, Vec<f64>) {
    let e = g.cols();
    let mut logits = vec![0.0f64; e];
    for (c, l) in logits.iter_mut().enumerate() {
        let mut s = 0.0;
        for (r, xr) in x.iter().enumerate() {
            s += g.get(r, c) as f64 * xr;
        }
        *l = s;
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in &logits {
        sum += (l - max).exp();
    }
    let mut taken = vec![false; e];
    let mut ids = Vec::new();
    let mut weights = Vec::new();
    for _ in 0..k {
        let mut best: Option<usize> = None;
        for c in 0..e {
            if !taken[c] && best.is_none_or(|b| logits[c] > logits[b]) {
                best = Some(c);
            }
        }
        let b = best.unwrap();
        taken[b] = true;
        ids.push(b);
        weights.push((logits[b] - max).exp() / sum);
    }
    (ids, weights)
}

fn naive_matvec(m: &pregate_core::model::Matrix, x: &[f64]) -> Vec<f64> {
    (0..m.rows())
        .map(|r| {
            let mut s = 0.0;
            for c in 0..m.cols() {
                s += m.get(r, c) as f64 * x[c];
            }
            s
        })
        .collect()
}

/// Straight-line decoder: no scheduler, no shared helpers.
fn naive_decode(model: &ModelParams, input: &[f64], iterations: usize) -> (Vec<Vec<f64>>, Vec<Vec<Routed>>) {
    let cfg = model.config;
    let (nb, lvl) = (cfg.num_blocks, cfg.activation_level);
    let mut outputs: Vec<Vec<f64>> = Vec::new();
    let mut routes = Vec::new();
    for _ in 0..iterations {
        let mut x = match outputs.last() {
            None => input.to_vec(),
            Some(y) => {
                let m = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                if m > 0.0 && m.is_finite() {
                    y.iter().map(|v| v / m).collect()
                } else {
                    vec![0.0; y.len()]
                }
            }
        };
        let mut pending: Vec<Option<Routed>> = (0..nb).map(|_| None).collect();
        let mut it_routes = Vec::new();
        for b in 0..nb {
            let blk = &model.blocks[b];
            if let Some(g) = &blk.gate {
                let (ids, weights) = naive_route(&x, g, cfg.top_k);
                pending[b] = Some(Routed { ids, weights, origin: b });
            }
            if let Some(g) = &blk.pre_gate {
                let (ids, weights) = naive_route(&x, g, cfg.top_k);
                pending[b + lvl] = Some(Routed { ids, weights, origin: b });
            }
            let r = pending[b].take().expect("every block is routed");
            let mut acc = vec![0.0; x.len()];
            for (&id, &w) in r.ids.iter().zip(&r.weights) {
                let ex = &blk.experts[id];
                let h: Vec<f64> = naive_matvec(&ex.w1, &x).into_iter().map(|v| if v > 0.0 { v } else { 0.0 }).collect();
                let o = naive_matvec(&ex.w2, &h);
                for i in 0..acc.len() {
                    acc[i] += w * o[i];
                }
            }
            x = naive_matvec(&blk.dense, &acc);
            it_routes.push(r);
        }
        outputs.push(x);
        routes.push(it_routes);
    }
    (outputs, routes)
}

struct Case {
    cfg: ModelConfig,
    input: Vec<f64>,
    iterations: usize,
}

fn random_cases(n: usize) -> Vec<Case> {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    (0..n)
        .map(|_| {
            let e = rng.gen_range(1..=16);
            let d = rng.gen_range(1..=32);
            let nb = rng.gen_range(2..=6);
            let k = rng.gen_range(1..=e);
            let dff = rng.gen_range(1..=64);
            let cfg = ModelConfig::new(d, dff, nb, e, k, 1).unwrap().with_seed(rng.gen());
            let input = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Case { cfg, input, iterations: rng.gen_range(1..=4) }
        })
        .collect()
}

fn sim(strategy: Strategy, iterations: usize) -> SimConfig {
    SimConfig::new(strategy, CostModel::calibrated(), TierSpec::pcie4(), iterations)
}

fn bits_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

// ---------- criteria ----------

fn c1_output_equivalence(cases: &[Case]) -> Check {
    for (n, c) in cases.iter().enumerate() {
        let model = init_model(&c.cfg).unwrap();
        let (want, routes) = naive_decode(&model, &c.input, c.iterations);
        let reference = pregate_core::model::decode(&model, &c.input, c.iterations).unwrap();
        for (a, b) in reference.outputs.iter().zip(&want) {
            ensure!(bits_equal(a, b), "case {n}: serial reference differs from naive decoder");
        }
        let fp = Footprint::of(&c.cfg);
        for s in Strategy::ALL {
            let out = simulate(&model, &fp, &sim(s, c.iterations), &c.input).map_err(|e| format!("case {n} {s}: {e}"))?;
            let got = out.outputs.as_ref().unwrap();
            ensure!(got.len() == want.len(), "case {n} {s}: iteration count");
            for (a, b) in got.iter().zip(&want) {
                ensure!(bits_equal(a, b), "case {n} {s}: activations differ");
            }
            ensure!(out.trace.entries == reference.trace.entries, "case {n} {s}: trace differs from serial reference");
            for (it, rs) in routes.iter().enumerate() {
                for (b, r) in rs.iter().enumerate() {
                    let e = out.trace.get(it, b).unwrap();
                    ensure!(
                        e.decision.expert_ids == r.ids
                            && bits_equal(&e.decision.combine_weights, &r.weights)
                            && e.origin_block == r.origin,
                        "case {n} {s}: routing at iteration {it} block {b} differs"
                    );
                }
            }
        }
    }
    Ok(format!("{} random configs x 4 strategies bit-identical to two serial references", cases.len()))
}

/// Non-MoE bytes plus the largest adjacent pair of active expert sets.
fn adjacent_pair_peak(fp: &Footprint, out: &SimOutput, nb: usize) -> u64 {
    let mut best = 0;
    for it in 0..out.trace.iterations() {
        let k = |b: usize| out.trace.get(it, b).unwrap().decision.expert_ids.len() as u64;
        for b in 0..nb.saturating_sub(1) {
            best = best.max((k(b) + k(b + 1)) * fp.expert_bytes);
        }
        if nb == 1 {
            best = best.max(k(0) * fp.expert_bytes);
        }
    }
    fp.non_moe_bytes + best
}

fn preset_runs() -> Vec<(&'static str, ModelConfig, Footprint, ModelParams)> {
    ["base8", "base64", "base128", "base256", "large128"]
        .iter()
        .map(|&n| {
            let p = preset(n).unwrap();
            let toy = p.toy();
            (n, toy, Footprint::of(&p.full), init_model(&toy).unwrap())
        })
        .collect()
}

fn preset_input(d: usize) -> Vec<f64> {
    (0..d).map(|i| ((i * 7 + 3) % 11) as f64 / 11.0 - 0.5).collect()
}

fn c2_pair_peak(cases: &[Case], presets: &[(&str, ModelConfig, Footprint, ModelParams)]) -> Check {
    for (n, c) in cases.iter().enumerate() {
        let model = init_model(&c.cfg).unwrap();
        let fp = Footprint::of(&c.cfg);
        let out = simulate(&model, &fp, &sim(Strategy::PreGated, c.iterations), &c.input).unwrap();
        let want = adjacent_pair_peak(&fp, &out, c.cfg.num_blocks);
        ensure!(out.ledger.peak_bytes() == want, "case {n}: ledger {} vs {want}", out.ledger.peak_bytes());
    }
    for (name, toy, fp, model) in presets {
        let out = simulate(model, fp, &sim(Strategy::PreGated, 2), &preset_input(toy.d_model)).unwrap();
        let want = adjacent_pair_peak(fp, &out, toy.num_blocks);
        ensure!(out.ledger.peak_bytes() == want, "{name}: ledger {} vs {want}", out.ledger.peak_bytes());
    }
    Ok(format!("{} random configs and {} presets match exactly", cases.len(), presets.len()))
}

fn c3_memory_ordering(cases: &[Case], presets: &[(&str, ModelConfig, Footprint, ModelParams)]) -> Check {
    let mut checked = 0;
    let mut all: Vec<(String, ModelConfig, Footprint, ModelParams, Vec<f64>, usize)> = cases
        .iter()
        .enumerate()
        .map(|(i, c)| (format!("case {i}"), c.cfg, Footprint::of(&c.cfg), init_model(&c.cfg).unwrap(), c.input.clone(), c.iterations))
        .collect();
    for (n, toy, fp, m) in presets {
        all.push((n.to_string(), *toy, *fp, m.clone(), preset_input(toy.d_model), 2));
    }
    for (name, cfg, fp, model, input, its) in &all {
        let peak = |s| simulate(model, fp, &sim(s, *its), input).map(|o| o.ledger.peak_bytes());
        let (Ok(on), Ok(pg), Ok(pf), Ok(res)) = (
            peak(Strategy::FetchOnDemand),
            peak(Strategy::PreGated),
            peak(Strategy::PrefetchAll),
            peak(Strategy::ResidentOnly),
        ) else {
            continue;
        };
        ensure!(on <= pg && pg <= pf && pf <= res, "{name}: {on} <= {pg} <= {pf} <= {res} violated");
        let diff = cfg.top_k as u64 * fp.expert_bytes;
        ensure!(pg - on == diff, "{name}: pre-gated minus on-demand is {} not {diff}", pg - on);
        checked += 1;
    }
    ensure!(checked >= cases.len(), "only {checked} configs fit");
    Ok(format!("{checked} fitting configs ordered; gap equals top_k expert bytes"))
}

/// Durations a block should take, from the raw model shape.
struct Hand {
    gates: Vec<f64>,
    expert: f64,
    dense: f64,
    t_active: f64,
    t_all: f64,
}

fn hand_costs(full: &ModelConfig, cost: &CostModel, tier: &TierSpec) -> Hand {
    let (d, f, e, k) = (full.d_model as f64, full.d_ff as f64, full.num_experts as f64, full.top_k as f64);
    let (nb, l) = (full.num_blocks, full.activation_level);
    let expert_bytes = 2.0 * d * f * full.dtype_bytes as f64;
    let one_gate = 2.0 * d * e / cost.gate_rate;
    let gates = (0..nb)
        .map(|b| {
            let conventional = l == 0 || b < l;
            let pre = l > 0 && b + l < nb;
            (conventional as u8 + pre as u8) as f64 * one_gate
        })
        .collect();
    Hand {
        gates,
        expert: k * 4.0 * d * f / cost.expert_rate,
        dense: 2.0 * d * d / cost.dense_rate,
        t_active: tier.channel_latency + k * expert_bytes / tier.channel_bandwidth,
        t_all: tier.channel_latency + e * expert_bytes / tier.channel_bandwidth,
    }
}

fn hand_latency(s: Strategy, h: &Hand, b: usize) -> f64 {
    let c = h.gates[b] + h.expert + h.dense;
    match s {
        Strategy::ResidentOnly => c,
        Strategy::FetchOnDemand => c + h.t_active,
        Strategy::PrefetchAll => c.max(h.t_all),
        Strategy::PreGated => c.max(h.t_active),
    }
}

fn worked_example() -> Result<(), String> {
    let cfg = ModelConfig::new(4, 8, 3, 16, 1, 1).unwrap();
    let model = init_model(&cfg).unwrap();
    let fp = Footprint { expert_bytes: 4_000_000, non_moe_bytes: 0, gate_flops: 0, expert_flops: 10_000_000, dense_flops: 0, head_flops: 0 };
    let cost = CostModel::new(1.0, 1e9, 1.0, 1.0).unwrap();
    let tier = TierSpec::new(1 << 40, 1e9, 0.0).unwrap();
    // On-demand 3 x (4 + 10); pre-gated hides all but block 0's fetch;
    // prefetch-all exposes block 0 (64) and is channel-bound after: 64 x 3 + 10.
    for (s, want_ms) in [(Strategy::FetchOnDemand, 42.0), (Strategy::PreGated, 34.0), (Strategy::PrefetchAll, 202.0)] {
        let out = simulate(&model, &fp, &SimConfig::new(s, cost, tier, 1), &[0.1, 0.2, 0.3, 0.4]).unwrap();
        ensure!(out.timeline.end() == SimTime::from_secs(want_ms / 1e3), "{s}: {} != {want_ms} ms", out.timeline.end());
    }
    Ok(())
}

fn c4_timing_oracle() -> Check {
    worked_example()?;
    let mut blocks = 0;
    for name in ["base8", "base64", "base128", "large128"] {
        for k in [1usize, 2, 4] {
            for tier in [TierSpec::pcie4(), TierSpec::ssd(), TierSpec::infinite()].map(|t| t.with_capacity(u64::MAX)) {
                let p = preset(name).unwrap().with_routing(preset(name).unwrap().full.num_experts, k, 1).unwrap();
                let toy = p.toy();
                let fp = Footprint::of(&p.full);
                let cost = CostModel::calibrated();
                let trace = gen_routing_trace(&toy, 2, 1.0, 11).unwrap();
                let h = hand_costs(&p.full, &cost, &tier);
                for s in Strategy::ALL {
                    let out = simulate_trace(&toy, &trace, &fp, &SimConfig::new(s, cost, tier, 2)).unwrap();
                    let first = if matches!(s, Strategy::PreGated | Strategy::PrefetchAll) { 1 } else { 0 };
                    for lats in &out.block_latencies {
                        for (b, lat) in lats.iter().enumerate().skip(first) {
                            let want = hand_latency(s, &h, b);
                            ensure!(
                                (lat.as_secs() - want).abs() <= 1e-9,
                                "{name} k={k} {s} block {b}: {} vs {want}",
                                lat.as_secs()
                            );
                            blocks += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(format!("worked example 42/34/202 ms exact; {blocks} steady-state blocks within 1e-9 s"))
}

fn run(text: &str) -> Result<Report, String> {
    let cfg: ExperimentConfig = text.parse().map_err(|e| format!("{e}"))?;
    run_experiment(&cfg).map_err(|e| format!("{e}"))
}

fn metric(report: &Report, strategy: &str, sweep: &str, pick: fn(&Outcome) -> f64) -> Result<f64, String> {
    let row = report.find(strategy, sweep).ok_or(format!("no row for {strategy} at {sweep}"))?;
    ensure!(!row.is_oom(), "{strategy} at {sweep} is OOM");
    Ok(pick(&row.outcome))
}

fn lat(o: &Outcome) -> f64 {
    match o {
        Outcome::Ok { avg_block_latency, .. } => *avg_block_latency,
        Outcome::Oom => f64::NAN,
    }
}

fn tps(o: &Outcome) -> f64 {
    match o {
        Outcome::Ok { tokens_per_sec, .. } => *tokens_per_sec,
        Outcome::Oom => f64::NAN,
    }
}

fn c5_calibrated_ratios() -> Check {
    let r = run("model=base64\ntier=pcie4\ntop_k=1")?;
    let ratio = metric(&r, "on_demand", "none", lat)? / metric(&r, "pre_gated", "none", lat)?;
    ensure!((1.4..=2.0).contains(&ratio), "base64 on-demand/pre-gated = {ratio:.3}");
    let mut pf = Vec::new();
    for m in ["base128", "large128"] {
        let r = run(&format!("model={m}\nstrategy=prefetch_all,pre_gated"))?;
        let x = metric(&r, "prefetch_all", "none", lat)? / metric(&r, "pre_gated", "none", lat)?;
        ensure!(x >= 20.0, "{m} prefetch-all/pre-gated = {x:.1}");
        pf.push(format!("{m} {x:.1}x"));
    }
    Ok(format!("on-demand/pre-gated {ratio:.3}; prefetch-all/pre-gated {}", pf.join(", ")))
}

fn c6_overhead() -> Check {
    let mut worst: f64 = 0.0;
    for m in ["base8", "base64", "base128", "base256"] {
        let r = run(&format!("model={m}\nstrategy=resident_only,pre_gated"))?;
        // iteration time is 1 / tokens_per_sec
        let x = metric(&r, "resident_only", "none", tps)? / metric(&r, "pre_gated", "none", tps)?;
        ensure!(x <= 1.30, "{m}: pre-gated iteration time is {x:.3}x resident-only");
        worst = worst.max(x);
    }
    Ok(format!("worst pre-gated/resident-only iteration time {worst:.3}x"))
}

fn c7_topk_sweep() -> Check {
    let values = ["1", "2", "4", "8", "16", "32", "64"];
    let r = run(&format!("model=base64\nstrategy=prefetch_all,pre_gated\nsweep_axis=top_k\nsweep_values={}", values.join(",")))?;
    let mut gaps = Vec::new();
    for v in values {
        gaps.push(metric(&r, "prefetch_all", v, lat)? - metric(&r, "pre_gated", v, lat)?);
    }
    for w in gaps.windows(2) {
        ensure!(w[1] <= w[0], "gap grew: {gaps:?}");
    }
    ensure!(*gaps.last().unwrap() == 0.0, "gap at top_k=E is {}", gaps.last().unwrap());
    Ok(format!("gap {:.3} ms at top-1 falls to exactly 0 at top-64", gaps[0] * 1e3))
}

fn c8_flops() -> Check {
    for k in [1, 2] {
        let flops: Vec<u64> = [8, 64, 128, 256]
            .iter()
            .map(|&e| model_stats(&preset("base8").unwrap().with_routing(e, k, 1).unwrap().full).flops_per_token)
            .collect();
        ensure!(flops.windows(2).all(|w| w[0] == w[1]), "top_k={k}: {flops:?}");
        // independent count: per block k experts of 2 matmuls plus the dense stand-in, plus the remainder
        let c = preset("base8").unwrap().full;
        let (d, f, nb) = (c.d_model as u64, c.d_ff as u64, c.num_blocks as u64);
        let want = nb * (k as u64 * 2 * (2 * d * f) + 2 * d * d) + 2 * c.extra_non_moe_params;
        ensure!(flops[0] == want, "top_k={k}: {} vs hand count {want}", flops[0]);
    }
    Ok("flops_per_token identical for E in {8,64,128,256} at top-1 and top-2".into())
}

fn c9_table() -> Check {
    let mut parts = Vec::new();
    for (name, target) in [("base8", 0.7e9), ("base64", 3.8e9), ("base128", 7.5e9)] {
        let total = model_stats(&preset(name).unwrap().full).params_total as f64;
        let err = total / target - 1.0;
        ensure!(err.abs() <= 0.15, "{name}: {total:.3e} is {:.1}% off {target:.1e}", err * 100.0);
        parts.push(format!("{name} {:.2}B", total / 1e9));
    }
    let a = model_stats(&preset("base8").unwrap().full);
    let b = model_stats(&preset("base128").unwrap().full);
    ensure!(b.params_moe == 16 * a.params_moe, "MoE params ratio {}", b.params_moe as f64 / a.params_moe as f64);
    ensure!(b.params_experts == 16 * a.params_experts, "expert params ratio not 16");
    Ok(format!("{}; base128/base8 MoE params = 16 exactly", parts.join(", ")))
}

/// Brute-force replay: a flat list scanned in full on every access.
fn replay_oracle(policy: CachePolicy, slots: usize, keys: &[ExpertKey]) -> Vec<bool> {
    // (key, inserted_at, freq, last_use)
    let mut held: Vec<(ExpertKey, usize, u64, usize)> = Vec::new();
    let mut out = Vec::with_capacity(keys.len());
    for (t, &k) in keys.iter().enumerate() {
        if let Some(e) = held.iter_mut().find(|e| e.0 == k) {
            e.2 += 1;
            e.3 = t;
            out.push(true);
            continue;
        }
        out.push(false);
        if slots == 0 {
            continue;
        }
        if held.len() == slots {
            let mut v = 0;
            for i in 1..held.len() {
                let (a, b) = (&held[i], &held[v]);
                let better = match policy {
                    CachePolicy::Lifo => a.1 > b.1,
                    CachePolicy::Lfu => a.2 < b.2 || (a.2 == b.2 && a.1 < b.1),
                    CachePolicy::Lru => a.3 < b.3,
                };
                if better {
                    v = i;
                }
            }
            held.remove(v);
        }
        held.push((k, t, 1, t));
    }
    out
}

fn c10_cache() -> Check {
    let cfg = ModelConfig::new(4, 8, 12, 64, 1, 1).unwrap();
    let mut compared = 0;
    for skew in [0.8, 1.0, 1.2] {
        let trace = gen_routing_trace(&cfg, 834, skew, 5).unwrap();
        let keys: Vec<ExpertKey> = trace
            .entries
            .iter()
            .flat_map(|e| e.decision.expert_ids.iter().map(move |&x| ExpertKey { block: e.block, expert: x }))
            .take(10_000)
            .collect();
        ensure!(keys.len() == 10_000, "trace too short");
        let slots = (0.2 * (12 * 64) as f64) as usize;
        for policy in CachePolicy::ALL {
            let want = replay_oracle(policy, slots, &keys);
            let mut cache = ExpertCache::new(policy, slots as u64 * 100);
            let got: Vec<bool> =
                keys.iter().enumerate().map(|(t, &k)| cache.access(k, 100, t as u64) == CacheOutcome::Hit).collect();
            ensure!(got == want, "{policy} skew {skew}: hit/miss sequence diverges at access {}", got.iter().zip(&want).position(|(a, b)| a != b).unwrap());
            compared += 1;
        }
    }
    let mut gains = Vec::new();
    for m in ["base64", "base128"] {
        let r = run(&format!(
            "model={m}\nstrategy=on_demand,pre_gated\nrouting=synthetic\nskew=1.0\niterations=16\ncache_policy=none,lifo,lfu,lru\ncache_fraction=0.2"
        ))?;
        for p in ["lifo", "lfu", "lru"] {
            let g = |s: &str| -> Result<f64, String> {
                Ok(metric(&r, &format!("{s}+{p}"), "none", tps)? / metric(&r, s, "none", tps)? - 1.0)
            };
            let (on, pg) = (g("on_demand")?, g("pre_gated")?);
            ensure!(on >= pg, "{m} {p}: on-demand gain {on:.4} < pre-gated gain {pg:.4}");
            if p == "lru" {
                gains.push(format!("{m} lru on-demand {:+.1}% vs pre-gated {:+.1}%", on * 100.0, pg * 100.0));
            }
        }
    }
    Ok(format!("{compared} policy traces match replay; {}", gains.join("; ")))
}

fn c11_ssd() -> Check {
    for m in ["base8", "base64", "base128", "large128"] {
        let r = run(&format!("model={m}\nstrategy=on_demand,prefetch_all,pre_gated\nsweep_axis=bandwidth\nsweep_values=pcie4,ssd"))?;
        for s in ["on_demand", "prefetch_all", "pre_gated"] {
            let (a, b) = (metric(&r, s, "pcie4", lat)?, metric(&r, s, "ssd", lat)?);
            ensure!(b > a, "{m} {s}: ssd {b} not slower than pcie4 {a}");
        }
        for tier in ["pcie4", "ssd"] {
            let pg = metric(&r, "pre_gated", tier, lat)?;
            for s in ["on_demand", "prefetch_all"] {
                ensure!(pg < metric(&r, s, tier, lat)?, "{m} {tier}: pre-gated not faster than {s}");
            }
        }
    }
    Ok("ssd slower for every offload strategy; pre-gated fastest on both tiers".into())
}

fn c12_csv() -> Check {
    let text = "model=base64\ncache_policy=none,lru\nsweep_axis=top_k\nsweep_values=1,2\nseed=42";
    let cfg: ExperimentConfig = text.parse().map_err(|e| format!("{e}"))?;
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        run_experiment(&cfg).map_err(|e| e.to_string())?.write_csvs(d.path()).map_err(|e| e.to_string())?;
    }
    for f in ["block_lats.csv", "throughputs.csv", "peak_mems.csv"] {
        let a = fs::read(dirs[0].path().join(f)).unwrap();
        let b = fs::read(dirs[1].path().join(f)).unwrap();
        ensure!(a == b, "{f} differs between identical runs");
    }
    let mut oom: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for m in ["base8", "base64", "base128", "base256", "large128"] {
        let r = run(&format!("model={m}\niterations=1\nfast_capacity=80e9"))?;
        oom.insert(m.into(), r.rows.iter().filter(|r| r.is_oom()).map(|r| r.strategy.clone()).collect());
        let csv = &r.csv_bodies()[0];
        ensure!(csv.contains(",OOM\n") == (m == "large128"), "{m}: OOM marker presence wrong");
    }
    for (m, rows) in &oom {
        let want: Vec<String> = if m == "large128" { vec!["resident_only".into()] } else { vec![] };
        ensure!(*rows == want, "{m}: OOM rows {rows:?}");
    }
    Ok("byte-identical CSVs across runs; OOM only for resident_only on large128".into())
}

fn main() {
    let start = Instant::now();
    let cases = random_cases(120);
    let presets = preset_runs();
    let criteria: Vec<(&str, Box<dyn Fn() -> Check + '_>)> = vec![
        ("output equivalence", Box::new(|| c1_output_equivalence(&cases))),
        ("peak memory equals adjacent-pair bound", Box::new(|| c2_pair_peak(&cases, &presets))),
        ("memory ordering", Box::new(|| c3_memory_ordering(&cases, &presets))),
        ("timing oracle", Box::new(c4_timing_oracle)),
        ("calibrated latency ratios", Box::new(c5_calibrated_ratios)),
        ("overhead vs resident-only", Box::new(c6_overhead)),
        ("top-k sweep gap", Box::new(c7_topk_sweep)),
        ("FLOPs invariance", Box::new(c8_flops)),
        ("parameter scaling", Box::new(c9_table)),
        ("cache replay and gain asymmetry", Box::new(c10_cache)),
        ("slow-tier mode", Box::new(c11_ssd)),
        ("CSV contract", Box::new(c12_csv)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed in {:.1}s", criteria.len() - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
