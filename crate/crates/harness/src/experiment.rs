//! Runs the strategy x cache x sweep matrix and assembles the report.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use rayon::prelude::*;

use pregate_core::model::{decode, gen_routing_trace, init_input, init_model, weights, DecodeOutput, ModelParams, RoutingTrace};
use pregate_core::sched::{replay_wallclock, simulate, simulate_trace, Footprint, SimConfig, SimOutput, Strategy, Timeline};
use pregate_core::store::{CacheConfig, CachePolicy};

use crate::config::{ExperimentConfig, RoutingMode};
use crate::error::{HarnessError, Result};
use crate::invariants::{self, Context};

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Ok {
        avg_block_latency: f64,
        tokens_per_sec: f64,
        peak_bytes: u64,
        cache_hit_rate: Option<f64>,
    },
    Oom,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub model: String,
    /// Strategy name, suffixed with `+policy` when a cache is active.
    pub strategy: String,
    pub sweep_value: String,
    pub outcome: Outcome,
    pub timeline: Option<Timeline>,
    /// Real time of the wall-clock replay, when requested.
    pub wallclock: Option<Duration>,
}

impl Row {
    pub fn is_oom(&self) -> bool {
        self.outcome == Outcome::Oom
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub rows: Vec<Row>,
}

const CSVS: [(&str, &str); 3] = [
    ("block_lats.csv", "avg_block_latency_s"),
    ("throughputs.csv", "tokens_per_sec"),
    ("peak_mems.csv", "peak_bytes"),
];

impl Report {
    pub fn all_oom(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(Row::is_oom)
    }

    pub fn find(&self, strategy: &str, sweep_value: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.strategy == strategy && r.sweep_value == sweep_value)
    }

    /// One CSV body per metric, in `CSVS` order.
    pub fn csv_bodies(&self) -> [String; 3] {
        let mut out: [String; 3] = Default::default();
        for (i, (_, metric)) in CSVS.iter().enumerate() {
            let mut s = format!("model,strategy,sweep_value,{metric}\n");
            for r in &self.rows {
                let v = match &r.outcome {
                    Outcome::Oom => "OOM".to_string(),
                    Outcome::Ok { avg_block_latency, tokens_per_sec, peak_bytes, .. } => match i {
                        0 => avg_block_latency.to_string(),
                        1 => tokens_per_sec.to_string(),
                        _ => peak_bytes.to_string(),
                    },
                };
                s.push_str(&format!("{},{},{},{}\n", r.model, r.strategy, r.sweep_value, v));
            }
            out[i] = s;
        }
        out
    }

    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for ((name, _), body) in CSVS.iter().zip(self.csv_bodies()) {
            fs::write(dir.join(name), body)?;
        }
        Ok(())
    }

    /// One JSON-lines timeline per non-OOM row under `dir/timelines`.
    pub fn write_timelines(&self, dir: &Path) -> Result<()> {
        let tdir = dir.join("timelines");
        fs::create_dir_all(&tdir)?;
        for r in &self.rows {
            if let Some(t) = &r.timeline {
                let name = format!("{}_{}_{}.jsonl", r.model, r.strategy.replace('+', "-"), r.sweep_value);
                let mut w = BufWriter::new(fs::File::create(tdir.join(name))?);
                t.write_jsonl(&mut w)?;
                w.flush()?;
            }
        }
        Ok(())
    }
}

enum Source {
    Math { params: ModelParams, input: Vec<f64>, reference: DecodeOutput },
    Trace(RoutingTrace),
}

fn strategy_label(strategy: Strategy, cache: Option<CachePolicy>) -> String {
    match cache {
        Some(p) if strategy.offloads() => format!("{}+{}", strategy.name(), p.name().to_lowercase()),
        _ => strategy.name().to_string(),
    }
}

fn build_source(cfg: &ExperimentConfig) -> Result<Source> {
    let toy = cfg.model.toy;
    Ok(match cfg.routing {
        RoutingMode::Synthetic => Source::Trace(gen_routing_trace(&toy, cfg.iterations, cfg.skew, cfg.seed)?),
        RoutingMode::Computed => {
            let params = match &cfg.weights {
                Some(path) => {
                    let f = fs::File::open(path)
                        .map_err(|e| HarnessError::Config(format!("cannot open {}: {e}", path.display())))?;
                    let p = weights::read_weights(std::io::BufReader::new(f))?;
                    let (a, b) = (p.config, toy);
                    let same = (a.d_model, a.d_ff, a.num_blocks, a.num_experts, a.top_k, a.activation_level)
                        == (b.d_model, b.d_ff, b.num_blocks, b.num_experts, b.top_k, b.activation_level);
                    if !same {
                        return Err(HarnessError::Config(format!(
                            "weight file {} does not match the configured model shape",
                            path.display()
                        )));
                    }
                    p
                }
                None => init_model(&toy)?,
            };
            let input = init_input(toy.d_model, cfg.seed);
            let reference = decode(&params, &input, cfg.iterations)?;
            Source::Math { params, input, reference }
        }
    })
}

/// Runs every strategy and cache policy at one sweep point.
fn run_point(cfg: &ExperimentConfig, sweep_value: &str) -> Result<Vec<Row>> {
    let toy = cfg.model.toy;
    if toy.activation_level == 0 && cfg.strategies.contains(&Strategy::PreGated) {
        return Err(HarnessError::Config("pre_gated needs activation_level of at least 1".into()));
    }
    let fp = Footprint::of(&cfg.model.full);
    let source = build_source(cfg)?;
    let mut rows = Vec::new();
    for &strategy in &cfg.strategies {
        let mut seen = Vec::new();
        for &policy in &cfg.cache_policies {
            let policy = policy.filter(|_| strategy.offloads());
            if seen.contains(&policy) {
                continue;
            }
            seen.push(policy);
            let sim = SimConfig {
                strategy,
                cost: cfg.cost,
                tier: cfg.tier,
                cache: policy.map(|policy| CacheConfig { policy, capacity_fraction: cfg.cache_fraction }),
                iterations: cfg.iterations,
                include_first_block: cfg.include_first_block,
            };
            let label = strategy_label(strategy, policy);
            let result = match &source {
                Source::Math { params, input, .. } => simulate(params, &fp, &sim, input),
                Source::Trace(trace) => simulate_trace(&toy, trace, &fp, &sim),
            };
            let mut row = Row {
                model: cfg.model.name.to_string(),
                strategy: label.clone(),
                sweep_value: sweep_value.to_string(),
                outcome: Outcome::Oom,
                timeline: None,
                wallclock: None,
            };
            let out: SimOutput = match result {
                Ok(out) => out,
                Err(e) if e.is_oom() => {
                    rows.push(row);
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let cx = Context {
                label: format!("{} {} sweep={}", cfg.model.name, label, sweep_value),
                config: &toy,
                footprint: &fp,
                sim: &sim,
            };
            if let Source::Math { reference, .. } = &source {
                invariants::output_equivalence(&cx, &out, reference)?;
            }
            invariants::timeline(&cx, &out)?;
            invariants::ledger_peak(&cx, &out)?;
            invariants::oracle_agreement(&cx, &out, &cfg.cost, &cfg.tier)?;
            if cfg.wallclock {
                let rep = replay_wallclock(&out.timeline, cfg.tier.fast_capacity, cfg.wallclock_scale)?;
                if let Some(e) = rep.error {
                    return Err(e.into());
                }
                row.wallclock = Some(rep.elapsed);
            }
            let m = &out.metrics;
            row.outcome = Outcome::Ok {
                avg_block_latency: m.avg_moe_block_latency,
                tokens_per_sec: m.tokens_per_sec,
                peak_bytes: m.peak_fast_bytes,
                cache_hit_rate: m.cache_hit_rate,
            };
            row.timeline = Some(out.timeline);
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Runs the configured matrix. Sweep points execute in parallel; rows come
/// back in sweep order, then strategy order, then cache-policy order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let points: Vec<(ExperimentConfig, String)> = match &cfg.sweep {
        None => vec![(cfg.at_sweep_point(None)?, "none".to_string())],
        Some(s) => s
            .values
            .iter()
            .map(|v| Ok((cfg.at_sweep_point(Some((s.axis, v)))?, v.clone())))
            .collect::<Result<_>>()?,
    };
    let per_point: Vec<Vec<Row>> =
        points.par_iter().map(|(c, v)| run_point(c, v)).collect::<Result<_>>()?;
    Ok(Report { rows: per_point.into_iter().flatten().collect() })
}
