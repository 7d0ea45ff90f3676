//! Virtual-clock executor: one compute lane, one transfer channel.
//!
//! The engine walks blocks in program order. Each compute op is placed at
//! `max(lane free, ready)` and its math runs immediately, so routing decisions
//! are known exactly when the schedule would know them. Transfers queue on
//! the channel in issue order.

use serde::{Deserialize, Serialize};

use super::cost::{CostModel, Footprint};
use super::strategy::Strategy;
use super::timeline::{GateSlot, Lane, Op, Timeline, TimelineEvent};
use crate::error::{Error, Result};
use crate::model::{
    expert_forward, gate_forward, mix_into, next_input, non_moe_forward, ModelConfig, ModelParams, Provenance,
    RoutingDecision, RoutingTrace, TraceEntry,
};
use crate::store::{
    initial_placement, transfer_duration, CacheConfig, ExpertCache, ExpertKey, MemoryLedger, PlacementMode,
    PlacementState, TierSpec,
};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub strategy: Strategy,
    pub cost: CostModel,
    pub tier: TierSpec,
    /// Ignored under [`Strategy::ResidentOnly`].
    pub cache: Option<CacheConfig>,
    pub iterations: usize,
    /// Count block 0 in `avg_moe_block_latency`.
    pub include_first_block: bool,
}

impl SimConfig {
    pub fn new(strategy: Strategy, cost: CostModel, tier: TierSpec, iterations: usize) -> Self {
        SimConfig { strategy, cost, tier, cache: None, iterations, include_first_block: false }
    }

    pub fn with_cache(mut self, cache: Option<CacheConfig>) -> Self {
        self.cache = cache;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean block latency over all iterations; excludes block 0 unless asked.
    pub avg_moe_block_latency: f64,
    /// Generated tokens per second at batch size 1.
    pub tokens_per_sec: f64,
    pub peak_fast_bytes: u64,
    /// Mean latency of each block across iterations, seconds.
    pub per_block_latency: Vec<f64>,
    pub cache_hit_rate: Option<f64>,
    /// Wall time of the whole run, seconds.
    pub total_time: f64,
}

impl Metrics {
    /// Builds metrics from raw per-iteration block latencies (seconds).
    pub fn from_latencies(
        block_lat: &[Vec<f64>],
        total_time: f64,
        peak_fast_bytes: u64,
        cache_hit_rate: Option<f64>,
        include_first_block: bool,
    ) -> Self {
        let iterations = block_lat.len();
        let nb = block_lat.first().map_or(0, Vec::len);
        let per_block_latency: Vec<f64> = (0..nb)
            .map(|b| block_lat.iter().map(|it| it[b]).sum::<f64>() / iterations as f64)
            .collect();
        let skip = usize::from(!include_first_block && nb > 1);
        let counted: Vec<f64> = block_lat.iter().flat_map(|it| it[skip..].iter().copied()).collect();
        let avg = if counted.is_empty() { 0.0 } else { counted.iter().sum::<f64>() / counted.len() as f64 };
        Metrics {
            avg_moe_block_latency: avg,
            tokens_per_sec: if total_time > 0.0 { iterations as f64 / total_time } else { f64::INFINITY },
            peak_fast_bytes,
            per_block_latency,
            cache_hit_rate,
            total_time,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    /// Final activation of each iteration; `None` when routing came from a trace.
    pub outputs: Option<Vec<Vec<f64>>>,
    pub trace: RoutingTrace,
    pub timeline: Timeline,
    pub metrics: Metrics,
    pub ledger: MemoryLedger,
    /// `[iteration][block]` latency in virtual time.
    pub block_latencies: Vec<Vec<SimTime>>,
}

/// Where routing decisions and block math come from.
pub(crate) trait Executor {
    fn begin_iteration(&mut self, iteration: usize) -> Result<()>;
    fn gate(&mut self, block: usize, slot: GateSlot) -> Result<RoutingDecision>;
    fn expert(&mut self, block: usize, expert: usize, weight: f64) -> Result<()>;
    fn dense(&mut self, block: usize) -> Result<()>;
    fn end_iteration(&mut self) -> Result<()>;
}

/// Runs the real model math.
pub(crate) struct MathExecutor<'a> {
    model: &'a ModelParams,
    input: Vec<f64>,
    act: Vec<f64>,
    acc: Vec<f64>,
    pub outputs: Vec<Vec<f64>>,
}

impl<'a> MathExecutor<'a> {
    pub fn new(model: &'a ModelParams, input: &[f64]) -> Result<Self> {
        let d = model.config.d_model;
        if input.len() != d || input.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch(format!("input must be {d} finite values")));
        }
        Ok(MathExecutor { model, input: input.to_vec(), act: vec![], acc: vec![0.0; d], outputs: vec![] })
    }
}

impl Executor for MathExecutor<'_> {
    fn begin_iteration(&mut self, _iteration: usize) -> Result<()> {
        self.act = match self.outputs.last() {
            Some(prev) => next_input(prev),
            None => self.input.clone(),
        };
        self.acc.iter_mut().for_each(|a| *a = 0.0);
        Ok(())
    }

    fn gate(&mut self, block: usize, slot: GateSlot) -> Result<RoutingDecision> {
        let b = &self.model.blocks[block];
        let g = match slot {
            GateSlot::Conventional => b.gate.as_ref(),
            GateSlot::Pre => b.pre_gate.as_ref(),
        };
        let g = g.ok_or_else(|| Error::Wiring(format!("block {block} has no {slot:?} gate")))?;
        gate_forward(&self.act, g, self.model.config.top_k)
    }

    fn expert(&mut self, block: usize, expert: usize, weight: f64) -> Result<()> {
        let out = expert_forward(&self.act, &self.model.blocks[block].experts[expert])?;
        mix_into(&mut self.acc, weight, &out);
        Ok(())
    }

    fn dense(&mut self, block: usize) -> Result<()> {
        self.act = non_moe_forward(&self.model.blocks[block].dense, &self.acc)?;
        self.acc.iter_mut().for_each(|a| *a = 0.0);
        Ok(())
    }

    fn end_iteration(&mut self) -> Result<()> {
        self.outputs.push(std::mem::take(&mut self.act));
        Ok(())
    }
}

/// Replays a recorded trace; no math.
struct TraceExecutor<'a> {
    trace: &'a RoutingTrace,
    config: &'a ModelConfig,
    iteration: usize,
}

impl Executor for TraceExecutor<'_> {
    fn begin_iteration(&mut self, iteration: usize) -> Result<()> {
        self.iteration = iteration;
        Ok(())
    }

    fn gate(&mut self, block: usize, slot: GateSlot) -> Result<RoutingDecision> {
        let target = match slot {
            GateSlot::Conventional => block,
            GateSlot::Pre => block + self.config.activation_level,
        };
        self.trace
            .get(self.iteration, target)
            .map(|e| e.decision.clone())
            .ok_or_else(|| Error::Wiring(format!("trace has no entry for iteration {} block {target}", self.iteration)))
    }

    fn expert(&mut self, _: usize, _: usize, _: f64) -> Result<()> {
        Ok(())
    }

    fn dense(&mut self, _: usize) -> Result<()> {
        Ok(())
    }

    fn end_iteration(&mut self) -> Result<()> {
        Ok(())
    }
}

struct Arrival {
    at: SimTime,
    transfer: Option<usize>,
    /// Experts whose fast-tier copy this block must release.
    keys: Vec<ExpertKey>,
}

struct Engine<'a, X: Executor> {
    config: &'a ModelConfig,
    fp: &'a Footprint,
    sim: &'a SimConfig,
    exec: X,
    placement: PlacementState,
    cache: Option<ExpertCache>,
    access_seq: u64,
    timeline: Timeline,
    compute_free: SimTime,
    channel_free: SimTime,
    last_compute: Option<usize>,
    iteration: usize,
}

impl<'a, X: Executor> Engine<'a, X> {
    fn new(config: &'a ModelConfig, fp: &'a Footprint, sim: &'a SimConfig, exec: X) -> Result<Self> {
        config.validate()?;
        sim.cost.validate()?;
        sim.tier.validate()?;
        if sim.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if sim.strategy == Strategy::PreGated && config.activation_level == 0 {
            return Err(Error::Wiring("pre-gated execution needs a model wired with pre-gates".into()));
        }
        let sizes = fp.param_sizes(config);
        let mode = if sim.strategy.offloads() { PlacementMode::OffloadExperts } else { PlacementMode::AllResident };
        let mut placement = initial_placement(&sizes, mode, sim.tier.fast_capacity)?;
        let cache = match (&sim.cache, sim.strategy.offloads()) {
            (Some(c), true) => {
                let cache = ExpertCache::from_config(c, sizes.total_expert_bytes())?;
                placement.reserve_cache(SimTime::ZERO, cache.capacity_bytes())?;
                Some(cache)
            }
            _ => None,
        };
        Ok(Engine {
            config,
            fp,
            sim,
            exec,
            placement,
            cache,
            access_seq: 0,
            timeline: Timeline::default(),
            compute_free: SimTime::ZERO,
            channel_free: SimTime::ZERO,
            last_compute: None,
            iteration: 0,
        })
    }

    fn label(&self, block: Option<usize>, what: &str) -> String {
        match block {
            Some(b) => format!("it{}.b{}.{}", self.iteration, b, what),
            None => format!("it{}.{}", self.iteration, what),
        }
    }

    fn compute(&mut self, block: Option<usize>, what: &str, secs: f64, ready: SimTime, deps: Vec<usize>, op: Op) -> usize {
        let start = self.compute_free.max(ready);
        let end = start + SimTime::from_secs(secs);
        let idx = self.timeline.push(TimelineEvent {
            lane: Lane::Compute,
            label: self.label(block, what),
            iteration: self.iteration,
            block,
            start,
            end,
            deps,
            op,
        });
        self.compute_free = end;
        self.last_compute = Some(idx);
        idx
    }

    /// Requests `experts` of `block` at `ready`. Cache hits skip the channel.
    fn fetch(&mut self, issuing_block: usize, block: usize, experts: &[usize], ready: SimTime, dep: Option<usize>) -> Result<Arrival> {
        let mut missing = Vec::with_capacity(experts.len());
        let mut keys = Vec::with_capacity(experts.len());
        for &expert in experts {
            let key = ExpertKey { block, expert };
            keys.push(key);
            let hit = match self.cache.as_mut() {
                Some(cache) => {
                    let seq = self.access_seq;
                    self.access_seq += 1;
                    cache.access(key, self.fp.expert_bytes, seq).is_hit()
                }
                None => false,
            };
            if hit {
                self.placement.mark_cached(key)?;
            } else {
                missing.push(key);
            }
        }
        if missing.is_empty() {
            return Ok(Arrival { at: ready, transfer: None, keys });
        }
        let bytes = missing.len() as u64 * self.fp.expert_bytes;
        let start = self.channel_free.max(ready);
        let end = start + SimTime::from_secs(transfer_duration(bytes, &self.sim.tier));
        self.placement.begin_transfer(&missing, ready, end)?;
        let ids: Vec<usize> = missing.iter().map(|k| k.expert).collect();
        let what = format!("xfer.b{}{:?}", block, ids);
        let idx = self.timeline.push(TimelineEvent {
            lane: Lane::Channel,
            label: self.label(Some(issuing_block), &what),
            iteration: self.iteration,
            block: Some(issuing_block),
            start,
            end,
            deps: dep.into_iter().collect(),
            op: Op::Transfer {
                target_block: block,
                experts: ids,
                bytes,
                fast_bytes_after: self.placement.ledger().fast_bytes(),
            },
        });
        self.channel_free = end;
        Ok(Arrival { at: end, transfer: Some(idx), keys })
    }

    fn fetch_all(&mut self, issuing_block: usize, block: usize, ready: SimTime, dep: Option<usize>) -> Result<Arrival> {
        let all: Vec<usize> = (0..self.config.num_experts).collect();
        self.fetch(issuing_block, block, &all, ready, dep)
    }

    fn run_iteration(&mut self, trace: &mut RoutingTrace) -> Result<Vec<SimTime>> {
        let cfg = self.config;
        let nb = cfg.num_blocks;
        let level = cfg.activation_level;
        let strategy = self.sim.strategy;
        let cost = self.sim.cost;

        self.exec.begin_iteration(self.iteration)?;
        let head_deps = Vec::new();
        self.compute(None, "head", self.fp.head_secs(&cost), SimTime::ZERO, head_deps, Op::Head);
        let mut prev_finish = self.compute_free;

        let mut pending: Vec<Option<(RoutingDecision, usize)>> = vec![None; nb];
        let mut arrivals: Vec<Option<Arrival>> = (0..nb).map(|_| None).collect();
        let mut latencies = Vec::with_capacity(nb);

        if strategy == Strategy::PrefetchAll {
            let (ready, dep) = (self.compute_free, self.last_compute);
            arrivals[0] = Some(self.fetch_all(0, 0, ready, dep)?);
            if nb > 1 {
                arrivals[1] = Some(self.fetch_all(0, 1, ready, dep)?);
            }
        }

        for b in 0..nb {
            if cfg.has_conventional_gate(b) {
                let g = self.compute(Some(b), "gate", self.fp.gate_secs(&cost), SimTime::ZERO, vec![], Op::Gate(GateSlot::Conventional));
                let d = self.exec.gate(b, GateSlot::Conventional)?;
                if strategy == Strategy::PreGated {
                    let end = self.timeline.events[g].end;
                    arrivals[b] = Some(self.fetch(b, b, &d.expert_ids, end, Some(g))?);
                }
                pending[b] = Some((d, b));
            }
            if cfg.has_pre_gate(b) {
                let g = self.compute(Some(b), "pre_gate", self.fp.gate_secs(&cost), SimTime::ZERO, vec![], Op::Gate(GateSlot::Pre));
                let d = self.exec.gate(b, GateSlot::Pre)?;
                let target = b + level;
                if target >= nb || pending[target].is_some() {
                    return Err(Error::Wiring(format!("block {b} pre-gates invalid block {target}")));
                }
                if strategy == Strategy::PreGated {
                    let end = self.timeline.events[g].end;
                    arrivals[target] = Some(self.fetch(b, target, &d.expert_ids, end, Some(g))?);
                }
                pending[target] = Some((d, b));
            }
            let (routing, origin) = pending[b].take().ok_or(Error::MissingRouting)?;
            routing.validate(cfg.num_experts)?;

            let arrival = match strategy {
                Strategy::ResidentOnly => Arrival { at: SimTime::ZERO, transfer: None, keys: vec![] },
                Strategy::FetchOnDemand => {
                    let (ready, dep) = (self.compute_free, self.last_compute);
                    self.fetch(b, b, &routing.expert_ids, ready, dep)?
                }
                Strategy::PrefetchAll | Strategy::PreGated => arrivals[b]
                    .take()
                    .ok_or_else(|| Error::Wiring(format!("block {b} has no expert migration in flight")))?,
            };

            let expert_secs = self.fp.expert_secs(&cost);
            for (expert, weight) in routing.iter() {
                let key = ExpertKey { block: b, expert };
                if !self.placement.is_available(key, self.compute_free.max(arrival.at)) {
                    return Err(Error::Wiring(format!("expert {expert} of block {b} ran before it was resident")));
                }
                self.compute(
                    Some(b),
                    &format!("expert{expert}"),
                    expert_secs,
                    arrival.at,
                    arrival.transfer.into_iter().collect(),
                    Op::Expert { expert, weight },
                );
                self.exec.expert(b, expert, weight)?;
            }
            self.placement.release(&arrival.keys, self.compute_free)?;
            if strategy == Strategy::PrefetchAll && b + 2 < nb {
                let (ready, dep) = (self.compute_free, self.last_compute);
                arrivals[b + 2] = Some(self.fetch_all(b, b + 2, ready, dep)?);
            }

            self.compute(Some(b), "dense", self.fp.dense_secs(&cost), SimTime::ZERO, vec![], Op::Dense);
            self.exec.dense(b)?;

            trace.entries.push(TraceEntry { iteration: self.iteration, block: b, origin_block: origin, decision: routing });
            latencies.push(self.compute_free - prev_finish);
            prev_finish = self.compute_free;
        }
        if pending.iter().any(Option::is_some) || arrivals.iter().any(Option::is_some) {
            return Err(Error::Wiring("routing or migration crossed the iteration boundary".into()));
        }
        self.exec.end_iteration()?;
        Ok(latencies)
    }

    fn run(mut self, provenance: Provenance) -> Result<(X, SimOutput)> {
        let mut trace = RoutingTrace::new(self.config.num_blocks, provenance);
        let mut block_latencies = Vec::with_capacity(self.sim.iterations);
        for it in 0..self.sim.iterations {
            self.iteration = it;
            block_latencies.push(self.run_iteration(&mut trace)?);
        }
        let total = self.timeline.end();
        let lat_secs: Vec<Vec<f64>> =
            block_latencies.iter().map(|it| it.iter().map(|t| t.as_secs()).collect()).collect();
        let metrics = Metrics::from_latencies(
            &lat_secs,
            total.as_secs(),
            self.placement.ledger().peak_bytes(),
            self.cache.as_ref().and_then(ExpertCache::hit_rate),
            self.sim.include_first_block,
        );
        let out = SimOutput {
            outputs: None,
            trace,
            timeline: self.timeline,
            metrics,
            ledger: self.placement.ledger().clone(),
            block_latencies,
        };
        Ok((self.exec, out))
    }
}

/// Runs `model` under `sim.strategy`, charging costs from `footprint`.
///
/// The numerical outputs never depend on the strategy.
pub fn simulate(model: &ModelParams, footprint: &Footprint, sim: &SimConfig, input: &[f64]) -> Result<SimOutput> {
    let exec = MathExecutor::new(model, input)?;
    let engine = Engine::new(&model.config, footprint, sim, exec)?;
    let (exec, mut out) = engine.run(Provenance::ComputedByGate)?;
    out.outputs = Some(exec.outputs);
    Ok(out)
}

/// Schedules a recorded routing trace without running any math.
/// `sim.iterations` is taken from the trace.
pub fn simulate_trace(config: &ModelConfig, trace: &RoutingTrace, footprint: &Footprint, sim: &SimConfig) -> Result<SimOutput> {
    trace.check_wiring(config)?;
    let sim = SimConfig { iterations: trace.iterations(), ..*sim };
    let exec = TraceExecutor { trace, config, iteration: 0 };
    let engine = Engine::new(config, footprint, &sim, exec)?;
    let (_, out) = engine.run(trace.provenance)?;
    Ok(out)
}
