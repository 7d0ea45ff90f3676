//! Flat `key = value` experiment configs.
//!
//! One pair per line, `#` starts a comment, lists are comma-separated.
//! Every key is optional; see [`ExperimentConfig::default`] for defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pregate_core::model::{preset, ModelConfig, Preset};
use pregate_core::sched::{CostModel, Strategy};
use pregate_core::store::{CachePolicy, TierSpec};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Experts,
    TopK,
    CacheFraction,
    Bandwidth,
    ActivationLevel,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Experts => "experts",
            SweepAxis::TopK => "top_k",
            SweepAxis::CacheFraction => "cache_fraction",
            SweepAxis::Bandwidth => "bandwidth",
            SweepAxis::ActivationLevel => "activation_level",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "experts" => SweepAxis::Experts,
            "top_k" => SweepAxis::TopK,
            "cache_fraction" => SweepAxis::CacheFraction,
            "bandwidth" => SweepAxis::Bandwidth,
            "activation_level" => SweepAxis::ActivationLevel,
            other => return Err(HarnessError::Config(format!("unknown sweep axis '{other}'"))),
        })
    }
}

/// Where routing decisions come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoutingMode {
    /// Run the gates on real (synthetic-weight) activations.
    Computed,
    /// Replay a Zipf trace with the configured skew; no math.
    Synthetic,
}

/// Model shape: a named preset or explicit dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub name: &'static str,
    /// Dimensions charged by the cost model and the memory ledger.
    pub full: ModelConfig,
    /// Dimensions the math runs at.
    pub toy: ModelConfig,
    pub scale: usize,
}

impl ModelSpec {
    fn from_preset(p: Preset) -> Self {
        ModelSpec { name: p.name, full: p.full, toy: p.toy(), scale: p.scale }
    }

    /// Applies a new routing shape to both configs.
    pub fn with_routing(&self, experts: usize, top_k: usize, level: usize) -> Result<Self> {
        let mut s = *self;
        for c in [&mut s.full, &mut s.toy] {
            c.num_experts = experts;
            c.top_k = top_k;
            c.activation_level = level;
            c.validate()?;
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    /// Raw values, echoed verbatim into the `sweep_value` column.
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub strategies: Vec<Strategy>,
    pub tier: TierSpec,
    pub cost: CostModel,
    /// `None` entries run without a cache.
    pub cache_policies: Vec<Option<CachePolicy>>,
    pub cache_fraction: f64,
    pub sweep: Option<Sweep>,
    pub iterations: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub include_first_block: bool,
    pub routing: RoutingMode,
    pub skew: f64,
    pub wallclock_scale: f64,
    /// Replay each run in real time after simulating it.
    pub wallclock: bool,
    /// Optional weight file replacing the seeded weights.
    pub weights: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelSpec::from_preset(preset("base8").expect("base8 exists")),
            strategies: Strategy::ALL.to_vec(),
            tier: TierSpec::pcie4(),
            cost: CostModel::calibrated(),
            cache_policies: vec![None],
            cache_fraction: 0.1,
            sweep: None,
            iterations: 4,
            seed: 0,
            out: None,
            include_first_block: false,
            routing: RoutingMode::Computed,
            skew: 1.0,
            wallclock_scale: 1.0,
            wallclock: false,
            weights: None,
        }
    }
}

fn bad(key: &str, value: &str) -> HarnessError {
    HarnessError::Config(format!("malformed value '{value}' for '{key}'"))
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value))
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(bad(key, value)),
    }
}

/// Accepts a tier preset name or a bandwidth in bytes per second.
pub fn parse_bandwidth(value: &str) -> Result<TierSpec> {
    if let Some(t) = TierSpec::preset(value) {
        return Ok(t);
    }
    let bw: f64 = num("bandwidth", value)?;
    if !(bw > 0.0) {
        return Err(bad("bandwidth", value));
    }
    Ok(TierSpec { channel_bandwidth: bw, ..TierSpec::pcie4() })
}

#[derive(Default)]
struct Raw {
    model: Option<String>,
    experts: Option<usize>,
    top_k: Option<usize>,
    blocks: Option<usize>,
    d_model: Option<usize>,
    d_ff: Option<usize>,
    activation_level: Option<usize>,
    dtype_bytes: Option<usize>,
    scale: Option<usize>,
    extra_non_moe_params: Option<u64>,
    tier: Option<String>,
    fast_capacity: Option<u64>,
    bandwidth: Option<f64>,
    latency: Option<f64>,
    rates: [Option<f64>; 4],
    sweep_axis: Option<SweepAxis>,
    sweep_values: Option<Vec<String>>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        text.parse()
    }

    /// Checks that every sweep value makes sense for its axis.
    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(HarnessError::Config("strategy list is empty".into()));
        }
        if self.cache_policies.is_empty() {
            return Err(HarnessError::Config("cache_policy list is empty".into()));
        }
        if self.iterations == 0 {
            return Err(HarnessError::Config("iterations must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.cache_fraction) {
            return Err(HarnessError::Config(format!("cache_fraction {} is outside [0, 1]", self.cache_fraction)));
        }
        if !(self.skew.is_finite() && self.skew >= 0.0) {
            return Err(HarnessError::Config(format!("skew {} must be a non-negative number", self.skew)));
        }
        if !(self.wallclock_scale.is_finite() && self.wallclock_scale >= 0.0) {
            return Err(HarnessError::Config("wallclock_scale must be a non-negative number".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(HarnessError::Config(format!("sweep over {} has no values", sweep.axis)));
            }
            for v in &sweep.values {
                self.at_sweep_point(Some((sweep.axis, v)))?;
            }
        }
        Ok(())
    }

    /// The config with one sweep value applied.
    pub fn at_sweep_point(&self, point: Option<(SweepAxis, &str)>) -> Result<ExperimentConfig> {
        let mut c = self.clone();
        c.sweep = None;
        let Some((axis, value)) = point else { return Ok(c) };
        let m = c.model.full;
        match axis {
            SweepAxis::Experts => c.model = c.model.with_routing(num(axis.name(), value)?, m.top_k, m.activation_level)?,
            SweepAxis::TopK => c.model = c.model.with_routing(m.num_experts, num(axis.name(), value)?, m.activation_level)?,
            SweepAxis::ActivationLevel => {
                c.model = c.model.with_routing(m.num_experts, m.top_k, num(axis.name(), value)?)?
            }
            SweepAxis::CacheFraction => {
                let f: f64 = num(axis.name(), value)?;
                if !(0.0..=1.0).contains(&f) {
                    return Err(bad(axis.name(), value));
                }
                c.cache_fraction = f;
            }
            SweepAxis::Bandwidth => {
                let t = parse_bandwidth(value)?;
                c.tier = TierSpec { fast_capacity: c.tier.fast_capacity, ..t };
            }
        }
        Ok(c)
    }

    fn from_raw(raw: Raw, mut c: ExperimentConfig) -> Result<Self> {
        let name = raw.model.as_deref().unwrap_or("base8");
        let mut spec = if name == "custom" {
            let need = |v: Option<usize>, key: &str| {
                v.ok_or_else(|| HarnessError::Config(format!("model=custom requires '{key}'")))
            };
            let mut full = ModelConfig::new(
                need(raw.d_model, "d_model")?,
                need(raw.d_ff, "d_ff")?,
                need(raw.blocks, "blocks")?,
                need(raw.experts, "experts")?,
                raw.top_k.unwrap_or(1),
                raw.activation_level.unwrap_or(1),
            )?;
            full.extra_non_moe_params = raw.extra_non_moe_params.unwrap_or(0);
            let scale = raw.scale.unwrap_or(1);
            let p = Preset { name: "custom", full, scale: scale.max(1) };
            ModelSpec::from_preset(p)
        } else {
            let mut p = preset(name).map_err(|e| HarnessError::Config(e.to_string()))?;
            if let Some(s) = raw.scale {
                p.scale = s.max(1);
            }
            p.full.d_model = raw.d_model.unwrap_or(p.full.d_model);
            p.full.d_ff = raw.d_ff.unwrap_or(p.full.d_ff);
            p.full.num_blocks = raw.blocks.unwrap_or(p.full.num_blocks);
            if let Some(x) = raw.extra_non_moe_params {
                p.full.extra_non_moe_params = x;
            }
            p.full.num_experts = raw.experts.unwrap_or(p.full.num_experts);
            p.full.top_k = raw.top_k.unwrap_or(p.full.top_k);
            p.full.activation_level = raw.activation_level.unwrap_or(p.full.activation_level);
            ModelSpec::from_preset(p)
        };
        if let Some(dt) = raw.dtype_bytes {
            spec.full.dtype_bytes = dt;
            spec.toy.dtype_bytes = dt;
        }
        spec.full.seed = c.seed;
        spec.toy.seed = c.seed;
        spec.full.validate()?;
        spec.toy.validate()?;
        c.model = spec;

        let mut tier = match raw.tier.as_deref() {
            Some(t) => TierSpec::preset(t).ok_or_else(|| HarnessError::Config(format!("unknown tier preset '{t}'")))?,
            None => TierSpec::pcie4(),
        };
        if let Some(v) = raw.fast_capacity {
            tier.fast_capacity = v;
        }
        if let Some(v) = raw.bandwidth {
            tier.channel_bandwidth = v;
        }
        if let Some(v) = raw.latency {
            tier.channel_latency = v;
        }
        tier.validate()?;
        c.tier = tier;

        let [g, e, d, h] = raw.rates;
        let base = c.cost;
        c.cost = CostModel::new(
            g.unwrap_or(base.gate_rate),
            e.unwrap_or(base.expert_rate),
            d.unwrap_or(base.dense_rate),
            h.unwrap_or(base.head_rate),
        )?;

        c.sweep = match (raw.sweep_axis, raw.sweep_values) {
            (Some(axis), Some(values)) => Some(Sweep { axis, values }),
            (None, None) => None,
            (Some(_), None) => return Err(HarnessError::Config("sweep_axis given without sweep_values".into())),
            (None, Some(_)) => return Err(HarnessError::Config("sweep_values given without sweep_axis".into())),
        };
        c.validate()?;
        Ok(c)
    }
}

impl FromStr for ExperimentConfig {
    type Err = HarnessError;

    fn from_str(text: &str) -> Result<Self> {
        let mut raw = Raw::default();
        let mut c = ExperimentConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected key=value, got '{line}'", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "model" => raw.model = Some(value.to_string()),
                "experts" => raw.experts = Some(num(key, value)?),
                "top_k" => raw.top_k = Some(num(key, value)?),
                "blocks" => raw.blocks = Some(num(key, value)?),
                "d_model" => raw.d_model = Some(num(key, value)?),
                "d_ff" => raw.d_ff = Some(num(key, value)?),
                "activation_level" => raw.activation_level = Some(num(key, value)?),
                "dtype_bytes" => raw.dtype_bytes = Some(num(key, value)?),
                "scale" => raw.scale = Some(num(key, value)?),
                "extra_non_moe_params" => raw.extra_non_moe_params = Some(num(key, value)?),
                "strategy" => {
                    c.strategies = list(value)
                        .map(|s| s.parse().map_err(|e: pregate_core::Error| HarnessError::Config(e.to_string())))
                        .collect::<Result<_>>()?
                }
                "tier" => raw.tier = Some(value.to_string()),
                "fast_capacity" => raw.fast_capacity = Some(num::<f64>(key, value).map(|v| v as u64)?),
                "bandwidth" => raw.bandwidth = Some(num(key, value)?),
                "latency" => raw.latency = Some(num(key, value)?),
                "gate_rate" => raw.rates[0] = Some(num(key, value)?),
                "expert_rate" => raw.rates[1] = Some(num(key, value)?),
                "dense_rate" => raw.rates[2] = Some(num(key, value)?),
                "head_rate" => raw.rates[3] = Some(num(key, value)?),
                "cache_policy" => {
                    c.cache_policies = list(value)
                        .map(|s| match s {
                            "none" => Ok(None),
                            p => p.parse().map(Some).map_err(|e: pregate_core::Error| HarnessError::Config(e.to_string())),
                        })
                        .collect::<Result<_>>()?
                }
                "cache_fraction" => c.cache_fraction = num(key, value)?,
                "sweep_axis" => raw.sweep_axis = Some(value.parse()?),
                "sweep_values" => raw.sweep_values = Some(list(value).map(str::to_string).collect()),
                "iterations" => c.iterations = num(key, value)?,
                "seed" => c.seed = num(key, value)?,
                "out" => c.out = Some(PathBuf::from(value)),
                "include_first_block" => c.include_first_block = parse_bool(key, value)?,
                "routing" => {
                    c.routing = match value {
                        "computed" => RoutingMode::Computed,
                        "synthetic" => RoutingMode::Synthetic,
                        _ => return Err(bad(key, value)),
                    }
                }
                "skew" => c.skew = num(key, value)?,
                "wallclock_scale" => c.wallclock_scale = num(key, value)?,
                "wallclock" => c.wallclock = parse_bool(key, value)?,
                "weights" => c.weights = Some(PathBuf::from(value)),
                other => return Err(HarnessError::Config(format!("unknown key '{other}'"))),
            }
        }
        ExperimentConfig::from_raw(raw, c)
    }
}
