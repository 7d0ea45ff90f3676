//! Experiment driver for the pre-gated MoE engine: config parsing, the
//! strategy/sweep matrix, invariant checks and CSV output.

pub mod config;
pub mod error;
pub mod experiment;
pub mod invariants;

pub use config::{ExperimentConfig, RoutingMode, Sweep, SweepAxis};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, Outcome, Report, Row};
