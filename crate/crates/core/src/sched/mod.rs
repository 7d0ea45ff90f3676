//! Strategy scheduling on a virtual clock with a compute lane and a transfer channel.

mod cost;
mod engine;
mod strategy;
mod timeline;
mod wallclock;

pub use cost::{steady_state_latency, BlockCosts, CostModel, Footprint};
pub use engine::{simulate, simulate_trace, Metrics, SimConfig, SimOutput};
pub use strategy::Strategy;
pub use timeline::{GateSlot, Lane, Op, Timeline, TimelineEvent};
pub use wallclock::{replay_wallclock, run_wallclock, WallclockOptions, WallclockOutput};
