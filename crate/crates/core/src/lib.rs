//! Pre-gated mixture-of-experts inference over a two-tier memory model.
//!
//! [`model`] holds the math, [`store`] the parameter residency and expert
//! cache, and [`sched`] the virtual-clock executor that runs a decoder
//! iteration under each offload strategy.

pub mod error;
pub mod model;
pub mod sched;
pub mod store;
pub mod time;

pub use error::{Error, Result};
pub use time::SimTime;
