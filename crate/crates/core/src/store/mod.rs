//! Two-tier parameter residency and the expert cache.

mod cache;
mod ledger;
mod placement;
mod tier;

pub use cache::{CacheConfig, CacheOutcome, CachePolicy, ExpertCache};
pub use ledger::{pair_peak, window_peak, LedgerEvent, MemoryLedger};
pub use placement::{initial_placement, ExpertKey, GroupId, ParamSizes, PlacementMode, PlacementState, Residency};
pub use tier::{transfer_duration, TierSpec, DEFAULT_FAST_CAPACITY};
