use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    /// Every parameter in the fast tier.
    ResidentOnly,
    /// Gate, then migrate the activated experts, then run them.
    FetchOnDemand,
    /// Migrate every expert of the next block while the current one runs.
    PrefetchAll,
    /// Migrate the experts a pre-gate selected while earlier blocks run.
    PreGated,
}

impl Strategy {
    pub const ALL: [Strategy; 4] =
        [Strategy::ResidentOnly, Strategy::FetchOnDemand, Strategy::PrefetchAll, Strategy::PreGated];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::ResidentOnly => "resident_only",
            Strategy::FetchOnDemand => "on_demand",
            Strategy::PrefetchAll => "prefetch_all",
            Strategy::PreGated => "pre_gated",
        }
    }

    pub fn offloads(self) -> bool {
        self != Strategy::ResidentOnly
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "resident_only" | "gpu_only" => Ok(Strategy::ResidentOnly),
            "on_demand" | "fetch_on_demand" => Ok(Strategy::FetchOnDemand),
            "prefetch_all" => Ok(Strategy::PrefetchAll),
            "pre_gated" => Ok(Strategy::PreGated),
            other => Err(Error::InvalidConfig(format!("unknown strategy '{other}'"))),
        }
    }
}
