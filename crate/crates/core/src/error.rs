use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),

    #[error("numerical overflow in gate")]
    GateOverflow,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("no routing decision available")]
    MissingRouting,

    #[error("wiring violation: {0}")]
    Wiring(String),

    /// The fast tier cannot hold the requested residency.
    #[error("OOM: {needed} bytes requested against a fast-tier capacity of {capacity} bytes")]
    Oom { needed: u64, capacity: u64 },

    #[error("weight file: {0}")]
    Format(String),

    #[error("execution cancelled: {0}")]
    Cancelled(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn is_oom(&self) -> bool {
        matches!(self, Error::Oom { .. })
    }
}
