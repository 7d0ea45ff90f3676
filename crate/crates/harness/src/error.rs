use thiserror::Error;

/// Failures of a harness run, each with its own process exit code.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invariant '{property}' failed for {context}: {detail}")]
    Invariant { property: &'static str, context: String, detail: String },
    #[error("every run point exceeded the fast tier")]
    OomOnly,
    #[error(transparent)]
    Core(#[from] pregate_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Core(pregate_core::Error::InvalidConfig(_)) => 2,
            HarnessError::Invariant { .. } => 3,
            HarnessError::OomOnly => 4,
            HarnessError::Core(_) | HarnessError::Io(_) => 1,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
