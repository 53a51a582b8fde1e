//! Experiment runner around the percolation core: configuration, CSV/JSON
//! emission, deterministic multi-worker replica execution and result merging.

pub mod config;
pub mod io;
pub mod runner;

use perc_core::PercError;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("sampling budget exceeded after {0} attempts")]
    Budget(u64),
}

impl From<PercError> for LabError {
    fn from(e: PercError) -> Self {
        match e {
            PercError::AcceptanceBudgetExceeded { attempts } => LabError::Budget(attempts),
            other => LabError::Invariant(other.to_string()),
        }
    }
}

impl LabError {
    /// Process exit code: 1 usage, 2 invariant/data problems, 3 budget.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Usage(_) => 1,
            LabError::Io(_) | LabError::Format(_) | LabError::Invariant(_) => 2,
            LabError::Budget(_) => 3,
        }
    }

    /// Machine-readable error record for stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let kind = match self {
            LabError::Usage(_) => "usage",
            LabError::Io(_) => "io",
            LabError::Format(_) => "format",
            LabError::Invariant(_) => "invariant",
            LabError::Budget(_) => "budget",
        };
        serde_json::json!({
            "error": { "kind": kind, "message": self.to_string(), "exit_code": self.exit_code() }
        })
    }
}
