//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum SrbError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("group construction failed: {0}")]
    GroupConstruction(String),

    #[error("synthesis failed for clifford {id}: best infidelity {best_infidelity:.3e}")]
    SynthesisFailure { id: usize, best_infidelity: f64 },

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("bootstrap unstable: {failed} of {total} resamples failed to fit")]
    BootstrapUnstable { failed: usize, total: usize },

    #[error("cache error: {0}")]
    Cache(String),

    #[error("schema error at line {line}: {msg}")]
    Schema { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
