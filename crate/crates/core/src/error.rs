use thiserror::Error;

/// Errors raised by the beam-alignment library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite input in {0}")]
    NonFinite(&'static str),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("cyclic prefix too short: need {needed} samples, have {available}")]
    CpTooShort { needed: usize, available: usize },

    #[error("power vector: {0}")]
    PowerVector(String),

    #[error("malformed trace: {0}")]
    Trace(String),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error("run {run} of cell {cell} (seed {seed:#018x}) failed: {source}")]
    RunFailed {
        cell: String,
        run: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
