use thiserror::Error;

/// Errors produced by the estimators, the Monte Carlo machinery and the I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A scaling constant required by an estimator is not present in the table.
    #[error("missing lambda entry for r = {r}, m = {m} (grid {grid_id})")]
    MissingLambda { r: f64, m: usize, grid_id: String },

    /// Raw tick data could not be turned into a usable grid.
    #[error("ingestion error: {0}")]
    Ingestion(String),

    /// Malformed input file.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
