use thiserror::Error;

/// Errors raised by model construction, program building and solution mapping.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("malformed program: {0}")]
    Program(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("invariant violated: {what} (residual {residual:.3e})")]
    Invariant { what: String, residual: f64 },

    #[error("rank-one extraction failed: {0}")]
    Extraction(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
