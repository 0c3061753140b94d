use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller misuse: mismatched spaces, depths, malformed arguments.
    #[error("usage error: {0}")]
    Usage(String),
    /// Malformed or inconsistent input data (specs, tables, matrices).
    #[error("input error: {0}")]
    Input(String),
    #[error("unsupported metric: {0}")]
    UnsupportedMetric(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// A budget was exceeded. `partial` carries whatever was computed before the cutoff.
    #[error("resource limit: {message}")]
    Resource {
        message: String,
        partial: Option<serde_json::Value>,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
