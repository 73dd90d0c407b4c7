//! Error types shared across the toolkit.

use std::path::PathBuf;

/// Everything that can go wrong inside the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A manifest line that is not valid JSON at all.
    #[error("malformed manifest line {line}: {message}; offending content: {content:?}")]
    MalformedLine {
        line: usize,
        message: String,
        content: String,
    },

    /// A manifest line that parses as JSON but violates the record schema
    /// (missing field, wrong type, broken invariant).
    #[error("manifest schema error at line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Endpoint(#[from] EndpointError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Failures talking to an LLM endpoint.
#[derive(Debug, thiserror::Error)]
pub enum EndpointError {
    /// Worth retrying: timeouts, connection resets, 5xx.
    #[error("transient endpoint error: {0}")]
    Transient(String),

    /// Not worth retrying: auth failures, malformed responses, 4xx.
    #[error("endpoint error: {0}")]
    Fatal(String),

    /// The endpoint does not implement the requested capability
    /// (e.g. log-probability scoring).
    #[error("endpoint feature unavailable: {0}")]
    FeatureUnavailable(String),

    /// All retries exhausted; carries the last underlying error.
    #[error("endpoint failed after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
}

pub type Result<T> = std::result::Result<T, Error>;
