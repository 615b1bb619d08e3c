use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A time or frequency window falls outside the available data.
    #[error("range error: {0}")]
    Range(String),

    #[error("{path}:{line}: parse error: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("schema error: {0}")]
    Schema(String),

    /// Two channels that must share rate and length do not.
    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("no excavation detected: {0}")]
    NoExcavation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Features from incompatible sources were mixed.
    #[error("scope error: {0}")]
    Scope(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate reference: {0}")]
    DegenerateReference(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input data rather than usage or config.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Config(_))
    }
}
