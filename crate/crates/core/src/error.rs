use std::path::PathBuf;

/// Errors produced anywhere in the attribution pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("corrupt shard {shard}: {reason}")]
    Corrupt { shard: PathBuf, reason: String },

    #[error("store inconsistency: {0}")]
    Consistency(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("provider error: {0}")]
    Provider(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("{0}")]
    Ambiguity(String),

    #[error("busy: {0}")]
    Busy(String),

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

    pub(crate) fn corrupt(shard: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Corrupt {
            shard: shard.into(),
            reason: reason.into(),
        }
    }

    /// Stable machine code used by the HTTP API and CLI diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotFound(_) => "not_found",
            Error::Range(_)
            | Error::Shape(_)
            | Error::Precondition(_)
            | Error::Parse { .. }
            | Error::Ambiguity(_)
            | Error::Json(_) => "bad_request",
            Error::Provider(_) => "provider_error",
            Error::Corrupt { .. } | Error::Consistency(_) | Error::Format(_) => "store_corrupt",
            Error::Busy(_) => "busy",
            Error::Io { .. } | Error::Training(_) => "internal",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
