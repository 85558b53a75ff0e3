use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the defurnishing engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("inconsistent context transform: {0}")]
    Transform(String),

    #[error("backend validation error: {0}")]
    Validation(String),

    #[error("backend protocol error: {0}")]
    Protocol(String),

    /// Non-success HTTP status with the server's structured error body.
    #[error("backend returned {status} ({code}): {message}")]
    Backend {
        status: u16,
        code: String,
        message: String,
        request_id: Option<String>,
    },

    /// Connection failures and timeouts that survived all retries.
    #[error("backend transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("placement failed: {0}")]
    Placement(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("image codec error: {0}")]
    Codec(#[from] image::ImageError),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Tags an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            already @ Error::Stage { .. } => already,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, looking through stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for errors caused by bad inputs or parameters rather than the
    /// backend or the filesystem.
    pub fn is_validation(&self) -> bool {
        matches!(
            self.root(),
            Error::Dimension(_)
                | Error::InvalidParameter(_)
                | Error::Transform(_)
                | Error::Validation(_)
                | Error::Placement(_)
                | Error::Config(_)
        )
    }

    pub fn is_backend(&self) -> bool {
        matches!(
            self.root(),
            Error::Protocol(_) | Error::Backend { .. } | Error::Transport { .. }
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self.root(), Error::Io { .. } | Error::Codec(_) | Error::Json(_))
    }
}
