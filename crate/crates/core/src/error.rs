use std::io;

use thiserror::Error;

/// Errors raised anywhere in the minor / optimization / learning pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid volume dimensions: {0}")]
    InvalidDims(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("index {index:?} out of bounds for {bounds:?}")]
    OutOfBounds { index: [usize; 3], bounds: [usize; 3] },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("unsupported connectivity {0}; expected 6, 18 or 26")]
    UnsupportedConnectivity(u32),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed {format} data: {reason}")]
    Format { format: &'static str, reason: String },
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(format: &'static str, reason: impl Into<String>) -> Self {
        Error::Format { format, reason: reason.into() }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// True for errors caused by bad user input (configuration, parameters, paths)
    /// rather than a failing computation.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_)
            | Error::InvalidParams(_)
            | Error::UnsupportedConnectivity(_)
            | Error::InvalidDims(_)
            | Error::Json(_) => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
