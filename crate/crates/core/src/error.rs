use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// All non-root joints coincide with the root, so the pose has no scale.
    #[error("degenerate pose: non-root joints all coincide with the root")]
    DegeneratePose,

    #[error("projection domain error: joint {joint} has nonpositive depth {depth}")]
    NonPositiveDepth { joint: usize, depth: f64 },

    #[error("domain error: {0}")]
    Domain(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric fault in {location}: non-finite value")]
    NumericFault { location: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn numeric(location: impl Into<String>) -> Self {
        Error::NumericFault {
            location: location.into(),
        }
    }
}
