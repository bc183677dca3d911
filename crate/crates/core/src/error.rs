use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate channel: frequency response is zero on every bin")]
    DegenerateChannel,

    #[error("sync failure: normalized correlation peak {peak:.3} below threshold {threshold:.3}")]
    SyncFailure { peak: f64, threshold: f64 },

    #[error("invalid measurement: {0}")]
    MeasurementInvalid(String),

    #[error("no target: correlation peak quality {quality:.3} below threshold {threshold:.3}")]
    NoTarget { quality: f64, threshold: f64 },

    #[error("ambiguous velocity: phase step {step:.4} rad per block reaches the aliasing limit")]
    AmbiguousVelocity { step: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
