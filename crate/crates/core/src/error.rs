use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("plane data has {len} values, expected {height}x{width}")]
    BadPlaneLength {
        height: usize,
        width: usize,
        len: usize,
    },

    #[error("search window is empty for a {patch}x{patch} patch on a {height}x{width} image")]
    DegenerateWindow {
        patch: usize,
        height: usize,
        width: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("conditioning event has zero probability (N={n}, T={t})")]
    ZeroProbability { n: usize, t: usize },

    #[error("calibration dataset is empty")]
    EmptyDataset,

    #[error("no color hints to propagate")]
    NoHints,

    #[error(
        "propagation did not converge after {iterations} iterations (residual {residual:.3e})"
    )]
    NotConverged { iterations: usize, residual: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    /// True for failures caused by the outside world (files, arguments)
    /// rather than by the data flowing through the pipeline.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Image { .. } | Error::Parse { .. }
        )
    }

    /// True for warnings escalated to failures by strict mode.
    pub fn is_escalated(&self) -> bool {
        matches!(self, Error::NotConverged { .. })
    }
}
