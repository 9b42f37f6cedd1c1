use std::path::PathBuf;

use thiserror::Error;

use crate::solver::SolveReport;

/// Errors raised anywhere in the simulation pipeline.
///
/// The variants are grouped by the stage that produces them so the command
/// line front end can map each group onto its own exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid stimulus: {0}")]
    InvalidStimulus(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("image is {width}x{height} but the kernel support needs {needed}x{needed}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        needed: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("unsupported bit depth in {path}: {detail}")]
    UnsupportedBitDepth { path: PathBuf, detail: String },

    #[error("poisson solve did not converge: relative residual {:.3e} after {} iterations", .0.residual_norm, .0.iterations)]
    NonConvergence(Box<SolveReport>),

    #[error("point ({x1}, {x2}) lies outside the {width}x{height} grid")]
    OutOfGrid {
        x1: f64,
        x2: f64,
        width: usize,
        height: usize,
    },

    #[error("target line has an empty extent")]
    EmptyExtent,

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Coarse grouping of [`Error`] variants by the stage that raises them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorCategory {
    /// Rejected parameters or stimulus description.
    Config,
    /// Reading or writing files.
    Io,
    /// The linear solver did not meet its tolerance.
    Solver,
    /// A numerical invariant failed to hold.
    Internal,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidStimulus(_) | Error::InvalidParams(_) | Error::ImageTooSmall { .. } => {
                ErrorCategory::Config
            }
            Error::Io { .. }
            | Error::Decode { .. }
            | Error::UnsupportedBitDepth { .. }
            | Error::Serialize(_) => ErrorCategory::Io,
            Error::NonConvergence(_) => ErrorCategory::Solver,
            Error::ShapeMismatch(_)
            | Error::OutOfGrid { .. }
            | Error::EmptyExtent
            | Error::Invariant(_) => ErrorCategory::Internal,
        }
    }
}
