use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: d = {0}, need d >= 2")]
    InvalidDimension(usize),

    #[error("invalid noise rate {0}: must lie in [0, 1/2)")]
    InvalidNoise(f64),

    #[error("invalid in-cluster standard deviation {0}: must be finite and >= 0")]
    InvalidSigma(f64),

    #[error("invalid initialization: {0}")]
    InvalidInit(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("neuron index {index} out of range for width {m}")]
    Index { index: usize, m: usize },

    #[error("training diverged at iteration {iteration}: non-finite {what}")]
    Divergence { iteration: usize, what: &'static str },

    #[error("incomplete trace: iteration {0} was not recorded")]
    IncompleteTrace(usize),

    #[error("decision-boundary grids need d = 2, got d = {0}")]
    UnsupportedDimension(usize),

    #[error("iteration grids of the supplied curves do not match")]
    GridMismatch,

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed {kind} file: {msg}")]
    Format { kind: &'static str, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(kind: &'static str, msg: impl ToString) -> Self {
        Error::Format {
            kind,
            msg: msg.to_string(),
        }
    }
}
