use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported algebra dimension {0} (expected 2 or 3)")]
    UnsupportedDimension(usize),

    #[error("grid/data mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid filter parameters: {0}")]
    InvalidParams(String),

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no atoms found in input")]
    NoAtoms,

    #[error("grid of {dims:?} needs about {bytes} bytes, above the {cap} byte cap")]
    MemoryCap { dims: [usize; 3], bytes: u64, cap: u64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("isovalue {iso} outside field range [{min}, {max}]")]
    IsovalueOutOfRange { iso: f64, min: f64, max: f64 },

    #[error("empty mesh")]
    EmptyMesh,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
