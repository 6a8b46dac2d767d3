use std::path::PathBuf;

use crate::image::ColorSpace;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("wavelength grid mismatch: {0}")]
    GridMismatch(String),

    #[error("spectrum range [{src_min}, {src_max}] nm does not overlap target [{dst_min}, {dst_max}] nm")]
    EmptyOverlap {
        src_min: f64,
        src_max: f64,
        dst_min: f64,
        dst_max: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("expected color space {expected:?}, found {found:?}")]
    ColorSpace { expected: ColorSpace, found: ColorSpace },

    #[error("no valid pixels under mask")]
    EmptyMask,

    #[error("degenerate illuminant estimate: filtered response is zero in every channel")]
    DegenerateEstimate,

    #[error("zero-norm vector")]
    ZeroNorm,

    #[error("rank-deficient calibration data ({0})")]
    RankDeficient(String),

    #[error("singular matrix (|det| = {0:e})")]
    Singular(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },

    #[error("truncated file: needed {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) => ErrorKind::Config,
            Error::DegenerateEstimate
            | Error::ZeroNorm
            | Error::RankDeficient(_)
            | Error::Singular(_)
            | Error::Numerical(_) => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
