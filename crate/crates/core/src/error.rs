use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Variants map one-to-one onto the error names used in the CLI's
/// machine-readable error output (see [`Error::kind`]).
#[derive(Debug, Error)]
pub enum Error {
    // event stream I/O
    #[error("bad magic bytes: expected {expected:?}")]
    BadMagic { expected: &'static str },
    #[error("unsupported format version {0}")]
    BadVersion(u8),
    #[error("truncated record {index}: needed {needed} bytes, {available} available")]
    TruncatedRecord {
        index: u64,
        needed: usize,
        available: usize,
    },
    #[error("record count mismatch: header says {declared}, payload holds {actual}")]
    CountMismatch { declared: u64, actual: u64 },
    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("invalid time window [{t0}, {t1})")]
    InvalidWindow { t0: u64, t1: u64 },
    #[error("invalid stream: {0}")]
    InvalidStream(String),

    // forward model
    #[error("target pose ({dx_m}, {dy_m}) m places the footprint outside the wall grid")]
    PoseOutOfBounds { dx_m: f64, dy_m: f64 },
    #[error("trajectory has no samples")]
    EmptyTrajectory,

    // event simulation
    #[error("frame {index} is {got:?}, expected {expected:?}")]
    MismatchedDims {
        index: usize,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("timestamps must strictly increase (at index {index})")]
    NonMonotonicTimestamps { index: usize },
    #[error("need at least 2 frames, got {0}")]
    TooFewFrames(usize),

    // features
    #[error("event stream is empty")]
    EmptyStream,
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    // reconstruction
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("kernel spectrum has zeros and no regularization was given")]
    SingularKernel,
    #[error("normal equations are singular")]
    SingularSystem,
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    // metrics
    #[error("no foreground pixels in {0}")]
    NoForeground(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("image format: {0}")]
    ImageFormat(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("sample {id}: {source}")]
    Sample {
        id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Stable short name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::BadMagic { .. } => "BadMagic",
            Error::BadVersion(_) => "BadVersion",
            Error::TruncatedRecord { .. } => "TruncatedRecord",
            Error::CountMismatch { .. } => "CountMismatch",
            Error::ParseError { .. } => "ParseError",
            Error::InvalidWindow { .. } => "InvalidWindow",
            Error::InvalidStream(_) => "InvalidStream",
            Error::PoseOutOfBounds { .. } => "PoseOutOfBounds",
            Error::EmptyTrajectory => "EmptyTrajectory",
            Error::MismatchedDims { .. } => "MismatchedDims",
            Error::NonMonotonicTimestamps { .. } => "NonMonotonicTimestamps",
            Error::TooFewFrames(_) => "TooFewFrames",
            Error::EmptyStream => "EmptyStream",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::DimMismatch(_) => "DimMismatch",
            Error::SingularKernel => "SingularKernel",
            Error::SingularSystem => "SingularSystem",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::NoForeground(_) => "NoForeground",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::ImageFormat(_) => "ImageFormat",
            Error::Io { .. } => "Io",
            Error::Json { .. } => "Json",
            Error::Sample { source, .. } => source.kind(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_sample(self, id: &str) -> Self {
        Error::Sample {
            id: id.to_string(),
            source: Box::new(self),
        }
    }
}
