use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("unsupported bit depth in {path}: {detail}")]
    UnsupportedBitDepth { path: PathBuf, detail: String },
    #[error("unsupported image format in {path}: {detail}")]
    UnsupportedFormat { path: PathBuf, detail: String },
    #[error("failed to decode {path}: {detail}")]
    Decode { path: PathBuf, detail: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid frame name pattern {0:?}: expected one %d or %0Nd conversion")]
    BadPattern(String),
    #[error("missing frame {0}")]
    MissingFrame(i64),
    #[error("no frames matching {pattern:?} in {dir}")]
    EmptySequence { dir: PathBuf, pattern: String },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{op} leaves nothing: {detail}")]
    Empty { op: &'static str, detail: String },
    #[error("invalid .flo file {path}: {detail}")]
    BadFlo { path: PathBuf, detail: String },
    #[error("perceptual backend {backend}: {detail}")]
    Backend { backend: String, detail: String },
    #[error("{metric} failed at pair {pair}: {source}")]
    AtPair {
        metric: &'static str,
        pair: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("scene {scene}: {source}")]
    Scene {
        scene: String,
        #[source]
        source: Box<Error>,
    },
    #[error("vote table: {0}")]
    Votes(String),
    #[error("comparison graph is disconnected: {0}")]
    Disconnected(String),
    #[error("item {0:?} has no comparisons")]
    NoComparisons(String),
    #[error("separation: {0} (maximum likelihood diverges; enable smoothing to get a finite fit)")]
    Separation(String),
    #[error("Newton iteration did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }
}
