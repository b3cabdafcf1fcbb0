use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("invalid shape {shape:?} for {op}: {reason}")]
    InvalidShape {
        op: &'static str,
        shape: Vec<usize>,
        reason: String,
    },

    #[error("{op}: input contains NaN")]
    NanInput { op: &'static str },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("missing gradient for parameter {0}")]
    MissingGradient(String),

    #[error("non-finite loss value {0}")]
    NonFiniteLoss(f64),

    #[error("unsupported WAV encoding in {path}: {detail}")]
    UnsupportedEncoding { path: PathBuf, detail: String },

    #[error("malformed WAV file {path}: {detail}")]
    MalformedWav { path: PathBuf, detail: String },

    #[error("clip {id} has {len} samples, need at least {need} for one frame")]
    ClipTooShort { id: String, len: usize, need: usize },

    #[error("mixed sample rates: {0} Hz and {1} Hz")]
    MixedSampleRate(u32, u32),

    #[error("no audio clips given")]
    NoClips,

    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported file version {0}")]
    BadVersion(u16),

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("too few samples: class {label} has {count}, need at least {need}")]
    TooFewSamples {
        label: &'static str,
        count: usize,
        need: usize,
    },

    #[error("record ids do not align between feature sources: {0}")]
    Alignment(String),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("report schema error: {0}")]
    Schema(String),

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
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
