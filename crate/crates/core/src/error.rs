use std::path::PathBuf;

/// Errors produced by the codecs, analysis routines and file formats.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite input value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("empty input")]
    Empty,

    #[error("signal power is zero; QSNR is undefined")]
    ZeroSignal,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),

    #[error("unknown preset `{name}`; known presets: {known}")]
    UnknownPreset { name: String, known: String },

    #[error("malformed tensor file: {0}")]
    MalformedTensor(String),

    #[error("malformed CSV: {0}")]
    MalformedCsv(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
