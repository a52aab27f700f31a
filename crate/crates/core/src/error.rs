use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "convolution geometry mismatch: input {input}, kernel {kernel}, padding {padding}, stride {stride} \
         (need (input - kernel + 2*padding) to be a non-negative multiple of stride)"
    )]
    ConvGeometry {
        input: usize,
        kernel: usize,
        padding: usize,
        stride: usize,
    },

    #[error("pooling window {region} with stride {stride} does not tile a {height}x{width} map")]
    PoolGeometry {
        region: usize,
        stride: usize,
        height: usize,
        width: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid network at conv layer {layer}: {reason}")]
    InvalidNetwork { layer: usize, reason: String },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("cover pixel at index {index} is {value}; expected an integer in [0, 255]")]
    CoverRange { index: usize, value: f64 },

    #[error("PGM: unsupported magic {0:?} (only binary P5 is supported)")]
    PgmMagic(String),

    #[error("PGM: maxval {0} is not supported (must be 255)")]
    PgmMaxval(u32),

    #[error("PGM: truncated pixel data: expected {expected} bytes, found {found}")]
    PgmTruncated { expected: usize, found: usize },

    #[error("PGM: malformed header: {0}")]
    PgmHeader(String),

    #[error("corpus: {0}")]
    Corpus(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
