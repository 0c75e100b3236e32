use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed file: {0}")]
    Format(String),
    #[error("unsupported element type {0:?}, only '<f8' is supported")]
    UnsupportedDtype(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),
    #[error("values outside [0, 1]: {0}")]
    OutOfRange(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("expected coefficients in the {expected} basis, found {found}")]
    InvalidBasis {
        expected: &'static str,
        found: &'static str,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("missing weight tensor: {0}")]
    MissingWeight(String),
    #[error("shape mismatch: {0}")]
    ShapeError(String),
    #[error("unknown layer: {0}")]
    UnknownLayer(String),
    #[error("layer {0:?} has no parameters")]
    NotParametric(String),
    #[error("no connected components at any threshold")]
    NoComponents,
    #[error("no records to evaluate")]
    NoData,
    #[error("invalid mixture spec: {0}")]
    InvalidSpec(String),
    #[error("json error in {context}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
