use std::path::PathBuf;

/// Errors surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unrecognized format: {0}")]
    UnrecognizedFormat(String),

    #[error("truncated tensor: {0}")]
    TruncatedTensor(String),

    #[error("non-finite tensor element at index {0}")]
    NonFinite(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("discontinuous route {entry} -> {exit}: gap of {gap:.3} m")]
    DiscontinuousRoute { entry: String, exit: String, gap: f64 },

    #[error("concentration out of supported range: {0}")]
    ConcentrationRange(f64),

    #[error("undefined direction prediction on labeled cell ({0}, {1})")]
    UndefinedDirection(usize, usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
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
