use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong in the library.
///
/// Variants group into three broad families which the CLI maps onto exit
/// codes: malformed input and configuration, bad data on disk, and numerical
/// failure (see [`Error::kind`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: {message} (byte offset {offset})")]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", config_location(.path, *.line))]
    Config {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("dataset assembly: {0}")]
    Assembly(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn config_location(path: &std::path::Path, line: Option<usize>) -> String {
    match line {
        Some(l) => format!("{}:{l}", path.display()),
        None => path.display().to_string(),
    }
}

/// Coarse failure classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidInput(_) | Error::Config { .. } => ErrorKind::Usage,
            Error::Numerical(_) | Error::Invariant(_) => ErrorKind::Numerical,
            Error::Dimension(_)
            | Error::Format { .. }
            | Error::Io { .. }
            | Error::Assembly(_)
            | Error::Json(_) => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
