use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("unknown load class {0} (expected 1..=20)")]
    UnknownClass(u32),

    #[error("degenerate load: {0}")]
    DegenerateLoad(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("solver error: {message} (relative residual {residual:e})")]
    Solver { message: String, residual: f64 },

    #[error("degenerate readout: {0}")]
    DegenerateReadout(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("store at {path} was produced by a different config (digest {found}, expected {expected}); rerun with --force to overwrite")]
    DigestMismatch {
        path: PathBuf,
        found: String,
        expected: String,
    },

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

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
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
}
