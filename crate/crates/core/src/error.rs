use thiserror::Error;

/// Errors raised across the toolkit. Variants are grouped so the CLI can map
/// them onto its exit codes (config = 1, data = 2, numerical = 3).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("sensitive group {0} is empty")]
    EmptyGroup(u8),

    #[error("operation requires a binary action space, got {0} actions")]
    NotBinary(usize),

    #[error("policy support does not match the environment: {0}")]
    SupportMismatch(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("replication {rep}: {source}")]
    Replication {
        rep: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Numerical(_) => 3,
            Error::Replication { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
