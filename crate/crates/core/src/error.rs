use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("unknown token {0}")]
    UnknownToken(String),

    #[error("symbol index {index} out of range 1..={k}")]
    SymbolOutOfRange { index: u32, k: usize },

    #[error("alphabet mismatch: model expects k={expected}, data has k={found}")]
    AlphabetMismatch { expected: usize, found: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty expert pool")]
    EmptyPool,

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for malformed input files (as opposed to bad arguments).
    pub fn is_format_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::UnknownToken(_)
                | Error::SymbolOutOfRange { .. }
                | Error::AlphabetMismatch { .. }
                | Error::EmptyCorpus
                | Error::Io { .. }
        )
    }
}
