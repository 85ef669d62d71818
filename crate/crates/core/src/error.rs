use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("tag `{0}` has more than one parent")]
    MultiParent(String),

    #[error("cycle detected in hierarchy through `{0}`")]
    Cycle(String),

    #[error("unknown {kind}: {key}")]
    Lookup { kind: &'static str, key: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("embedding for tag `{0}` has zero norm")]
    DegenerateEmbedding(String),

    #[error("conditioning set is singular (det = 0)")]
    SingularConditioning,

    #[error("{}: format error at byte {offset}: {msg}", file.display())]
    Format {
        file: PathBuf,
        offset: u64,
        msg: String,
    },

    #[error("{}: {source}", path.display())]
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

    pub(crate) fn format(path: impl Into<PathBuf>, offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            file: path.into(),
            offset,
            msg: msg.into(),
        }
    }

    pub(crate) fn lookup(kind: &'static str, key: impl ToString) -> Self {
        Error::Lookup {
            kind,
            key: key.to_string(),
        }
    }

    /// True for errors raised while reading or writing files, including
    /// malformed or truncated binary content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Format { .. })
    }
}
