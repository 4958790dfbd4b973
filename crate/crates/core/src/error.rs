use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed or inconsistent input data (CSV content, dataset invariants,
    /// synthetic specs).
    #[error("data error: {0}")]
    Data(String),

    /// A fairness group required by the notion has no examples.
    #[error("empty fairness group(s): {0}")]
    EmptyGroup(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}; try a smaller learning rate")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("non-finite loss; try a smaller learning rate")]
    NonFinite,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}
