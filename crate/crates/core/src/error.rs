use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("unknown/missing column `{0}`")]
    Column(String),
    #[error("row {row}, column `{column}`: cannot parse `{value}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: `{value}` is not a declared level of `{column}`")]
    Level {
        row: usize,
        column: String,
        value: String,
    },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("graph: {0}")]
    Graph(String),
    #[error("evidence has zero probability")]
    ZeroEvidence,
    #[error("state space of {size} configurations exceeds the cap of {cap}")]
    StateSpace { size: u128, cap: u128 },
    #[error("empty arm: {0}")]
    EmptyArm(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    /// An error from a computation shared by several results, repeated
    /// for each of them.
    #[error("{0}")]
    Shared(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
