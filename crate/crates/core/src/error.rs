use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the multiplex library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown layer label `{0}`")]
    UnknownLayer(String),

    #[error("node id {id} out of range for a graph with {node_count} nodes")]
    NodeOutOfRange { id: usize, node_count: usize },

    #[error("self-loop on node {node} in layer `{layer}`")]
    SelfLoop { node: usize, layer: String },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graphs are defined over different node or layer universes")]
    UniverseMismatch,

    #[error("multiplexing score is undefined for isolated node {0}")]
    UndefinedScore(usize),

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid transmission model: {0}")]
    InvalidModel(String),

    #[error("correlated transmission is only supported for layer sets of size <= 2 (got {0})")]
    UnsupportedJoint(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("design matrix is rank deficient (rank {rank} < {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
