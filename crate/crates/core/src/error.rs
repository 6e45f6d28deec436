use thiserror::Error;

use crate::graph::NodeId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),

    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(NodeId, NodeId),

    #[error("event index {got} is not greater than the last event index {last}")]
    NonMonotoneTime { last: u64, got: u64 },

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite feature value in event {event}")]
    NonFinite { event: u64 },

    #[error("events with zero likelihood under every mode: {0:?}")]
    ZeroLikelihood(Vec<u64>),

    #[error("models are not nested: {0}")]
    NotNested(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}
