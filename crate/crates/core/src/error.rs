use thiserror::Error;

use crate::agent::AgentId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),

    #[error("tree does not match parameters: {0}")]
    ShapeMismatch(String),

    #[error("tree has {nodes} nodes; exact enumeration is limited to {limit}")]
    TreeTooLarge { nodes: usize, limit: usize },

    #[error("invalid world configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("map mismatch: {0}")]
    MapMismatch(String),

    #[error("no cell is defined in both maps")]
    EmptySupport,

    #[error("{successes} successes out of {trials} trials")]
    InvalidCounts { successes: u64, trials: u64 },

    #[error("malformed map data: {0}")]
    MalformedMap(String),

    #[error("malformed tree input: {0}")]
    MalformedTree(String),
}
