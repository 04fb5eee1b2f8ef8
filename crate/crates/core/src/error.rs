use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlockError {
    #[error("graph is disconnected: node {unreachable} is not reachable from node 0")]
    DisconnectedGraph { unreachable: usize },

    #[error("invalid edge ({0}, {1}): {2}")]
    InvalidEdge(usize, usize, &'static str),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("node {node} out of range for a graph with {node_count} nodes")]
    NodeOutOfRange { node: usize, node_count: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("zero separation{}: |z| = {distance:e} m (collision)", edge_label(.edge))]
    ZeroSeparation {
        edge: Option<(usize, usize)>,
        distance: f64,
    },

    #[error("potential property {property} violated: {detail}")]
    PropertyViolation { property: &'static str, detail: String },

    #[error("agent {agent} has no broadcast from neighbor {neighbor}")]
    MissingBroadcast { agent: usize, neighbor: usize },

    #[error("event at t = {time} s does not follow the previous event at t = {last} s")]
    NonmonotoneTime { time: f64, last: f64 },

    #[error("singular mass matrix")]
    SingularMassMatrix,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("malformed record {path}: {message}")]
    RecordFormat { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, FlockError>;

fn edge_label(edge: &Option<(usize, usize)>) -> String {
    match edge {
        Some((i, j)) => format!(" on edge ({i}, {j})"),
        None => String::new(),
    }
}

impl FlockError {
    /// Attaches the offending edge to a separation error raised by a pure potential evaluation.
    pub fn on_edge(self, i: usize, j: usize) -> Self {
        match self {
            FlockError::ZeroSeparation { distance, .. } => FlockError::ZeroSeparation {
                edge: Some((i, j)),
                distance,
            },
            other => other,
        }
    }
}
