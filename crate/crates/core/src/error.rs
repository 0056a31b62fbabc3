use thiserror::Error;

/// Errors produced by the localization library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("embedding dimension must be 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("edge {{{0}, {1}}} is a self-loop")]
    SelfLoop(usize, usize),
    #[error("node index {index} out of range for {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },
    #[error("anchor index {index} out of range for {m} anchors")]
    AnchorOutOfRange { index: usize, m: usize },
    #[error("graph is disconnected: node {0} is unreachable from node 0")]
    DisconnectedGraph(usize),
    #[error("graph must contain at least one node")]
    EmptyGraph,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("regularization weight must be positive, got {0}")]
    NonpositiveLambda(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("need at least {needed} anchors in dimension {p}, got {got}")]
    TooFewAnchors { needed: usize, got: usize, p: usize },
    #[error("time step {k} outside 1..={steps}")]
    StepOutOfRange { k: usize, steps: usize },
    #[error("probability must lie in [0, 1], got {0}")]
    BadProbability(f64),
    #[error("insufficient history for step {0}")]
    InsufficientHistory(usize),
    #[error("history steps must be contiguous: expected {expected}, got {got}")]
    NonContiguousHistory { expected: usize, got: usize },
    #[error("non-finite iterate at iteration {0}; check the Lipschitz constant")]
    NumericalDivergence(usize),
    #[error("node {node} has no value for neighbor {neighbor}")]
    MissingNeighborValue { node: usize, neighbor: usize },
    #[error("node {reader} attempted to read state of non-neighbor {target}")]
    ProtocolViolation { reader: usize, target: usize },
    #[error("covariance lost positive semidefiniteness (min eigenvalue {0})")]
    CovarianceNotPsd(f64),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("empty input")]
    EmptyInput,
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
