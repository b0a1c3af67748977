use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("edge {from}->{to} has invalid weight {weight}")]
    InvalidEdgeWeight { from: u32, to: u32, weight: f64 },
    #[error("edge {0}->{0} is a self-loop")]
    SelfLoop(u32),
    #[error("duplicate edge {from}->{to}")]
    DuplicateEdge { from: u32, to: u32 },
    #[error("node id {id} out of range for {num_nodes} nodes")]
    NodeOutOfRange { id: u32, num_nodes: usize },
    #[error("node ids must be dense 0..n; found id {found} at position {position}")]
    NonDenseNodeIds { position: usize, found: u32 },
    #[error("node {0} has a non-finite position")]
    NonFinitePosition(u32),
    #[error("invalid demand {value} for pair ({origin}, {dest})")]
    InvalidDemand { origin: u32, dest: u32, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("clique enumeration exceeded the cap of {cap} cliques")]
    CliqueCapExceeded { cap: usize },
    #[error("brute force would enumerate {combinations} selections, above the cap of {cap}")]
    BruteForceCapExceeded { combinations: u128, cap: u128 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("negative distance {value} at ({row}, {col})")]
    NegativeDistance { row: usize, col: usize, value: f64 },
    #[error("boundary polygon is not simple: edges {0} and {1} intersect")]
    SelfIntersectingBoundary(usize, usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
