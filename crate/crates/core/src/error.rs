use thiserror::Error;

use crate::backend::Status;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("pair ({0}, {0}) is not an off-diagonal pair")]
    DiagonalPair(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} has {count} elements, above the cap of {cap}")]
    TooLarge { what: &'static str, count: usize, cap: usize },

    #[error("the embedded graph has no edges")]
    EmptyEdgeSet,

    #[error("edge ({0}, {1}) is not contained in any simplex of the partition")]
    EdgeNotInPartition(usize, usize),

    #[error("backend does not support the {0} cone")]
    CapabilityMissing(&'static str),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("operation requires an optimal solve, got {0:?}")]
    NotOptimal(Status),

    #[error("block is not in S²₊ ∩ N²: {0}")]
    NotInCone(String),

    #[error("base problem is infeasible over the starting cone")]
    InfeasibleStart,

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
