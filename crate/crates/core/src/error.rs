//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("shape mismatch in layer {layer}: {detail}")]
    ShapeMismatch { layer: usize, detail: String },

    #[error("non-finite weight at line {line}")]
    NonFinite { line: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("input dimension {dim} exceeds the corner-evaluation cap of {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("cell {0} is not a leaf")]
    NotALeaf(u64),

    #[error("split requires a nonempty dimension set")]
    EmptySplitDims,

    #[error("cannot split dimension {dim}: cut point {cut} coincides with a cell bound")]
    DegenerateSplit { dim: usize, cut: f64 },

    #[error("point lies outside the partition domain")]
    OutOfDomain,

    #[error("query box is disjoint from the partition domain")]
    DisjointFromDomain,

    #[error("unknown action index {0}")]
    UnknownAction(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input file: {0}")]
    InvalidFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
