//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A bounding box with non-positive width/height or non-finite fields.
    #[error("invalid bounding box: x={x} y={y} w={w} h={h}")]
    InvalidBox { x: f64, y: f64, w: f64, h: f64 },

    /// An embedding with zero norm or non-finite entries.
    #[error("degenerate embedding: {0}")]
    DegenerateEmbedding(String),

    /// Embedding / matrix dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Cost/motion matrix shapes do not agree.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A Kalman state whose mean no longer describes a valid box.
    #[error("degenerate filter state: {0}")]
    DegenerateState(String),

    /// Frame indices fed to the tracker must be strictly increasing.
    #[error("out-of-order frame {got}, last processed frame was {last}")]
    OutOfOrderFrame { got: i64, last: i64 },

    /// MOTA is undefined without ground-truth boxes.
    #[error("empty ground truth: MOTA is undefined")]
    EmptyGroundTruth,

    /// A malformed line in a text input file.
    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// A structural problem with an input file (header, dimensions, framing).
    #[error("format error in {path}: {msg}")]
    Format { path: String, msg: String },

    /// Scenario specification violates its own invariants.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// Tracker or metric configuration violates its invariants.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
