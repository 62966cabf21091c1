//! Online multi-object tracking by detection.
//!
//! The crate is organized around a small data-association engine:
//!
//! - [`geometry`] / [`embedding`]: bounding-box overlap measures (IoU, GIoU
//!   distance) and appearance-embedding cosine distance.
//! - [`cost`]: cost matrices built from those measures, including the fused
//!   embedding+GIoU (EG) matrix and the embedding+motion (EM) baseline.
//! - [`kalman`]: constant-velocity Kalman filter over box state.
//! - [`assign`]: gated minimum-cost bipartite assignment.
//! - [`tracker`]: the online tracker state machine with three association
//!   strategies (`SimpleTrack`, `Byte`, `Jde`) and grid-based track retrieval.
//! - [`io`]: MOTChallenge-style file formats plus linear interpolation
//!   post-processing.
//! - [`metrics`]: CLEAR (MOTA/FP/FN/IDsw) and IDF1 evaluation.
//! - [`synth`]: deterministic synthetic scenarios and a cost-matrix timing
//!   harness.

pub mod assign;
pub mod cost;
pub mod embedding;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod kalman;
pub mod metrics;
pub mod synth;
pub mod tracker;

pub use assign::{solve, AssignmentResult};
pub use cost::{CostMatrix, INFEASIBLE};
pub use embedding::{cosine_distance, Embedding};
pub use error::{Error, Result};
pub use geometry::{giou_distance, iou, BoundingBox};
pub use grid::EmbeddingGrid;
pub use kalman::{KalmanFilter, KalmanState};
pub use metrics::{evaluate, MetricsReport};
pub use tracker::{Detection, FrameInput, Strategy, Tracker, TrackerConfig};
