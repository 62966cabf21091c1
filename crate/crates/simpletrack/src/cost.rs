//! Association cost matrices: IoU, GIoU, embedding-cosine, the fused
//! embedding+GIoU (EG) matrix, and the embedding+motion (EM) baseline.

use crate::embedding::{cosine_distance, Embedding};
use crate::error::{Error, Result};
use crate::geometry::{giou_distance, iou, BoundingBox};

/// Sentinel marking an entry that must never be matched. Serialized as
/// `inf` by the Display impl.
pub const INFEASIBLE: f64 = f64::INFINITY;

/// Rectangular cost matrix: rows are existing tracks, columns are
/// detections. Feasible entries are finite and non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    row_ids: Vec<i64>,
    col_ids: Vec<usize>,
}

impl CostMatrix {
    /// All-infeasible matrix with the given identity labels.
    pub fn new(row_ids: Vec<i64>, col_ids: Vec<usize>) -> Self {
        let rows = row_ids.len();
        let cols = col_ids.len();
        Self {
            rows,
            cols,
            data: vec![INFEASIBLE; rows * cols],
            row_ids,
            col_ids,
        }
    }

    /// Matrix labeled with consecutive indices, filled entry by entry.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::new((0..rows as i64).collect(), (0..cols).collect());
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row_ids(&self) -> &[i64] {
        &self.row_ids
    }

    pub fn col_ids(&self) -> &[usize] {
        &self.col_ids
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Store a cost. Negative or NaN values are treated as infeasible.
    pub fn set(&mut self, i: usize, j: usize, cost: f64) {
        self.data[i * self.cols + j] = if cost.is_finite() && cost >= 0.0 {
            cost
        } else {
            INFEASIBLE
        };
    }

    pub fn is_feasible(&self, i: usize, j: usize) -> bool {
        self.get(i, j).is_finite()
    }
}

impl std::fmt::Display for CostMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.rows {
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ",")?;
                }
                let v = self.get(i, j);
                if v.is_finite() {
                    write!(f, "{v}")?;
                } else {
                    write!(f, "inf")?;
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// `1 - IoU` per entry.
pub fn iou_cost_matrix(tracks: &[BoundingBox], dets: &[BoundingBox]) -> CostMatrix {
    build(tracks, dets, |t, d| iou(t, d).map(|v| 1.0 - v))
}

/// GIoU distance per entry.
pub fn giou_cost_matrix(tracks: &[BoundingBox], dets: &[BoundingBox]) -> CostMatrix {
    build(tracks, dets, giou_distance)
}

/// Cosine distance per entry.
pub fn embedding_cost_matrix(tracks: &[Embedding], dets: &[Embedding]) -> CostMatrix {
    build(tracks, dets, cosine_distance)
}

/// The EG matrix: `lambda1 * cosine + lambda2 * giou` per entry. Entries
/// whose geometry or embedding is degenerate become infeasible with a
/// logged warning rather than failing the whole matrix.
pub fn eg_cost_matrix(
    tracks: &[(BoundingBox, Embedding)],
    dets: &[(BoundingBox, Embedding)],
    lambda1: f64,
    lambda2: f64,
) -> CostMatrix {
    CostMatrix::from_fn(tracks.len(), dets.len(), |i, j| {
        match eg_entry(&tracks[i], &dets[j], lambda1, lambda2) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("EG entry ({i},{j}) marked infeasible: {e}");
                INFEASIBLE
            }
        }
    })
}

fn eg_entry(
    track: &(BoundingBox, Embedding),
    det: &(BoundingBox, Embedding),
    lambda1: f64,
    lambda2: f64,
) -> Result<f64> {
    let e = cosine_distance(&track.1, &det.1)?;
    let g = giou_distance(&track.0, &det.0)?;
    Ok(lambda1 * e + lambda2 * g)
}

/// The EM baseline: weighted sum of appearance cost and motion distance
/// normalized by the gate, with entries outside the motion gate marked
/// infeasible. `motion` holds squared Mahalanobis distances, one row per
/// track in the same order as `emb_cost`.
pub fn em_fused_cost_matrix(
    emb_cost: &CostMatrix,
    motion: &[Vec<f64>],
    gate_threshold: f64,
    weight: f64,
) -> Result<CostMatrix> {
    if motion.len() != emb_cost.rows() || motion.iter().any(|r| r.len() != emb_cost.cols()) {
        return Err(Error::ShapeMismatch(format!(
            "motion matrix does not match {}x{} cost matrix",
            emb_cost.rows(),
            emb_cost.cols()
        )));
    }
    let mut fused = CostMatrix::new(emb_cost.row_ids().to_vec(), emb_cost.col_ids().to_vec());
    for i in 0..emb_cost.rows() {
        for j in 0..emb_cost.cols() {
            let m = motion[i][j];
            if !emb_cost.is_feasible(i, j) || m > gate_threshold {
                continue; // stays infeasible
            }
            fused.set(
                i,
                j,
                weight * emb_cost.get(i, j) + (1.0 - weight) * m / gate_threshold,
            );
        }
    }
    Ok(fused)
}

fn build<T, U>(tracks: &[T], dets: &[U], entry: impl Fn(&T, &U) -> Result<f64>) -> CostMatrix {
    CostMatrix::from_fn(tracks.len(), dets.len(), |i, j| {
        match entry(&tracks[i], &dets[j]) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("cost entry ({i},{j}) marked infeasible: {e}");
                INFEASIBLE
            }
        }
    })
}
