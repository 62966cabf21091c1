//! Dense per-frame embedding grid sampled at feature-map stride, probed by
//! the tracking-retrieval step.

use crate::embedding::Embedding;
use crate::error::{Error, Result};

/// H x W grid of D-dimensional embedding vectors; each cell covers
/// `stride` x `stride` pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingGrid {
    height: usize,
    width: usize,
    dim: usize,
    stride: u32,
    values: Vec<f64>,
}

impl EmbeddingGrid {
    pub fn new(height: usize, width: usize, dim: usize, stride: u32, values: Vec<f64>) -> Result<Self> {
        if stride < 1 {
            return Err(Error::DimensionMismatch("grid stride must be >= 1".into()));
        }
        if values.len() != height * width * dim {
            return Err(Error::DimensionMismatch(format!(
                "grid payload {} does not match {height}x{width}x{dim}",
                values.len()
            )));
        }
        Ok(Self {
            height,
            width,
            dim,
            stride,
            values,
        })
    }

    /// All-zeros grid, filled cell by cell.
    pub fn zeros(height: usize, width: usize, dim: usize, stride: u32) -> Self {
        Self {
            height,
            width,
            dim,
            stride,
            values: vec![0.0; height * width * dim],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stride(&self) -> u32 {
        self.stride
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell(&self, row: usize, col: usize) -> &[f64] {
        let base = (row * self.width + col) * self.dim;
        &self.values[base..base + self.dim]
    }

    pub fn cell_mut(&mut self, row: usize, col: usize) -> &mut [f64] {
        let base = (row * self.width + col) * self.dim;
        &mut self.values[base..base + self.dim]
    }

    /// Grid cell containing the pixel point, clamped into bounds.
    pub fn cell_of_point(&self, x: f64, y: f64) -> (usize, usize) {
        let col = (x / self.stride as f64).floor();
        let row = (y / self.stride as f64).floor();
        let col = (col.max(0.0) as usize).min(self.width - 1);
        let row = (row.max(0.0) as usize).min(self.height - 1);
        (row, col)
    }

    /// Cells of the 3x3 neighborhood around the cell containing (x, y),
    /// clipped to grid bounds. Never empty.
    pub fn neighborhood(&self, x: f64, y: f64) -> Vec<(usize, usize)> {
        let (row, col) = self.cell_of_point(x, y);
        let mut cells = Vec::with_capacity(9);
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                let r = row as i64 + dr;
                let c = col as i64 + dc;
                if r >= 0 && c >= 0 && (r as usize) < self.height && (c as usize) < self.width {
                    cells.push((r as usize, c as usize));
                }
            }
        }
        cells
    }

    /// Minimum cosine distance between the memorized embedding and the 3x3
    /// neighborhood around (x, y). Degenerate cells are skipped; returns
    /// None when every cell is degenerate.
    pub fn min_cosine_distance(&self, x: f64, y: f64, memory: &Embedding) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (r, c) in self.neighborhood(x, y) {
            let cell = Embedding::new(self.cell(r, c).to_vec());
            if let Ok(d) = crate::embedding::cosine_distance(memory, &cell) {
                best = Some(best.map_or(d, |b: f64| b.min(d)));
            }
        }
        best
    }
}
