//! Appearance embeddings and cosine distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A re-identification appearance vector. Dimension is fixed per sequence
/// (128 by default in the file formats) but not baked into the type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub values: Vec<f64>,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Scale to unit norm. Errors on zero-norm or non-finite input.
    pub fn normalized(&self) -> Result<Embedding> {
        self.check()?;
        let n = self.norm();
        Ok(Embedding::new(self.values.iter().map(|v| v / n).collect()))
    }

    fn check(&self) -> Result<()> {
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateEmbedding("non-finite entry".into()));
        }
        if self.norm() == 0.0 {
            return Err(Error::DegenerateEmbedding("zero norm".into()));
        }
        Ok(())
    }
}

impl From<Vec<f64>> for Embedding {
    fn from(values: Vec<f64>) -> Self {
        Self::new(values)
    }
}

/// Cosine distance `1 - cos(e1, e2)`, in [0, 2]: 0 for parallel vectors,
/// 2 for antiparallel ones.
pub fn cosine_distance(e1: &Embedding, e2: &Embedding) -> Result<f64> {
    if e1.dim() != e2.dim() {
        return Err(Error::DimensionMismatch(format!(
            "embedding dims {} vs {}",
            e1.dim(),
            e2.dim()
        )));
    }
    e1.check()?;
    e2.check()?;
    let dot: f64 = e1
        .values
        .iter()
        .zip(&e2.values)
        .map(|(a, b)| a * b)
        .sum();
    let sim = dot / (e1.norm() * e2.norm());
    // rounding can push |sim| a hair past 1
    Ok(1.0 - sim.clamp(-1.0, 1.0))
}
