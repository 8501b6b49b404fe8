//! Text embedding behind a pluggable [`Embedder`] trait.
//!
//! Every [`Embedding`] that leaves this module has unit L2 norm, so the inner
//! product of two embeddings is their cosine similarity. The flat index relies
//! on that to score candidates with a plain dot product.

mod hashed;
mod pca;
mod remote;

pub use hashed::HashedNgramEmbedder;
pub use pca::{pca_fit, PcaModel, PcaProjection};
pub use remote::RemoteEmbedder;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DIM: usize = 512;

/// Tolerance on the unit-norm invariant.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// A unit-norm vector of fixed dimension, stored as `f32` (2 KB at 512 dims).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f32>", into = "Vec<f32>")]
pub struct Embedding {
    values: Vec<f32>,
}

impl Embedding {
    /// Normalizes `raw` to unit length. Fails on empty, non-finite or zero
    /// input.
    pub fn normalize(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidVector("empty vector".into()));
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidVector("non-finite component".into()));
        }
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidVector("zero vector cannot be normalized".into()));
        }
        Ok(Self {
            values: raw.iter().map(|v| (v / norm) as f32).collect(),
        })
    }

    /// Wraps values that must already be unit-norm.
    pub fn from_unit(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidVector("empty vector".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidVector("non-finite component".into()));
        }
        let norm = l2_norm(&values);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidVector(format!("norm {norm} is not 1")));
        }
        Ok(Self { values })
    }

    /// Unit vector along axis `axis`.
    pub fn basis(dim: usize, axis: usize) -> Self {
        assert!(axis < dim, "basis axis {axis} out of range for dim {dim}");
        let mut values = vec![0.0; dim];
        values[axis] = 1.0;
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }

    /// Inner product accumulated in `f64`. Equals cosine similarity for unit
    /// vectors.
    pub fn dot(&self, other: &Embedding) -> f64 {
        dot(&self.values, &other.values)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }
}

impl TryFrom<Vec<f32>> for Embedding {
    type Error = Error;

    fn try_from(values: Vec<f32>) -> Result<Self> {
        Embedding::from_unit(values)
    }
}

impl From<Embedding> for Vec<f32> {
    fn from(e: Embedding) -> Self {
        e.values
    }
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

fn l2_norm(v: &[f32]) -> f64 {
    dot(v, v).sqrt()
}

/// Cosine similarity of two arbitrary (not necessarily normalized) vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let aa: f64 = a.iter().map(|x| x * x).sum();
    let bb: f64 = b.iter().map(|x| x * x).sum();
    ab / (aa.sqrt() * bb.sqrt())
}

/// Converts texts to unit vectors of a fixed dimension.
///
/// Implementations are immutable after construction and shared across
/// threads.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    fn embed(&self, text: &str) -> Result<Embedding>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>> {
        texts.iter().map(|t| self.embed(t)).collect()
    }

    /// Identifies the configuration. Snapshots refuse to load under a
    /// different fingerprint because stored vectors would be incomparable.
    fn fingerprint(&self) -> String;
}

pub(crate) fn require_text(text: &str) -> Result<()> {
    if text.trim().is_empty() {
        Err(Error::InvalidInput("text is empty".into()))
    } else {
        Ok(())
    }
}
