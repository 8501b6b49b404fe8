use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::Embedding;
use crate::error::{Error, Result};

/// Linear projection onto the top principal directions of a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// `d_out` rows of length `d_in`, orthonormal.
    components: Vec<Vec<f64>>,
    /// Variance along each component, descending.
    explained_variance: Vec<f64>,
}

/// Result of projecting one embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    pub embedding: Embedding,
    /// Set when the projection was the zero vector and the canonical first
    /// basis direction was substituted.
    pub degenerate: bool,
}

impl PcaModel {
    /// Fits on raw rows via eigendecomposition of the sample covariance.
    pub fn fit(rows: &[Vec<f64>], d_out: usize) -> Result<Self> {
        if d_out == 0 {
            return Err(Error::InvalidInput("d_out must be positive".into()));
        }
        let n = rows.len();
        if n < d_out || n == 0 {
            return Err(Error::InsufficientData(format!(
                "{n} points cannot support {d_out} components"
            )));
        }
        let d_in = rows[0].len();
        if rows.iter().any(|r| r.len() != d_in) {
            return Err(Error::InvalidInput("corpus rows differ in dimension".into()));
        }
        if d_out > d_in {
            return Err(Error::InvalidInput(format!("d_out {d_out} exceeds d_in {d_in}")));
        }

        let mut mean = vec![0.0; d_in];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);

        let centered = DMatrix::from_fn(n, d_in, |i, j| rows[i][j] - mean[j]);
        let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
        let mut cov = centered.transpose() * &centered;
        cov /= denom;
        // symmetrize against accumulated rounding
        let cov = (&cov + cov.transpose()) * 0.5;

        let SymmetricEigen {
            eigenvectors,
            eigenvalues,
        } = cov.symmetric_eigen();
        let mut order: Vec<usize> = (0..d_in).collect();
        order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]).then(a.cmp(&b)));

        let mut components = Vec::with_capacity(d_out);
        let mut explained_variance = Vec::with_capacity(d_out);
        for &k in order.iter().take(d_out) {
            let mut row: Vec<f64> = eigenvectors.column(k).iter().copied().collect();
            // fix the sign so fits are reproducible: largest |coef| positive
            let pivot = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap_or(0);
            if row[pivot] < 0.0 {
                row.iter_mut().for_each(|v| *v = -*v);
            }
            components.push(row);
            explained_variance.push(eigenvalues[k].max(0.0));
        }

        Ok(Self {
            mean,
            components,
            explained_variance,
        })
    }

    /// Builds a model from explicit parts; rows must be orthonormal.
    pub fn from_parts(mean: Vec<f64>, components: Vec<Vec<f64>>) -> Result<Self> {
        let d_in = mean.len();
        if components.is_empty() || components.len() > d_in {
            return Err(Error::InvalidInput("need 1..=d_in components".into()));
        }
        if components.iter().any(|c| c.len() != d_in) {
            return Err(Error::InvalidInput("component length differs from mean".into()));
        }
        let model = Self {
            explained_variance: vec![0.0; components.len()],
            mean,
            components,
        };
        if model.orthonormality_error() > 1e-6 {
            return Err(Error::InvalidInput("components are not orthonormal".into()));
        }
        Ok(model)
    }

    pub fn d_in(&self) -> usize {
        self.mean.len()
    }

    pub fn d_out(&self) -> usize {
        self.components.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    /// `components · (x − mean)` without normalization.
    pub fn project_raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d_in() {
            return Err(Error::InvalidInput(format!(
                "expected dimension {}, got {}",
                self.d_in(),
                x.len()
            )));
        }
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(x).zip(&self.mean).map(|((c, x), m)| c * (x - m)).sum())
            .collect())
    }

    /// Projects and re-normalizes. A zero projection maps to the first basis
    /// direction with `degenerate` set.
    pub fn apply(&self, e: &Embedding) -> Result<PcaProjection> {
        let projected = self.project_raw(&e.to_f64())?;
        let norm = projected.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Ok(PcaProjection {
                embedding: Embedding::basis(self.d_out(), 0),
                degenerate: true,
            });
        }
        Ok(PcaProjection {
            embedding: Embedding::normalize(&projected)?,
            degenerate: false,
        })
    }

    /// Maps a projection back into the input space.
    pub fn reconstruct(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, &w) in self.components.iter().zip(coords) {
            for (o, v) in out.iter_mut().zip(c) {
                *o += w * v;
            }
        }
        out
    }

    /// Sum of squared distances between each row and its reconstruction.
    pub fn reconstruction_error(&self, rows: &[Vec<f64>]) -> Result<f64> {
        let mut total = 0.0;
        for r in rows {
            let back = self.reconstruct(&self.project_raw(r)?);
            total += r.iter().zip(&back).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        Ok(total)
    }

    /// Largest absolute deviation of `C·Cᵀ` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.components.iter().enumerate() {
            for (j, b) in self.components.iter().enumerate() {
                let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((d - target).abs());
            }
        }
        worst
    }
}

/// Fits a PCA model on a corpus of embeddings.
pub fn pca_fit(corpus: &[Embedding], d_out: usize) -> Result<PcaModel> {
    if let Some(first) = corpus.first() {
        if corpus.iter().any(|e| e.dim() != first.dim()) {
            return Err(Error::InvalidInput("embeddings differ in dimension".into()));
        }
    }
    let rows: Vec<Vec<f64>> = corpus.iter().map(Embedding::to_f64).collect();
    PcaModel::fit(&rows, d_out)
}
