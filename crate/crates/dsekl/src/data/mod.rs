//! Datasets: sparse feature rows with binary labels.

mod libsvm;
mod preprocess;
mod synth;

pub use libsvm::{parse_libsvm, parse_libsvm_with_dim, read_libsvm_file, write_libsvm};
pub use preprocess::{split, split_counts, standardize, subsample, Standardizer};
pub use synth::{generate_xor, generate_xor_with_noise, XorNoise};

use crate::error::{Error, Result};

/// A sparse feature vector: sorted `(index, value)` pairs plus the ambient
/// dimensionality, so that rows from differently shaped datasets cannot be
/// mixed silently.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    dim: usize,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseRow {
    /// Builds a row from parallel index/value lists. Indices must be strictly
    /// increasing and below `dim`.
    pub fn new(dim: usize, indices: Vec<u32>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "row has {} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        for w in indices.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidParameter(format!(
                    "row indices not strictly increasing: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(&last) = indices.last() {
            if last as usize >= dim {
                return Err(Error::InvalidParameter(format!(
                    "row index {} out of range for dimension {}",
                    last, dim
                )));
            }
        }
        Ok(SparseRow { dim, indices, values })
    }

    /// Builds a row from a dense slice, dropping exact zeros.
    pub fn from_dense(values: &[f64]) -> Self {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (i, &v) in values.iter().enumerate() {
            if v != 0.0 {
                idx.push(i as u32);
                val.push(v);
            }
        }
        SparseRow { dim: values.len(), indices: idx, values: val }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates over `(index, value)` pairs in increasing index order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(self.values.iter())
            .map(|(&i, &v)| (i as usize, v))
    }

    /// Densifies into a `dim`-length vector.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    /// Merge-based sparse dot product.
    pub fn dot(&self, other: &SparseRow) -> f64 {
        let mut sum = 0.0;
        let (mut a, mut b) = (0usize, 0usize);
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                std::cmp::Ordering::Equal => {
                    sum += self.values[a] * other.values[b];
                    a += 1;
                    b += 1;
                }
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
            }
        }
        sum
    }

    /// Squared Euclidean norm.
    pub fn sq_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// An immutable collection of sparse rows with labels in {-1, +1}.
///
/// Row squared norms are precomputed once so that RBF distances can be
/// evaluated as `|x|^2 + |y|^2 - 2<x,y>` without densifying.
#[derive(Debug, Clone)]
pub struct Dataset {
    rows: Vec<SparseRow>,
    labels: Vec<f64>,
    dim: usize,
    sq_norms: Vec<f64>,
}

impl Dataset {
    pub fn new(rows: Vec<SparseRow>, labels: Vec<f64>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidParameter(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        for &y in &labels {
            if y != 1.0 && y != -1.0 {
                return Err(Error::NonBinaryLabel(y));
            }
        }
        let dim = rows.iter().map(|r| r.dim()).max().unwrap_or(0);
        for r in &rows {
            if r.dim() != dim {
                return Err(Error::DimensionMismatch { left: r.dim(), right: dim });
            }
        }
        let sq_norms = rows.iter().map(|r| r.sq_norm()).collect();
        Ok(Dataset { rows, labels, dim, sq_norms })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of features.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &SparseRow {
        &self.rows[i]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn sq_norm(&self, i: usize) -> f64 {
        self.sq_norms[i]
    }

    /// Counts of (+1, -1) labels.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&y| y == 1.0).count();
        (pos, self.labels.len() - pos)
    }

    /// New dataset holding copies of the selected rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        let mut rows = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::IndexOutOfRange { index: i, len: self.len() });
            }
            rows.push(self.rows[i].clone());
            labels.push(self.labels[i]);
        }
        // select() never changes dim even if the subset drops trailing features
        let mut out = Dataset::new(rows, labels)?;
        out.dim = self.dim;
        Ok(out)
    }

    /// Concatenates two datasets of the same dimensionality.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.dim != other.dim && !self.is_empty() && !other.is_empty() {
            return Err(Error::DimensionMismatch { left: self.dim, right: other.dim });
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let mut out = Dataset::new(rows, labels)?;
        out.dim = self.dim.max(other.dim);
        Ok(out)
    }
}
