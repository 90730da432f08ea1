//! Kernel evaluation and on-demand rectangular Gram sub-blocks.
//!
//! Nothing here materializes the full N x N Gram matrix. Training samples
//! index sets and asks for the corresponding block, so memory stays at
//! O(|rows| * |cols|) no matter how large the dataset is.

use crate::data::{Dataset, SparseRow};
use crate::error::{Error, Result};

/// Kernel family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Rbf,
    Linear,
}

/// Kernel function with its parameters.
///
/// The RBF kernel is `exp(-||x - y||^2 / (2 sigma^2))`; `bandwidth_sigma`
/// is ignored by the linear kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth_sigma: f64,
}

impl KernelSpec {
    pub fn rbf(bandwidth_sigma: f64) -> Result<KernelSpec> {
        if !(bandwidth_sigma > 0.0) || !bandwidth_sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "RBF bandwidth must be a positive finite number, got {bandwidth_sigma}"
            )));
        }
        Ok(KernelSpec {
            family: KernelFamily::Rbf,
            bandwidth_sigma,
        })
    }

    pub fn linear() -> KernelSpec {
        KernelSpec {
            family: KernelFamily::Linear,
            bandwidth_sigma: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            KernelFamily::Rbf if !(self.bandwidth_sigma > 0.0) => Err(Error::InvalidParameter(
                format!("RBF bandwidth must be positive, got {}", self.bandwidth_sigma),
            )),
            _ => Ok(()),
        }
    }

    /// Kernel value from precomputed squared norms and the inner product.
    /// All Gram paths funnel through here so block and pointwise
    /// evaluations agree bitwise.
    #[inline]
    pub(crate) fn from_parts(&self, sq_x: f64, sq_y: f64, dot: f64) -> f64 {
        match self.family {
            KernelFamily::Linear => dot,
            KernelFamily::Rbf => {
                // cancellation can push the squared distance slightly negative
                let d2 = (sq_x + sq_y - 2.0 * dot).max(0.0);
                (-d2 / (2.0 * self.bandwidth_sigma * self.bandwidth_sigma)).exp()
            }
        }
    }
}

/// Evaluates the kernel on a single pair of rows.
pub fn eval_kernel(x: &SparseRow, y: &SparseRow, spec: &KernelSpec) -> Result<f64> {
    spec.validate()?;
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    Ok(spec.from_parts(x.sq_norm(), y.sq_norm(), x.dot(y)))
}

/// Dense row-major |rows| x |cols| kernel sub-block.
#[derive(Debug, Clone, PartialEq)]
pub struct GramBlock {
    values: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl GramBlock {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        self.values[i * self.n_cols + j]
    }

    /// Row-major backing slice, length `n_rows * n_cols`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Contiguous row i.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }
}

fn check_indices(idx: &[usize], len: usize) -> Result<()> {
    for &i in idx {
        if i >= len {
            return Err(Error::IndexOutOfRange { index: i, len });
        }
    }
    Ok(())
}

/// Materializes K[rows, cols] for row/col index sets over one dataset.
pub fn gram_block(
    dataset: &Dataset,
    rows: &[usize],
    cols: &[usize],
    spec: &KernelSpec,
) -> Result<GramBlock> {
    spec.validate()?;
    check_indices(rows, dataset.len())?;
    check_indices(cols, dataset.len())?;
    let mut values = Vec::with_capacity(rows.len() * cols.len());
    for &i in rows {
        let xi = dataset.row(i);
        let sq_i = dataset.sq_norm(i);
        for &j in cols {
            let v = spec.from_parts(sq_i, dataset.sq_norm(j), xi.dot(dataset.row(j)));
            values.push(v);
        }
    }
    Ok(GramBlock {
        values,
        n_rows: rows.len(),
        n_cols: cols.len(),
    })
}

/// Kernel block between rows of two different datasets, K[x_rows, y_cols].
/// Used for prediction, where x is held-out data and y the expansion set.
pub fn cross_gram_block(
    x: &Dataset,
    y: &Dataset,
    x_rows: &[usize],
    y_cols: &[usize],
    spec: &KernelSpec,
) -> Result<GramBlock> {
    spec.validate()?;
    if x.dim() != y.dim() && !x.is_empty() && !y.is_empty() {
        return Err(Error::DimensionMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    check_indices(x_rows, x.len())?;
    check_indices(y_cols, y.len())?;
    let mut values = Vec::with_capacity(x_rows.len() * y_cols.len());
    for &i in x_rows {
        let xi = x.row(i);
        let sq_i = x.sq_norm(i);
        for &j in y_cols {
            values.push(spec.from_parts(sq_i, y.sq_norm(j), xi.dot(y.row(j))));
        }
    }
    Ok(GramBlock {
        values,
        n_rows: x_rows.len(),
        n_cols: y_cols.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SparseRow;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn row(v: &[f64]) -> SparseRow {
        SparseRow::from_dense(v)
    }

    fn random_dataset(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = rng_from_seed(seed);
        let rows = (0..n)
            .map(|_| {
                let dense: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
                SparseRow::from_dense(&dense)
            })
            .collect();
        let labels = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        Dataset::new(rows, labels).unwrap()
    }

    #[test]
    fn rbf_of_identical_points_is_one() {
        let spec = KernelSpec::rbf(1.0).unwrap();
        let x = row(&[0.3, -1.7, 4.0]);
        assert_eq!(eval_kernel(&x, &x, &spec).unwrap(), 1.0);
    }

    #[test]
    fn rbf_unit_sigma_unit_square() {
        // exp(-((1)^2 + (1)^2) / 2) = exp(-1)
        let spec = KernelSpec::rbf(1.0).unwrap();
        let k = eval_kernel(&row(&[0.0, 0.0]), &row(&[1.0, 1.0]), &spec).unwrap();
        assert!((k - (-1.0f64).exp()).abs() < 1e-15, "got {k}");
    }

    #[test]
    fn linear_is_dot_product() {
        let spec = KernelSpec::linear();
        let k = eval_kernel(&row(&[1.0, 2.0]), &row(&[3.0, -1.0]), &spec).unwrap();
        assert_eq!(k, 1.0);
    }

    #[test]
    fn dimension_mismatch_reports_both_lengths() {
        let spec = KernelSpec::linear();
        let err = eval_kernel(&row(&[1.0]), &row(&[1.0, 2.0]), &spec).unwrap_err();
        match err {
            Error::DimensionMismatch { left, right } => {
                assert_eq!((left, right), (1, 2));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_nonpositive_bandwidth() {
        assert!(KernelSpec::rbf(0.0).is_err());
        assert!(KernelSpec::rbf(-1.5).is_err());
        assert!(KernelSpec::rbf(f64::NAN).is_err());
    }

    #[test]
    fn singleton_block_is_unit_diagonal() {
        let ds = random_dataset(4, 3, 9);
        let spec = KernelSpec::rbf(0.7).unwrap();
        let b = gram_block(&ds, &[2], &[2], &spec).unwrap();
        assert_eq!((b.n_rows(), b.n_cols()), (1, 1));
        assert_eq!(b.get(0, 0), 1.0);
    }

    #[test]
    fn block_matches_pointwise_oracle() {
        let ds = random_dataset(12, 5, 21);
        let spec = KernelSpec::rbf(1.3).unwrap();
        let rows = [0, 7, 3, 11, 5];
        let cols = [2, 9, 4];
        let b = gram_block(&ds, &rows, &cols, &spec).unwrap();
        for (bi, &i) in rows.iter().enumerate() {
            for (bj, &j) in cols.iter().enumerate() {
                let oracle = eval_kernel(ds.row(i), ds.row(j), &spec).unwrap();
                let got = b.get(bi, bj);
                assert!(
                    (got - oracle).abs() <= 1e-12 * oracle.abs().max(1.0),
                    "entry ({i},{j}): block {got} vs oracle {oracle}"
                );
            }
        }
    }

    #[test]
    fn square_block_is_symmetric_with_unit_diagonal() {
        let ds = random_dataset(20, 4, 33);
        let spec = KernelSpec::rbf(1.0).unwrap();
        let idx = [1, 4, 9, 16, 3];
        let b = gram_block(&ds, &idx, &idx, &spec).unwrap();
        for i in 0..idx.len() {
            assert!((b.get(i, i) - 1.0).abs() < 1e-15);
            for j in 0..idx.len() {
                assert!((b.get(i, j) - b.get(j, i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rbf_entries_stay_in_unit_interval() {
        let ds = random_dataset(30, 6, 77);
        let spec = KernelSpec::rbf(0.4).unwrap();
        let rows: Vec<usize> = (0..30).collect();
        let b = gram_block(&ds, &rows, &rows, &spec).unwrap();
        for &v in b.values() {
            assert!(v > 0.0 && v <= 1.0, "entry {v} outside (0, 1]");
        }
    }

    #[test]
    fn out_of_range_index_names_the_index() {
        let ds = random_dataset(5, 2, 1);
        let spec = KernelSpec::linear();
        let err = gram_block(&ds, &[0, 9], &[1], &spec).unwrap_err();
        match err {
            Error::IndexOutOfRange { index, len } => assert_eq!((index, len), (9, 5)),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn cross_block_matches_pointwise() {
        let a = random_dataset(6, 3, 5);
        let b = random_dataset(8, 3, 6);
        let spec = KernelSpec::rbf(0.9).unwrap();
        let blk = cross_gram_block(&a, &b, &[0, 5, 2], &[7, 1], &spec).unwrap();
        for (bi, &i) in [0usize, 5, 2].iter().enumerate() {
            for (bj, &j) in [7usize, 1].iter().enumerate() {
                let oracle = eval_kernel(a.row(i), b.row(j), &spec).unwrap();
                assert!((blk.get(bi, bj) - oracle).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gram_psd_on_small_subsets() {
        // RBF Gram matrices are positive definite; check the smallest
        // eigenvalue of random square blocks stays above -1e-8.
        let ds = random_dataset(60, 5, 404);
        let spec = KernelSpec::rbf(1.0).unwrap();
        let mut rng = rng_from_seed(405);
        for _ in 0..5 {
            let m = rng.gen_range(2..=50);
            let idx = rand::seq::index::sample(&mut rng, ds.len(), m).into_vec();
            let b = gram_block(&ds, &idx, &idx, &spec).unwrap();
            let mat = nalgebra::DMatrix::from_row_slice(m, m, b.values());
            let eigs = mat.symmetric_eigenvalues();
            let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-8, "min eigenvalue {min} for block size {m}");
        }
    }
}
