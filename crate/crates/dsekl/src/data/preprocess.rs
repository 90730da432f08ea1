//! Splits, subsampling and feature standardization.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Splits into disjoint random subsets of sizes `round(fraction * n)`.
/// Fractions must be positive and sum to at most 1; rows not covered by the
/// fractions are dropped.
pub fn split(data: &Dataset, fractions: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<Dataset>> {
    let total: f64 = fractions.iter().sum();
    if total > 1.0 + 1e-12 {
        return Err(Error::FractionSum(total));
    }
    for &f in fractions {
        if f <= 0.0 {
            return Err(Error::InvalidParameter(format!("non-positive fraction {f}")));
        }
    }
    let n = data.len();
    let mut sizes: Vec<usize> = fractions
        .iter()
        .map(|f| (f * n as f64).round() as usize)
        .collect();
    // rounding can overshoot by a row when fractions sum to 1
    while sizes.iter().sum::<usize>() > n {
        let imax = (0..sizes.len()).max_by_key(|&i| sizes[i]).unwrap();
        sizes[imax] -= 1;
    }
    split_counts(data, &sizes, rng)
}

/// Splits into disjoint random subsets of the exact given sizes.
pub fn split_counts(
    data: &Dataset,
    counts: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Dataset>> {
    let total: usize = counts.iter().sum();
    if total > data.len() {
        return Err(Error::InvalidParameter(format!(
            "split sizes sum to {total} but the dataset has {} rows",
            data.len()
        )));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    let mut out = Vec::with_capacity(counts.len());
    let mut offset = 0;
    for &c in counts {
        out.push(data.select(&order[offset..offset + c])?);
        offset += c;
    }
    Ok(out)
}

/// Uniform random subsample of `size` rows without replacement; `size >= n`
/// returns a shuffled copy of the full dataset.
pub fn subsample(data: &Dataset, size: usize, rng: &mut ChaCha8Rng) -> Dataset {
    let size = size.min(data.len());
    let idx = rand::seq::index::sample(rng, data.len(), size).into_vec();
    data.select(&idx).expect("sampled indices are in range")
}

/// Per-feature affine transform fitted on a training set.
#[derive(Debug, Clone)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    /// Fits means and standard deviations on `train`, counting implicit
    /// zeros of the sparse rows. Near-constant features keep `std = 1` and
    /// are only centered.
    pub fn fit(train: &Dataset) -> Result<Standardizer> {
        if train.is_empty() {
            return Err(Error::InvalidParameter(
                "cannot standardize an empty training set".into(),
            ));
        }
        let n = train.len() as f64;
        let d = train.dim();
        let mut mean = vec![0.0; d];
        let mut present = vec![0usize; d];
        for i in 0..train.len() {
            for (j, v) in train.row(i).iter() {
                mean[j] += v;
                present[j] += 1;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        // two-pass variance; absent entries contribute (0 - mean)^2
        let mut var = vec![0.0; d];
        for i in 0..train.len() {
            for (j, v) in train.row(i).iter() {
                let c = v - mean[j];
                var[j] += c * c;
            }
        }
        for j in 0..d {
            let absent = train.len() - present[j];
            var[j] += absent as f64 * mean[j] * mean[j];
            var[j] /= n;
        }
        let std = var
            .iter()
            .zip(mean.iter())
            .map(|(&v, &m)| {
                let s = v.sqrt();
                if s <= 1e-9 * m.abs().max(1.0) {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    /// Applies the fitted transform. Centering densifies rows, so this is
    /// intended for desk-scale data.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.dim() != self.mean.len() && !data.is_empty() {
            return Err(Error::DimensionMismatch {
                left: data.dim(),
                right: self.mean.len(),
            });
        }
        let mut rows = Vec::with_capacity(data.len());
        for i in 0..data.len() {
            let mut dense = data.row(i).to_dense();
            for j in 0..dense.len() {
                dense[j] = (dense[j] - self.mean[j]) / self.std[j];
            }
            rows.push(crate::data::SparseRow::from_dense(&dense));
        }
        Dataset::new(rows, data.labels().to_vec())
    }
}

/// Standardizes `train` and applies the same transform to `others`.
/// Returns the transformed datasets with `train` first.
pub fn standardize(train: &Dataset, others: &[&Dataset]) -> Result<(Vec<Dataset>, Standardizer)> {
    let st = Standardizer::fit(train)?;
    let mut out = Vec::with_capacity(1 + others.len());
    out.push(st.apply(train)?);
    for &o in others {
        out.push(st.apply(o)?);
    }
    Ok((out, st))
}
