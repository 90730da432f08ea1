//! Dual-coefficient models and flat-file model serialization.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::data::{Dataset, SparseRow};
use crate::error::{Error, Result};
use crate::kernel::{eval_kernel, KernelFamily, KernelSpec};

/// Anything that maps a feature row to a real-valued decision score.
/// Labels are the sign of the score, with 0 predicting +1.
pub trait DecisionModel {
    fn decision(&self, x: &SparseRow) -> Result<f64>;

    fn predict_label(&self, x: &SparseRow) -> Result<f64> {
        Ok(if self.decision(x)? < 0.0 { -1.0 } else { 1.0 })
    }

    fn predict(&self, data: &Dataset) -> Result<Vec<f64>> {
        (0..data.len()).map(|i| self.predict_label(data.row(i))).collect()
    }

    /// Fraction of misclassified rows.
    fn error_rate(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::InvalidParameter(
                "error rate of an empty dataset is undefined".into(),
            ));
        }
        let mut wrong = 0usize;
        for i in 0..data.len() {
            if self.predict_label(data.row(i))? != data.label(i) {
                wrong += 1;
            }
        }
        Ok(wrong as f64 / data.len() as f64)
    }
}

/// Kernel expansion model: f(x) = sum_j alpha_j k(x, x_j) over the
/// expansion dataset.
#[derive(Debug, Clone)]
pub struct DualModel {
    alpha: Vec<f64>,
    expansion: Arc<Dataset>,
    spec: KernelSpec,
}

impl DualModel {
    pub fn new(alpha: Vec<f64>, expansion: Arc<Dataset>, spec: KernelSpec) -> Result<DualModel> {
        spec.validate()?;
        if alpha.len() != expansion.len() {
            return Err(Error::DimensionMismatch {
                left: alpha.len(),
                right: expansion.len(),
            });
        }
        if let Some(bad) = alpha.iter().find(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite coefficient {bad} in model"
            )));
        }
        Ok(DualModel {
            alpha,
            expansion,
            spec,
        })
    }

    pub fn zeros(expansion: Arc<Dataset>, spec: KernelSpec) -> Result<DualModel> {
        let n = expansion.len();
        DualModel::new(vec![0.0; n], expansion, spec)
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub(crate) fn alpha_mut(&mut self) -> &mut [f64] {
        &mut self.alpha
    }

    pub fn expansion(&self) -> &Arc<Dataset> {
        &self.expansion
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    /// Indices with a nonzero coefficient.
    pub fn support(&self) -> Vec<usize> {
        (0..self.alpha.len()).filter(|&j| self.alpha[j] != 0.0).collect()
    }

    /// Decision scores for every row of `data`, evaluated through kernel
    /// blocks in bounded chunks. Equivalent to calling [`DecisionModel::decision`]
    /// per row but far cheaper for large support sets.
    pub fn decision_scores(&self, data: &Dataset) -> Result<Vec<f64>> {
        let support = self.support();
        if support.is_empty() {
            return Ok(vec![0.0; data.len()]);
        }
        // chunk rows so block memory stays around a few MB
        let chunk = (2_000_000 / support.len().max(1)).clamp(1, 512);
        let mut scores = Vec::with_capacity(data.len());
        let all_rows: Vec<usize> = (0..data.len()).collect();
        for rows in all_rows.chunks(chunk) {
            let k = crate::kernel::cross_gram_block(data, &self.expansion, rows, &support, &self.spec)?;
            for bi in 0..rows.len() {
                let krow = k.row(bi);
                let mut f = 0.0;
                for (bj, &j) in support.iter().enumerate() {
                    f += self.alpha[j] * krow[bj];
                }
                scores.push(f);
            }
        }
        Ok(scores)
    }

    /// Decision score over an explicit support set.
    pub fn decision_with_support(&self, x: &SparseRow, support: &[usize]) -> Result<f64> {
        let n = self.expansion.len();
        let mut f = 0.0;
        for &j in support {
            if j >= n {
                return Err(Error::IndexOutOfRange { index: j, len: n });
            }
            f += self.alpha[j] * eval_kernel(x, self.expansion.row(j), &self.spec)?;
        }
        Ok(f)
    }
}

impl DecisionModel for DualModel {
    /// Score over all nonzero coefficients; the all-zero model returns 0.
    fn decision(&self, x: &SparseRow) -> Result<f64> {
        let mut f = 0.0;
        for j in 0..self.alpha.len() {
            let a = self.alpha[j];
            if a != 0.0 {
                f += a * eval_kernel(x, self.expansion.row(j), &self.spec)?;
            }
        }
        Ok(f)
    }

    fn predict(&self, data: &Dataset) -> Result<Vec<f64>> {
        Ok(self
            .decision_scores(data)?
            .into_iter()
            .map(|f| if f < 0.0 { -1.0 } else { 1.0 })
            .collect())
    }

    fn error_rate(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::InvalidParameter(
                "error rate of an empty dataset is undefined".into(),
            ));
        }
        let preds = self.predict(data)?;
        let wrong = preds
            .iter()
            .zip(data.labels())
            .filter(|(p, y)| **p != **y)
            .count();
        Ok(wrong as f64 / data.len() as f64)
    }
}

const MODEL_HEADER: &str = "DSEKL-MODEL-v1";

/// Writes the model as a self-contained flat text file.
///
/// Layout, one record per line:
/// ```text
/// DSEKL-MODEL-v1
/// n <training set size>
/// dim <feature dimensionality>
/// kernel rbf <sigma>          (or "kernel linear")
/// support <count>
/// <index> <alpha> <nnz> <feat>:<value> ...
/// ```
/// Only nonzero coefficients are stored, together with their feature rows,
/// so prediction after loading needs no access to the training data.
pub fn save_model(model: &DualModel, path: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{MODEL_HEADER}");
    let _ = writeln!(out, "n {}", model.expansion.len());
    let _ = writeln!(out, "dim {}", model.expansion.dim());
    match model.spec.family {
        KernelFamily::Rbf => {
            let _ = writeln!(out, "kernel rbf {}", model.spec.bandwidth_sigma);
        }
        KernelFamily::Linear => {
            let _ = writeln!(out, "kernel linear");
        }
    }
    let support = model.support();
    let _ = writeln!(out, "support {}", support.len());
    for &j in &support {
        let row = model.expansion.row(j);
        let _ = write!(out, "{} {} {}", j, model.alpha[j], row.nnz());
        for (feat, value) in row.iter() {
            let _ = write!(out, " {feat}:{value}");
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::ModelFormat(msg.into())
}

fn expect_field<'a>(line: Option<&'a str>, key: &str) -> Result<&'a str> {
    let line = line.ok_or_else(|| format_err(format!("missing '{key}' line")))?;
    line.strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| format_err(format!("expected '{key} ...', found '{line}'")))
}

/// Loads a model written by [`save_model`]. The expansion dataset of the
/// returned model contains only the stored support rows.
pub fn load_model(path: &Path) -> Result<DualModel> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(MODEL_HEADER) => {}
        Some(other) => {
            return Err(format_err(format!(
                "bad header '{other}', expected '{MODEL_HEADER}'"
            )))
        }
        None => return Err(format_err("empty model file")),
    }
    let n: usize = expect_field(lines.next(), "n")?
        .parse()
        .map_err(|_| format_err("unparseable training set size"))?;
    let dim: usize = expect_field(lines.next(), "dim")?
        .parse()
        .map_err(|_| format_err("unparseable dimensionality"))?;
    let kernel_line = lines
        .next()
        .ok_or_else(|| format_err("missing 'kernel' line"))?;
    let spec = match kernel_line
        .strip_prefix("kernel ")
        .map(|r| r.split_whitespace().collect::<Vec<_>>())
        .as_deref()
    {
        Some(["linear"]) => KernelSpec::linear(),
        Some(["rbf", sigma]) => {
            let s: f64 = sigma
                .parse()
                .map_err(|_| format_err("unparseable RBF bandwidth"))?;
            KernelSpec::rbf(s)?
        }
        _ => return Err(format_err(format!("bad kernel line '{kernel_line}'"))),
    };
    let count: usize = expect_field(lines.next(), "support")?
        .parse()
        .map_err(|_| format_err("unparseable support count"))?;
    if count > n {
        return Err(format_err(format!(
            "support count {count} exceeds training set size {n}"
        )));
    }

    let mut alpha = Vec::with_capacity(count);
    let mut rows = Vec::with_capacity(count);
    for k in 0..count {
        let line = lines
            .next()
            .ok_or_else(|| format_err(format!("missing support record {k}")))?;
        let mut tok = line.split_whitespace();
        let bad = || format_err(format!("malformed support record '{line}'"));
        let index: usize = tok.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if index >= n {
            return Err(format_err(format!(
                "support index {index} out of range for n = {n}"
            )));
        }
        let a: f64 = tok.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if !a.is_finite() {
            return Err(format_err(format!("non-finite coefficient in record '{line}'")));
        }
        let nnz: usize = tok.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let pair = tok.next().ok_or_else(bad)?;
            let (f, v) = pair.split_once(':').ok_or_else(bad)?;
            let f: u32 = f.parse().map_err(|_| bad())?;
            let v: f64 = v.parse().map_err(|_| bad())?;
            if f as usize >= dim {
                return Err(format_err(format!(
                    "feature index {f} out of range for dim = {dim}"
                )));
            }
            indices.push(f);
            values.push(v);
        }
        if tok.next().is_some() {
            return Err(bad());
        }
        alpha.push(a);
        rows.push(SparseRow::new(dim, indices, values)?);
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(format_err("trailing content after support records"));
    }
    // labels are not stored; prediction never reads them
    let labels = vec![1.0; rows.len()];
    let expansion = Arc::new(Dataset::new(rows, labels)?);
    DualModel::new(alpha, expansion, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn toy_dataset(n: usize, d: usize, seed: u64) -> Arc<Dataset> {
        let mut rng = rng_from_seed(seed);
        let rows = (0..n)
            .map(|_| {
                let dense: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                SparseRow::from_dense(&dense)
            })
            .collect();
        let labels = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        Arc::new(Dataset::new(rows, labels).unwrap())
    }

    #[test]
    fn zero_model_scores_zero_predicts_plus_one() {
        let ds = toy_dataset(5, 3, 1);
        let m = DualModel::zeros(ds.clone(), KernelSpec::rbf(1.0).unwrap()).unwrap();
        let x = SparseRow::from_dense(&[0.1, 0.2, 0.3]);
        assert_eq!(m.decision(&x).unwrap(), 0.0);
        assert_eq!(m.predict_label(&x).unwrap(), 1.0);
    }

    #[test]
    fn single_support_point_reduces_to_kernel_value() {
        let ds = toy_dataset(4, 2, 2);
        let spec = KernelSpec::rbf(0.8).unwrap();
        let mut alpha = vec![0.0; 4];
        alpha[2] = 1.0;
        let m = DualModel::new(alpha, ds.clone(), spec).unwrap();
        let x = SparseRow::from_dense(&[0.5, -0.5]);
        let expect = eval_kernel(&x, ds.row(2), &spec).unwrap();
        assert_eq!(m.decision(&x).unwrap(), expect);
    }

    #[test]
    fn decision_matches_explicit_sum_oracle() {
        let ds = toy_dataset(3, 3, 3);
        let spec = KernelSpec::rbf(1.2).unwrap();
        let alpha = vec![0.7, -0.4, 1.1];
        let m = DualModel::new(alpha.clone(), ds.clone(), spec).unwrap();
        let x = SparseRow::from_dense(&[0.2, 0.9, -0.3]);
        let mut oracle = 0.0;
        for j in 0..3 {
            oracle += alpha[j] * eval_kernel(&x, ds.row(j), &spec).unwrap();
        }
        assert!((m.decision(&x).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn support_skips_exact_zeros() {
        let ds = toy_dataset(6, 2, 4);
        let alpha = vec![0.0, 1.0, 0.0, -2.0, 0.0, 0.5];
        let m = DualModel::new(alpha, ds, KernelSpec::linear()).unwrap();
        assert_eq!(m.support(), vec![1, 3, 5]);
    }

    #[test]
    fn rejects_alpha_length_mismatch() {
        let ds = toy_dataset(5, 2, 5);
        assert!(DualModel::new(vec![0.0; 4], ds, KernelSpec::linear()).is_err());
    }

    #[test]
    fn save_load_round_trip_preserves_predictions() {
        let ds = toy_dataset(10, 4, 6);
        let spec = KernelSpec::rbf(0.9).unwrap();
        let mut rng = rng_from_seed(7);
        let alpha: Vec<f64> = (0..10)
            .map(|j| if j % 3 == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) })
            .collect();
        let m = DualModel::new(alpha, ds, spec).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        save_model(&m, &path).unwrap();
        let loaded = load_model(&path).unwrap();

        assert_eq!(loaded.spec(), m.spec());
        for _ in 0..20 {
            let x = SparseRow::from_dense(&[
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ]);
            let a = m.decision(&x).unwrap();
            let b = loaded.decision(&x).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn chunked_scores_match_per_row_decision() {
        let ds = toy_dataset(40, 3, 12);
        let mut rng = rng_from_seed(13);
        let alpha: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = DualModel::new(alpha, ds.clone(), KernelSpec::rbf(1.1).unwrap()).unwrap();
        let scores = m.decision_scores(&ds).unwrap();
        for i in 0..ds.len() {
            let single = m.decision(ds.row(i)).unwrap();
            assert!(
                (scores[i] - single).abs() < 1e-12,
                "row {i}: {} vs {single}",
                scores[i]
            );
        }
    }

    #[test]
    fn load_rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        std::fs::write(&path, "DSEKL-MODEL-v2\nn 1\n").unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(matches!(err, Error::ModelFormat(_)), "{err:?}");
    }

    #[test]
    fn load_rejects_truncated_support() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        std::fs::write(
            &path,
            "DSEKL-MODEL-v1\nn 5\ndim 2\nkernel linear\nsupport 2\n0 1.5 1 0:2.0\n",
        )
        .unwrap();
        assert!(load_model(&path).is_err());
    }

    #[test]
    fn empty_support_round_trips() {
        let ds = toy_dataset(4, 2, 9);
        let m = DualModel::zeros(ds, KernelSpec::linear()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        save_model(&m, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        let x = SparseRow::from_dense(&[1.0, 2.0]);
        assert_eq!(loaded.decision(&x).unwrap(), 0.0);
        assert_eq!(loaded.predict_label(&x).unwrap(), 1.0);
    }
}
