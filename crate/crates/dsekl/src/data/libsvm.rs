//! Reader and writer for the libsvm text format.
//!
//! Each line is `<label> <index>:<value> <index>:<value> ...` with 1-based,
//! strictly increasing feature indices. Blank lines and lines starting with
//! `#` are skipped. Labels may come in as {-1,+1}, {0,1} or {1,2}; they are
//! normalized to {-1,+1} with the smaller raw label mapped to -1.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::data::{Dataset, SparseRow};
use crate::error::{Error, Result};

/// Parses a libsvm stream. The dimensionality is the maximum feature index
/// seen anywhere in the stream.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<Dataset> {
    parse_libsvm_with_dim(reader, None)
}

/// Parses a libsvm stream with an explicit dimensionality override, for
/// files whose trailing features happen to be absent. The override must not
/// be smaller than the largest index present.
pub fn parse_libsvm_with_dim<R: BufRead>(reader: R, dim: Option<usize>) -> Result<Dataset> {
    let mut raw_labels: Vec<f64> = Vec::new();
    let mut raw_rows: Vec<(Vec<u32>, Vec<f64>)> = Vec::new();
    let mut max_index = 0usize;

    for (line_no, line) in reader.lines().enumerate() {
        let line_no = line_no + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }

        let mut tokens = trimmed.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a first token");
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("non-numeric label `{label_tok}`"),
        })?;
        if !label.is_finite() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("non-finite label `{label_tok}`"),
            });
        }

        let mut indices: Vec<u32> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected `index:value`, found `{tok}`"),
            })?;
            let idx: i64 = idx_s.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("non-numeric feature index `{idx_s}`"),
            })?;
            if idx < 1 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("feature index {idx} must be >= 1"),
                });
            }
            let val: f64 = val_s.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("non-numeric feature value `{val_s}`"),
            })?;
            if !val.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-finite feature value `{val_s}`"),
                });
            }
            let zero_based = (idx - 1) as u32;
            if let Some(&prev) = indices.last() {
                if zero_based <= prev {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!(
                            "feature indices must be strictly increasing ({} after {})",
                            idx,
                            prev + 1
                        ),
                    });
                }
            }
            indices.push(zero_based);
            values.push(val);
            max_index = max_index.max(idx as usize);
        }

        raw_labels.push(label);
        raw_rows.push((indices, values));
    }

    let dim = match dim {
        Some(d) => {
            if d < max_index {
                return Err(Error::InvalidParameter(format!(
                    "dimension override {d} is smaller than the largest feature index {max_index}"
                )));
            }
            d
        }
        None => max_index,
    };

    let labels = normalize_labels(&raw_labels)?;
    let rows = raw_rows
        .into_iter()
        .map(|(idx, val)| SparseRow::new(dim, idx, val))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(rows, labels)
}

/// Maps raw binary labels to {-1, +1}; the smaller raw label becomes -1.
fn normalize_labels(raw: &[f64]) -> Result<Vec<f64>> {
    let mut distinct: Vec<f64> = Vec::new();
    for &y in raw {
        if !distinct.contains(&y) {
            distinct.push(y);
            if distinct.len() > 2 {
                return Err(Error::InvalidParameter(format!(
                    "more than two distinct labels (found {:?}...); only binary data is supported",
                    distinct
                )));
            }
        }
    }
    match distinct.len() {
        0 | 1 => {
            // a single class keeps its sign: positive raw labels map to +1
            Ok(raw
                .iter()
                .map(|&y| if y > 0.0 { 1.0 } else { -1.0 })
                .collect())
        }
        _ => {
            let lo = distinct[0].min(distinct[1]);
            let hi = distinct[0].max(distinct[1]);
            if lo == -1.0 && hi == 1.0 {
                return Ok(raw.to_vec());
            }
            Ok(raw.iter().map(|&y| if y == lo { -1.0 } else { 1.0 }).collect())
        }
    }
}

/// Writes a dataset in libsvm format with 1-based indices. Values use the
/// shortest round-tripping decimal representation, so parsing the output
/// reproduces the dataset exactly.
pub fn write_libsvm<W: Write>(mut w: W, data: &Dataset) -> std::io::Result<()> {
    for i in 0..data.len() {
        let label = if data.label(i) > 0.0 { "+1" } else { "-1" };
        write!(w, "{label}")?;
        for (idx, val) in data.row(i).iter() {
            write!(w, " {}:{}", idx + 1, val)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Convenience wrapper reading a libsvm file from disk.
pub fn read_libsvm_file<P: AsRef<Path>>(path: P) -> Result<Dataset> {
    let file = File::open(path.as_ref())?;
    parse_libsvm(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(s: &str) -> Result<Dataset> {
        parse_libsvm(s.as_bytes())
    }

    #[test]
    fn single_line() {
        let ds = parse_str("+1 1:0.5 3:2.0\n").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.dim(), 3);
        assert_eq!(ds.label(0), 1.0);
        assert_eq!(ds.row(0).to_dense(), vec![0.5, 0.0, 2.0]);
    }

    #[test]
    fn empty_stream() {
        let ds = parse_str("").unwrap();
        assert_eq!(ds.len(), 0);
        assert_eq!(ds.dim(), 0);
    }

    #[test]
    fn skips_blank_and_comment_lines() {
        let ds = parse_str("\n# header\n+1 1:1\n\n-1 2:1\n").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim(), 2);
    }

    #[test]
    fn label_normalization_zero_one() {
        let ds = parse_str("0 1:1\n1 1:2\n").unwrap();
        assert_eq!(ds.labels(), &[-1.0, 1.0]);
    }

    #[test]
    fn label_normalization_one_two() {
        let ds = parse_str("2 1:1\n1 1:2\n").unwrap();
        assert_eq!(ds.labels(), &[1.0, -1.0]);
    }

    #[test]
    fn rejects_bad_token_with_line_number() {
        let err = parse_str("+1 1:0.5\n-1 2:abc\n").unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("abc"), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_decreasing_indices() {
        let err = parse_str("+1 3:1 2:1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err:?}");
    }

    #[test]
    fn rejects_three_labels() {
        let err = parse_str("1 1:1\n2 1:1\n3 1:1\n").unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)), "{err:?}");
    }

    #[test]
    fn dim_override() {
        let ds = parse_libsvm_with_dim("+1 1:1\n".as_bytes(), Some(10)).unwrap();
        assert_eq!(ds.dim(), 10);
        assert!(parse_libsvm_with_dim("+1 5:1\n".as_bytes(), Some(3)).is_err());
    }

    #[test]
    fn roundtrip_small() {
        let src = "+1 1:0.25 3:-1.5\n-1 2:3\n";
        let ds = parse_str(src).unwrap();
        let mut buf = Vec::new();
        write_libsvm(&mut buf, &ds).unwrap();
        let back = parse_libsvm(buf.as_slice()).unwrap();
        assert_eq!(back.len(), ds.len());
        for i in 0..ds.len() {
            assert_eq!(back.label(i), ds.label(i));
            assert_eq!(back.row(i), ds.row(i));
        }
    }
}
