//! Sparse labelled datasets: LibSVM text parsing/writing and seeded synthetic
//! generators.
//!
//! ```text
//! +1 1:0.5 3:-2.0
//! -1 2:1 # trailing comments are dropped
//! ```

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// One sparse row: `(index, value)` pairs with strictly increasing 1-based indices.
pub type SparseRow = Vec<(usize, f64)>;

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Dataset {
    rows: Vec<SparseRow>,
    labels: Vec<f64>,
    dim: usize,
}

impl Dataset {
    pub fn new(rows: Vec<SparseRow>, labels: Vec<f64>, dim: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::invalid(
                "labels",
                format!("{} labels for {} rows", labels.len(), rows.len()),
            ));
        }
        for (r, row) in rows.iter().enumerate() {
            let mut prev = 0;
            for &(idx, value) in row {
                if idx <= prev {
                    return Err(Error::invalid(
                        "rows",
                        format!("row {r}: indices must be 1-based and strictly increasing"),
                    ));
                }
                if idx > dim {
                    return Err(Error::invalid(
                        "dim",
                        format!("row {r}: index {idx} exceeds dimension {dim}"),
                    ));
                }
                if !value.is_finite() {
                    return Err(Error::invalid("rows", format!("row {r}: non-finite value")));
                }
                prev = idx;
            }
        }
        Ok(Dataset { rows, labels, dim })
    }

    /// Builds a dataset from dense rows, dropping exact zeros.
    pub fn from_dense(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let sparse = rows
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, &v)| (j + 1, v))
                    .collect()
            })
            .collect();
        Dataset::new(sparse, labels, dim)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(idx, v) in &self.rows[i] {
            out[idx - 1] = v;
        }
        out
    }

    /// `aᵢᵀx` for dense `x`.
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(idx, v)| v * x[idx - 1]).sum()
    }

    pub fn row_norm_sq(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|&(_, v)| v * v).sum()
    }

    /// Raises the feature dimension. Lowering it is an error.
    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        if dim < self.dim {
            return Err(Error::invalid(
                "dim",
                format!("cannot shrink dimension from {} to {dim}", self.dim),
            ));
        }
        self.dim = dim;
        Ok(self)
    }

    /// Labels mapped to `{-1, +1}` for logistic loss: `0, -1 → -1` and `1 → +1`.
    pub fn binary_labels(&self) -> Result<Vec<f64>> {
        self.labels
            .iter()
            .enumerate()
            .map(|(row, &label)| {
                if label == 1.0 {
                    Ok(1.0)
                } else if label == 0.0 || label == -1.0 {
                    Ok(-1.0)
                } else {
                    Err(Error::BadLabel { row, label })
                }
            })
            .collect()
    }

    /// Labels as class indices `0..classes`.
    pub fn class_labels(&self, classes: usize) -> Result<Vec<usize>> {
        self.labels
            .iter()
            .enumerate()
            .map(|(row, &label)| {
                if label >= 0.0 && label.fract() == 0.0 && (label as usize) < classes {
                    Ok(label as usize)
                } else {
                    Err(Error::BadLabel { row, label })
                }
            })
            .collect()
    }

    /// Divides each feature by its largest absolute value so every entry lies
    /// in `[-1, 1]`. All-zero features are left alone.
    pub fn scaled_to_unit_range(&self) -> Dataset {
        let mut max_abs = vec![0.0f64; self.dim];
        for row in &self.rows {
            for &(idx, v) in row {
                max_abs[idx - 1] = max_abs[idx - 1].max(v.abs());
            }
        }
        let rows = self
            .rows
            .iter()
            .map(|row| row.iter().map(|&(idx, v)| (idx, v / max_abs[idx - 1])).collect())
            .collect();
        Dataset {
            rows,
            labels: self.labels.clone(),
            dim: self.dim,
        }
    }

    /// Writes LibSVM text. Numbers use shortest round-trip formatting.
    pub fn write_libsvm<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (row, label) in self.rows.iter().zip(&self.labels) {
            write!(w, "{label}")?;
            for (idx, v) in row {
                write!(w, " {idx}:{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_libsvm_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_libsvm(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// Parses LibSVM text: `label idx:val idx:val …` per line, with blank lines
/// and `#` comments ignored. `d` is the largest index seen.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut dim = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let line_number = lineno + 1;
        let line = line.map_err(|e| Error::io(format!("line {line_number}"), e))?;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line,
        };
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let parse_err = |message: String| Error::Parse {
            line: line_number,
            message,
        };
        let label: f64 = label_tok
            .parse()
            .map_err(|_| parse_err(format!("unparseable label `{label_tok}`")))?;
        if !label.is_finite() {
            return Err(parse_err(format!("non-finite label `{label_tok}`")));
        }
        let mut row = SparseRow::new();
        let mut prev = 0usize;
        for tok in tokens {
            let (idx_str, val_str) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(format!("malformed pair `{tok}`")))?;
            let idx: usize = idx_str
                .parse()
                .map_err(|_| parse_err(format!("unparseable index in `{tok}`")))?;
            if idx == 0 {
                return Err(parse_err(format!("index must be 1-based in `{tok}`")));
            }
            if idx <= prev {
                return Err(parse_err(format!("non-increasing index {idx} after {prev}")));
            }
            let value: f64 = val_str
                .parse()
                .map_err(|_| parse_err(format!("unparseable value in `{tok}`")))?;
            if !value.is_finite() {
                return Err(parse_err(format!("non-finite value in `{tok}`")));
            }
            row.push((idx, value));
            prev = idx;
        }
        dim = dim.max(prev);
        rows.push(row);
        labels.push(label);
    }
    Ok(Dataset { rows, labels, dim })
}

pub fn parse_libsvm_str(text: &str) -> Result<Dataset> {
    parse_libsvm(text.as_bytes())
}

/// Loads a LibSVM file; the path `-` reads standard input.
pub fn load_libsvm(path: &Path) -> Result<Dataset> {
    if path.as_os_str() == "-" {
        return parse_libsvm(io::stdin().lock());
    }
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_libsvm(BufReader::new(file))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Gaussian features, labels `sign(aᵢᵀw)` for a hidden Gaussian `w`.
    SeparableLogistic,
    /// Gaussian features, targets `aᵢᵀw + 0.1·noise` for least squares.
    Quadratic,
    /// `classes` Gaussian clusters; labels are class indices.
    Clusters { classes: usize },
}

/// Noise scale of the quadratic generator's targets.
pub const QUADRATIC_NOISE: f64 = 0.1;

/// Cluster-center spread relative to the unit within-cluster noise.
const CLUSTER_SPREAD: f64 = 1.5;

/// Seeded synthetic dataset together with its hidden parameters: the
/// generating `w` for the regression/logistic kinds, the row-major class
/// centers for clusters.
pub fn generate_synthetic_with_truth(
    kind: SyntheticKind,
    n: usize,
    d: usize,
    seed: u64,
) -> Result<(Dataset, Vec<f64>)> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("n, d", "synthetic data needs n, d >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
    match kind {
        SyntheticKind::SeparableLogistic | SyntheticKind::Quadratic => {
            let w: Vec<f64> = (0..d).map(|_| gauss(&mut rng)).collect();
            let mut rows = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let a: Vec<f64> = (0..d).map(|_| gauss(&mut rng)).collect();
                let margin: f64 = a.iter().zip(&w).map(|(x, y)| x * y).sum();
                let label = match kind {
                    SyntheticKind::SeparableLogistic => {
                        if margin >= 0.0 {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                    _ => margin + QUADRATIC_NOISE * gauss(&mut rng),
                };
                rows.push(a);
                labels.push(label);
            }
            let ds = Dataset::from_dense(&rows, labels)?.with_dim(d)?;
            Ok((ds, w))
        }
        SyntheticKind::Clusters { classes } => {
            if classes < 2 {
                return Err(Error::invalid("classes", "need at least two classes"));
            }
            let centers: Vec<f64> = (0..classes * d)
                .map(|_| CLUSTER_SPREAD * gauss(&mut rng))
                .collect();
            let mut rows = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let k = rng.random_range(0..classes);
                let a: Vec<f64> = (0..d).map(|j| centers[k * d + j] + gauss(&mut rng)).collect();
                rows.push(a);
                labels.push(k as f64);
            }
            let ds = Dataset::from_dense(&rows, labels)?.with_dim(d)?;
            Ok((ds, centers))
        }
    }
}

pub fn generate_synthetic(kind: SyntheticKind, n: usize, d: usize, seed: u64) -> Result<Dataset> {
    generate_synthetic_with_truth(kind, n, d, seed).map(|(ds, _)| ds)
}
