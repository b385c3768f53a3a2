//! Sparse datasets: a compressed row-major design matrix, LIBSVM text I/O and a
//! seeded synthetic generator.
//!
//! LIBSVM files use 1-based feature indices on disk. In memory every index is
//! 0-based, so `+1 3:1.5 7:2` becomes a row with entries `(2, 1.5)` and `(6, 2.0)`.
//! Gzip-compressed files are detected from their magic bytes.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("empty input")]
    Empty,
    #[error("density must lie in (0, 1], got {0}")]
    InvalidDensity(f64),
    #[error("dimensions must be positive (n = {n}, p = {p})")]
    InvalidShape { n: usize, p: usize },
    #[error("invalid matrix: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl DataError {
    /// Line number of a parse failure, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            DataError::Parse { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// Compressed sparse row matrix. Rows hold strictly increasing column indices
/// with finite, nonzero values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRowMatrix {
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRowMatrix {
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self, DataError> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for (j, v) in row {
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        let m = SparseRowMatrix {
            n_cols,
            indptr,
            indices,
            values,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.indptr[i + 1] - self.indptr[i]
    }

    /// Squared Euclidean norm of row `i`.
    pub fn row_norm_sq(&self, i: usize) -> f64 {
        self.row(i).1.iter().map(|v| v * v).sum()
    }

    #[inline]
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (idx, val) = self.row(i);
        let mut acc = 0.0;
        for (&j, &a) in idx.iter().zip(val) {
            acc += a * x[j];
        }
        acc
    }

    /// Checks the structural invariants: sorted in-range indices and finite nonzero values.
    pub fn validate(&self) -> Result<(), DataError> {
        if self.indptr.first() != Some(&0) || *self.indptr.last().unwrap() != self.values.len() {
            return Err(DataError::Invalid("row pointer does not span the storage".into()));
        }
        for i in 0..self.n_rows() {
            if self.indptr[i] > self.indptr[i + 1] {
                return Err(DataError::Invalid(format!("row {i}: decreasing row pointer")));
            }
            let (idx, val) = self.row(i);
            for (k, (&j, &v)) in idx.iter().zip(val).enumerate() {
                if j >= self.n_cols {
                    return Err(DataError::Invalid(format!(
                        "row {i}: column {j} out of range (n_cols = {})",
                        self.n_cols
                    )));
                }
                if k > 0 && idx[k - 1] >= j {
                    return Err(DataError::Invalid(format!(
                        "row {i}: column indices not strictly increasing"
                    )));
                }
                if !v.is_finite() || v == 0.0 {
                    return Err(DataError::Invalid(format!(
                        "row {i}: stored value {v} at column {j} must be finite and nonzero"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Design matrix plus one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: SparseRowMatrix,
    pub labels: Vec<f64>,
}

impl LabeledDataset {
    pub fn new(features: SparseRowMatrix, labels: Vec<f64>) -> Result<Self, DataError> {
        if labels.len() != features.n_rows() {
            return Err(DataError::Invalid(format!(
                "{} labels for {} rows",
                labels.len(),
                features.n_rows()
            )));
        }
        if let Some(b) = labels.iter().find(|b| !b.is_finite()) {
            return Err(DataError::Invalid(format!("non-finite label {b}")));
        }
        Ok(LabeledDataset { features, labels })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    pub fn is_binary(&self) -> bool {
        self.labels.iter().all(|&b| b == 1.0 || b == -1.0)
    }
}

/// Parses LIBSVM text. Blank lines and `#` comments are skipped; explicit zero
/// values are dropped. `n_cols` overrides the inferred dimension (max index seen).
pub fn parse_libsvm<R: BufRead>(reader: R, n_cols: Option<usize>) -> Result<LabeledDataset, DataError> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_col = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let err = |message: String| DataError::Parse {
            line: lineno,
            message,
        };
        let label: f64 = label_tok
            .parse()
            .map_err(|_| err(format!("invalid label {label_tok:?}")))?;
        if !label.is_finite() {
            return Err(err(format!("non-finite label {label_tok:?}")));
        }
        let mut row: Vec<(usize, f64)> = Vec::new();
        let mut last: Option<usize> = None;
        for tok in tokens {
            let (idx_tok, val_tok) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("missing ':' in {tok:?}")))?;
            let idx: usize = idx_tok
                .parse()
                .map_err(|_| err(format!("invalid feature index {idx_tok:?}")))?;
            if idx == 0 {
                return Err(err("feature indices are 1-based; found 0".into()));
            }
            let val: f64 = val_tok
                .parse()
                .map_err(|_| err(format!("invalid feature value {val_tok:?}")))?;
            if !val.is_finite() {
                return Err(err(format!("non-finite feature value {val_tok:?}")));
            }
            if let Some(prev) = last {
                if idx == prev {
                    return Err(err(format!("duplicate feature index {idx}")));
                }
                if idx < prev {
                    return Err(err(format!("feature index {idx} follows {prev}")));
                }
            }
            last = Some(idx);
            if let Some(limit) = n_cols {
                if idx > limit {
                    return Err(err(format!("feature index {idx} exceeds dimension {limit}")));
                }
            }
            max_col = max_col.max(idx);
            if val != 0.0 {
                row.push((idx - 1, val));
            }
        }
        rows.push(row);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    let features = SparseRowMatrix::from_rows(n_cols.unwrap_or(max_col), rows)?;
    LabeledDataset::new(features, labels)
}

pub fn parse_libsvm_str(text: &str, n_cols: Option<usize>) -> Result<LabeledDataset, DataError> {
    parse_libsvm(text.as_bytes(), n_cols)
}

/// Parses raw bytes, transparently inflating gzip input.
pub fn parse_libsvm_bytes(bytes: &[u8], n_cols: Option<usize>) -> Result<LabeledDataset, DataError> {
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut text = Vec::new();
        GzDecoder::new(bytes).read_to_end(&mut text)?;
        parse_libsvm(&text[..], n_cols)
    } else {
        parse_libsvm(bytes, n_cols)
    }
}

pub fn read_libsvm_file(path: impl AsRef<Path>, n_cols: Option<usize>) -> Result<LabeledDataset, DataError> {
    let mut file = BufReader::new(File::open(path)?);
    let head = file.fill_buf()?;
    if head.starts_with(&[0x1f, 0x8b]) {
        parse_libsvm(BufReader::new(GzDecoder::new(file)), n_cols)
    } else {
        parse_libsvm(file, n_cols)
    }
}

/// Writes the dataset in LIBSVM format (1-based indices, shortest round-trip floats).
pub fn write_libsvm<W: Write>(data: &LabeledDataset, mut out: W) -> io::Result<()> {
    let mut line = String::new();
    for (i, label) in data.labels.iter().enumerate() {
        line.clear();
        write!(line, "{label}").unwrap();
        let (idx, val) = data.features.row(i);
        for (&j, &v) in idx.iter().zip(val) {
            write!(line, " {}:{}", j + 1, v).unwrap();
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()
}

pub fn to_libsvm_string(data: &LabeledDataset) -> String {
    let mut buf = Vec::new();
    write_libsvm(data, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("libsvm output is ascii")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Logistic,
    Squared,
}

/// Nonzeros per generated row: `ceil(density * p)`, at least one.
pub fn nnz_per_row(p: usize, density: f64) -> usize {
    // guard against 0.1 * 50 = 5.000000000000001 style rounding
    let k = (density * p as f64 - 1e-9).ceil() as usize;
    k.clamp(1, p)
}

/// Seeded synthetic problem: rows with `ceil(density * p)` standard-normal entries at
/// distinct uniform columns, labels from a planted sparse coefficient vector.
pub fn generate_synthetic(
    n: usize,
    p: usize,
    density: f64,
    task: Task,
    seed: u64,
) -> Result<LabeledDataset, DataError> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(DataError::InvalidDensity(density));
    }
    if n == 0 || p == 0 {
        return Err(DataError::InvalidShape { n, p });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support = (p / 10).max(1);
    let mut truth = vec![0.0; p];
    for j in sample(&mut rng, p, support) {
        truth[j] = rng.sample::<f64, _>(StandardNormal);
    }
    let k = nnz_per_row(p, density);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut cols = sample(&mut rng, p, k).into_vec();
        cols.sort_unstable();
        let mut row = Vec::with_capacity(k);
        let mut margin = 0.0;
        for j in cols {
            let mut v: f64 = rng.sample(StandardNormal);
            while v == 0.0 {
                v = rng.sample(StandardNormal);
            }
            margin += v * truth[j];
            row.push((j, v));
        }
        let noise: f64 = rng.sample(StandardNormal);
        let label = match task {
            Task::Logistic => {
                if margin + 0.1 * noise >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Task::Squared => margin + 0.1 * noise,
        };
        rows.push(row);
        labels.push(label);
    }
    LabeledDataset::new(SparseRowMatrix::from_rows(p, rows)?, labels)
}
