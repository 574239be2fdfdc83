//! LIBSVM-format datasets, even partitioning across nodes and conversion to
//! least-squares oracles.

use std::fmt;
use std::fmt::Write as _;

use modelavg_core::{LeastSquares, Matrix};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub label: f64,
    /// `(index, value)` with strictly increasing 1-based indices.
    pub features: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    rows: Vec<SparseRow>,
    dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    MalformedToken,
    NonIncreasingIndex,
    IndexBelowOne,
    NonNumericValue,
    EmptyDataset,
}

impl ParseErrorKind {
    fn describe(self) -> &'static str {
        match self {
            ParseErrorKind::MalformedToken => "malformed token",
            ParseErrorKind::NonIncreasingIndex => "non-increasing feature index",
            ParseErrorKind::IndexBelowOne => "feature index below 1",
            ParseErrorKind::NonNumericValue => "non-numeric value",
            ParseErrorKind::EmptyDataset => "empty dataset",
        }
    }
}

/// Parse failure at a 1-based line and column (both 0 for an empty input).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
    pub token: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.kind == ParseErrorKind::EmptyDataset {
            return f.write_str(self.kind.describe());
        }
        write!(
            f,
            "{} at line {}, column {}: {:?}",
            self.kind.describe(),
            self.line,
            self.column,
            self.token
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("cannot split {rows} rows across {nodes} nodes")]
    TooManyNodes { rows: usize, nodes: usize },
    #[error("node {node} out of range for {nodes} nodes")]
    NodeOutOfRange { node: usize, nodes: usize },
    #[error("target dimension {target} is below the largest feature index {dim}")]
    DimensionUnderflow { target: usize, dim: usize },
    #[error(transparent)]
    Core(#[from] modelavg_core::Error),
}

fn parse_real(token: &str) -> Option<f64> {
    token.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses `<label> <idx>:<val> ...` lines. Blank lines and `#` comments are
/// skipped.
pub fn parse_libsvm(text: &str) -> Result<SparseDataset, ParseError> {
    let mut rows = Vec::new();
    let mut dim = 0;
    for (line_no, raw) in text.lines().enumerate() {
        let line_no = line_no + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = tokenize(content);
        let Some((label_col, label_tok)) = tokens.next() else {
            continue;
        };
        let err = |kind, column, token: &str| ParseError {
            kind,
            line: line_no,
            column,
            token: token.to_string(),
        };
        let label = parse_real(label_tok)
            .ok_or_else(|| err(ParseErrorKind::NonNumericValue, label_col, label_tok))?;
        let mut features: Vec<(usize, f64)> = Vec::new();
        for (col, tok) in tokens {
            let (idx_str, val_str) = tok
                .split_once(':')
                .ok_or_else(|| err(ParseErrorKind::MalformedToken, col, tok))?;
            if val_str.contains(':') {
                return Err(err(ParseErrorKind::MalformedToken, col, tok));
            }
            let index = match idx_str.parse::<i64>() {
                Ok(i) if i < 1 => return Err(err(ParseErrorKind::IndexBelowOne, col, tok)),
                Ok(i) => i as usize,
                Err(_) => return Err(err(ParseErrorKind::MalformedToken, col, tok)),
            };
            let value = parse_real(val_str).ok_or_else(|| {
                err(
                    ParseErrorKind::NonNumericValue,
                    col + idx_str.len() + 1,
                    tok,
                )
            })?;
            if let Some(&(prev, _)) = features.last() {
                if index <= prev {
                    return Err(err(ParseErrorKind::NonIncreasingIndex, col, tok));
                }
            }
            features.push((index, value));
        }
        if let Some(&(last, _)) = features.last() {
            dim = dim.max(last);
        }
        rows.push(SparseRow { label, features });
    }
    if rows.is_empty() {
        return Err(ParseError {
            kind: ParseErrorKind::EmptyDataset,
            line: 0,
            column: 0,
            token: String::new(),
        });
    }
    Ok(SparseDataset { rows, dim })
}

/// Whitespace-separated tokens with their 1-based character columns.
fn tokenize(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut start = None;
    let mut out = Vec::new();
    let mut col = 0;
    for (byte, ch) in line.char_indices() {
        col += 1;
        if ch.is_whitespace() {
            if let Some((b, c)) = start.take() {
                out.push((c, &line[b..byte]));
            }
        } else if start.is_none() {
            start = Some((byte, col));
        }
    }
    if let Some((b, c)) = start {
        out.push((c, &line[b..]));
    }
    out.into_iter()
}

/// Shortest text that parses back to the same `f64`: plain decimals for
/// moderate magnitudes, exponent notation otherwise.
pub fn format_real(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

impl SparseDataset {
    pub fn new(rows: Vec<SparseRow>, dim: usize) -> Result<Self, DataError> {
        let mut max_index = 0;
        for row in &rows {
            let mut prev = 0;
            for &(i, _) in &row.features {
                if i <= prev {
                    return Err(DataError::Core(modelavg_core::Error::InvalidInput(
                        "feature indices must be strictly increasing and at least 1".into(),
                    )));
                }
                prev = i;
            }
            max_index = max_index.max(prev);
        }
        if dim < max_index {
            return Err(DataError::DimensionUnderflow {
                target: dim,
                dim: max_index,
            });
        }
        Ok(SparseDataset { rows, dim })
    }

    /// Dataset with every feature stored, indices `1..=cols`.
    pub fn from_dense(design: &Matrix, labels: &[f64]) -> Self {
        let rows = design
            .row_iter()
            .zip(labels)
            .map(|(r, &label)| SparseRow {
                label,
                features: r.iter().enumerate().map(|(j, &v)| (j + 1, v)).collect(),
            })
            .collect();
        SparseDataset {
            rows,
            dim: design.cols(),
        }
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn max_feature_index(&self) -> usize {
        self.dim
    }

    /// Raises the feature dimension to a fixed `d`.
    pub fn with_dim(mut self, dim: usize) -> Result<Self, DataError> {
        if dim < self.dim {
            return Err(DataError::DimensionUnderflow {
                target: dim,
                dim: self.dim,
            });
        }
        self.dim = dim;
        Ok(self)
    }

    pub fn labels(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.label).collect()
    }

    /// Canonical text form: one row per line, single spaces, no trailing
    /// whitespace.
    pub fn to_libsvm(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&format_real(row.label));
            for &(i, v) in &row.features {
                let _ = write!(out, " {i}:{}", format_real(v));
            }
            out.push('\n');
        }
        out
    }

    /// Maps every feature column linearly onto `[-1, 1]`, counting absent
    /// entries as zeros. Constant columns are left unchanged.
    pub fn scale_features(&self) -> SparseDataset {
        let n = self.rows.len();
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        let mut stored = vec![0usize; self.dim];
        for row in &self.rows {
            for &(i, v) in &row.features {
                lo[i - 1] = lo[i - 1].min(v);
                hi[i - 1] = hi[i - 1].max(v);
                stored[i - 1] += 1;
            }
        }
        for j in 0..self.dim {
            if stored[j] < n {
                lo[j] = lo[j].min(0.0);
                hi[j] = hi[j].max(0.0);
            }
        }
        let scale = |j: usize, v: f64| {
            if hi[j] > lo[j] {
                -1.0 + 2.0 * (v - lo[j]) / (hi[j] - lo[j])
            } else {
                v
            }
        };
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut dense = vec![0.0; self.dim];
                for &(i, v) in &row.features {
                    dense[i - 1] = v;
                }
                let features = dense
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| (j + 1, scale(j, v)))
                    .filter(|&(_, v)| v != 0.0)
                    .collect();
                SparseRow {
                    label: row.label,
                    features,
                }
            })
            .collect();
        SparseDataset {
            rows,
            dim: self.dim,
        }
    }

    /// Dense design matrix of the selected rows padded to `dim` columns.
    pub fn dense_rows(&self, rows: &[usize], dim: usize) -> Result<(Matrix, Vec<f64>), DataError> {
        if dim < self.dim {
            return Err(DataError::DimensionUnderflow {
                target: dim,
                dim: self.dim,
            });
        }
        let mut m = Matrix::zeros(rows.len(), dim);
        let mut b = Vec::with_capacity(rows.len());
        for (k, &r) in rows.iter().enumerate() {
            let row = &self.rows[r];
            let dst = m.row_mut(k);
            for &(i, v) in &row.features {
                dst[i - 1] = v;
            }
            b.push(row.label);
        }
        Ok((m, b))
    }
}

/// Row indices held by each node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub assignments: Vec<Vec<usize>>,
    /// Seed of the shuffle applied before blocking, if any.
    pub shuffle_seed: Option<u64>,
}

impl Partition {
    pub fn node_count(&self) -> usize {
        self.assignments.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.assignments.iter().map(Vec::len).collect()
    }
}

fn block(order: Vec<usize>, nodes: usize) -> Result<Vec<Vec<usize>>, DataError> {
    let n = order.len();
    if nodes == 0 || nodes > n {
        return Err(DataError::TooManyNodes { rows: n, nodes });
    }
    let (base, extra) = (n / nodes, n % nodes);
    let mut out = Vec::with_capacity(nodes);
    let mut it = order.into_iter();
    for i in 0..nodes {
        let size = base + usize::from(i < extra);
        out.push(it.by_ref().take(size).collect());
    }
    Ok(out)
}

/// Contiguous blocks in file order; the first `N mod m` nodes get one extra
/// row.
pub fn partition_even(ds: &SparseDataset, nodes: usize) -> Result<Partition, DataError> {
    Ok(Partition {
        assignments: block((0..ds.row_count()).collect(), nodes)?,
        shuffle_seed: None,
    })
}

/// As [`partition_even`] after a seeded shuffle of the row order.
pub fn partition_shuffled(
    ds: &SparseDataset,
    nodes: usize,
    seed: u64,
) -> Result<Partition, DataError> {
    let mut order: Vec<usize> = (0..ds.row_count()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(Partition {
        assignments: block(order, nodes)?,
        shuffle_seed: Some(seed),
    })
}

/// Least-squares oracle with power `l` over one node's rows, with labels as
/// targets.
pub fn to_least_squares(
    ds: &SparseDataset,
    part: &Partition,
    node: usize,
    power: u32,
    target_dim: usize,
) -> Result<LeastSquares, DataError> {
    let rows = part.assignments.get(node).ok_or(DataError::NodeOutOfRange {
        node,
        nodes: part.node_count(),
    })?;
    let (a, b) = ds.dense_rows(rows, target_dim)?;
    Ok(LeastSquares::new(a, b, power)?)
}

/// Dense regression data with labels from a planted linear model.
#[derive(Debug, Clone)]
pub struct SyntheticRegression {
    pub dataset: SparseDataset,
    pub planted: Vec<f64>,
}

/// `rows x dim` features uniform on `[-1, 1]`, each column rescaled so its
/// largest magnitude is 1, planted weights `N(0, 1/dim)` and labels
/// `A x_planted`.
pub fn synthetic_regression(rows: usize, dim: usize, seed: u64) -> SyntheticRegression {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Matrix::zeros(rows, dim);
    for i in 0..rows {
        for v in a.row_mut(i) {
            *v = rng.gen_range(-1.0..=1.0);
        }
    }
    for j in 0..dim {
        let peak = (0..rows).map(|i| a[(i, j)].abs()).fold(0.0, f64::max);
        if peak > 0.0 {
            for i in 0..rows {
                a[(i, j)] /= peak;
            }
        }
    }
    let sd = 1.0 / (dim as f64).sqrt();
    let planted: Vec<f64> = (0..dim)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let labels = a.mul_vec(&planted);
    SyntheticRegression {
        dataset: SparseDataset::from_dense(&a, &labels),
        planted,
    }
}
