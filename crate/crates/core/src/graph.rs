//! Weighted undirected graphs and opinion vectors, plus the plain-text
//! formats used to load and dump them.
//!
//! Edge lists are whitespace-separated `i j w` lines with 0-based node
//! indices; blank lines and lines starting with `#` are ignored. Opinion
//! files hold one real number per line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetric, nonnegative, zero-diagonal weight matrix of an undirected graph.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    weights: DMatrix<f64>,
}

impl WeightedGraph {
    /// Graph on `n` nodes with no edges.
    pub fn empty(n: usize) -> Self {
        Self {
            weights: DMatrix::zeros(n, n),
        }
    }

    /// Validates `weights` as an adjacency matrix. Symmetry is checked exactly.
    pub fn from_matrix(weights: DMatrix<f64>) -> Result<Self> {
        if !weights.is_square() {
            return Err(Error::InvalidGraph(format!(
                "adjacency must be square, got {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        let n = weights.nrows();
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::InvalidGraph(format!("nonzero diagonal at node {i}")));
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidGraph(format!(
                        "weight ({i},{j}) = {w} is not a nonnegative real"
                    )));
                }
                if w != weights[(j, i)] {
                    return Err(Error::InvalidGraph(format!("asymmetric weight at ({i},{j})")));
                }
            }
        }
        Ok(Self { weights })
    }

    /// Builds a graph from `(i, j, w)` triples; each unordered pair may appear once.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut weights = DMatrix::zeros(n, n);
        let mut seen = DMatrix::from_element(n, n, false);
        for (i, j, w) in edges {
            check_edge(n, i, j, w).map_err(Error::InvalidGraph)?;
            if seen[(i, j)] {
                return Err(Error::InvalidGraph(format!("duplicate pair ({i},{j})")));
            }
            seen[(i, j)] = true;
            seen[(j, i)] = true;
            weights[(i, j)] = w;
            weights[(j, i)] = w;
        }
        Ok(Self { weights })
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn into_weights(self) -> DMatrix<f64> {
        self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// Weighted degrees `d_i = sum_j w_ij`.
    pub fn degrees(&self) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.weights.row_iter().map(|r| r.sum()))
    }

    /// Combinatorial Laplacian `D - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = -self.weights.clone();
        for (i, d) in self.degrees().iter().enumerate() {
            l[(i, i)] = *d;
        }
        l
    }

    /// Nonzero edges `(i, j, w)` with `i < j`, in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n();
        (0..n).flat_map(move |i| {
            ((i + 1)..n).filter_map(move |j| {
                let w = self.weights[(i, j)];
                (w != 0.0).then_some((i, j, w))
            })
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.weights.norm()
    }

    /// Renders the graph in edge-list format. Weights use the shortest
    /// representation that parses back to the same `f64`.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (i, j, w) in self.edges() {
            let _ = writeln!(out, "{i} {j} {w}");
        }
        out
    }

    pub fn write_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_edge_list()).map_err(|e| Error::io(path, e))
    }
}

fn check_edge(n: usize, i: usize, j: usize, w: f64) -> std::result::Result<(), String> {
    if i >= n || j >= n {
        return Err(format!("node index out of range: ({i},{j}) with n = {n}"));
    }
    if i == j {
        return Err(format!("self-loop at node {i}"));
    }
    if !w.is_finite() || w < 0.0 {
        return Err(format!("weight {w} must be a finite nonnegative number"));
    }
    Ok(())
}

/// Parses edge-list text. `origin` is only used in error messages.
pub fn parse_edge_list(text: &str, n: usize, origin: &Path) -> Result<WeightedGraph> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut weights = DMatrix::zeros(n, n);
    // line number (1-based) that first defined each unordered pair
    let mut first_seen = vec![0usize; n * n];
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(
                line_no,
                format!("expected `i j w`, got {} fields", fields.len()),
            ));
        }
        let i: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad node index `{}`", fields[0])))?;
        let j: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad node index `{}`", fields[1])))?;
        let w: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad weight `{}`", fields[2])))?;
        check_edge(n, i, j, w).map_err(|m| parse_err(line_no, m))?;
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let prev = first_seen[a * n + b];
        if prev != 0 {
            return Err(parse_err(
                line_no,
                format!("duplicate pair ({a},{b}); first defined on line {prev}"),
            ));
        }
        first_seen[a * n + b] = line_no;
        weights[(a, b)] = w;
        weights[(b, a)] = w;
    }
    Ok(WeightedGraph { weights })
}

/// Reads an edge-list file describing a graph on `n` nodes.
pub fn load_edge_list(path: impl AsRef<Path>, n: usize) -> Result<WeightedGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text, n, path)
}

/// Opinions on the `[-1, 1]` scale, one entry per node.
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionVector(DVector<f64>);

impl OpinionVector {
    /// Slack allowed when validating values produced by floating-point solves.
    const RANGE_SLACK: f64 = 1e-9;

    /// Accepts values in `[-1, 1]` (with a rounding slack, which is clamped away).
    pub fn new(values: DVector<f64>) -> Result<Self> {
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() || v.abs() > 1.0 + Self::RANGE_SLACK {
                return Err(Error::InvalidParameter(format!("opinion {i} = {v} outside [-1, 1]")));
            }
        }
        Ok(Self::clamped(values))
    }

    /// Clamps every entry to `[-1, 1]`.
    pub fn clamped(values: DVector<f64>) -> Self {
        Self(values.map(|v| v.clamp(-1.0, 1.0)))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(values))
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::new(DVector::from_element(n, value))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub fn mean(&self) -> f64 {
        if self.0.is_empty() {
            0.0
        } else {
            self.0.mean()
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in self.0.iter() {
            let _ = writeln!(out, "{v}");
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Parses opinion text: exactly `n` numbers, one per nonblank line, clamped to `[-1, 1]`.
pub fn parse_opinions(text: &str, n: usize, origin: &Path) -> Result<OpinionVector> {
    let mut values = Vec::with_capacity(n);
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| Error::Parse {
            path: origin.to_path_buf(),
            line: idx + 1,
            message: format!("not a number: `{line}`"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: idx + 1,
                message: format!("non-finite opinion `{line}`"),
            });
        }
        values.push(v);
    }
    if values.len() != n {
        return Err(Error::Parse {
            path: origin.to_path_buf(),
            line: 0,
            message: format!("expected {n} opinions, found {}", values.len()),
        });
    }
    Ok(OpinionVector::clamped(DVector::from_vec(values)))
}

pub fn load_opinions(path: impl AsRef<Path>, n: usize) -> Result<OpinionVector> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_opinions(&text, n, path)
}

/// Number of data lines in an opinion file; used to infer `n` for a dataset.
pub fn count_opinions(path: impl AsRef<Path>) -> Result<usize> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .count())
}

/// Innate opinions implied by observed equilibrium opinions: `clamp((L + I) z*)`.
pub fn recover_innate(g: &WeightedGraph, z_star: &OpinionVector) -> Result<OpinionVector> {
    Error::check_dim(g.n(), z_star.len())?;
    let z = z_star.as_vector();
    let raw = g.laplacian() * z + z;
    Ok(OpinionVector::clamped(raw))
}
