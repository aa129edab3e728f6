//! The administrator's feasible region.
//!
//! Feasible matrices are symmetric with zero diagonal, so they are stored
//! internally as one value per allowed unordered pair ("edge space"). The
//! Euclidean norm in edge space is the Frobenius norm divided by `sqrt(2)`,
//! which means Frobenius projections and edge-space projections coincide.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

/// Which node pairs the administrator may give nonzero weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SupportMode {
    /// Every off-diagonal pair; new edges may be created.
    #[default]
    Full,
    /// Only pairs that carry weight in the reference graph.
    Original,
}

impl std::str::FromStr for SupportMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(SupportMode::Full),
            "original" => Ok(SupportMode::Original),
            other => Err(Error::InvalidParameter(format!(
                "unknown support mode `{other}` (expected `full` or `original`)"
            ))),
        }
    }
}

/// Feasibility slack used by [`FeasibilityReport::within_tolerance`].
#[derive(Debug, Clone, Copy)]
pub struct FeasibilityTolerance {
    /// Row-sum error bound, relative to the largest degree target.
    pub row_sum_rel: f64,
    pub min_entry: f64,
    /// Allowed relative overshoot of the Frobenius budget.
    pub ball_rel: f64,
}

impl Default for FeasibilityTolerance {
    fn default() -> Self {
        Self {
            row_sum_rel: 1e-6,
            min_entry: -1e-10,
            ball_rel: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    pub symmetric: bool,
    pub zero_diagonal: bool,
    pub outside_support: bool,
    pub max_row_sum_error: f64,
    pub max_degree: f64,
    pub min_entry: f64,
    /// `||W - W̄||_F`.
    pub distance: f64,
    /// `ε ||W̄||_F`.
    pub budget: f64,
}

impl FeasibilityReport {
    pub fn within(&self, tol: &FeasibilityTolerance) -> bool {
        self.symmetric
            && self.zero_diagonal
            && !self.outside_support
            && self.max_row_sum_error <= tol.row_sum_rel * self.max_degree.max(1.0)
            && self.min_entry >= tol.min_entry
            && self.distance <= self.budget * (1.0 + tol.ball_rel) + f64::MIN_POSITIVE
    }

    pub fn within_tolerance(&self) -> bool {
        self.within(&FeasibilityTolerance::default())
    }
}

#[derive(Debug, Clone)]
pub struct ConstraintSet {
    reference: WeightedGraph,
    epsilon: f64,
    degree_targets: DVector<f64>,
    support_mask: DMatrix<bool>,
    pairs: Vec<(usize, usize)>,
    reference_edges: DVector<f64>,
    radius: f64,
    pinned: bool,
}

impl ConstraintSet {
    /// Builds the constraint set around `reference` with the default support rule.
    pub fn from_graph(reference: &WeightedGraph, epsilon: f64, support: SupportMode) -> Result<Self> {
        let n = reference.n();
        let mask = DMatrix::from_fn(n, n, |i, j| match support {
            SupportMode::Full => i != j,
            SupportMode::Original => reference.weight(i, j) > 0.0,
        });
        Self::new(reference.clone(), epsilon, mask)
    }

    /// `epsilon` may be `f64::INFINITY` to disable the Frobenius budget.
    pub fn new(reference: WeightedGraph, epsilon: f64, support_mask: DMatrix<bool>) -> Result<Self> {
        let n = reference.n();
        if support_mask.nrows() != n || support_mask.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: support_mask.nrows(),
            });
        }
        if epsilon.is_nan() || epsilon < 0.0 {
            return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {epsilon}")));
        }
        let mut pairs = Vec::new();
        for i in 0..n {
            if support_mask[(i, i)] {
                return Err(Error::Infeasible(format!("support mask allows self-loop at {i}")));
            }
            for j in 0..n {
                if support_mask[(i, j)] != support_mask[(j, i)] {
                    return Err(Error::Infeasible(format!("support mask asymmetric at ({i},{j})")));
                }
                if reference.weight(i, j) > 0.0 && !support_mask[(i, j)] {
                    return Err(Error::Infeasible(format!(
                        "reference edge ({i},{j}) lies outside the support mask"
                    )));
                }
            }
        }
        let degree_targets = reference.degrees();
        // a node with zero target degree keeps all its entries at zero
        for i in 0..n {
            for j in (i + 1)..n {
                if support_mask[(i, j)] && degree_targets[i] > 0.0 && degree_targets[j] > 0.0 {
                    pairs.push((i, j));
                }
            }
        }
        let reference_edges = DVector::from_iterator(pairs.len(), pairs.iter().map(|&(i, j)| reference.weight(i, j)));
        let radius = if epsilon.is_infinite() {
            f64::INFINITY
        } else {
            epsilon * reference_edges.norm()
        };
        let pinned = row_sums_determine_edges(n, &pairs);
        Ok(Self {
            pinned,
            degree_targets,
            reference,
            epsilon,
            support_mask,
            pairs,
            reference_edges,
            radius,
        })
    }

    pub fn n(&self) -> usize {
        self.reference.n()
    }

    pub fn reference(&self) -> &WeightedGraph {
        &self.reference
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn degree_targets(&self) -> &DVector<f64> {
        &self.degree_targets
    }

    pub fn support_mask(&self) -> &DMatrix<bool> {
        &self.support_mask
    }

    /// Free pairs `(i, j)`, `i < j`, in edge-space coordinate order: allowed
    /// by the mask and joining two nodes of positive target degree.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn reference_edges(&self) -> &DVector<f64> {
        &self.reference_edges
    }

    /// Budget radius in edge space, `ε ||x̄||`.
    pub(crate) fn radius(&self) -> f64 {
        self.radius
    }

    /// True when the row sums alone fix every free edge, so the reference is
    /// the only feasible point.
    pub fn is_pinned(&self) -> bool {
        self.pinned
    }

    /// Symmetrizes `w` and keeps only supported pairs. This is the Frobenius
    /// projection onto symmetric, zero-diagonal, support-masked matrices.
    pub fn edges_from_matrix(&self, w: &DMatrix<f64>) -> Result<DVector<f64>> {
        Error::check_dim(self.n(), w.nrows())?;
        Error::check_dim(self.n(), w.ncols())?;
        Ok(DVector::from_iterator(
            self.pairs.len(),
            self.pairs.iter().map(|&(i, j)| 0.5 * (w[(i, j)] + w[(j, i)])),
        ))
    }

    pub fn matrix_from_edges(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(self.n(), self.n());
        for (&(i, j), &v) in self.pairs.iter().zip(x.iter()) {
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
        w
    }

    /// Graph for an edge vector; negative round-off is clipped to zero.
    pub(crate) fn graph_from_edges(&self, x: &DVector<f64>) -> WeightedGraph {
        let w = self.matrix_from_edges(&x.map(|v| v.max(0.0)));
        WeightedGraph::from_matrix(w).expect("edge-space vectors map to valid adjacency matrices")
    }

    /// Row sums of the matrix represented by `x`.
    pub(crate) fn row_sums(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut sums = DVector::zeros(self.n());
        for (&(i, j), &v) in self.pairs.iter().zip(x.iter()) {
            sums[i] += v;
            sums[j] += v;
        }
        sums
    }

    /// Measures how well `w` satisfies every constraint.
    pub fn feasibility(&self, w: &WeightedGraph) -> FeasibilityReport {
        let n = self.n();
        let m = w.weights();
        let mut outside_support = false;
        let mut min_entry = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if v != 0.0 && !self.support_mask[(i, j)] {
                    outside_support = true;
                }
                if i != j {
                    min_entry = min_entry.min(v);
                }
            }
        }
        let max_row_sum_error = (w.degrees() - &self.degree_targets).amax();
        FeasibilityReport {
            symmetric: m == &m.transpose(),
            zero_diagonal: m.diagonal().iter().all(|&d| d == 0.0),
            outside_support,
            max_row_sum_error,
            max_degree: self.degree_targets.amax(),
            min_entry: if n > 1 { min_entry } else { 0.0 },
            distance: (m - self.reference.weights()).norm(),
            budget: self.epsilon * self.reference.frobenius_norm(),
        }
    }
}

/// Whether the unsigned incidence matrix of `pairs` has full column rank.
fn row_sums_determine_edges(n: usize, pairs: &[(usize, usize)]) -> bool {
    if pairs.len() > n {
        return false;
    }
    if pairs.is_empty() {
        return true;
    }
    let incidence = DMatrix::from_fn(n, pairs.len(), |v, e| {
        let (i, j) = pairs[e];
        if v == i || v == j {
            1.0
        } else {
            0.0
        }
    });
    incidence.rank(1e-9) == pairs.len()
}
