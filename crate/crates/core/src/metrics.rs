//! Polarization, disagreement and internal conflict, and the identity
//! `P + 2D + I = s̄ᵀs̄` that ties them together at equilibrium.

use nalgebra::DVector;

use crate::dynamics::{FjSolverConfig, ShiftedLaplacianSolver};
use crate::error::{Error, Result};
use crate::graph::{OpinionVector, WeightedGraph};

/// Column names matching [`MetricsReport::csv_fields`], prefixed by `round`.
pub const METRICS_CSV_HEADER: [&str; 6] = [
    "round",
    "polarization",
    "disagreement",
    "internal_conflict",
    "conservation_residual",
    "mean_opinion",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub polarization: f64,
    pub global_disagreement: f64,
    pub global_internal_conflict: f64,
    /// `P + 2D + I - s̄ᵀs̄`; zero at an FJ equilibrium.
    pub conservation_residual: f64,
    pub mean_opinion: f64,
}

impl MetricsReport {
    /// Evaluates every metric for expressed opinions `z` on `g` with innate `s`.
    pub fn evaluate(g: &WeightedGraph, z: &DVector<f64>, s: &DVector<f64>) -> Result<Self> {
        Error::check_dim(g.n(), z.len())?;
        let polarization = polarization(z);
        let global_disagreement = global_disagreement(g, z)?;
        let global_internal_conflict = internal_conflict(z, s)?;
        let centered = centered(s);
        let conservation_residual =
            polarization + 2.0 * global_disagreement + global_internal_conflict - centered.norm_squared();
        Ok(Self {
            polarization,
            global_disagreement,
            global_internal_conflict,
            conservation_residual,
            mean_opinion: mean(z),
        })
    }

    pub fn csv_fields(&self, round: usize) -> [String; 6] {
        [
            round.to_string(),
            self.polarization.to_string(),
            self.global_disagreement.to_string(),
            self.global_internal_conflict.to_string(),
            self.conservation_residual.to_string(),
            self.mean_opinion.to_string(),
        ]
    }
}

fn mean(z: &DVector<f64>) -> f64 {
    if z.is_empty() {
        0.0
    } else {
        z.mean()
    }
}

/// `z - mean(z)·1`.
pub fn centered(z: &DVector<f64>) -> DVector<f64> {
    let m = mean(z);
    z.map(|v| v - m)
}

/// Sum of squared deviations from the mean opinion.
pub fn polarization(z: &DVector<f64>) -> f64 {
    centered(z).norm_squared()
}

/// `sum_j w_ij (z_i - z_j)^2`.
pub fn local_disagreement(g: &WeightedGraph, z: &DVector<f64>, i: usize) -> Result<f64> {
    Error::check_dim(g.n(), z.len())?;
    if i >= g.n() {
        return Err(Error::InvalidParameter(format!(
            "node {i} out of range for n = {}",
            g.n()
        )));
    }
    let w = g.weights();
    Ok((0..g.n())
        .filter(|&j| j != i)
        .map(|j| w[(i, j)] * (z[i] - z[j]).powi(2))
        .sum())
}

/// `zᵀLz`, evaluated on the mean-centered vector for accuracy.
pub fn global_disagreement(g: &WeightedGraph, z: &DVector<f64>) -> Result<f64> {
    Error::check_dim(g.n(), z.len())?;
    let zc = centered(z);
    let value = zc.dot(&(g.laplacian() * &zc));
    Ok(value.max(0.0))
}

/// `||z - s||^2`.
pub fn internal_conflict(z: &DVector<f64>, s: &DVector<f64>) -> Result<f64> {
    Error::check_dim(s.len(), z.len())?;
    Ok((z - s).norm_squared())
}

/// Computes the equilibrium for `(g, s)` and reports every metric there,
/// including the conservation-law residual.
pub fn conservation_check(g: &WeightedGraph, s: &OpinionVector, cfg: &FjSolverConfig) -> Result<MetricsReport> {
    Error::check_dim(g.n(), s.len())?;
    let solver = ShiftedLaplacianSolver::new(g, cfg)?;
    let z = solver.solve(s.as_vector())?;
    MetricsReport::evaluate(g, &z, s.as_vector())
}

/// Equilibrium polarization without forming `z*`: `s̄ᵀ(L+I)^{-2}s̄`, as two
/// successive solves against `L + I`.
pub fn equilibrium_polarization_quadform(g: &WeightedGraph, s: &OpinionVector, cfg: &FjSolverConfig) -> Result<f64> {
    Error::check_dim(g.n(), s.len())?;
    let solver = ShiftedLaplacianSolver::new(g, cfg)?;
    let sc = centered(s.as_vector());
    let once = solver.solve(&sc)?;
    let twice = solver.solve(&once)?;
    Ok(sc.dot(&twice).max(0.0))
}
