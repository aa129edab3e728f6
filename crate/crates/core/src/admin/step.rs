//! One administrator move: projected gradient descent on
//! `D(W, z) + γ ||W||_F^2` over the feasible region.

use log::warn;
use nalgebra::DVector;

use super::projection::Projector;
use super::{AdminConfig, ConstraintSet};
use crate::error::{Error, Result};
use crate::graph::{OpinionVector, WeightedGraph};

/// Edge-space projected-gradient bound required alongside the objective test.
const STATIONARITY_TOL: f64 = 1e-7;
/// Largest step, relative to `radius / ||c||`, tried for linear objectives.
const MAX_STEP_GROWTH: f64 = 1e8;

#[derive(Debug, Clone)]
pub struct AdminStep {
    pub graph: WeightedGraph,
    /// `D(W', z) + γ ||W'||_F^2`.
    pub objective: f64,
    /// Objective at the starting matrix.
    pub start_objective: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit or a projection failed; the
    /// graph is then the best feasible iterate found.
    pub converged: bool,
    /// `||W - P(W - ∇f)||_F` at the returned matrix.
    pub projected_gradient_norm: f64,
    /// `||∇f||_F` at the returned matrix.
    pub gradient_norm: f64,
    pub(crate) edges: DVector<f64>,
}

/// Squared opinion gaps `(z_i - z_j)^2` for every allowed pair.
fn opinion_gaps(z: &DVector<f64>, cs: &ConstraintSet) -> DVector<f64> {
    DVector::from_iterator(cs.pairs().len(), cs.pairs().iter().map(|&(i, j)| (z[i] - z[j]).powi(2)))
}

struct Objective {
    gaps: DVector<f64>,
    gamma: f64,
}

impl Objective {
    // ||W||_F^2 = 2 ||x||^2 in edge space
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.gaps.dot(x) + 2.0 * self.gamma * x.norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.gaps + x * (4.0 * self.gamma)
    }
}

/// `D(W, z) + γ ||W||_F^2` for an arbitrary weight matrix.
pub fn admin_objective(g: &WeightedGraph, z: &DVector<f64>, gamma: f64) -> Result<f64> {
    Error::check_dim(g.n(), z.len())?;
    let n = g.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let w = g.weight(i, j);
            total += w * (z[i] - z[j]).powi(2) + 2.0 * gamma * w * w;
        }
    }
    Ok(total)
}

/// Administrator move starting from the reference graph.
pub fn admin_step(z: &OpinionVector, cs: &ConstraintSet, cfg: &AdminConfig) -> Result<AdminStep> {
    step_from_edges(z, cs, cfg, cs.reference_edges())
}

/// Administrator move warm-started at `start`, which must already be feasible.
pub fn admin_step_from(
    z: &OpinionVector,
    cs: &ConstraintSet,
    cfg: &AdminConfig,
    start: &WeightedGraph,
) -> Result<AdminStep> {
    let x0 = cs.edges_from_matrix(start.weights())?;
    step_from_edges(z, cs, cfg, &x0)
}

pub(crate) fn step_from_edges(
    z: &OpinionVector,
    cs: &ConstraintSet,
    cfg: &AdminConfig,
    start: &DVector<f64>,
) -> Result<AdminStep> {
    cfg.validate()?;
    Error::check_dim(cs.n(), z.len())?;
    let obj = Objective {
        gaps: opinion_gaps(z.as_vector(), cs),
        gamma: cfg.gamma,
    };
    let start_objective = obj.value(start);
    let finish = |x: DVector<f64>, objective: f64, iterations: usize, converged: bool| -> Result<AdminStep> {
        let g = obj.gradient(&x);
        let pg = match Projector::new(cs, cfg).project(&(&x - &g)) {
            Ok(p) => (&x - p).norm() * std::f64::consts::SQRT_2,
            Err(_) => f64::NAN,
        };
        Ok(AdminStep {
            graph: cs.graph_from_edges(&x),
            objective,
            start_objective,
            iterations,
            converged,
            projected_gradient_norm: pg,
            gradient_norm: g.norm() * std::f64::consts::SQRT_2,
            edges: x,
        })
    };

    // zero budget or pinned row sums: the feasible set is the reference alone
    if cs.radius() == 0.0 || cs.is_pinned() {
        let x = cs.reference_edges().clone();
        let f = obj.value(&x);
        return finish(x, f, 0, true);
    }

    let mut x = start.clone();
    let mut f = start_objective;
    let gap_norm = obj.gaps.norm();
    if cfg.gamma == 0.0 && gap_norm == 0.0 {
        return finish(x, f, 0, true);
    }

    let scale = if cs.radius().is_finite() {
        cs.radius()
    } else {
        cs.reference_edges().norm().max(1.0)
    };
    let max_step = MAX_STEP_GROWTH * scale / gap_norm.max(f64::MIN_POSITIVE);
    let mut alpha = if cfg.gamma > 0.0 {
        1.0 / (4.0 * cfg.gamma)
    } else {
        scale / gap_norm
    };

    let mut projector = Projector::new(cs, cfg);
    let mut converged = false;
    let mut iterations = 0;
    'outer: for it in 1..=cfg.inner_max_iters {
        iterations = it;
        let grad = obj.gradient(&x);
        let (y, fy) = loop {
            let target = &x - &grad * alpha;
            let y = match projector.project(&target) {
                Ok(p) => p,
                // far targets are harder to project; retry closer in
                Err(_) if alpha > 1e-14 => {
                    alpha *= 0.5;
                    continue;
                }
                Err(e) => {
                    warn!("admin step: {e}; returning best feasible iterate");
                    break 'outer;
                }
            };
            let d = &y - &x;
            let fy = obj.value(&y);
            let model = f + grad.dot(&d) + d.norm_squared() / (2.0 * alpha);
            if fy <= model + 1e-14 * f.abs().max(1.0) || alpha < 1e-14 {
                break (y, fy);
            }
            alpha *= 0.5;
        };
        if fy >= f {
            // no further decrease available at projection accuracy
            converged = true;
            break;
        }
        let decrease = f - fy;
        // ||x - P(x - g)|| <= ||x - P(x - αg)|| max(1, 1/α)
        let stationarity = (&y - &x).norm() * (1.0_f64).max(1.0 / alpha);
        x = y;
        f = fy;
        if decrease <= cfg.inner_tolerance * f.abs().max(f64::MIN_POSITIVE)
            && stationarity <= STATIONARITY_TOL * (1.0 + grad.norm())
        {
            converged = true;
            break;
        }
        if cfg.gamma == 0.0 {
            alpha = (alpha * 2.0).min(max_step);
        }
    }
    if !converged {
        warn!("admin step stopped after {iterations} iterations without meeting tolerance");
    }
    finish(x, f, iterations, converged)
}
