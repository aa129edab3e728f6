//! Euclidean projection onto the feasible region.
//!
//! Symmetry, zero diagonal and the support mask are exact by construction of
//! edge space. What remains is `C ∩ B` with `C = {x >= 0, Bx = d}` (`B` the
//! unsigned incidence matrix of the free pairs, `d` the degree targets) and
//! `B` the ball `||x - x̄|| <= r`. Since `x̄ ∈ C`, the KKT conditions give
//! `P_{C∩B}(y) = P_C(x̄ + t (y - x̄))` for the largest `t ∈ (0, 1]` whose
//! image stays in the ball, and the distance is nondecreasing in `t`. The
//! outer search finds `t` by safeguarded regula falsi; `P_C` is computed by
//! semismooth Newton on its `n`-dimensional dual
//! `min_λ ½||(c - Bᵀλ)_+||² + dᵀλ`, whose stationarity condition is exactly
//! the row-sum constraint.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{AdminConfig, ConstraintSet};
use crate::error::{Error, Result};

/// Row-sum residual accepted by the dual solve, as a fraction of
/// `dykstra_tolerance` times the largest target degree.
const ROW_SUM_ACCEPT: f64 = 0.1;
const MAX_LINE_SEARCH: usize = 60;
/// Relative accuracy of the ball radius reached by the outer search.
const RADIUS_ACCEPT: f64 = 1e-12;
const MAX_OUTER: usize = 200;

/// Projection state kept across calls so dual multipliers warm-start.
#[derive(Debug, Clone)]
pub(crate) struct Projector<'a> {
    cs: &'a ConstraintSet,
    max_iters: usize,
    lambda: DVector<f64>,
    row_tol: f64,
}

impl<'a> Projector<'a> {
    pub fn new(cs: &'a ConstraintSet, cfg: &AdminConfig) -> Self {
        Self {
            cs,
            max_iters: cfg.dykstra_max_iters,
            lambda: DVector::zeros(cs.n()),
            row_tol: ROW_SUM_ACCEPT * cfg.dykstra_tolerance * cs.degree_targets().amax().max(1.0),
        }
    }

    pub fn project(&mut self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let cs = self.cs;
        let center = cs.reference_edges();
        let radius = cs.radius();
        if radius == 0.0 || cs.is_pinned() {
            return Ok(center.clone());
        }
        let full = self.project_polytope(y)?;
        let dist_full = (&full - center).norm();
        if dist_full <= radius {
            return Ok(full);
        }

        let dir = y - center;
        let (mut lo, mut f_lo, mut x_lo) = (0.0, -radius, center.clone());
        let (mut hi, mut f_hi) = (1.0, dist_full - radius);
        let mut side = 0i8;
        for _ in 0..MAX_OUTER {
            let span = hi - lo;
            let mut t = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
            if !(t > lo + 1e-3 * span && t < hi - 1e-3 * span) {
                t = 0.5 * (lo + hi);
            }
            let x = self.project_polytope(&(center + &dir * t))?;
            let f = (&x - center).norm() - radius;
            if f <= 0.0 {
                lo = t;
                f_lo = f;
                x_lo = x;
                if f >= -RADIUS_ACCEPT * radius {
                    break;
                }
                if side == -1 {
                    f_hi *= 0.5;
                }
                side = -1;
            } else {
                hi = t;
                f_hi = f;
                if side == 1 {
                    f_lo *= 0.5;
                }
                side = 1;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        Ok(x_lo)
    }

    /// `P_C(c)` by semismooth Newton on the dual, warm-started from the last
    /// multipliers.
    fn project_polytope(&mut self, c: &DVector<f64>) -> Result<DVector<f64>> {
        let cs = self.cs;
        let n = cs.n();
        let pairs = cs.pairs();
        let d = cs.degree_targets();
        // cancellation floor when c is far from the feasible region
        let tol = self.row_tol.max(1e-15 * c.amax() * n as f64);

        let primal = |lambda: &DVector<f64>| -> DVector<f64> {
            DVector::from_iterator(
                pairs.len(),
                pairs
                    .iter()
                    .zip(c.iter())
                    .map(|(&(i, j), &cv)| (cv - lambda[i] - lambda[j]).max(0.0)),
            )
        };
        let dual = |x: &DVector<f64>, lambda: &DVector<f64>| 0.5 * x.norm_squared() + d.dot(lambda);

        let mut x = primal(&self.lambda);
        let mut theta = dual(&x, &self.lambda);
        let mut residual = f64::INFINITY;
        for _ in 0..self.max_iters {
            let grad = d - cs.row_sums(&x);
            residual = grad.amax();
            if residual <= tol {
                return Ok(x);
            }
            let mut h = DMatrix::<f64>::zeros(n, n);
            for (&(i, j), &v) in pairs.iter().zip(x.iter()) {
                if v > 0.0 {
                    h[(i, i)] += 1.0;
                    h[(j, j)] += 1.0;
                    h[(i, j)] += 1.0;
                    h[(j, i)] += 1.0;
                }
            }
            let shift = grad.norm().clamp(1e-10, 1e-2);
            for k in 0..n {
                h[(k, k)] += shift;
            }
            let step = match Cholesky::new(h) {
                Some(chol) => -chol.solve(&grad),
                None => -&grad / shift,
            };
            let slope = grad.dot(&step);
            let grad_norm = grad.norm();
            let mut s = 1.0;
            let mut accepted = false;
            for _ in 0..MAX_LINE_SEARCH {
                let trial = &self.lambda + &step * s;
                let xt = primal(&trial);
                let tt = dual(&xt, &trial);
                let shrinks = || (d - cs.row_sums(&xt)).norm() <= (1.0 - 1e-4 * s) * grad_norm;
                if tt <= theta + 1e-4 * s * slope && tt < theta || shrinks() {
                    self.lambda = trial;
                    x = xt;
                    theta = tt;
                    accepted = true;
                    break;
                }
                s *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Err(Error::ProjectionNotConverged {
            iterations: self.max_iters,
            gap: residual,
        })
    }
}

/// Frobenius projection of `w` onto the feasible region of `cs`. The input is
/// symmetrized and restricted to the support mask first.
pub fn project_feasible(w: &DMatrix<f64>, cs: &ConstraintSet, cfg: &AdminConfig) -> Result<DMatrix<f64>> {
    let y = cs.edges_from_matrix(w)?;
    let x = Projector::new(cs, cfg).project(&y)?;
    Ok(cs.matrix_from_edges(&x))
}
