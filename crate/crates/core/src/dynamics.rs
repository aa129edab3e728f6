//! Friedkin-Johnsen dynamics: the synchronous update rule, its equilibrium
//! `(L + I)^{-1} s`, and finite trajectories.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::graph::{OpinionVector, WeightedGraph};

/// Above this size the equilibrium is computed with conjugate gradients
/// instead of a dense Cholesky factorization.
pub const DIRECT_SOLVE_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FjSolverConfig {
    /// Bound on `||(L+I)z - s||_inf / ||s||_inf`.
    pub solve_tolerance: f64,
    pub max_fixed_point_iters: usize,
    /// Max-norm change below which a fixed-point iteration is stationary.
    pub fixed_point_tolerance: f64,
}

impl Default for FjSolverConfig {
    fn default() -> Self {
        Self {
            solve_tolerance: 1e-10,
            max_fixed_point_iters: 100_000,
            fixed_point_tolerance: 1e-12,
        }
    }
}

impl FjSolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.solve_tolerance > 0.0 && self.fixed_point_tolerance > 0.0 && self.max_fixed_point_iters >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid solver config {self:?}")))
        }
    }
}

/// One synchronous FJ update: `z_i = (s_i + sum_j w_ij z_j) / (d_i + 1)`.
pub fn fj_step(g: &WeightedGraph, z_prev: &OpinionVector, s: &OpinionVector) -> Result<OpinionVector> {
    Error::check_dim(g.n(), z_prev.len())?;
    Error::check_dim(g.n(), s.len())?;
    Ok(OpinionVector::clamped(step_raw(
        g,
        &g.degrees(),
        z_prev.as_vector(),
        s.as_vector(),
    )))
}

fn step_raw(g: &WeightedGraph, degrees: &DVector<f64>, z: &DVector<f64>, s: &DVector<f64>) -> DVector<f64> {
    let mut next = g.weights() * z + s;
    for (v, d) in next.iter_mut().zip(degrees.iter()) {
        *v /= d + 1.0;
    }
    next
}

/// Solves `(L + I) x = b` for a fixed graph. The factorization (dense path)
/// is computed once and reused across right-hand sides.
pub struct ShiftedLaplacianSolver {
    shifted: DMatrix<f64>,
    factor: Option<Cholesky<f64, Dyn>>,
    tolerance: f64,
}

impl ShiftedLaplacianSolver {
    pub fn new(g: &WeightedGraph, cfg: &FjSolverConfig) -> Result<Self> {
        cfg.validate()?;
        let mut shifted = g.laplacian();
        for i in 0..g.n() {
            shifted[(i, i)] += 1.0;
        }
        let factor = if g.n() <= DIRECT_SOLVE_LIMIT {
            // L + I is SPD for every valid graph, so this only fails on NaN input.
            Some(
                Cholesky::new(shifted.clone())
                    .ok_or_else(|| Error::InvalidGraph("L + I is not positive definite".into()))?,
            )
        } else {
            None
        };
        Ok(Self {
            shifted,
            factor,
            tolerance: cfg.solve_tolerance,
        })
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        Error::check_dim(self.shifted.nrows(), rhs.len())?;
        let scale = rhs.amax();
        if scale == 0.0 {
            return Ok(DVector::zeros(rhs.len()));
        }
        let bound = self.tolerance * scale;
        match &self.factor {
            Some(chol) => {
                let mut x = chol.solve(rhs);
                // a couple of refinement sweeps for badly scaled weights
                for _ in 0..3 {
                    let r = rhs - &self.shifted * &x;
                    if r.amax() <= bound {
                        return Ok(x);
                    }
                    x += chol.solve(&r);
                }
                let r = (rhs - &self.shifted * &x).amax();
                if r <= bound {
                    Ok(x)
                } else {
                    Err(Error::SolverNotConverged {
                        iterations: 4,
                        residual: r / scale,
                    })
                }
            }
            None => self.conjugate_gradient(rhs, bound, scale),
        }
    }

    fn conjugate_gradient(&self, b: &DVector<f64>, bound: f64, scale: f64) -> Result<DVector<f64>> {
        let a = &self.shifted;
        let n = b.len();
        // Jacobi preconditioner: diag(L + I) = d + 1 >= 1
        let inv_diag = a.diagonal().map(|d| 1.0 / d);
        let mut x = DVector::zeros(n);
        let mut r = b.clone();
        let mut zr = r.component_mul(&inv_diag);
        let mut p = zr.clone();
        let mut rz = r.dot(&zr);
        let max_iters = 10 * n + 100;
        for _ in 0..max_iters {
            let ap = a * &p;
            let alpha = rz / p.dot(&ap);
            x.axpy(alpha, &p, 1.0);
            r.axpy(-alpha, &ap, 1.0);
            if r.amax() <= bound {
                // recompute the true residual before accepting
                let true_r = b - a * &x;
                if true_r.amax() <= bound {
                    return Ok(x);
                }
                r = true_r;
            }
            zr = r.component_mul(&inv_diag);
            let rz_next = r.dot(&zr);
            p = &zr + &p * (rz_next / rz);
            rz = rz_next;
        }
        Err(Error::SolverNotConverged {
            iterations: max_iters,
            residual: (b - a * &x).amax() / scale,
        })
    }
}

/// Equilibrium opinions `z* = (L + I)^{-1} s`.
pub fn fj_equilibrium(g: &WeightedGraph, s: &OpinionVector, cfg: &FjSolverConfig) -> Result<OpinionVector> {
    Error::check_dim(g.n(), s.len())?;
    let z = ShiftedLaplacianSolver::new(g, cfg)?.solve(s.as_vector())?;
    Ok(OpinionVector::clamped(z))
}

/// Opinions `z^(0) = s, z^(1), ...` produced by repeated [`fj_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct FjTrajectory {
    pub states: Vec<OpinionVector>,
    /// Index of the first state whose change from its predecessor fell below
    /// the fixed-point tolerance, if the run stopped early.
    pub stopped_at: Option<usize>,
}

impl FjTrajectory {
    pub fn last(&self) -> &OpinionVector {
        self.states.last().expect("trajectory always holds z^(0)")
    }
}

pub fn fj_trajectory(g: &WeightedGraph, s: &OpinionVector, t_max: usize, cfg: &FjSolverConfig) -> Result<FjTrajectory> {
    Error::check_dim(g.n(), s.len())?;
    let degrees = g.degrees();
    let mut states = vec![s.clone()];
    let mut stopped_at = None;
    for t in 1..=t_max {
        let prev = states[t - 1].as_vector();
        let next = step_raw(g, &degrees, prev, s.as_vector());
        let change = (&next - prev).amax();
        states.push(OpinionVector::clamped(next));
        if change < cfg.fixed_point_tolerance {
            stopped_at = Some(t);
            break;
        }
    }
    Ok(FjTrajectory { states, stopped_at })
}

/// Iterates the update rule from `s` until stationary. Slow; kept as an
/// independent check of [`fj_equilibrium`].
pub fn fj_fixed_point(g: &WeightedGraph, s: &OpinionVector, cfg: &FjSolverConfig) -> Result<OpinionVector> {
    let traj = fj_trajectory(g, s, cfg.max_fixed_point_iters, cfg)?;
    match traj.stopped_at {
        Some(_) => Ok(traj.states.into_iter().last().unwrap()),
        None => {
            let k = traj.states.len();
            let gap = (traj.states[k - 1].as_vector() - traj.states[k - 2].as_vector()).amax();
            Err(Error::SolverNotConverged {
                iterations: cfg.max_fixed_point_iters,
                residual: gap,
            })
        }
    }
}
