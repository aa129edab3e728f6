//! The network administrator: a second actor that reweights the graph to
//! minimize disagreement, optionally with an L2 penalty on the weights,
//! alternating with the users' FJ equilibrium response.

mod constraints;
mod projection;
mod step;
mod trajectory;

pub use constraints::{ConstraintSet, FeasibilityReport, FeasibilityTolerance, SupportMode};
pub use projection::project_feasible;
pub use step::{admin_objective, admin_step, admin_step_from, AdminStep};
pub use trajectory::{admin_dynamics, AdminRound, AdminTrajectory, StopReason};

use crate::error::{Error, Result};

/// How the projected-gradient step length is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum StepSizeRule {
    /// Start from `1 / L` (or a budget-scaled guess when the objective is
    /// linear), halve on a failed sufficient-decrease test, and double after
    /// successful steps of a linear objective.
    #[default]
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdminConfig {
    /// Weight of the `||W||_F^2` penalty; zero gives the plain administrator.
    pub gamma: f64,
    pub inner_max_iters: usize,
    /// Relative objective decrease below which the inner solve stops.
    pub inner_tolerance: f64,
    /// Iteration cap of the feasibility projection.
    pub dykstra_max_iters: usize,
    /// Feasibility accuracy of the projection; row sums are matched to a
    /// tenth of this, relative to the largest target degree.
    pub dykstra_tolerance: f64,
    pub outer_max_rounds: usize,
    /// Relative change of the combined objective that ends the dynamics.
    pub outer_tolerance: f64,
    pub step_size_rule: StepSizeRule,
    /// Keep every round's weight matrix in the trajectory (the final graph is
    /// always kept).
    pub keep_snapshots: bool,
}

impl Default for AdminConfig {
    fn default() -> Self {
        Self {
            gamma: 0.0,
            inner_max_iters: 5000,
            inner_tolerance: 1e-8,
            dykstra_max_iters: 2000,
            dykstra_tolerance: 1e-10,
            outer_max_rounds: 100,
            outer_tolerance: 1e-6,
            step_size_rule: StepSizeRule::Backtracking,
            keep_snapshots: true,
        }
    }
}

impl AdminConfig {
    pub fn with_gamma(gamma: f64) -> Self {
        Self {
            gamma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma.is_finite()
            && self.gamma >= 0.0
            && self.inner_max_iters >= 1
            && self.inner_tolerance > 0.0
            && self.dykstra_max_iters >= 1
            && self.dykstra_tolerance > 0.0
            && self.outer_max_rounds >= 1
            && self.outer_tolerance > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid admin config {self:?}")))
        }
    }
}
