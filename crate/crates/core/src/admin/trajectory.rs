//! Alternating minimization: users move to the FJ equilibrium of the
//! current graph, then the administrator reweights the graph for those
//! opinions.

use log::debug;
use nalgebra::DVector;

use super::step::step_from_edges;
use super::{AdminConfig, ConstraintSet};
use crate::dynamics::{FjSolverConfig, ShiftedLaplacianSolver};
use crate::error::{Error, Result};
use crate::graph::{OpinionVector, WeightedGraph};
use crate::metrics::{global_disagreement, internal_conflict, MetricsReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Tolerance,
    RoundCap,
}

/// State after round `r`.
#[derive(Debug, Clone)]
pub struct AdminRound {
    pub round: usize,
    /// `z^(r)`, the equilibrium of `G^(r-1)`.
    pub opinions: OpinionVector,
    /// Metrics of `z^(r)` on `G^(r-1)`, the graph it is an equilibrium of.
    pub metrics: MetricsReport,
    /// `D + I (+ γ||W||²)` just before the administrator moves.
    pub pre_admin_objective: f64,
    /// `G^(r)`, present when snapshots are kept.
    pub weights: Option<WeightedGraph>,
    /// `D(G^(r), z^(r))`.
    pub admin_disagreement: f64,
    /// `D(G^(r), z^(r)) + I(z^(r), s) + γ||W^(r)||_F^2`.
    pub combined_objective: f64,
    pub inner_iterations: usize,
    pub inner_converged: bool,
}

#[derive(Debug, Clone)]
pub struct AdminTrajectory {
    /// `z^(0) = s`; stored for completeness, never consumed.
    pub initial_opinions: OpinionVector,
    pub rounds: Vec<AdminRound>,
    pub final_graph: WeightedGraph,
    /// Equilibrium of the final graph.
    pub final_opinions: OpinionVector,
    pub final_metrics: MetricsReport,
    pub converged: bool,
    pub stop_reason: StopReason,
}

impl AdminTrajectory {
    /// Equilibrium polarization before the administrator acts.
    pub fn initial_polarization(&self) -> f64 {
        self.rounds[0].metrics.polarization
    }

    pub fn combined_objectives(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.combined_objective).collect()
    }

    /// Largest increase between consecutive half-steps of the combined
    /// objective; nonpositive for a descending run.
    pub fn max_objective_increase(&self) -> f64 {
        let mut seq = Vec::with_capacity(2 * self.rounds.len());
        for r in &self.rounds {
            seq.push(r.pre_admin_objective);
            seq.push(r.combined_objective);
        }
        seq.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn penalty(g: &WeightedGraph, gamma: f64) -> f64 {
    if gamma == 0.0 {
        0.0
    } else {
        gamma * g.weights().norm_squared()
    }
}

fn equilibrium(g: &WeightedGraph, s: &OpinionVector, fj: &FjSolverConfig) -> Result<DVector<f64>> {
    ShiftedLaplacianSolver::new(g, fj)?.solve(s.as_vector())
}

/// Runs the administrator dynamics from `g0`. `cs` must be built around `g0`.
pub fn admin_dynamics(
    g0: &WeightedGraph,
    s: &OpinionVector,
    cs: &ConstraintSet,
    cfg: &AdminConfig,
    fj: &FjSolverConfig,
) -> Result<AdminTrajectory> {
    cfg.validate()?;
    fj.validate()?;
    Error::check_dim(g0.n(), s.len())?;
    if cs.reference() != g0 {
        return Err(Error::InvalidParameter(
            "constraint set must be built around the initial graph".into(),
        ));
    }
    let in_round = |round: usize| {
        move |e: Error| Error::Round {
            round,
            source: Box::new(e),
        }
    };

    let mut graph = g0.clone();
    let mut edges = cs.reference_edges().clone();
    let mut rounds: Vec<AdminRound> = Vec::new();
    let mut stop_reason = StopReason::RoundCap;

    for round in 1..=cfg.outer_max_rounds {
        let z = equilibrium(&graph, s, fj).map_err(in_round(round))?;
        let metrics = MetricsReport::evaluate(&graph, &z, s.as_vector()).map_err(in_round(round))?;
        let pre_admin_objective =
            metrics.global_disagreement + metrics.global_internal_conflict + penalty(&graph, cfg.gamma);
        let opinions = OpinionVector::clamped(z);

        let step = step_from_edges(&opinions, cs, cfg, &edges).map_err(in_round(round))?;
        edges = step.edges;
        graph = step.graph;

        // I(z, s) is unchanged by the administrator
        let admin_disagreement = global_disagreement(&graph, opinions.as_vector())?;
        let conflict = internal_conflict(opinions.as_vector(), s.as_vector())?;
        let combined_objective = admin_disagreement + conflict + penalty(&graph, cfg.gamma);
        debug!(
            "round {round}: P = {:.6e}, objective = {combined_objective:.9e}",
            metrics.polarization
        );

        let previous = rounds.last().map(|r| r.combined_objective);
        rounds.push(AdminRound {
            round,
            opinions,
            metrics,
            pre_admin_objective,
            weights: cfg.keep_snapshots.then(|| graph.clone()),
            admin_disagreement,
            combined_objective,
            inner_iterations: step.iterations,
            inner_converged: step.converged,
        });

        if let Some(prev) = previous {
            if (prev - combined_objective).abs() <= cfg.outer_tolerance * prev.abs().max(f64::MIN_POSITIVE) {
                stop_reason = StopReason::Tolerance;
                break;
            }
        }
    }

    let round = rounds.len() + 1;
    let z = equilibrium(&graph, s, fj).map_err(in_round(round))?;
    let final_metrics = MetricsReport::evaluate(&graph, &z, s.as_vector())?;
    Ok(AdminTrajectory {
        initial_opinions: s.clone(),
        rounds,
        final_graph: graph,
        final_opinions: OpinionVector::clamped(z),
        final_metrics,
        converged: stop_reason == StopReason::Tolerance,
        stop_reason,
    })
}
