//! Friedkin-Johnsen opinion dynamics on weighted graphs, a
//! disagreement-minimizing network administrator that reweights the graph
//! under convex constraints, and stochastic-block-model polarization studies.

pub mod admin;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod metrics;
pub mod sbm;

pub use admin::{admin_dynamics, admin_step, AdminConfig, AdminTrajectory, ConstraintSet, SupportMode};
pub use dynamics::{fj_equilibrium, fj_step, fj_trajectory, FjSolverConfig};
pub use error::{Error, Result};
pub use graph::{load_edge_list, load_opinions, recover_innate, OpinionVector, WeightedGraph};
pub use metrics::MetricsReport;
pub use sbm::SbmParams;
