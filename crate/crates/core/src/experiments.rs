//! Experiment drivers shared by the command-line tool and the test suites:
//! ε-sweeps of the administrator dynamics and CSV emission.

use std::path::Path;

use rayon::prelude::*;

use crate::admin::{admin_dynamics, AdminConfig, AdminTrajectory, ConstraintSet, SupportMode};
use crate::dynamics::FjSolverConfig;
use crate::error::{Error, Result};
use crate::graph::{OpinionVector, WeightedGraph};
use crate::metrics::{conservation_check, MetricsReport, METRICS_CSV_HEADER};

pub const SWEEP_CSV_HEADER: [&str; 6] = [
    "epsilon",
    "pol_ratio",
    "disagreement_ratio",
    "rounds",
    "converged",
    "status",
];

#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub epsilon_grid: Vec<f64>,
    pub support: SupportMode,
    pub admin: AdminConfig,
    pub fj: FjSolverConfig,
    /// Worker threads; `None` uses every logical core.
    pub workers: Option<usize>,
}

impl SweepSettings {
    pub fn new(epsilon_grid: Vec<f64>, admin: AdminConfig) -> Self {
        Self {
            epsilon_grid,
            support: SupportMode::Full,
            admin,
            fj: FjSolverConfig::default(),
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_epsilon_grid(&self.epsilon_grid)?;
        self.admin.validate()?;
        self.fj.validate()
    }
}

/// Grids must be nonempty, finite, nonnegative and ascending.
pub fn check_epsilon_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("epsilon grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|e| !e.is_finite() || **e < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon {bad} must be finite and >= 0"
        )));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("epsilon grid must be sorted ascending".into()));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub epsilon: f64,
    /// Final equilibrium polarization over the no-administrator baseline.
    pub pol_ratio: f64,
    /// Final equilibrium disagreement over the baseline.
    pub disagreement_ratio: f64,
    pub rounds: usize,
    pub converged: bool,
    /// The run, or the error that stopped it.
    pub outcome: std::result::Result<AdminTrajectory, String>,
}

impl SweepRow {
    pub fn status(&self) -> &str {
        match &self.outcome {
            Ok(_) => "ok",
            Err(msg) => msg,
        }
    }

    pub fn trajectory(&self) -> Option<&AdminTrajectory> {
        self.outcome.as_ref().ok()
    }

    pub fn csv_fields(&self) -> [String; 6] {
        let status = match &self.outcome {
            Ok(_) => "ok".to_string(),
            Err(msg) => format!("error: {msg}"),
        };
        [
            self.epsilon.to_string(),
            self.pol_ratio.to_string(),
            self.disagreement_ratio.to_string(),
            self.rounds.to_string(),
            self.converged.to_string(),
            status,
        ]
    }
}

#[derive(Debug, Clone)]
pub struct AdminSweep {
    /// Equilibrium metrics on the untouched graph.
    pub baseline: MetricsReport,
    pub rows: Vec<SweepRow>,
}

impl AdminSweep {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.outcome.is_ok())
    }

    pub fn max_pol_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.pol_ratio).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn ratio(value: f64, baseline: f64) -> f64 {
    if value == baseline {
        1.0
    } else {
        value / baseline
    }
}

fn run_point(
    g: &WeightedGraph,
    s: &OpinionVector,
    eps: f64,
    settings: &SweepSettings,
    baseline: &MetricsReport,
) -> SweepRow {
    let outcome = ConstraintSet::from_graph(g, eps, settings.support)
        .and_then(|cs| admin_dynamics(g, s, &cs, &settings.admin, &settings.fj));
    match outcome {
        Ok(t) => SweepRow {
            epsilon: eps,
            pol_ratio: ratio(t.final_metrics.polarization, baseline.polarization),
            disagreement_ratio: ratio(t.final_metrics.global_disagreement, baseline.global_disagreement),
            rounds: t.rounds.len(),
            converged: t.converged,
            outcome: Ok(t),
        },
        Err(e) => SweepRow {
            epsilon: eps,
            pol_ratio: f64::NAN,
            disagreement_ratio: f64::NAN,
            rounds: 0,
            converged: false,
            outcome: Err(e.to_string()),
        },
    }
}

/// Runs the administrator dynamics at every ε and compares the final
/// equilibrium with the no-administrator equilibrium. Failures are recorded
/// per row; the sweep continues. Rows come back in grid order.
pub fn run_admin_sweep(g: &WeightedGraph, s: &OpinionVector, settings: &SweepSettings) -> Result<AdminSweep> {
    settings.validate()?;
    Error::check_dim(g.n(), s.len())?;
    let baseline = conservation_check(g, s, &settings.fj)?;
    let run = || -> Vec<SweepRow> {
        settings
            .epsilon_grid
            .par_iter()
            .map(|&eps| run_point(g, s, eps, settings, &baseline))
            .collect()
    };
    let rows = match settings.workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?
            .install(run),
        None => run(),
    };
    Ok(AdminSweep { baseline, rows })
}

/// Writes a header and rows as comma-separated values.
pub fn write_csv<I, R>(path: impl AsRef<Path>, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let path = path.as_ref();
    let io_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(row).map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_sweep_csv(path: impl AsRef<Path>, sweep: &AdminSweep) -> Result<()> {
    write_csv(path, &SWEEP_CSV_HEADER, sweep.rows.iter().map(|r| r.csv_fields()))
}

/// One row per round (metrics of `z^(r)` on `G^(r-1)`) followed by the
/// equilibrium of the final graph, plus the combined objective column.
pub fn write_trajectory_csv(path: impl AsRef<Path>, t: &AdminTrajectory) -> Result<()> {
    let mut header: Vec<&str> = METRICS_CSV_HEADER.to_vec();
    header.push("combined_objective");
    let mut rows: Vec<Vec<String>> = t
        .rounds
        .iter()
        .map(|r| {
            let mut row = r.metrics.csv_fields(r.round).to_vec();
            row.push(r.combined_objective.to_string());
            row
        })
        .collect();
    let mut last = t.final_metrics.csv_fields(t.rounds.len() + 1).to_vec();
    last.push(String::new());
    rows.push(last);
    write_csv(path, &header, rows)
}
