//! Two-community stochastic block model and the fragile-consensus study:
//! equilibrium polarization of SBM graphs under perfectly polarized innate
//! opinions, compared with the closed form `2n / (2nq + 1)^2` obtained on the
//! expected graph.
//!
//! Randomness comes from ChaCha8 streams. Trial `t` of a run with master seed
//! `m` uses the stream seeded by [`trial_seed`]`(m, t)`, so results do not
//! depend on scheduling or platform.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{FjSolverConfig, ShiftedLaplacianSolver};
use crate::error::{Error, Result};
use crate::graph::{OpinionVector, WeightedGraph};
use crate::metrics::polarization;

/// Ratio bracket used as the empirical stand-in for the unknown constants of
/// the fragile-consensus bound.
pub const RATIO_ENVELOPE: (f64, f64) = (0.2, 5.0);
/// Fraction of trials that must fall inside [`RATIO_ENVELOPE`].
pub const ENVELOPE_PASS_RATE: f64 = 0.95;
pub const MIN_VERIFY_TRIALS: usize = 30;

pub const SWEEP_CSV_HEADER: [&str; 8] = [
    "n",
    "p",
    "q",
    "nq",
    "trials",
    "mean_polarization",
    "std_polarization",
    "lemma_value",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbmParams {
    /// Community size; the graph has `2n` nodes.
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub seed: u64,
}

impl SbmParams {
    pub fn new(n: usize, p: f64, q: f64, seed: u64) -> Result<Self> {
        let params = Self { n, p, q, seed };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("community size must be >= 1".into()));
        }
        for (name, v) in [("p", self.p), ("q", self.q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} = {v} is not a probability")));
            }
        }
        Ok(())
    }

    fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// SplitMix64 finalizer.
fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of trial `index` under `master`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    mix64(mix64(master) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// `s_i = 1` on the first community, `-1` on the second.
pub fn polarized_innate(n: usize) -> OpinionVector {
    OpinionVector::clamped(DVector::from_fn(2 * n, |i, _| if i < n { 1.0 } else { -1.0 }))
}

/// Samples one graph. Pairs are visited in row-major `i < j` order and each
/// consumes exactly one uniform draw.
pub fn sbm_generate(params: &SbmParams) -> Result<WeightedGraph> {
    params.validate()?;
    let n = params.n;
    let size = 2 * n;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut w = DMatrix::zeros(size, size);
    for i in 0..size {
        for j in (i + 1)..size {
            let prob = if (i < n) == (j < n) { params.p } else { params.q };
            if rng.random::<f64>() < prob {
                w[(i, j)] = 1.0;
                w[(j, i)] = 1.0;
            }
        }
    }
    WeightedGraph::from_matrix(w)
}

/// Number of edges between the two communities.
pub fn cross_community_edges(g: &WeightedGraph, n: usize) -> usize {
    g.edges().filter(|&(i, j, _)| (i < n) != (j < n)).count()
}

/// The expected adjacency: `p` inside a community (zero diagonal), `q` across.
pub fn expected_sbm_graph(n: usize, p: f64, q: f64) -> Result<WeightedGraph> {
    SbmParams::new(n, p, q, 0)?;
    let size = 2 * n;
    let w = DMatrix::from_fn(size, size, |i, j| {
        if i == j {
            0.0
        } else if (i < n) == (j < n) {
            p
        } else {
            q
        }
    });
    WeightedGraph::from_matrix(w)
}

/// Equilibrium polarization of the expected graph, `2n / (2nq + 1)^2`.
pub fn expected_sbm_polarization(n: usize, q: f64) -> f64 {
    let n = n as f64;
    2.0 * n / (2.0 * n * q + 1.0).powi(2)
}

/// Equilibrium polarization of `g` under [`polarized_innate`] opinions.
pub fn sbm_equilibrium_polarization(g: &WeightedGraph, fj: &FjSolverConfig) -> Result<f64> {
    if !g.n().is_multiple_of(2) {
        return Err(Error::InvalidParameter("SBM graphs have an even node count".into()));
    }
    let s = polarized_innate(g.n() / 2);
    let z = ShiftedLaplacianSolver::new(g, fj)?.solve(s.as_vector())?;
    Ok(polarization(&z))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GraphSource {
    #[default]
    Sampled,
    /// Feed the deterministic expected adjacency instead of samples.
    Expected,
}

#[derive(Debug, Clone)]
pub struct FragileConsensusReport {
    pub params: SbmParams,
    pub lemma_value: f64,
    pub polarizations: Vec<f64>,
    /// `P / (2n / (2nq + 1)^2)` per trial.
    pub ratios: Vec<f64>,
    pub fraction_in_envelope: f64,
    pub pass: bool,
}

impl FragileConsensusReport {
    pub fn median_ratio(&self) -> f64 {
        median(&self.ratios)
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Samples `trials` graphs and compares each equilibrium polarization with
/// the expected-graph value.
pub fn verify_fragile_consensus(
    params: &SbmParams,
    trials: usize,
    source: GraphSource,
    fj: &FjSolverConfig,
) -> Result<FragileConsensusReport> {
    params.validate()?;
    let n_f = params.n as f64;
    if !(1.0 / n_f <= params.q && params.q <= params.p) {
        return Err(Error::InvalidParameter(format!(
            "verification needs 1/n <= q <= p, got n = {}, p = {}, q = {}",
            params.n, params.p, params.q
        )));
    }
    if trials < MIN_VERIFY_TRIALS {
        return Err(Error::InvalidParameter(format!(
            "verification needs at least {MIN_VERIFY_TRIALS} trials, got {trials}"
        )));
    }
    let lemma_value = expected_sbm_polarization(params.n, params.q);
    let polarizations = match source {
        GraphSource::Sampled => sampled_polarizations(params, trials, fj)?,
        GraphSource::Expected => {
            let g = expected_sbm_graph(params.n, params.p, params.q)?;
            vec![sbm_equilibrium_polarization(&g, fj)?; trials]
        }
    };
    let ratios: Vec<f64> = polarizations.iter().map(|p| p / lemma_value).collect();
    let inside = ratios
        .iter()
        .filter(|r| (RATIO_ENVELOPE.0..=RATIO_ENVELOPE.1).contains(*r))
        .count();
    let fraction_in_envelope = inside as f64 / trials as f64;
    Ok(FragileConsensusReport {
        params: *params,
        lemma_value,
        polarizations,
        ratios,
        fraction_in_envelope,
        pass: fraction_in_envelope >= ENVELOPE_PASS_RATE,
    })
}

/// Equilibrium polarization of `trials` independent samples, in trial order.
pub fn sampled_polarizations(params: &SbmParams, trials: usize, fj: &FjSolverConfig) -> Result<Vec<f64>> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let g = sbm_generate(&params.with_seed(trial_seed(params.seed, t as u64)))?;
            sbm_equilibrium_polarization(&g, fj)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub nq: f64,
    pub trials: usize,
    pub mean_polarization: f64,
    pub std_polarization: f64,
    pub lemma_value: f64,
}

impl SweepPoint {
    pub fn csv_fields(&self) -> [String; 8] {
        [
            self.n.to_string(),
            self.p.to_string(),
            self.q.to_string(),
            self.nq.to_string(),
            self.trials.to_string(),
            self.mean_polarization.to_string(),
            self.std_polarization.to_string(),
            self.lemma_value.to_string(),
        ]
    }
}

/// Mean and standard deviation of equilibrium polarization for each `q`.
/// Grid point `k` draws its trials from master seed `trial_seed(seed, k)`.
pub fn fragile_consensus_sweep(
    n: usize,
    p: f64,
    q_grid: &[f64],
    trials: usize,
    seed: u64,
    fj: &FjSolverConfig,
) -> Result<Vec<SweepPoint>> {
    if q_grid.is_empty() {
        return Err(Error::InvalidParameter("q grid is empty".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    q_grid
        .iter()
        .enumerate()
        .map(|(k, &q)| {
            let params = SbmParams::new(n, p, q, trial_seed(seed, k as u64))?;
            let pols = sampled_polarizations(&params, trials, fj)?;
            let mean = pols.iter().sum::<f64>() / trials as f64;
            let var = if trials > 1 {
                pols.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64
            } else {
                0.0
            };
            Ok(SweepPoint {
                n,
                p,
                q,
                nq: n as f64 * q,
                trials,
                mean_polarization: mean,
                std_polarization: var.sqrt(),
                lemma_value: expected_sbm_polarization(n, q),
            })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return Err(Error::InvalidParameter("slope fit needs two positive points".into()));
    }
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("slope fit needs distinct x values".into()));
    }
    Ok(sxy / sxx)
}
