use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{Context, Result};
use log::{info, warn};
use opinionlab::admin::AdminConfig;
use opinionlab::experiments::{
    check_epsilon_grid, run_admin_sweep, write_csv, write_sweep_csv, write_trajectory_csv, SweepSettings,
};
use opinionlab::graph::count_opinions;
use opinionlab::metrics::{conservation_check, METRICS_CSV_HEADER};
use opinionlab::sbm::{
    fragile_consensus_sweep, verify_fragile_consensus, GraphSource, RATIO_ENVELOPE, SWEEP_CSV_HEADER,
};
use opinionlab::{
    fj_equilibrium, load_edge_list, load_opinions, recover_innate, FjSolverConfig, OpinionVector, SbmParams,
    SupportMode, WeightedGraph,
};

use crate::config::{parse_list, ConfigFile};
use crate::{
    Cli, Command, DataArgs, PartialFailure, SbmCommand, SbmCommon, SbmSweepArgs, Source, SweepArgs, UsageError,
    VerifyArgs,
};

const KNOWN_KEYS: &[&str] = &[
    "graph",
    "opinions",
    "opinions-are-expressed",
    "out-dir",
    "workers",
    "epsilon-grid",
    "gamma",
    "support",
    "max-rounds",
    "n",
    "p",
    "q",
    "q-grid",
    "trials",
    "seed",
    "source",
];

const DEFAULT_EPSILON_GRID: &[f64] = &[0.0, 0.1, 0.3, 0.5];
const DEFAULT_REG_GAMMA: f64 = 0.2;
const DEFAULT_VERIFY_TRIALS: usize = 50;
const DEFAULT_SWEEP_TRIALS: usize = 20;
const DEFAULT_SEED: u64 = 0;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Flag value if given, else the config entry.
fn pick<T>(flag: Option<T>, cfg: &ConfigFile, key: &str) -> Result<Option<T>>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.get(key).map_err(|e| usage(e.to_string())),
    }
}

fn require<T>(flag: Option<T>, cfg: &ConfigFile, key: &str) -> Result<T>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    pick(flag, cfg, key)?.ok_or_else(|| usage(format!("--{key} is required")))
}

fn pick_list(flag: Option<String>, cfg: &ConfigFile, key: &str) -> Result<Option<Vec<f64>>> {
    let raw = flag.or_else(|| cfg.raw(key).map(str::to_string));
    raw.map(|r| parse_list(&r).map_err(|e| usage(format!("--{key}: {e}"))))
        .transpose()
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path).map_err(|e| usage(format!("{e:#}")))?,
        None => ConfigFile::default(),
    };
    for key in cfg.keys().filter(|k| !KNOWN_KEYS.contains(k)) {
        warn!("ignoring unknown config key {key}");
    }
    match cli.command {
        Command::Equilibrium(args) => equilibrium(args, &cfg),
        Command::AdminSweep(args) => sweep(args, &cfg, false),
        Command::RegSweep(args) => sweep(args, &cfg, true),
        Command::Sbm(SbmCommand::Verify(args)) => sbm_verify(args, &cfg),
        Command::Sbm(SbmCommand::Sweep(args)) => sbm_sweep(args, &cfg),
        Command::IngestCheck(args) => ingest_check(args, &cfg),
    }
}

fn init_workers(flag: Option<usize>, cfg: &ConfigFile) -> Result<()> {
    if let Some(k) = pick(flag, cfg, "workers")? {
        if k == 0 {
            return Err(usage("--workers must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .context("configuring worker pool")?;
    }
    Ok(())
}

fn out_dir(flag: Option<PathBuf>, cfg: &ConfigFile) -> Result<PathBuf> {
    let dir = pick(flag, cfg, "out-dir")?.unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

struct Inputs {
    graph: WeightedGraph,
    /// Innate opinions (recovered when the file held expressed ones).
    innate: OpinionVector,
    /// Present when the file held expressed opinions.
    expressed: Option<OpinionVector>,
}

fn load_inputs(args: &DataArgs, cfg: &ConfigFile) -> Result<Inputs> {
    let graph_path: PathBuf = require(args.graph.clone(), cfg, "graph")?;
    let opinions_path: PathBuf = require(args.opinions.clone(), cfg, "opinions")?;
    let expressed = args.opinions_are_expressed || pick(None::<bool>, cfg, "opinions-are-expressed")?.unwrap_or(false);

    let n = count_opinions(&opinions_path)?;
    let opinions = load_opinions(&opinions_path, n)?;
    let graph = load_edge_list(&graph_path, n)?;
    info!("loaded {} nodes, {} edges", graph.n(), graph.edge_count());
    if expressed {
        let innate = recover_innate(&graph, &opinions)?;
        Ok(Inputs {
            graph,
            innate,
            expressed: Some(opinions),
        })
    } else {
        Ok(Inputs {
            graph,
            innate: opinions,
            expressed: None,
        })
    }
}

fn equilibrium(args: DataArgs, cfg: &ConfigFile) -> Result<()> {
    init_workers(args.workers, cfg)?;
    let dir = out_dir(args.out_dir.clone(), cfg)?;
    let inputs = load_inputs(&args, cfg)?;
    let fj = FjSolverConfig::default();
    let z = fj_equilibrium(&inputs.graph, &inputs.innate, &fj)?;
    let report = conservation_check(&inputs.graph, &inputs.innate, &fj)?;

    write_csv(
        dir.join("equilibrium.csv"),
        &["node", "innate", "expressed"],
        inputs
            .innate
            .as_slice()
            .iter()
            .zip(z.as_slice())
            .enumerate()
            .map(|(i, (s, z))| [i.to_string(), s.to_string(), z.to_string()]),
    )?;
    write_csv(dir.join("metrics.csv"), &METRICS_CSV_HEADER, [report.csv_fields(0)])?;
    println!(
        "polarization {} disagreement {} internal_conflict {} residual {:e}",
        report.polarization, report.global_disagreement, report.global_internal_conflict, report.conservation_residual
    );
    Ok(())
}

fn eps_tag(eps: f64) -> String {
    format!("eps{eps}")
}

fn sweep(args: SweepArgs, cfg: &ConfigFile, regularized: bool) -> Result<()> {
    init_workers(args.data.workers, cfg)?;
    let grid =
        pick_list(args.epsilon_grid.clone(), cfg, "epsilon-grid")?.unwrap_or_else(|| DEFAULT_EPSILON_GRID.to_vec());
    check_epsilon_grid(&grid).map_err(|e| usage(e.to_string()))?;
    let default_gamma = if regularized { DEFAULT_REG_GAMMA } else { 0.0 };
    let gamma = pick(args.gamma, cfg, "gamma")?.unwrap_or(default_gamma);
    if regularized && !(gamma > 0.0 && gamma.is_finite()) {
        return Err(usage(format!("reg-sweep needs a finite gamma > 0, got {gamma}")));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(usage(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    let support = match args.support {
        Some(s) => s,
        None => match cfg.raw("support") {
            Some(raw) => raw.parse().map_err(|e: opinionlab::Error| usage(e.to_string()))?,
            None => SupportMode::default(),
        },
    };
    let mut admin = AdminConfig::with_gamma(gamma);
    if let Some(r) = pick(args.max_rounds, cfg, "max-rounds")? {
        admin.outer_max_rounds = r;
    }
    admin.validate().map_err(|e| usage(e.to_string()))?;

    let dir = out_dir(args.data.out_dir.clone(), cfg)?;
    let inputs = load_inputs(&args.data, cfg)?;
    if inputs.expressed.is_some() {
        inputs.innate.write(dir.join("innate_recovered.txt"))?;
    }

    let mut settings = SweepSettings::new(grid, admin);
    settings.support = support;
    let result = run_admin_sweep(&inputs.graph, &inputs.innate, &settings)?;

    let name = if regularized {
        "reg_sweep.csv"
    } else {
        "admin_sweep.csv"
    };
    write_sweep_csv(dir.join(name), &result)?;
    for row in &result.rows {
        match row.trajectory() {
            Some(t) => {
                let tag = eps_tag(row.epsilon);
                write_trajectory_csv(dir.join(format!("trajectory_{tag}.csv")), t)?;
                t.final_graph
                    .write_edge_list(dir.join(format!("final_graph_{tag}.txt")))?;
                println!(
                    "epsilon {} pol_ratio {} disagreement_ratio {} rounds {}",
                    row.epsilon, row.pol_ratio, row.disagreement_ratio, row.rounds
                );
            }
            None => warn!("epsilon {} failed: {}", row.epsilon, row.status()),
        }
    }
    let failed = result.rows.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        return Err(PartialFailure(failed).into());
    }
    Ok(())
}

fn check_probability(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(usage(format!("{name} = {v} must lie in [0, 1]")))
    }
}

struct SbmBase {
    n: usize,
    p: f64,
    trials: Option<usize>,
    seed: u64,
    dir: PathBuf,
}

fn sbm_base(common: SbmCommon, cfg: &ConfigFile) -> Result<SbmBase> {
    init_workers(common.workers, cfg)?;
    let n: usize = require(common.n, cfg, "n")?;
    if n == 0 {
        return Err(usage("--n must be >= 1"));
    }
    let p: f64 = require(common.p, cfg, "p")?;
    check_probability("p", p)?;
    Ok(SbmBase {
        n,
        p,
        trials: pick(common.trials, cfg, "trials")?,
        seed: pick(common.seed, cfg, "seed")?.unwrap_or(DEFAULT_SEED),
        dir: out_dir(common.out_dir, cfg)?,
    })
}

fn sbm_verify(args: VerifyArgs, cfg: &ConfigFile) -> Result<()> {
    let q: f64 = require(args.q, cfg, "q")?;
    check_probability("q", q)?;
    let source = match args.source {
        Some(s) => s,
        None => match cfg.raw("source") {
            Some("sampled") | None => Source::Sampled,
            Some("expected") => Source::Expected,
            Some(other) => return Err(usage(format!("source must be sampled or expected, got {other}"))),
        },
    };
    let base = sbm_base(args.common, cfg)?;
    let trials = base.trials.unwrap_or(DEFAULT_VERIFY_TRIALS);
    let params = SbmParams::new(base.n, base.p, q, base.seed).map_err(|e| usage(e.to_string()))?;
    let source = match source {
        Source::Sampled => GraphSource::Sampled,
        Source::Expected => GraphSource::Expected,
    };
    let report =
        verify_fragile_consensus(&params, trials, source, &FjSolverConfig::default()).map_err(|e| match e {
            opinionlab::Error::InvalidParameter(msg) => usage(msg),
            other => other.into(),
        })?;

    write_csv(
        base.dir.join("sbm_verify.csv"),
        &["trial", "polarization", "lemma_value", "ratio", "in_envelope"],
        report
            .polarizations
            .iter()
            .zip(&report.ratios)
            .enumerate()
            .map(|(t, (p, r))| {
                [
                    t.to_string(),
                    p.to_string(),
                    report.lemma_value.to_string(),
                    r.to_string(),
                    (RATIO_ENVELOPE.0..=RATIO_ENVELOPE.1).contains(r).to_string(),
                ]
            }),
    )?;
    println!(
        "lemma {} median_ratio {} in_envelope {:.3} pass {}",
        report.lemma_value,
        report.median_ratio(),
        report.fraction_in_envelope,
        report.pass
    );
    Ok(())
}

fn sbm_sweep(args: SbmSweepArgs, cfg: &ConfigFile) -> Result<()> {
    let q_grid = pick_list(args.q_grid.clone(), cfg, "q-grid")?.ok_or_else(|| usage("--q-grid is required"))?;
    if q_grid.is_empty() {
        return Err(usage("--q-grid is empty"));
    }
    for &q in &q_grid {
        check_probability("q", q)?;
    }
    let base = sbm_base(args.common, cfg)?;
    let trials = base.trials.unwrap_or(DEFAULT_SWEEP_TRIALS);
    if trials == 0 {
        return Err(usage("--trials must be >= 1"));
    }
    let points = fragile_consensus_sweep(base.n, base.p, &q_grid, trials, base.seed, &FjSolverConfig::default())?;
    write_csv(
        base.dir.join("sbm_sweep.csv"),
        &SWEEP_CSV_HEADER,
        points.iter().map(|p| p.csv_fields()),
    )?;
    for p in &points {
        println!(
            "nq {} mean_polarization {} lemma {}",
            p.nq, p.mean_polarization, p.lemma_value
        );
    }
    Ok(())
}

fn ingest_check(args: DataArgs, cfg: &ConfigFile) -> Result<()> {
    let inputs = load_inputs(&args, cfg)?;
    let g = &inputs.graph;
    let degrees = g.degrees();
    let isolated = degrees.iter().filter(|d| **d == 0.0).count();
    println!("nodes {}", g.n());
    println!("edges {}", g.edge_count());
    println!("total_weight {}", g.edges().map(|(_, _, w)| w).sum::<f64>());
    println!("degree_min {}", degrees.min());
    println!("degree_max {}", degrees.max());
    println!("isolated_nodes {isolated}");
    summarize("innate", &inputs.innate);
    if let Some(z) = &inputs.expressed {
        summarize("expressed", z);
    }
    Ok(())
}

fn summarize(label: &str, v: &OpinionVector) {
    let s = v.as_vector();
    println!("{label}_mean {}", v.mean());
    println!("{label}_min {}", s.min());
    println!("{label}_max {}", s.max());
}
