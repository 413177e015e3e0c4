//! Subcommand implementations. Outputs are written atomically (temp file +
//! rename) and every randomized command prints the effective root seed so a
//! run can be replayed exactly.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use swarmtopo::metrics::{
    beta_sweep, betweenness, diversity, summarize, BatchStats, FamilyLabel, ScenarioFamily,
};
use swarmtopo::net::{build_link_index, compute_capacities, NetworkSnapshot, Topology};
use swarmtopo::offline::{
    default_lambda, generate_candidates, select_portfolio, CandidateSet, DiversityConfig,
};
use swarmtopo::online::{SwitchPolicy, UtilityWeights};
use swarmtopo::qubo::{build_qubo, evaluate_decomposed, ObjectiveParams, QuboMatrix};
use swarmtopo::sampler::{
    BruteForceSampler, RemoteSampler, SaParams, Sampler, SamplerConfig, SaSampler,
};
use swarmtopo::sim::{
    run_dynamic, run_static, Disturbance, EnergyParams, ScenarioSpec, SimTrace,
};

use crate::config::{OfflineSection, OnlineSection, RunConfig, ScenarioSection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    Sa,
    Brute,
    Remote,
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("cannot create {}", parent.display()))?;
        }
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| anyhow!("output path {} has no file name", path.display()))?
        .to_string_lossy()
        .into_owned();
    let tmp = path.with_file_name(format!("{file_name}.tmp"));
    fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot publish {}", path.display()))?;
    Ok(())
}

fn load_snapshot(path: &Path) -> Result<NetworkSnapshot> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read snapshot {}", path.display()))?;
    NetworkSnapshot::from_json(&text)
        .with_context(|| format!("invalid snapshot {}", path.display()))
}

fn build_sampler(
    solver: SolverKind,
    endpoint: Option<&str>,
) -> Result<Box<dyn Sampler + Sync>> {
    Ok(match solver {
        SolverKind::Sa => Box::new(SaSampler),
        SolverKind::Brute => Box::new(BruteForceSampler),
        SolverKind::Remote => {
            let endpoint = endpoint.ok_or_else(|| {
                anyhow!("the remote solver needs --endpoint or SWARMTOPO_REMOTE_ENDPOINT")
            })?;
            Box::new(RemoteSampler::new(endpoint))
        }
    })
}

fn solver_from_config(name: &str) -> Result<SolverKind> {
    match name {
        "sa" => Ok(SolverKind::Sa),
        "brute" => Ok(SolverKind::Brute),
        "remote" => Ok(SolverKind::Remote),
        other => bail!("unknown solver {other:?}; valid: sa, brute, remote"),
    }
}

fn sampler_config(section: &OfflineSection, num_samples: usize, seed: u64) -> SamplerConfig {
    SamplerConfig {
        num_samples,
        seed,
        sa: SaParams {
            sweeps: section.sweeps,
            t_initial: section.t_initial,
            t_final: section.t_final,
            restarts_per_sample: section.restarts,
        },
    }
}

// ---------------------------------------------------------------------------
// scenario
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario family (traffic centralization level) [default: I2]
    #[arg(long)]
    pub family: Option<FamilyLabel>,
    /// Number of UAVs [default: 10]
    #[arg(long)]
    pub n: Option<usize>,
    /// Placement seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Shannon capacity gap Gamma [default: 2]
    #[arg(long)]
    pub capacity_gap: Option<f64>,
    /// Config file; flags override file values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output snapshot JSON path
    #[arg(long, short)]
    pub out: PathBuf,
}

pub fn cmd_scenario(args: &ScenarioArgs) -> Result<()> {
    let config = RunConfig::load(args.config.as_deref())?;
    let family_label = match args.family {
        Some(label) => label,
        None => config
            .scenario
            .family
            .parse()
            .map_err(|e: String| anyhow!(e))?,
    };
    let n = args.n.unwrap_or(config.scenario.n);
    let seed = args.seed.unwrap_or(0);
    let family = ScenarioFamily::new(family_label);
    let mut snapshot = swarmtopo::metrics::gen_scenario(&family, n, seed)?;
    if let Some(gap) = args.capacity_gap {
        snapshot.radio.capacity_gap = gap;
    }
    let index = build_link_index(&snapshot)?;
    let report = betweenness(&Topology::ones(index.num_links()), &index, n);
    atomic_write(&args.out, snapshot.to_json_pretty().as_bytes())?;
    println!("effective root seed: {seed}");
    println!(
        "family {family_label}: target max betweenness {:.2}, achieved {:.4} ({} nodes, {} links)",
        family_label.target_betweenness(),
        report.max,
        n,
        index.num_links()
    );
    let distribution: Vec<String> = report.per_node.iter().map(|b| format!("{b:.3}")).collect();
    println!("betweenness distribution: [{}]", distribution.join(", "));
    println!("wrote {}", args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// offline
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct OfflineArgs {
    /// Input snapshot JSON
    #[arg(long)]
    pub snapshot: PathBuf,
    /// Config file; flags override file values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Throughput weight alpha [default: 1]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Fragility weight beta [default: 0.01]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Penalty rounds R [default: 5]
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Samples per round k [default: 10]
    #[arg(long, short = 'k')]
    pub samples_per_round: Option<usize>,
    /// Diversity penalty weight lambda [default: 0.5 * mean |diag Q0|]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Deployed portfolio size [default: 10]
    #[arg(long)]
    pub portfolio: Option<usize>,
    /// Drop duplicate candidates [default: true]
    #[arg(long)]
    pub dedupe: Option<bool>,
    /// Solver backend [default: sa]
    #[arg(long, value_enum)]
    pub solver: Option<SolverKind>,
    /// Remote solver endpoint (URL or job directory)
    #[arg(long, env = "SWARMTOPO_REMOTE_ENDPOINT")]
    pub endpoint: Option<String>,
    /// Sampler seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Annealing sweeps per chain [default: 2000]
    #[arg(long)]
    pub sweeps: Option<usize>,
    /// Annealing restarts per sample [default: 1]
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Output candidate-set JSON path
    #[arg(long, short)]
    pub out: PathBuf,
}

pub fn cmd_offline(args: &OfflineArgs) -> Result<()> {
    let config = RunConfig::load(args.config.as_deref())?;
    let mut offline = config.offline.clone();
    if let Some(v) = args.rounds {
        offline.rounds = v;
    }
    if let Some(v) = args.samples_per_round {
        offline.samples_per_round = v;
    }
    if args.lambda.is_some() {
        offline.lambda = args.lambda;
    }
    if let Some(v) = args.portfolio {
        offline.portfolio = v;
    }
    if let Some(v) = args.dedupe {
        offline.dedupe = v;
    }
    if let Some(v) = args.sweeps {
        offline.sweeps = v;
    }
    if let Some(v) = args.restarts {
        offline.restarts = v;
    }
    if args.endpoint.is_some() {
        offline.endpoint = args.endpoint.clone();
    }
    let alpha = args.alpha.unwrap_or(config.objective.alpha);
    let beta = args.beta.unwrap_or(config.objective.beta);
    let seed = args.seed.unwrap_or(0);
    let solver = match args.solver {
        Some(kind) => kind,
        None => solver_from_config(&offline.solver)?,
    };

    let snapshot = load_snapshot(&args.snapshot)?;
    let index = build_link_index(&snapshot)?;
    let caps = compute_capacities(&snapshot, &index)?;
    let params = ObjectiveParams::new(alpha, beta)?;
    let q0 = build_qubo(&snapshot, &index, &caps, &params)?;
    let sampler = build_sampler(solver, offline.endpoint.as_deref())?;

    let dcfg = DiversityConfig {
        rounds: offline.rounds,
        samples_per_round: offline.samples_per_round,
        lambda: offline.lambda,
        dedupe: offline.dedupe,
    };
    let scfg = sampler_config(&offline, offline.samples_per_round, seed);
    println!("effective root seed: {seed}");
    eprintln!(
        "offline: N={} M={} alpha={alpha} beta={beta} lambda={:.4} R={} k={} solver={}",
        snapshot.num_nodes(),
        index.num_links(),
        dcfg.lambda.unwrap_or_else(|| default_lambda(&q0)),
        dcfg.rounds,
        dcfg.samples_per_round,
        sampler.name(),
    );
    let cset = generate_candidates(&q0, sampler.as_ref(), &dcfg, &scfg, &snapshot.id())?;
    for round in 0..dcfg.rounds {
        let so_far: Vec<Topology> = cset
            .entries
            .iter()
            .filter(|e| e.round <= round)
            .map(|e| e.topology.clone())
            .collect();
        let best = cset
            .entries
            .iter()
            .filter(|e| e.round == round)
            .map(|e| e.base_objective)
            .fold(f64::INFINITY, f64::min);
        let running_diversity = if so_far.len() >= 2 {
            diversity(&so_far)?
        } else {
            0.0
        };
        eprintln!(
            "round {round}: best objective {best:.4}, running diversity {running_diversity:.4}"
        );
    }
    let portfolio = select_portfolio(&cset, offline.portfolio)?;
    atomic_write(&args.out, portfolio.to_json_pretty().as_bytes())?;
    let portfolio_diversity = if portfolio.len() >= 2 {
        diversity(&portfolio.topologies())?
    } else {
        0.0
    };
    let best = portfolio
        .entries
        .iter()
        .map(|e| e.base_objective)
        .fold(f64::INFINITY, f64::min);
    println!(
        "generated {} candidates, kept portfolio of {} (diversity {:.4}, best objective {:.4})",
        cset.len(),
        portfolio.len(),
        portfolio_diversity,
        best
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// online
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct OnlineArgs {
    /// Input snapshot JSON
    #[arg(long)]
    pub snapshot: PathBuf,
    /// Input candidate-set JSON from the offline stage
    #[arg(long)]
    pub candidates: PathBuf,
    /// Config file; flags override file values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of seeded runs per arm [default: 20]
    #[arg(long)]
    pub runs: Option<usize>,
    /// Root seed; run i uses seed + i [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simulation horizon, seconds [default: 30]
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Simulation step, seconds [default: 1]
    #[arg(long)]
    pub step: Option<f64>,
    /// Disable the scheduled disturbances
    #[arg(long)]
    pub no_disturbance: bool,
    /// Freeze the world: no mobility, no shadowing
    #[arg(long)]
    pub freeze: bool,
    /// Parallel workers for the run batch [default: 1]
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory for traces and the summary
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn assemble_scenario(
    snapshot: NetworkSnapshot,
    section: &ScenarioSection,
    seed: u64,
    args: &OnlineArgs,
) -> ScenarioSpec {
    let mut spec = ScenarioSpec::new(snapshot, seed);
    spec.horizon_s = args.horizon.unwrap_or(section.horizon_s);
    spec.step_s = args.step.unwrap_or(section.step_s);
    spec.mobility.max_speed_mps = section.max_speed_mps;
    spec.mobility.waypoint_pause_s = section.waypoint_pause_s;
    spec.shadowing_sigma_db = section.shadowing_sigma_db;
    spec.shadowing_rho = section.shadowing_rho;
    spec.energy = EnergyParams {
        initial_j: section.initial_j,
        idle_w: section.idle_w,
        tx_j_per_bit: section.tx_j_per_bit,
    };
    spec.disturbances = section
        .disturbance_times_s
        .iter()
        .map(|&time_s| Disturbance {
            time_s,
            affected_fraction: section.disturbance_fraction,
            duration_steps: section.disturbance_duration_steps,
        })
        .collect();
    if args.no_disturbance {
        spec.disturbances.clear();
    }
    if args.freeze {
        spec.mobility.max_speed_mps = 0.0;
        spec.shadowing_sigma_db = 0.0;
    }
    spec
}

fn online_policy(section: &OnlineSection) -> (UtilityWeights, SwitchPolicy) {
    (
        UtilityWeights {
            w_perf: section.w_perf,
            w_life: section.w_life,
        },
        SwitchPolicy {
            hysteresis_margin: section.hysteresis,
            min_dwell_s: section.min_dwell_s,
            switch_outage_steps: section.switch_outage_steps,
        },
    )
}

#[derive(Serialize)]
struct OnlineProtocol {
    runs: usize,
    horizon_s: f64,
    step_s: f64,
    candidates: usize,
    disturbance_times_s: Vec<f64>,
}

#[derive(Serialize)]
struct OnlineSummary {
    root_seed: u64,
    protocol: OnlineProtocol,
    pr_dynamic: Option<BatchStats>,
    pr_static: Option<BatchStats>,
    /// Stats of the per-seed paired differences (dynamic - static).
    improvement: Option<BatchStats>,
    relative_improvement: Option<f64>,
    pr_dynamic_runs: Vec<Option<f64>>,
    pr_static_runs: Vec<Option<f64>>,
    mean_switches: f64,
    degenerate_runs: usize,
}

/// Per-step normalized throughput stats across runs.
fn timeseries_csv(traces: &[&SimTrace], confidence: f64) -> String {
    let mut out = String::from("t,mean_thr,ci_lo,ci_hi\n");
    if traces.is_empty() {
        return out;
    }
    let steps = traces[0].records.len();
    for step in 0..steps {
        let values: Vec<f64> = traces
            .iter()
            .filter(|t| t.summary.thr0_bps > 0.0)
            .map(|t| t.records[step].throughput_bps / t.summary.thr0_bps)
            .collect();
        if values.is_empty() {
            continue;
        }
        let t = traces[0].records[step].t;
        if values.len() >= 2 {
            let stats = summarize(&values, confidence).expect("n >= 2");
            out.push_str(&format!(
                "{},{},{},{}\n",
                t, stats.mean, stats.ci_lo, stats.ci_hi
            ));
        } else {
            out.push_str(&format!("{},{},{},{}\n", t, values[0], values[0], values[0]));
        }
    }
    out
}

pub fn cmd_online(args: &OnlineArgs) -> Result<()> {
    let config = RunConfig::load(args.config.as_deref())?;
    let snapshot = load_snapshot(&args.snapshot)?;
    let text = fs::read_to_string(&args.candidates)
        .with_context(|| format!("cannot read candidates {}", args.candidates.display()))?;
    let cset = CandidateSet::from_json(&text)?;
    let index = build_link_index(&snapshot)?;
    if cset.snapshot_id != snapshot.id() || cset.dim() != index.num_links() {
        bail!(
            "candidate set does not match the snapshot: candidates span {} links for snapshot \
             {}..., but {} has N={} nodes, M={} links and id {}...",
            cset.dim(),
            &cset.snapshot_id[..12.min(cset.snapshot_id.len())],
            args.snapshot.display(),
            snapshot.num_nodes(),
            index.num_links(),
            &snapshot.id()[..12]
        );
    }
    let runs = args.runs.unwrap_or(config.experiment.num_runs);
    if runs == 0 {
        bail!("--runs must be at least 1");
    }
    let seed = args.seed.unwrap_or(0);
    let jobs = args.jobs.unwrap_or(1).max(1);
    let (weights, policy) = online_policy(&config.online);
    println!("effective root seed: {seed}");

    // Static baseline: the throughput-only topology, solved from the QUBO
    // with the fragility term disabled.
    let caps = compute_capacities(&snapshot, &index)?;
    let beta0 = ObjectiveParams::new(config.objective.alpha, 0.0)?;
    let q_beta0 = build_qubo(&snapshot, &index, &caps, &beta0)?;
    let solver = solver_from_config(&config.offline.solver)?;
    let sampler = build_sampler(solver, config.offline.endpoint.as_deref())?;
    let baseline_cfg = sampler_config(&config.offline, 1, seed);
    let baseline_batch = sampler.sample(&q_beta0, &baseline_cfg)?;
    let baseline = baseline_batch.topologies[baseline_batch.best()].clone();
    eprintln!(
        "static baseline: {} of {} links active",
        baseline.active_count(),
        index.num_links()
    );

    let name = args
        .snapshot
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create {}", args.out_dir.display()))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("cannot build worker pool")?;
    let results: Result<Vec<(SimTrace, SimTrace)>> = pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|run_idx| {
                let run_seed = seed.wrapping_add(run_idx as u64);
                let scenario =
                    assemble_scenario(snapshot.clone(), &config.scenario, run_seed, args);
                let dynamic = run_dynamic(&scenario, &cset, &weights, &policy)?;
                let fixed = run_static(&scenario, &baseline)?;
                atomic_write(
                    &args.out_dir.join(format!("{name}_dynamic_{run_seed}.csv")),
                    dynamic.to_csv().as_bytes(),
                )?;
                atomic_write(
                    &args.out_dir.join(format!("{name}_static_{run_seed}.csv")),
                    fixed.to_csv().as_bytes(),
                )?;
                Ok((dynamic, fixed))
            })
            .collect()
    });
    let results = results?;

    let pr_dynamic_runs: Vec<Option<f64>> = results.iter().map(|(d, _)| d.summary.pr).collect();
    let pr_static_runs: Vec<Option<f64>> = results.iter().map(|(_, s)| s.summary.pr).collect();
    let paired: Vec<(f64, f64)> = results
        .iter()
        .filter_map(|(d, s)| Some((d.summary.pr?, s.summary.pr?)))
        .collect();
    let degenerate_runs = results.len() - paired.len();
    let dynamic_values: Vec<f64> = paired.iter().map(|(d, _)| *d).collect();
    let static_values: Vec<f64> = paired.iter().map(|(_, s)| *s).collect();
    let diffs: Vec<f64> = paired.iter().map(|(d, s)| d - s).collect();
    let confidence = config.experiment.confidence;
    let stats_of = |values: &[f64]| -> Option<BatchStats> {
        (values.len() >= 2).then(|| summarize(values, confidence).expect("n >= 2"))
    };
    let mean = |values: &[f64]| -> Option<f64> {
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    };
    let relative_improvement = match (mean(&dynamic_values), mean(&static_values)) {
        (Some(d), Some(s)) if s != 0.0 => Some((d - s) / s),
        _ => None,
    };
    let mean_switches = results
        .iter()
        .map(|(d, _)| d.summary.num_switches as f64)
        .sum::<f64>()
        / results.len() as f64;

    let summary = OnlineSummary {
        root_seed: seed,
        protocol: OnlineProtocol {
            runs,
            horizon_s: args.horizon.unwrap_or(config.scenario.horizon_s),
            step_s: args.step.unwrap_or(config.scenario.step_s),
            candidates: cset.len(),
            disturbance_times_s: if args.no_disturbance {
                Vec::new()
            } else {
                config.scenario.disturbance_times_s.clone()
            },
        },
        pr_dynamic: stats_of(&dynamic_values),
        pr_static: stats_of(&static_values),
        improvement: stats_of(&diffs),
        relative_improvement,
        pr_dynamic_runs,
        pr_static_runs,
        mean_switches,
        degenerate_runs,
    };
    let summary_path = args.out_dir.join(format!("{name}_summary.json"));
    atomic_write(
        &summary_path,
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;

    let dynamic_traces: Vec<&SimTrace> = results.iter().map(|(d, _)| d).collect();
    let static_traces: Vec<&SimTrace> = results.iter().map(|(_, s)| s).collect();
    atomic_write(
        &args.out_dir.join(format!("{name}_timeseries_dynamic.csv")),
        timeseries_csv(&dynamic_traces, confidence).as_bytes(),
    )?;
    atomic_write(
        &args.out_dir.join(format!("{name}_timeseries_static.csv")),
        timeseries_csv(&static_traces, confidence).as_bytes(),
    )?;

    match (mean(&dynamic_values), mean(&static_values)) {
        (Some(d), Some(s)) => {
            println!(
                "PR dynamic {:.4}, PR static {:.4}, relative improvement {:.2}% over {} runs \
                 ({} degenerate)",
                d,
                s,
                relative_improvement.unwrap_or(0.0) * 100.0,
                runs,
                degenerate_runs
            );
        }
        _ => println!("all runs degenerate (thr(0) = 0); no PR statistics"),
    }
    println!("wrote {}", summary_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep-beta
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SweepBetaArgs {
    /// Input snapshot JSON
    #[arg(long)]
    pub snapshot: PathBuf,
    /// Config file; flags override file values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated ascending beta grid [default: 0,0.001,0.01,0.1]
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    /// Seeds per beta [default: 20]
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Base seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Throughput weight alpha [default: 1]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Output CSV path
    #[arg(long, short)]
    pub out: PathBuf,
}

pub fn cmd_sweep_beta(args: &SweepBetaArgs) -> Result<()> {
    let config = RunConfig::load(args.config.as_deref())?;
    let snapshot = load_snapshot(&args.snapshot)?;
    let betas = args.betas.clone().unwrap_or(config.experiment.betas.clone());
    let num_seeds = args.seeds.unwrap_or(config.experiment.sweep_seeds);
    let seed = args.seed.unwrap_or(0);
    let alpha = args.alpha.unwrap_or(config.objective.alpha);
    let seeds: Vec<u64> = (0..num_seeds as u64).map(|i| seed.wrapping_add(i)).collect();
    let base_cfg = sampler_config(&config.offline, 1, seed);
    println!("effective root seed: {seed}");
    let rows = beta_sweep(&snapshot, &betas, &SaSampler, &base_cfg, &seeds, alpha)?;
    let mut csv = String::from("beta,throughput,load_std\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{}\n",
            row.beta, row.mean_throughput, row.mean_load_std
        ));
        println!(
            "beta {:>8}: mean throughput {:.4}, mean load std {:.4}",
            row.beta, row.mean_throughput, row.mean_load_std
        );
    }
    atomic_write(&args.out, csv.as_bytes())?;
    println!("wrote {}", args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// bench-diversity
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct BenchDiversityArgs {
    /// Input snapshot JSON
    #[arg(long)]
    pub snapshot: PathBuf,
    /// Config file; flags override file values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of seeded repetitions [default: 20]
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Penalty rounds R [default: 5]
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Samples per round k [default: 10]
    #[arg(long, short = 'k')]
    pub samples_per_round: Option<usize>,
    /// Base seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV path
    #[arg(long, short)]
    pub out: PathBuf,
}

pub fn cmd_bench_diversity(args: &BenchDiversityArgs) -> Result<()> {
    let config = RunConfig::load(args.config.as_deref())?;
    let snapshot = load_snapshot(&args.snapshot)?;
    let num_seeds = args.seeds.unwrap_or(config.experiment.sweep_seeds);
    let base_seed = args.seed.unwrap_or(0);
    let rounds = args.rounds.unwrap_or(config.offline.rounds);
    let samples = args.samples_per_round.unwrap_or(config.offline.samples_per_round);

    let index = build_link_index(&snapshot)?;
    let caps = compute_capacities(&snapshot, &index)?;
    let params = ObjectiveParams::new(config.objective.alpha, config.objective.beta)?;
    let q0 = build_qubo(&snapshot, &index, &caps, &params)?;
    println!("effective root seed: {base_seed}");

    // Diversity is measured over the raw per-round samples, duplicates
    // included, so converging to the same optimum counts against a run.
    let arm = |lambda: Option<f64>, seed: u64| -> Result<f64> {
        let dcfg = DiversityConfig {
            rounds,
            samples_per_round: samples,
            lambda,
            dedupe: false,
        };
        let scfg = sampler_config(&config.offline, samples, seed);
        let cset = generate_candidates(&q0, &SaSampler, &dcfg, &scfg, &snapshot.id())?;
        Ok(diversity(&cset.topologies())?)
    };

    let mut csv = String::from("seed,diversity_penalty,diversity_lambda0\n");
    let mut penalized = Vec::with_capacity(num_seeds);
    let mut baseline = Vec::with_capacity(num_seeds);
    for i in 0..num_seeds as u64 {
        let seed = base_seed.wrapping_add(i.wrapping_mul(1000));
        let with_penalty = arm(config.offline.lambda, seed)?;
        let without = arm(Some(0.0), seed)?;
        csv.push_str(&format!("{seed},{with_penalty},{without}\n"));
        penalized.push(with_penalty);
        baseline.push(without);
    }
    atomic_write(&args.out, csv.as_bytes())?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let mean_penalized = mean(&penalized);
    let mean_baseline = mean(&baseline);
    println!(
        "mean diversity with penalty {:.4}, with lambda=0 {:.4} ({:+.1}%)",
        mean_penalized,
        mean_baseline,
        (mean_penalized / mean_baseline - 1.0) * 100.0
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Input snapshot JSON
    #[arg(long)]
    pub snapshot: PathBuf,
    /// Config file; flags override file values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Throughput weight alpha [default: 1]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Fragility weight beta [default: 0.01]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Sampler seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of samples to draw [default: 1]
    #[arg(long, short = 'k')]
    pub num_samples: Option<usize>,
    /// Solver backend [default: sa]
    #[arg(long, value_enum)]
    pub solver: Option<SolverKind>,
    /// Remote solver endpoint (URL or job directory)
    #[arg(long, env = "SWARMTOPO_REMOTE_ENDPOINT")]
    pub endpoint: Option<String>,
    /// Output JSON path; prints to stdout when omitted
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct SolveOutput {
    best_bits: Vec<u8>,
    best_energy: f64,
    throughput: f64,
    fragility: f64,
    objective: f64,
    topologies: Vec<Vec<u8>>,
    energies: Vec<f64>,
}

pub fn cmd_solve(args: &SolveArgs) -> Result<()> {
    let config = RunConfig::load(args.config.as_deref())?;
    let snapshot = load_snapshot(&args.snapshot)?;
    let alpha = args.alpha.unwrap_or(config.objective.alpha);
    let beta = args.beta.unwrap_or(config.objective.beta);
    let seed = args.seed.unwrap_or(0);
    let k = args.num_samples.unwrap_or(1);
    let solver = match args.solver {
        Some(kind) => kind,
        None => solver_from_config(&config.offline.solver)?,
    };
    let endpoint = args.endpoint.clone().or(config.offline.endpoint.clone());

    let index = build_link_index(&snapshot)?;
    let caps = compute_capacities(&snapshot, &index)?;
    let params = ObjectiveParams::new(alpha, beta)?;
    let q: QuboMatrix = build_qubo(&snapshot, &index, &caps, &params)?;
    let sampler = build_sampler(solver, endpoint.as_deref())?;
    let cfg = sampler_config(&config.offline, k, seed);
    println!("effective root seed: {seed}");
    let batch = sampler.sample(&q, &cfg)?;
    let best = batch.best();
    let decomposed = evaluate_decomposed(&batch.topologies[best], &caps, &index, &params)?;
    let output = SolveOutput {
        best_bits: batch.topologies[best].bits().to_vec(),
        best_energy: batch.energies[best],
        throughput: decomposed.throughput,
        fragility: decomposed.fragility,
        objective: decomposed.objective,
        topologies: batch.topologies.iter().map(|t| t.bits().to_vec()).collect(),
        energies: batch.energies.clone(),
    };
    let text = serde_json::to_string_pretty(&output)?;
    match &args.out {
        Some(path) => {
            atomic_write(path, text.as_bytes())?;
            println!(
                "best energy {:.6} (throughput {:.4}, fragility {:.4})",
                output.best_energy, output.throughput, output.fragility
            );
            println!("wrote {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}
