//! Command-line front end: radio map generation and fitting, planning,
//! baselines and parameter sweeps.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage error or unreadable
//! input, 3 the requested rate is infeasible.

pub mod svg;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use irsplan::baselines::{lower_bound, max_rate_trajectory, MaxRateConfig};
use irsplan::graphinit::{initial_pair, GraphError};
use irsplan::radiomap::{fit_model, generate_map, RadioMap, RadioMapError, SnrModel};
use irsplan::rmap::{plan, RmapConfig, RmapError, Trajectory};
use irsplan::scenario::{load_scenario_file, with_random_obstacles, Point, Scenario, ScenarioError};
use irsplan::socp;

#[derive(Debug, Parser)]
#[command(name = "irsplan", version, about = "Energy-aware robot trajectories with IRS-assisted mm-wave uplink")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate or fit a radio map.
    #[command(subcommand)]
    Radiomap(RadiomapCommand),
    /// Plan a minimum-energy trajectory that meets an average rate.
    Plan(PlanArgs),
    /// Rate-maximizing comparison trajectory.
    Baseline(BaselineArgs),
    /// Energy lower bound without obstacles and rate target.
    Bound(BoundArgs),
    /// Run every method over a grid of M, K, r_min and instance seeds.
    Sweep(SweepArgs),
}

#[derive(Debug, Subcommand)]
pub enum RadiomapCommand {
    Generate(GenerateArgs),
    Fit(FitArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub nx: usize,
    #[arg(long, default_value_t = 30)]
    pub ny: usize,
    /// Channel samples per cell.
    #[arg(long, default_value_t = 200)]
    pub samples: u64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Override the number of IRS elements.
    #[arg(long)]
    pub irs_elements: Option<usize>,
    /// Binary map file; a `.meta` description is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the map as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub map: PathBuf,
    /// TOML file with the five model parameters and the fit residual.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OutDir {
    #[arg(long, env = "IRSPLAN_OUT_DIR", default_value = "irsplan-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Minimum average rate in bit/s.
    #[arg(long)]
    pub rmin: f64,
    /// Override the number of slots.
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Trust-region shrink factor.
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 100)]
    pub n_it: usize,
    #[arg(long, default_value_t = 1.0)]
    pub t_init: f64,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Rate target the result is checked against (bit/s).
    #[arg(long, default_value_t = 0.0)]
    pub rmin: f64,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 100)]
    pub n_it: usize,
    #[arg(long, default_value_t = 1.0)]
    pub t_init: f64,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Also write the bound trajectory CSV here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rmap,
    Maxrate,
    Bound,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Rmap => "rmap",
            Method::Maxrate => "maxrate",
            Method::Bound => "bound",
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// IRS element counts.
    #[arg(long = "M", value_delimiter = ',', required = true)]
    pub m: Vec<usize>,
    /// Slot counts.
    #[arg(long = "K", value_delimiter = ',', required = true)]
    pub k: Vec<usize>,
    /// Rate targets in bit/s.
    #[arg(long, value_delimiter = ',', required = true)]
    pub rmin: Vec<f64>,
    /// Instance seeds; each seeds the radio map and, with `--obstacles`,
    /// the obstacle placement.
    #[arg(long, value_delimiter = ',', required = true)]
    pub seeds: Vec<u64>,
    /// Replace the scenario obstacles with this many random ones.
    #[arg(long)]
    pub obstacles: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "rmap,maxrate,bound")]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = 50)]
    pub nx: usize,
    #[arg(long, default_value_t = 30)]
    pub ny: usize,
    #[arg(long, default_value_t = 200)]
    pub samples: u64,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[command(flatten)]
    pub out: OutDir,
}

/// Marks an error as a usage error (exit code 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct Usage(pub String);

/// Maps an error chain onto the documented exit codes.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() || cause.is::<ScenarioError>() || cause.is::<toml::de::Error>() {
            return 2;
        }
        if let Some(RadioMapError::Io { .. } | RadioMapError::Format { .. }) = cause.downcast_ref() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<std::io::Error>() {
            if e.kind() == std::io::ErrorKind::NotFound {
                return 2;
            }
        }
        if let Some(GraphError::Infeasible { .. }) = cause.downcast_ref() {
            return 3;
        }
        if let Some(RmapError::InitialInfeasible { .. } | RmapError::Graph(GraphError::Infeasible { .. })) =
            cause.downcast_ref()
        {
            return 3;
        }
    }
    1
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Radiomap(RadiomapCommand::Generate(a)) => cmd_generate(&a),
        Command::Radiomap(RadiomapCommand::Fit(a)) => cmd_fit(&a),
        Command::Plan(a) => cmd_plan(&a),
        Command::Baseline(a) => cmd_baseline(&a),
        Command::Bound(a) => cmd_bound(&a),
        Command::Sweep(a) => cmd_sweep(&a),
    }
}

fn load(path: &Path, k: Option<usize>) -> Result<Scenario> {
    let mut s = load_scenario_file(path)?;
    if let Some(k) = k {
        s.k = k;
        s.validate().with_context(|| format!("--K {k}"))?;
    }
    Ok(s)
}

fn load_model(path: &Path) -> Result<SnrModel> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read model file {}", path.display()))?;
    SnrModel::from_toml(&text).with_context(|| format!("cannot parse model file {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn write_trajectory(s: &Scenario, t: &Trajectory, path: &Path) -> Result<()> {
    t.write_csv(s, create(path)?).with_context(|| format!("writing {}", path.display()))
}

fn write_svg(path: &Path, s: &Scenario, map: Option<&RadioMap>, paths: &[(&str, &[Point])]) -> Result<()> {
    fs::write(path, svg::render(s, map, paths)).with_context(|| format!("writing {}", path.display()))
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let mut s = load(&a.scenario, None)?;
    if let Some(m) = a.irs_elements {
        s.radio.m_irs = m;
    }
    let map = generate_map(&s, a.nx, a.ny, a.samples, a.seed)?;
    map.save(&a.out)?;
    if let Some(csv) = &a.csv {
        map.write_csv(create(csv)?).with_context(|| format!("writing {}", csv.display()))?;
    }
    println!("wrote {}x{} map ({} samples/cell, seed {}) to {}", a.nx, a.ny, a.samples, a.seed, a.out.display());
    Ok(())
}

fn cmd_fit(a: &FitArgs) -> Result<()> {
    let s = load(&a.scenario, None)?;
    let map = RadioMap::load(&a.map)?;
    let m = fit_model(&map, &s)?;
    fs::write(&a.out, m.to_toml()).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "a = {:.4e}, b = {:.4e}, c = {:.4e}, nu = {:.4}, mu = {:.4}, rms residual {:.3} dB",
        m.a_hat, m.b_hat, m.c_hat, m.nu_hat, m.mu_hat, m.fit_residual_db
    );
    Ok(())
}

fn cmd_plan(a: &PlanArgs) -> Result<()> {
    let s = load(&a.scenario, a.k)?;
    let map = RadioMap::load(&a.map)?;
    let m = load_model(&a.model)?;
    let cfg = RmapConfig {
        epsilon: a.epsilon,
        n_it_max: a.n_it,
        tau: a.tau,
        t_init: a.t_init,
        r_min: a.rmin,
        ..RmapConfig::default()
    };
    let p = plan(&s, &m, &map, &cfg)?;
    let dir = &a.out.out_dir;
    write_trajectory(&s, &p.trajectory, &dir.join("trajectory.csv"))?;
    let trace_path = dir.join("trace.csv");
    p.trace.write_csv(create(&trace_path)?).with_context(|| format!("writing {}", trace_path.display()))?;
    let initial = format!("initial_{}", p.choice);
    write_svg(
        &dir.join("plan.svg"),
        &s,
        Some(&map),
        &[(&initial, &p.initial.positions), ("rmap", &p.trajectory.positions)],
    )?;
    println!(
        "initial {} trajectory {:.2} J, planned {:.2} J after {} iterations ({}); average map rate {:.4e} bit/s",
        p.choice,
        p.initial.energy_j,
        p.trajectory.energy_j,
        p.trace.iterations(),
        p.trace.stop,
        p.trajectory.avg_rate_map
    );
    Ok(())
}

fn cmd_baseline(a: &BaselineArgs) -> Result<()> {
    let s = load(&a.scenario, a.k)?;
    let map = RadioMap::load(&a.map)?;
    let m = load_model(&a.model)?;
    let cfg = MaxRateConfig { t_init: a.t_init, epsilon: a.epsilon, n_it_max: a.n_it, ..MaxRateConfig::default() };
    let (_, mr) = initial_pair(&s, &map)?;
    let res = max_rate_trajectory(&s, &m, &map, &mr, &cfg)?;
    let dir = &a.out.out_dir;
    write_trajectory(&s, &res.trajectory, &dir.join("maxrate_trajectory.csv"))?;
    let trace_path = dir.join("maxrate_trace.csv");
    res.trace.write_csv(create(&trace_path)?).with_context(|| format!("writing {}", trace_path.display()))?;
    write_svg(&dir.join("maxrate.svg"), &s, Some(&map), &[("maxrate", &res.trajectory.positions)])?;
    let t = &res.trajectory;
    println!(
        "max-rate trajectory: {:.2} J, average map rate {:.4e} bit/s ({}), {} iterations",
        t.energy_j,
        t.avg_rate_map,
        if t.avg_rate_map >= a.rmin { "meets r_min" } else { "below r_min" },
        res.trace.iterations()
    );
    Ok(())
}

fn cmd_bound(a: &BoundArgs) -> Result<()> {
    let s = load(&a.scenario, a.k)?;
    let (e, t) = lower_bound(&s, socp::DEFAULT_TOL, socp::DEFAULT_MAX_ITER)?;
    if let Some(out) = &a.out {
        write_trajectory(&s, &t, out)?;
    }
    println!("K,energy_j\n{},{:.6}", s.k, e);
    Ok(())
}

/// One line of the sweep aggregate CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub r_min: f64,
    pub seed: u64,
    pub method: Method,
    pub energy: Option<f64>,
    pub avg_rate_map: Option<f64>,
    pub iterations: Option<usize>,
    pub status: String,
}

pub fn read_sweep_csv<R: std::io::Read>(r: R) -> Result<Vec<SweepRow>, csv::Error> {
    csv::Reader::from_reader(r).deserialize().collect()
}

struct Instance {
    m: usize,
    seed: u64,
    scenario: Scenario,
    map: RadioMap,
    model: SnrModel,
}

fn build_instance(base: &Scenario, a: &SweepArgs, m: usize, seed: u64) -> Result<Instance> {
    let mut s = match a.obstacles {
        Some(n) => with_random_obstacles(base, n, seed)?,
        None => base.clone(),
    };
    s.radio.m_irs = m;
    let map = generate_map(&s, a.nx, a.ny, a.samples, seed)?;
    let model = fit_model(&map, &s)?;
    Ok(Instance { m, seed, scenario: s, map, model })
}

struct RunOutcome {
    instance: usize,
    row: SweepRow,
    trajectory: Option<Trajectory>,
}

fn run_method(inst: &Instance, k: usize, r_min: f64, method: Method, a: &SweepArgs) -> RunOutcome {
    let mut row = SweepRow {
        m: inst.m,
        k,
        r_min,
        seed: inst.seed,
        method,
        energy: None,
        avg_rate_map: None,
        iterations: None,
        status: String::new(),
    };
    let mut s = inst.scenario.clone();
    s.k = k;
    let result: Result<(Trajectory, Option<usize>, String)> = (|| {
        s.validate()?;
        match method {
            Method::Rmap => {
                let cfg = RmapConfig { epsilon: a.epsilon, tau: a.tau, r_min, ..RmapConfig::default() };
                let p = plan(&s, &inst.model, &inst.map, &cfg)?;
                Ok((p.trajectory, Some(p.trace.iterations()), p.trace.stop.to_string()))
            }
            Method::Maxrate => {
                let (_, mr) = initial_pair(&s, &inst.map)?;
                let cfg = MaxRateConfig { epsilon: a.epsilon, ..MaxRateConfig::default() };
                let res = max_rate_trajectory(&s, &inst.model, &inst.map, &mr, &cfg)?;
                let status = if res.trajectory.avg_rate_map >= r_min {
                    res.trace.stop.to_string()
                } else {
                    "rate_below_rmin".to_string()
                };
                Ok((res.trajectory, Some(res.trace.iterations()), status))
            }
            Method::Bound => {
                let (_, t) = lower_bound(&s, socp::DEFAULT_TOL, socp::DEFAULT_MAX_ITER)?;
                let t = t.with_map(&s, &inst.map)?;
                Ok((t, None, "optimal".to_string()))
            }
        }
    })();
    match result {
        Ok((t, iterations, status)) => {
            row.energy = Some(t.energy_j);
            row.avg_rate_map = Some(t.avg_rate_map);
            row.iterations = iterations;
            row.status = status;
            RunOutcome { instance: 0, row, trajectory: Some(t) }
        }
        Err(e) => {
            row.status = match exit_code(&e) {
                3 => "infeasible".to_string(),
                _ => format!("error: {e:#}"),
            };
            RunOutcome { instance: 0, row, trajectory: None }
        }
    }
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    for (name, empty) in [
        ("--M", a.m.is_empty()),
        ("--K", a.k.is_empty()),
        ("--rmin", a.rmin.is_empty()),
        ("--seeds", a.seeds.is_empty()),
        ("--methods", a.methods.is_empty()),
    ] {
        if empty {
            bail!(Usage(format!("{name} needs at least one value")));
        }
    }
    let base = load(&a.scenario, None)?;
    let keys: Vec<(usize, u64)> = a.m.iter().flat_map(|&m| a.seeds.iter().map(move |&seed| (m, seed))).collect();
    let instances: Vec<Result<Instance>> =
        keys.par_iter().map(|&(m, seed)| build_instance(&base, a, m, seed)).collect();

    let mut jobs = Vec::new();
    for (i, &(m, seed)) in keys.iter().enumerate() {
        for &k in &a.k {
            for &r in &a.rmin {
                for &method in &a.methods {
                    jobs.push((i, m, seed, k, r, method));
                }
            }
        }
    }
    let outcomes: Vec<RunOutcome> = jobs
        .par_iter()
        .map(|&(i, m, seed, k, r_min, method)| match &instances[i] {
            Ok(inst) => RunOutcome { instance: i, ..run_method(inst, k, r_min, method, a) },
            Err(e) => RunOutcome {
                instance: i,
                row: SweepRow {
                    m,
                    k,
                    r_min,
                    seed,
                    method,
                    energy: None,
                    avg_rate_map: None,
                    iterations: None,
                    status: format!("error: {e:#}"),
                },
                trajectory: None,
            },
        })
        .collect();

    let dir = &a.out.out_dir;
    let runs = dir.join("runs");
    let mut agg = csv::Writer::from_writer(create(&dir.join("aggregate.csv"))?);
    // jobs are ordered by instance, K, r_min, method
    let same_case = |x: &RunOutcome, y: &RunOutcome| {
        x.instance == y.instance && x.row.k == y.row.k && x.row.r_min.to_bits() == y.row.r_min.to_bits()
    };
    for group in outcomes.chunk_by(same_case) {
        let r0 = &group[0].row;
        let tag = format!("M{}_K{}_r{:e}_s{}", r0.m, r0.k, r0.r_min, r0.seed);
        let mut paths = Vec::new();
        for o in group {
            agg.serialize(&o.row)?;
            log::info!("{tag} {}: {}", o.row.method.name(), o.row.status);
        }
        if let Ok(inst) = &instances[group[0].instance] {
            let mut s = inst.scenario.clone();
            s.k = r0.k;
            for o in group {
                if let Some(t) = &o.trajectory {
                    write_trajectory(&s, t, &runs.join(format!("{tag}_{}.csv", o.row.method.name())))?;
                    paths.push((o.row.method.name(), t.positions.as_slice()));
                }
            }
            if !paths.is_empty() {
                write_svg(&runs.join(format!("{tag}.svg")), &s, Some(&inst.map), &paths)?;
            }
        }
    }
    agg.flush()?;
    println!("{} runs written to {}", outcomes.len(), dir.join("aggregate.csv").display());
    Ok(())
}
