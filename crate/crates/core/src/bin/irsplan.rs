use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use irsplan::audit::audit_p3;
use irsplan::io::{load_trajectory, read_file};
use irsplan::pipeline::{
    plan_to_dir, run_sweep, MapSpec, ModelSource, PlanRequest, RunManifest, ScoSettings, MANIFEST_VERSION,
};
use irsplan::radiomap::{build_map, RadioMap};
use irsplan::snrmodel::{fit_with, FitMode, FitOptions, SnrModel};
use irsplan::{Error, LinkClass, ScenarioConfig};

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "irsplan",
    version,
    about = "Energy-minimal trajectory planning under an IRS-assisted rate constraint"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate channels on a grid and write a radio map.
    Map(MapArgs),
    /// Fit the SNR model to a radio map.
    Fit(FitArgs),
    /// Plan a trajectory: fit (or load) the model, initialize, optimize.
    Plan(PlanArgs),
    /// Plan over a grid of IRS sizes, rate targets and map seeds.
    Sweep(SweepArgs),
    /// Check a trajectory file against the planning constraints.
    Audit(AuditArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario TOML; the bundled desk scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of IRS elements, overriding the config.
    #[arg(short = 'M', long = "irs-elements")]
    irs_elements: Option<usize>,
    /// Minimum average rate in Gbps, overriding the config.
    #[arg(long)]
    rmin: Option<f64>,
}

impl ScenarioArgs {
    fn load(&self) -> irsplan::Result<ScenarioConfig> {
        let mut c = match &self.config {
            Some(p) => ScenarioConfig::from_path(p)?,
            None => ScenarioConfig::reference(),
        };
        if let Some(m) = self.irs_elements {
            c.radio.irs_elements = m;
        }
        if let Some(r) = self.rmin {
            c.qos.r_min_gbps = r;
        }
        c.build()?;
        Ok(c)
    }
}

#[derive(Args, Clone)]
struct MapSpecArgs {
    /// Grid cells along x and y.
    #[arg(long, num_args = 2, value_names = ["NX", "NY"], default_values_t = [100, 60])]
    grid: Vec<usize>,
    /// Channel draws averaged per cell.
    #[arg(long, default_value_t = 200)]
    draws: u32,
    /// Map seed; every cell derives its own stream from it.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl MapSpecArgs {
    fn spec(&self) -> MapSpec {
        MapSpec {
            nx: self.grid[0],
            ny: self.grid[1],
            draws_per_cell: self.draws,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    PerClass,
    Global,
}

impl From<ModeArg> for FitMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::PerClass => FitMode::PerClass,
            ModeArg::Global => FitMode::Global,
        }
    }
}

#[derive(Args, Clone, Copy)]
struct ScoArgs {
    /// Relative energy improvement below which SCO stops.
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    /// Iteration cap for SCO.
    #[arg(long, default_value_t = 100)]
    n_it_max: usize,
    /// Trust radius in meters.
    #[arg(long, default_value_t = 1.0)]
    trust_radius: f64,
    /// Initializer grid spacing in meters.
    #[arg(long, default_value_t = 1.0)]
    grid_spacing: f64,
}

impl ScoArgs {
    fn settings(&self) -> ScoSettings {
        ScoSettings {
            epsilon: self.epsilon,
            n_it_max: self.n_it_max,
            trust_radius: self.trust_radius,
            grid_spacing: self.grid_spacing,
        }
    }
}

#[derive(Args)]
struct MapArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    map: MapSpecArgs,
    /// Map file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Radio map written by `irsplan map`.
    #[arg(long)]
    map: PathBuf,
    /// Fit each visibility class separately or one model for the whole map.
    #[arg(long, value_enum, default_value = "per-class")]
    mode: ModeArg,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Radio map to fit; a map is built when neither --map nor --model is given.
    #[arg(long, conflicts_with = "model")]
    map: Option<PathBuf>,
    /// Previously fitted model.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    map_spec: MapSpecArgs,
    /// Fit each visibility class separately or one model for the whole map.
    #[arg(long, value_enum, default_value = "per-class")]
    mode: ModeArg,
    #[command(flatten)]
    sco: ScoArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario TOML; the bundled desk scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Rerun a manifest written by an earlier sweep; options other than --out
    /// and --jobs are ignored.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// IRS sizes.
    #[arg(short = 'M', long = "irs-elements", value_delimiter = ',', default_values_t = [0, 64])]
    irs_elements: Vec<usize>,
    /// Rate targets in Gbps.
    #[arg(long, value_delimiter = ',', default_values_t = [2.0])]
    rmin: Vec<f64>,
    /// Map seeds.
    #[arg(long, value_delimiter = ',', default_values_t = [1])]
    seeds: Vec<u64>,
    /// Grid cells along x and y.
    #[arg(long, num_args = 2, value_names = ["NX", "NY"], default_values_t = [100, 60])]
    grid: Vec<usize>,
    /// Channel draws averaged per cell.
    #[arg(long, default_value_t = 200)]
    draws: u32,
    /// Fit each visibility class separately or one model for the whole map.
    #[arg(long, value_enum, default_value = "per-class")]
    mode: ModeArg,
    #[command(flatten)]
    sco: ScoArgs,
    /// Cells run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory; overrides the manifest's when both are given.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Fitted model used for the rate check.
    #[arg(long)]
    model: PathBuf,
    /// Trajectory CSV written by `irsplan plan`.
    #[arg(long)]
    trajectory: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. }
        | Error::Parse { .. }
        | Error::UnsupportedVersion { .. }
        | Error::InvalidScenario(_)
        | Error::InvalidObstacle(_)
        | Error::Io { .. } => EXIT_CONFIG,
        Error::GraphInfeasible | Error::InfeasibleEndpoint(_) => EXIT_INFEASIBLE,
        _ => EXIT_NUMERICAL,
    }
}

fn cmd_map(a: &MapArgs) -> irsplan::Result<u8> {
    let config = a.scenario.load()?;
    let scenario = config.build()?;
    let spec = a.map.spec();
    let map = build_map(&scenario, spec.nx, spec.ny, spec.draws_per_cell, spec.seed)?;
    map.save(&a.out)?;
    let counts = map.class_counts();
    for class in LinkClass::ALL {
        println!("{class}: {} cells", counts[class.index()]);
    }
    Ok(0)
}

fn cmd_fit(a: &FitArgs) -> irsplan::Result<u8> {
    let config = a.scenario.load()?;
    let scenario = config.build()?;
    let map = RadioMap::load(&a.map)?;
    let opts = FitOptions {
        mode: a.mode.into(),
        ..FitOptions::default()
    };
    let model = fit_with(&map, &scenario, &opts)?;
    model.save(&a.out)?;
    for class in LinkClass::ALL {
        let f = &model.classes[class.index()];
        let p = &f.params;
        print!(
            "{class}: a={:e} b={:e} c={:e} nu={} mu={} residual={:e} points={}",
            p.a, p.b, p.c, p.nu, p.mu, f.residual_norm, f.points
        );
        match f.inherited_from {
            Some(src) => println!(" (copied from {src})"),
            None => println!(),
        }
    }
    Ok(0)
}

fn print_summary(dir: &Path, s: &irsplan::pipeline::RunSummary) {
    println!("status: {}", s.status);
    if let Some(l) = &s.initial_solution {
        println!("initial solution: {l}");
    }
    if let Some(e) = s.final_energy_j {
        println!("final energy: {e:.6} J");
    }
    if let Some(r) = s.average_rate_bits_s {
        println!(
            "average rate: {:.6} Gbps (target {} Gbps)",
            r / 1e9,
            s.r_min_bits_s / 1e9
        );
    }
    if let Some(n) = s.iterations {
        println!("iterations: {n}");
    }
    if let Some(f) = &s.failure {
        println!("failure: {f}");
    }
    println!("output: {}", dir.display());
}

fn status_code(status: &str) -> u8 {
    match status {
        "planned" => 0,
        "infeasible" => EXIT_INFEASIBLE,
        _ => EXIT_NUMERICAL,
    }
}

fn cmd_plan(a: &PlanArgs) -> irsplan::Result<u8> {
    let config = a.scenario.load()?;
    let source = match (&a.map, &a.model) {
        (Some(m), _) => ModelSource::Map(m.clone()),
        (None, Some(m)) => ModelSource::Model(m.clone()),
        (None, None) => ModelSource::Build(a.map_spec.spec()),
    };
    let req = PlanRequest {
        config,
        source,
        fit_mode: a.mode.into(),
        sco: a.sco.settings(),
        out_dir: a.out.clone(),
    };
    let summary = plan_to_dir(&req, None)?;
    print_summary(&a.out, &summary);
    Ok(status_code(&summary.status))
}

fn cmd_sweep(a: &SweepArgs) -> irsplan::Result<u8> {
    let manifest = match &a.manifest {
        Some(p) => {
            let mut m = RunManifest::from_toml_str(&read_file(p)?)?;
            if let Some(out) = &a.out {
                m.output_dir = out.clone();
            }
            m
        }
        None => {
            let scenario = match &a.config {
                Some(p) => ScenarioConfig::from_path(p)?,
                None => ScenarioConfig::reference(),
            };
            let out = a
                .out
                .clone()
                .ok_or_else(|| Error::config("out", "--out is required without --manifest"))?;
            RunManifest {
                version: MANIFEST_VERSION,
                scenario_hash: scenario.build()?.hash(),
                irs_elements: a.irs_elements.clone(),
                r_min_gbps: a.rmin.clone(),
                seeds: a.seeds.clone(),
                map: MapSpec {
                    nx: a.grid[0],
                    ny: a.grid[1],
                    draws_per_cell: a.draws,
                    seed: 0,
                },
                fit_mode: a.mode.into(),
                sco: a.sco.settings(),
                output_dir: out,
                scenario,
            }
        }
    };
    let rows = run_sweep(&manifest, a.jobs)?;
    println!("irs_elements  r_min_gbps  seed  status      init  energy_j");
    for r in &rows {
        println!(
            "{:>12}  {:>10}  {:>4}  {:<10}  {:<4}  {}",
            r.irs_elements,
            r.r_min_gbps,
            r.seed,
            r.status,
            r.initial_solution.as_deref().unwrap_or("-"),
            r.energy_j.map_or("-".to_string(), |e| format!("{e:.6}"))
        );
    }
    println!("results: {}", manifest.output_dir.join("results.csv").display());
    Ok(if rows.iter().all(|r| r.status == "planned") {
        0
    } else {
        EXIT_INFEASIBLE
    })
}

fn cmd_audit(a: &AuditArgs) -> irsplan::Result<u8> {
    let config = a.scenario.load()?;
    let scenario = config.build()?;
    let model = SnrModel::load(&a.model)?;
    let traj = load_trajectory(&a.trajectory)?;
    let report = audit_p3(&traj, &scenario, &model);
    println!(
        "waypoints: {} (expected {})",
        report.waypoints, report.expected_waypoints
    );
    println!("endpoint error: {:e} m", report.endpoint_error);
    println!("max step: {} m (limit {} m)", report.max_step, report.d_max);
    println!(
        "min obstacle level: {} (limit {})",
        report.min_obstacle_margin, report.d_s
    );
    println!("average rate: {} bits/s (target {} bits/s)", report.rate, report.r_min);
    println!("energy: {} J", report.energy);
    let v = report.violations();
    if v.is_empty() {
        println!("feasible");
        Ok(0)
    } else {
        println!("violated: {}", v.join(", "));
        Ok(EXIT_INFEASIBLE)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let result = match &cli.cmd {
        Cmd::Map(a) => cmd_map(a),
        Cmd::Fit(a) => cmd_fit(a),
        Cmd::Plan(a) => cmd_plan(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::Audit(a) => cmd_audit(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
