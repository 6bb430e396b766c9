use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use dronefleet::conic::{self, ConicFormat};
use dronefleet::harness::{self, ExperimentPlan, Sweep};
use dronefleet::instance::{generate_instance, read_instance, write_instance, ClassLayout, Instance, Mode, Preset};
use dronefleet::queueing::{Assignment, ClassMetrics, ObjectiveValue};
use dronefleet::simulator::{self, Discipline, SimConfig};
use dronefleet::solver::{self, SearchOptions};

#[derive(Parser)]
#[command(
    name = "dronefleet",
    version,
    about = "Drone facility location with congested queues"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random instance from a preset family.
    Generate(GenerateArgs),
    /// Solve the location-allocation model and print the solution as JSON.
    Solve(SolveArgs),
    /// Write the mixed-integer conic program of an instance.
    EmitConic(EmitArgs),
    /// Simulate a solution and write a report.
    Simulate(SimulateArgs),
    /// Run an experiment sweep over seeded preset instances.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Np,
    Sp,
    Dp,
}

impl From<ModelArg> for Mode {
    fn from(m: ModelArg) -> Mode {
        match m {
            ModelArg::Np => Mode::Np,
            ModelArg::Sp => Mode::Sp,
            ModelArg::Dp => Mode::Dp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    SpPaper,
    DpPaper,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Preset {
        match p {
            PresetArg::SpPaper => Preset::SpPaper,
            PresetArg::DpPaper => Preset::DpPaper,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Cbf,
    Lp,
}

#[derive(Clone, Copy, ValueEnum)]
enum DisciplineArg {
    Fcfs,
    Static,
    Dynamic,
}

impl From<DisciplineArg> for Discipline {
    fn from(d: DisciplineArg) -> Discipline {
        match d {
            DisciplineArg::Fcfs => Discipline::Fcfs,
            DisciplineArg::Static => Discipline::Static,
            DisciplineArg::Dynamic => Discipline::Dynamic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Alpha,
    Weights,
    Delta,
    Compare,
}

impl From<SweepArg> for Sweep {
    fn from(s: SweepArg) -> Sweep {
        match s {
            SweepArg::Alpha => Sweep::Alpha,
            SweepArg::Weights => Sweep::Weights,
            SweepArg::Delta => Sweep::Delta,
            SweepArg::Compare => Sweep::Compare,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to the preset's size.
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    facilities: Option<usize>,
    /// Defaults to the preset's model.
    #[arg(long, value_enum)]
    mode: Option<ModelArg>,
    #[arg(long, value_enum, default_value = "sp-paper")]
    preset: PresetArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long)]
    instance: PathBuf,
    /// Budget factor: K = floor((1 + alpha) K*). Defaults to the instance's.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exhaustive enumeration (tiny instances only).
    #[arg(long)]
    oracle: bool,
    /// Total routing evaluations of the local search.
    #[arg(long)]
    max_evaluations: Option<u64>,
    /// Include the improvement trace.
    #[arg(long)]
    trace: bool,
    /// Write the solution here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmitArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "cbf")]
    format: FormatArg,
    /// Drone budget K; computed from K* and alpha when absent.
    #[arg(long)]
    budget: Option<u32>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Solution JSON as written by `solve`.
    #[arg(long)]
    solution: PathBuf,
    /// Defaults to the discipline of the solution's model.
    #[arg(long, value_enum)]
    discipline: Option<DisciplineArg>,
    #[arg(long, default_value_t = 30_000.0)]
    horizon: f64,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    warmup: f64,
    #[arg(long)]
    allow_unstable: bool,
    /// Per-request CSV log of the first replication.
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    sweep: SweepArg,
    #[arg(long, value_enum)]
    preset: PresetArg,
    /// Instance seeds 0..N.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Root seed of the simulations.
    #[arg(long, default_value_t = 0)]
    sim_seed: u64,
    #[arg(long)]
    max_evaluations: Option<u64>,
}

/// Solution file: open flags `x`, routing `y` (facility per node and slot),
/// drones `k`, plus the evaluation.
#[derive(Serialize, Deserialize)]
struct SolutionFile {
    model: Mode,
    budget: u32,
    k_star: u32,
    k_star_exact: bool,
    x: Vec<bool>,
    y: Vec<Vec<usize>>,
    k: Vec<u32>,
    objective: ObjectiveValue,
    metrics: Vec<ClassMetrics>,
    total_wait: f64,
    method: String,
    iterations: u64,
    wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trace: Option<Vec<solver::TracePoint>>,
}

fn load(path: &Path, model: Mode) -> Result<Instance> {
    let inst = read_instance(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(inst.with_mode(model)?)
}

fn with_alpha(inst: Instance, alpha: Option<f64>) -> Result<Instance> {
    match alpha {
        Some(a) if !(a >= 0.0 && a.is_finite()) => bail!("alpha must be finite and nonnegative"),
        Some(a) => {
            let mut fleet = inst.fleet().clone();
            fleet.alpha = a;
            Ok(inst.with_fleet(fleet)?)
        }
        None => Ok(inst),
    }
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let preset = Preset::from(a.preset);
    let (n, m) = preset.sizes();
    let mode = a.mode.map_or(preset.default_mode(), Mode::from);
    let nodes = a.nodes.unwrap_or(n);
    let mut config = preset.config();
    // Keep the preset's share of class-1 nodes when resizing.
    if let ClassLayout::Fixed { class1_count, .. } = &mut config.layout {
        let scaled = (*class1_count as f64 * nodes as f64 / n as f64).round() as usize;
        *class1_count = scaled.clamp(1, nodes);
    }
    let inst = generate_instance(a.seed, nodes, a.facilities.unwrap_or(m), mode, &config)?;
    write_instance(&inst, &a.out)?;
    Ok(())
}

fn solve(a: SolveArgs) -> Result<()> {
    let model = Mode::from(a.model);
    let inst = with_alpha(load(&a.instance, model)?, a.alpha)?;
    let (fleet, budget) = solver::instance_budget(&inst, a.seed)?;
    let result = if a.oracle {
        solver::brute_force(&inst, budget)?
    } else {
        let mut opts = SearchOptions {
            seed: a.seed,
            trace: a.trace,
            ..SearchOptions::default()
        };
        if let Some(n) = a.max_evaluations {
            opts.max_evaluations = n;
        }
        solver::local_search(&inst, budget, &opts)?
    };
    let out = SolutionFile {
        model,
        budget,
        k_star: fleet.k_star,
        k_star_exact: fleet.exact,
        x: result.best.open.clone(),
        y: result.best.y.clone(),
        k: result.best.drones.clone(),
        objective: result.objective,
        metrics: result.metrics,
        total_wait: result.total_wait,
        method: result.method.to_string(),
        iterations: result.iterations,
        wall_time: result.wall_time,
        trace: result.trace,
    };
    write_json(a.out.as_deref(), &out)
}

fn emit_conic(a: EmitArgs) -> Result<()> {
    let inst = with_alpha(load(&a.instance, a.model.into())?, a.alpha)?;
    let budget = match a.budget {
        Some(k) => k,
        None => solver::instance_budget(&inst, a.seed)?.1,
    };
    let program = conic::build(&inst, budget);
    let format = match a.format {
        FormatArg::Cbf => ConicFormat::Cbf,
        FormatArg::Lp => ConicFormat::Lp,
    };
    conic::emit(&program, &a.out, format)?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let text = fs::read_to_string(&a.solution).with_context(|| format!("reading {}", a.solution.display()))?;
    let sol: SolutionFile = serde_json::from_str(&text).context("parsing the solution")?;
    let inst = load(&a.instance, sol.model)?;
    let asg = Assignment {
        y: sol.y,
        open: sol.x,
        drones: sol.k,
    };
    let cfg = SimConfig {
        horizon: a.horizon,
        warmup: a.warmup,
        replications: a.reps,
        seed: a.seed,
        discipline: a.discipline.map_or(Discipline::for_mode(sol.model), Discipline::from),
        allow_unstable: a.allow_unstable,
        record_events: a.events.is_some(),
        ..SimConfig::default()
    };
    let mut report = simulator::simulate(&inst, &asg, &cfg)?;
    if let (Some(path), Some(log)) = (&a.events, report.event_log.take()) {
        simulator::write_event_log(path, &log)?;
    }
    write_json(Some(&a.out), &report)
}

fn experiment(a: ExperimentArgs) -> Result<bool> {
    let mut plan = ExperimentPlan::new(a.sweep.into(), a.preset.into(), a.seeds);
    plan.sim.seed = a.sim_seed;
    if let Some(h) = a.horizon {
        plan.sim.horizon = h;
    }
    if let Some(r) = a.reps {
        plan.sim.replications = r;
    }
    if let Some(n) = a.max_evaluations {
        plan.search.max_evaluations = n;
    }
    let rows = harness::run(&plan)?;
    harness::write_outputs(&plan, &rows, &a.out)?;
    let failed: Vec<_> = rows.iter().filter(|r| !r.ok()).collect();
    for r in &failed {
        eprintln!(
            "seed {} {} alpha {} w1 {}: {}",
            r.seed,
            r.model,
            r.alpha,
            r.w1,
            r.error.as_deref().unwrap_or("")
        );
    }
    eprintln!(
        "{} rows, {} failed, written to {}",
        rows.len(),
        failed.len(),
        a.out.display()
    );
    Ok(failed.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(a) => generate(a).map(|_| true),
        Command::Solve(a) => solve(a).map(|_| true),
        Command::EmitConic(a) => emit_conic(a).map(|_| true),
        Command::Simulate(a) => simulate(a).map(|_| true),
        Command::Experiment(a) => experiment(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
