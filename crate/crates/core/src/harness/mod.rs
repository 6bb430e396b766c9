//! Experiment sweeps over seeded preset instances: drone budget (alpha),
//! class weights, dynamic-priority gap, and cross-discipline comparisons.
//!
//! Every row is a pure function of (instance seed, grid point, model): the
//! solver is seeded with the instance seed and all rows of one instance share
//! the simulation seed, so runs on the same instance use common random
//! numbers.

mod output;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, Mode, Preset};
use crate::queueing::ClassMetrics;
use crate::rng::derive;
use crate::simulator::{self, ClassStats, Discipline, SimConfig};
use crate::solver::{self, SearchOptions};

pub use output::{quantile, summarize, write_outputs, SummaryRow, MANIFEST_FILE, ROWS_FILE, SUMMARY_FILE, TAILS_FILE};

pub const ALPHA_GRID: [f64; 7] = [0.0, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0];
pub const DELTA_GRID: [f64; 3] = [3.0, 10.0, 20.0];
pub const DEFAULT_W1: f64 = 0.7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sweep {
    Alpha,
    Weights,
    Delta,
    Compare,
}

impl Sweep {
    pub fn as_str(self) -> &'static str {
        match self {
            Sweep::Alpha => "alpha",
            Sweep::Weights => "weights",
            Sweep::Delta => "delta",
            Sweep::Compare => "compare",
        }
    }
}

impl fmt::Display for Sweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(Sweep::Alpha),
            "weights" => Ok(Sweep::Weights),
            "delta" => Ok(Sweep::Delta),
            "compare" => Ok(Sweep::Compare),
            other => Err(Error::InvalidArgument(format!("unknown sweep `{other}`"))),
        }
    }
}

/// Grid of one experiment. Rows are produced for every seed and every
/// combination of `alphas` x `weights` x `deltas` x `models`; `deltas` only
/// applies to dynamic-priority rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub sweep: Sweep,
    pub preset: Preset,
    pub seeds: Vec<u64>,
    pub alphas: Vec<f64>,
    /// Class-1 weights; two-class presets use (w1, 1 - w1).
    pub weights: Vec<f64>,
    pub deltas: Vec<f64>,
    pub models: Vec<Mode>,
    pub sim: SimConfig,
    /// The seed field is replaced by each instance seed.
    pub search: SearchOptions,
}

impl ExperimentPlan {
    /// Default grid of a sweep on seeds `0..n_seeds`.
    pub fn new(sweep: Sweep, preset: Preset, n_seeds: u64) -> Self {
        let dp = preset == Preset::DpPaper;
        let w_grid = if dp {
            vec![1.0, 0.7, 0.5, 0.3, 0.0]
        } else {
            vec![1.0, 0.99, 0.7, 0.5, 0.3, 0.1, 0.0]
        };
        let (alphas, weights, deltas, models) = match sweep {
            Sweep::Alpha => (
                ALPHA_GRID.to_vec(),
                vec![DEFAULT_W1],
                DELTA_GRID.to_vec(),
                vec![preset.default_mode()],
            ),
            Sweep::Weights => (
                vec![0.1, 0.2, 0.5],
                w_grid,
                DELTA_GRID.to_vec(),
                vec![preset.default_mode()],
            ),
            Sweep::Delta => (
                vec![0.1, 0.2, 0.5],
                vec![DEFAULT_W1],
                vec![0.0, 3.0, 10.0, 20.0],
                vec![Mode::Np, Mode::Dp],
            ),
            Sweep::Compare => {
                let models = if dp {
                    vec![Mode::Np, Mode::Sp, Mode::Dp]
                } else {
                    vec![Mode::Np, Mode::Sp]
                };
                (vec![0.1], vec![DEFAULT_W1], vec![3.0], models)
            }
        };
        ExperimentPlan {
            sweep,
            preset,
            seeds: (0..n_seeds).collect(),
            alphas,
            weights,
            deltas,
            models,
            sim: SimConfig::default(),
            search: SearchOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.alphas.is_empty() || self.weights.is_empty() || self.models.is_empty() {
            return bad("empty grid");
        }
        if self.models.contains(&Mode::Dp) && self.deltas.is_empty() {
            return bad("dynamic-priority rows need a delta_a grid");
        }
        if self.alphas.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
            return bad("alpha values must be finite and nonnegative");
        }
        if self.weights.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
            return bad("w1 values must lie in [0, 1]");
        }
        if self.deltas.iter().any(|&d| !(d >= 0.0 && d.is_finite())) {
            return bad("delta_a values must be finite and nonnegative");
        }
        if self.preset == Preset::SpPaper && self.models.contains(&Mode::Dp) {
            return bad("sp-paper instances mix classes per node; dynamic priority needs one class per node");
        }
        if self.sweep == Sweep::Delta && !self.models.contains(&Mode::Dp) {
            return bad("a delta sweep needs the dp model");
        }
        let compare_pairs = self
            .models
            .iter()
            .any(|&m| baseline(m).is_some_and(|b| self.models.contains(&b)));
        if self.sweep == Sweep::Compare && !compare_pairs {
            return bad("a comparison needs a model together with its baseline (sp with np, or dp with sp)");
        }
        self.sim.validate()
    }

    fn points(&self) -> Vec<Point> {
        let mut out = Vec::new();
        for &alpha in &self.alphas {
            for &w1 in &self.weights {
                for &model in &self.models {
                    if model == Mode::Dp {
                        for &d in &self.deltas {
                            out.push(Point {
                                alpha,
                                w1,
                                delta_a: Some(d),
                                model,
                            });
                        }
                    } else {
                        out.push(Point {
                            alpha,
                            w1,
                            delta_a: None,
                            model,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Model a comparison row is measured against.
pub fn baseline(model: Mode) -> Option<Mode> {
    match model {
        Mode::Np => None,
        Mode::Sp => Some(Mode::Np),
        Mode::Dp => Some(Mode::Sp),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Point {
    alpha: f64,
    w1: f64,
    delta_a: Option<f64>,
    model: Mode,
}

/// Z_r, sumZ_r, W_r and sumW_r of one class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassValues {
    pub z: f64,
    pub sum_z: f64,
    pub w: f64,
    pub sum_w: f64,
}

impl From<&ClassMetrics> for ClassValues {
    fn from(m: &ClassMetrics) -> Self {
        ClassValues {
            z: m.max_response,
            sum_z: m.total_response,
            w: m.max_wait,
            sum_w: m.total_wait,
        }
    }
}

/// Simulated class values as replication means and 95% half-widths.
fn sim_values(c: &ClassStats) -> (ClassValues, ClassValues) {
    (
        ClassValues {
            z: c.max_response.mean,
            sum_z: c.total_response.mean,
            w: c.max_wait.mean,
            sum_w: c.total_wait.mean,
        },
        ClassValues {
            z: c.max_response.half_width,
            sum_z: c.total_response.half_width,
            w: c.max_wait.half_width,
            sum_w: c.total_wait.half_width,
        },
    )
}

/// Tail curve P(wait > t) of one class: (t, mean, half-width).
pub type Tail = Vec<(f64, f64, f64)>;

/// One solved and simulated grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub seed: u64,
    pub model: Mode,
    pub discipline: Discipline,
    pub alpha: f64,
    pub w1: f64,
    /// Dynamic-priority rows only.
    pub delta_a: Option<f64>,
    pub k_star: u32,
    pub budget: u32,
    pub open: usize,
    pub z_analytic: f64,
    pub z_sim: f64,
    pub z_sim_half_width: f64,
    pub analytic: Vec<ClassValues>,
    pub simulated: Vec<ClassValues>,
    pub sim_half_width: Vec<ClassValues>,
    /// Baseline model and paired relative gaps `(X - Y) / Y` per class,
    /// means over replications (comparison sweeps).
    pub gap_vs: Option<Mode>,
    pub gap: Vec<ClassValues>,
    pub tails: Vec<Tail>,
    pub solve_seconds: f64,
    pub sim_seconds: f64,
    /// Set when the row could not be produced; values are then zero.
    pub error: Option<String>,
}

impl ExperimentRow {
    fn failed(seed: u64, p: &Point, classes: usize, message: String) -> Self {
        ExperimentRow {
            seed,
            model: p.model,
            discipline: Discipline::for_mode(p.model),
            alpha: p.alpha,
            w1: p.w1,
            delta_a: p.delta_a,
            k_star: 0,
            budget: 0,
            open: 0,
            z_analytic: 0.0,
            z_sim: 0.0,
            z_sim_half_width: 0.0,
            analytic: vec![ClassValues::default(); classes],
            simulated: vec![ClassValues::default(); classes],
            sim_half_width: vec![ClassValues::default(); classes],
            gap_vs: None,
            gap: Vec::new(),
            tails: Vec::new(),
            solve_seconds: 0.0,
            sim_seconds: 0.0,
            error: Some(message),
        }
    }

    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn classes(&self) -> usize {
        self.analytic.len()
    }

    /// Same grid point, ignoring the model.
    fn same_point(&self, other: &ExperimentRow) -> bool {
        self.seed == other.seed && self.alpha == other.alpha && self.w1 == other.w1
    }
}

/// Instance of one grid point derived from the preset instance.
fn variant(base: &Instance, p: &Point) -> Result<Instance> {
    let mut inst = base.with_mode(p.model)?;
    if inst.n_classes() == 2 {
        inst = inst.with_weights(vec![p.w1, 1.0 - p.w1])?;
    }
    if let Some(d) = p.delta_a {
        inst = inst.with_delta_a(d)?;
    }
    Ok(inst)
}

struct Solved {
    row: ExperimentRow,
    report: Option<simulator::SimReport>,
}

fn solve_point(plan: &ExperimentPlan, base: &Instance, seed: u64, k_star: u32, p: &Point) -> Result<Solved> {
    let inst = variant(base, p)?;
    let budget = solver::budget(k_star, p.alpha, base.fleet().k_hard_cap);
    let opts = SearchOptions {
        seed,
        trace: false,
        ..plan.search.clone()
    };
    let started = Instant::now();
    let sol = solver::local_search(&inst, budget, &opts)?;
    let solve_seconds = started.elapsed().as_secs_f64();

    let cfg = SimConfig {
        seed: derive(plan.sim.seed, &[seed]),
        discipline: Discipline::for_mode(p.model),
        record_events: false,
        ..plan.sim.clone()
    };
    let started = Instant::now();
    let report = simulator::simulate(&inst, &sol.best, &cfg)?;
    let sim_seconds = started.elapsed().as_secs_f64();

    let (simulated, sim_half_width): (Vec<_>, Vec<_>) = report.classes.iter().map(sim_values).unzip();
    let tails = report
        .classes
        .iter()
        .map(|c| c.tail.iter().map(|tp| (tp.t, tp.p.mean, tp.p.half_width)).collect())
        .collect();
    let row = ExperimentRow {
        seed,
        model: p.model,
        discipline: cfg.discipline,
        alpha: p.alpha,
        w1: p.w1,
        delta_a: p.delta_a,
        k_star,
        budget,
        open: sol.best.open_count(),
        z_analytic: sol.objective.weighted,
        z_sim: report.weighted.mean,
        z_sim_half_width: report.weighted.half_width,
        analytic: sol.metrics.iter().map(ClassValues::from).collect(),
        simulated,
        sim_half_width,
        gap_vs: None,
        gap: Vec::new(),
        tails,
        solve_seconds,
        sim_seconds,
        error: None,
    };
    Ok(Solved {
        row,
        report: Some(report),
    })
}

/// All rows of one instance seed, in grid order.
fn run_seed(plan: &ExperimentPlan, seed: u64) -> Vec<ExperimentRow> {
    let points = plan.points();
    let classes = plan.preset.config().layout.classes();
    let fail_all = |e: Error| {
        points
            .iter()
            .map(|p| ExperimentRow::failed(seed, p, classes, e.to_string()))
            .collect::<Vec<_>>()
    };
    let base = match plan.preset.generate(seed) {
        Ok(b) => b,
        Err(e) => return fail_all(e),
    };
    // One K* for every model of the plan (the largest), so that compared
    // models always get the same number of drones.
    let mut k_star = 0;
    for &model in &plan.models {
        match base.with_mode(model).and_then(|inst| solver::min_fleet(&inst, seed)) {
            Ok(f) => k_star = k_star.max(f.k_star),
            Err(e) => return fail_all(e),
        }
    }
    let mut solved: Vec<Solved> = points
        .iter()
        .map(|p| {
            solve_point(plan, &base, seed, k_star, p).unwrap_or_else(|e| Solved {
                row: ExperimentRow::failed(seed, p, classes, e.to_string()),
                report: None,
            })
        })
        .collect();
    if plan.sweep == Sweep::Compare {
        attach_gaps(&mut solved);
    }
    solved.into_iter().map(|s| s.row).collect()
}

fn attach_gaps(solved: &mut [Solved]) {
    for x in 0..solved.len() {
        let Some(base_model) = baseline(solved[x].row.model) else {
            continue;
        };
        let partner = solved
            .iter()
            .position(|s| s.row.model == base_model && s.row.same_point(&solved[x].row) && s.report.is_some());
        let (Some(y), Some(rx)) = (partner, solved[x].report.as_ref()) else {
            continue;
        };
        let ry = solved[y].report.as_ref().expect("checked");
        let gap = simulator::gaps(rx, ry)
            .iter()
            .map(|g| ClassValues {
                z: g.max_response.mean,
                sum_z: g.total_response.mean,
                w: g.max_wait.mean,
                sum_w: g.total_wait.mean,
            })
            .collect();
        solved[x].row.gap_vs = Some(base_model);
        solved[x].row.gap = gap;
    }
}

/// Runs every row of the plan. Failed rows carry their error and do not stop
/// the others; the order is seeds, then grid order, whatever the thread
/// schedule.
pub fn run(plan: &ExperimentPlan) -> Result<Vec<ExperimentRow>> {
    plan.validate()?;
    let per_seed: Vec<Vec<ExperimentRow>> = plan.seeds.par_iter().map(|&s| run_seed(plan, s)).collect();
    Ok(per_seed.into_iter().flatten().collect())
}

pub fn run_alpha_sweep(plan: &ExperimentPlan) -> Result<Vec<ExperimentRow>> {
    expect_sweep(plan, Sweep::Alpha)?;
    run(plan)
}

pub fn run_weight_sweep(plan: &ExperimentPlan) -> Result<Vec<ExperimentRow>> {
    expect_sweep(plan, Sweep::Weights)?;
    run(plan)
}

pub fn run_delta_sweep(plan: &ExperimentPlan) -> Result<Vec<ExperimentRow>> {
    expect_sweep(plan, Sweep::Delta)?;
    run(plan)
}

pub fn run_discipline_compare(plan: &ExperimentPlan) -> Result<Vec<ExperimentRow>> {
    expect_sweep(plan, Sweep::Compare)?;
    run(plan)
}

fn expect_sweep(plan: &ExperimentPlan, sweep: Sweep) -> Result<()> {
    if plan.sweep != sweep {
        return Err(Error::InvalidArgument(format!(
            "plan is a {} sweep, not {sweep}",
            plan.sweep
        )));
    }
    Ok(())
}
