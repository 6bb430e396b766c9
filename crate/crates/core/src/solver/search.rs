//! Multi-start first-improvement local search over routings.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eval::{Evaluator, Goal, Score, Scratch};
use super::{min_fleet, Method, SolveResult, TracePoint};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::rng::{substream, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub seed: u64,
    pub restarts: usize,
    /// Routing evaluations shared by all restarts.
    pub max_evaluations: u64,
    /// Random perturbations tried from each local optimum before a restart
    /// gives up (the count resets on every improvement).
    pub kicks: usize,
    pub trace: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            seed: 0,
            restarts: 16,
            max_evaluations: 200_000,
            kicks: 20,
            trace: false,
        }
    }
}

struct Run {
    score: Score,
    route: Vec<usize>,
    drones: Vec<u32>,
    evaluations: u64,
    trace: Vec<TracePoint>,
}

/// Order used to merge restarts: score, then routing, then drones.
fn run_better(a: &Run, b: &Run) -> bool {
    match a.score.rank(&b.score) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => (&a.route, &a.drones) < (&b.route, &b.drones),
    }
}

struct Walker<'e, 'a> {
    ev: &'e Evaluator<'a>,
    sc: Scratch,
    left: u64,
    used: u64,
    restart: usize,
    trace: Option<Vec<TracePoint>>,
}

impl Walker<'_, '_> {
    fn eval(&mut self, route: &[usize]) -> (Score, Vec<u32>) {
        self.left = self.left.saturating_sub(1);
        self.used += 1;
        let e = self.ev.evaluate(route, &mut self.sc);
        (e.score, e.drones)
    }

    fn note(&mut self, score: &Score) {
        let used = self.used;
        let restart = self.restart;
        if let Some(t) = self.trace.as_mut() {
            t.push(TracePoint {
                restart,
                evaluations: used,
                objective: score.z,
            });
        }
    }

    /// Candidate routings around `route`, in a shuffled order per sweep.
    fn neighbours(&self, route: &[usize], rng: &mut Rng) -> Vec<Vec<usize>> {
        let units = &self.ev.units;
        let m = self.ev.n_facilities();
        let mut used = vec![false; m];
        for &j in route {
            used[j] = true;
        }
        let mut out: Vec<Vec<usize>> = Vec::new();
        // Reassign one unit.
        for (u, unit) in units.iter().enumerate() {
            for &j in &unit.options {
                if j != route[u] {
                    let mut r = route.to_vec();
                    r[u] = j;
                    out.push(r);
                }
            }
        }
        // Close a facility: its units move to their nearest other used
        // facility, or the nearest reachable one.
        for j in (0..m).filter(|&j| used[j]) {
            let mut r = route.to_vec();
            let mut ok = true;
            for (u, unit) in units.iter().enumerate() {
                if r[u] != j {
                    continue;
                }
                let pick = unit
                    .options
                    .iter()
                    .find(|&&o| o != j && used[o])
                    .or_else(|| unit.options.iter().find(|&&o| o != j));
                match pick {
                    Some(&o) => r[u] = o,
                    None => ok = false,
                }
            }
            if ok {
                out.push(r);
            }
        }
        // Open a facility: it takes every unit it is closer to.
        let inst = self.ev.inst;
        for j in (0..m).filter(|&j| !used[j]) {
            let mut r = route.to_vec();
            let mut moved = false;
            for (u, unit) in units.iter().enumerate() {
                if unit.options.contains(&j) && inst.travel(unit.node, j) < inst.travel(unit.node, r[u]) {
                    r[u] = j;
                    moved = true;
                }
            }
            if moved {
                out.push(r);
            }
        }
        // Shift to a facility the k units that gain most travel time by it
        // (k >= 2; single moves are covered above).
        for j in 0..m {
            let mut movers: Vec<(f64, usize)> = units
                .iter()
                .enumerate()
                .filter(|(u, unit)| route[*u] != j && unit.options.contains(&j))
                .map(|(u, unit)| (inst.travel(unit.node, j) - inst.travel(unit.node, route[u]), u))
                .collect();
            movers.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut r = route.to_vec();
            for (k, &(_, u)) in movers.iter().enumerate() {
                r[u] = j;
                if k >= 1 {
                    out.push(r.clone());
                }
            }
        }
        // Swap the facilities of two units.
        for a in 0..units.len() {
            for b in a + 1..units.len() {
                let (ja, jb) = (route[a], route[b]);
                if ja != jb && units[a].options.contains(&jb) && units[b].options.contains(&ja) {
                    let mut r = route.to_vec();
                    r[a] = jb;
                    r[b] = ja;
                    out.push(r);
                }
            }
        }
        out.shuffle(rng);
        out
    }

    /// First-improvement descent. Infeasible starts first shed their drone
    /// excess, since any feasible routing outranks them.
    fn descend(&mut self, mut route: Vec<usize>, mut score: Score, mut drones: Vec<u32>, rng: &mut Rng) -> Run {
        self.note(&score);
        'outer: while self.left > 0 {
            for cand in self.neighbours(&route, rng) {
                if self.left == 0 {
                    break 'outer;
                }
                let (s, d) = self.eval(&cand);
                if s.better_than(&score) {
                    route = cand;
                    score = s;
                    drones = d;
                    self.note(&score);
                    continue 'outer;
                }
            }
            break;
        }
        Run {
            score,
            route,
            drones,
            evaluations: 0,
            trace: Vec::new(),
        }
    }
}

/// k-median++ style start: pick a random number of centres by squared
/// distance sampling, send every unit to its nearest reachable centre (or
/// nearest reachable facility when no centre is in range).
fn seeded_start(ev: &Evaluator<'_>, rng: &mut Rng) -> Vec<usize> {
    let inst = ev.inst;
    let m = ev.n_facilities();
    let p = rng.random_range(1..=m);
    let mut centres: Vec<usize> = Vec::with_capacity(p);
    centres.push(rng.random_range(0..m));
    while centres.len() < p {
        // Distance of each facility to the demand it would relieve: the sum
        // over units of the squared gap to their nearest centre, if closer.
        let weights: Vec<f64> = (0..m)
            .map(|j| {
                if centres.contains(&j) {
                    return 0.0;
                }
                ev.units
                    .iter()
                    .filter(|u| u.options.contains(&j))
                    .map(|u| {
                        let near = centres
                            .iter()
                            .filter(|c| u.options.contains(c))
                            .map(|&c| inst.travel(u.node, c))
                            .fold(f64::INFINITY, f64::min);
                        let gap = (near.min(1e6) - inst.travel(u.node, j)).max(0.0);
                        gap * gap
                    })
                    .sum()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut x = rng.random::<f64>() * total;
        let mut pick = m - 1;
        for (j, w) in weights.iter().enumerate() {
            if x < *w {
                pick = j;
                break;
            }
            x -= w;
        }
        if weights[pick] <= 0.0 {
            break;
        }
        centres.push(pick);
    }
    ev.units
        .iter()
        .map(|u| {
            u.options
                .iter()
                .copied()
                .find(|o| centres.contains(o))
                .unwrap_or(u.options[0])
        })
        .collect()
}

fn restart(ev: &Evaluator<'_>, opts: &SearchOptions, r: usize, quota: u64, fallback: Option<&[usize]>) -> Option<Run> {
    let mut rng = substream(opts.seed, &[r as u64]);
    let mut w = Walker {
        ev,
        sc: ev.scratch(),
        left: quota,
        used: 0,
        restart: r,
        trace: opts.trace.then(Vec::new),
    };
    let nearest: Vec<usize> = ev.units.iter().map(|u| u.options[0]).collect();
    let start = if r == 0 { nearest } else { seeded_start(ev, &mut rng) };
    let (mut score, mut drones) = w.eval(&start);
    let mut route = start;
    if !score.feasible() && r == 0 {
        if let Some(f) = fallback {
            (score, drones) = w.eval(f);
            route = f.to_vec();
        }
    }
    let mut run = w.descend(route, score, drones, &mut rng);
    // Iterated local search: kick two or three units to random reachable
    // facilities and descend again, keeping strict improvements.
    let mut failed = 0;
    while failed < opts.kicks && w.left > 0 && run.score.feasible() {
        let mut kicked = run.route.clone();
        let moves = rng.random_range(2..=3).min(kicked.len());
        for _ in 0..moves {
            let u = rng.random_range(0..kicked.len());
            let opts_u = &ev.units[u].options;
            kicked[u] = opts_u[rng.random_range(0..opts_u.len())];
        }
        let (s, d) = w.eval(&kicked);
        let cand = w.descend(kicked, s, d, &mut rng);
        if cand.score.better_than(&run.score) {
            run = cand;
            failed = 0;
        } else {
            failed += 1;
        }
    }
    run.evaluations = w.used;
    run.trace = w.trace.unwrap_or_default();
    run.score.feasible().then_some(run)
}

/// Routing, drones, evaluation count and trace.
pub(crate) type SearchOutcome = (Vec<usize>, Vec<u32>, u64, Vec<TracePoint>);

/// Runs all restarts and merges them deterministically. Returns the best
/// routing, its drones, the evaluation count and the merged trace.
pub(crate) fn search(ev: &Evaluator<'_>, opts: &SearchOptions, fallback: Option<&[usize]>) -> Result<SearchOutcome> {
    if ev.units.iter().any(|u| u.options.is_empty()) {
        return Err(Error::InfeasibleInstance(
            "a node reaches no facility within endurance".into(),
        ));
    }
    let restarts = opts.restarts.max(1);
    let quota = (opts.max_evaluations / restarts as u64).max(1);
    let runs: Vec<Option<Run>> = (0..restarts)
        .into_par_iter()
        .map(|r| restart(ev, opts, r, quota, fallback))
        .collect();
    let mut best: Option<Run> = None;
    let mut evaluations = 0;
    let mut trace = Vec::new();
    for run in runs.into_iter().flatten() {
        evaluations += run.evaluations;
        trace.extend(run.trace.iter().cloned());
        if best.as_ref().is_none_or(|b| run_better(&run, b)) {
            best = Some(run);
        }
    }
    let best = best.ok_or_else(|| Error::Infeasible(format!("no stable routing found within {} drones", ev.budget)))?;
    Ok((best.route, best.drones, evaluations, trace))
}

/// Multi-start local search for the model given by the instance mode under
/// a budget of `budget` drones.
pub fn local_search(inst: &Instance, budget: u32, opts: &SearchOptions) -> Result<SolveResult> {
    let started = Instant::now();
    let bad = inst.unreachable_nodes();
    if !bad.is_empty() {
        return Err(Error::InfeasibleInstance(format!(
            "nodes {bad:?} reach no facility within endurance"
        )));
    }
    let ev = Evaluator::new(inst, budget, Goal::Response);
    // A minimum-fleet routing is stable whenever the budget covers K*.
    let fleet = min_fleet(inst, opts.seed)?;
    let witness = ev.route_of(&fleet.assignment);
    let (route, drones, evaluations, trace) = search(&ev, opts, Some(&witness))?;
    let asg = ev.assignment(&route, drones);
    SolveResult::from_assignment(
        inst,
        asg,
        Method::LocalSearch,
        budget,
        evaluations,
        started,
        opts.trace.then_some(trace),
    )
}
