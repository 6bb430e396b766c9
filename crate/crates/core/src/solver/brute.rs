//! Exhaustive oracle for tiny instances.

use std::time::Instant;

use super::eval::{Evaluator, Goal, Score};
use super::{Method, SolveResult};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::queueing::{self, min_stable_drones, slots_per_node, Assignment};

pub const BRUTE_MAX_FACILITIES: usize = 4;
/// Bound on routed slots: nodes, times classes under static priority.
pub const BRUTE_MAX_UNITS: usize = 8;
pub const BRUTE_MAX_DRONES: u32 = 12;

/// Calls `f` for every routing in lexicographic order (facility indices per
/// unit, first unit most significant).
fn for_each_route(ev: &Evaluator<'_>, mut f: impl FnMut(&[usize])) {
    let n = ev.units.len();
    // Options in index order so that enumeration order is lexicographic.
    let opts: Vec<Vec<usize>> = ev
        .units
        .iter()
        .map(|u| {
            let mut o = u.options.clone();
            o.sort_unstable();
            o
        })
        .collect();
    if opts.iter().any(|o| o.is_empty()) {
        return;
    }
    let mut idx = vec![0usize; n];
    let mut route: Vec<usize> = opts.iter().map(|o| o[0]).collect();
    loop {
        f(&route);
        let mut p = n;
        loop {
            if p == 0 {
                return;
            }
            p -= 1;
            idx[p] += 1;
            if idx[p] < opts[p].len() {
                route[p] = opts[p][idx[p]];
                break;
            }
            idx[p] = 0;
            route[p] = opts[p][0];
        }
    }
}

/// Best routing under the evaluator's own allocation; ties keep the first
/// routing in lexicographic order.
pub(crate) fn enumerate_best(ev: &Evaluator<'_>) -> Result<(Vec<usize>, Vec<u32>)> {
    let mut sc = ev.scratch();
    let mut best: Option<(Score, Vec<usize>, Vec<u32>)> = None;
    for_each_route(ev, |route| {
        let e = ev.evaluate(route, &mut sc);
        if e.score.feasible() && best.as_ref().is_none_or(|(s, _, _)| e.score.better_than(s)) {
            best = Some((e.score, route.to_vec(), e.drones));
        }
    });
    best.map(|(_, r, d)| (r, d))
        .ok_or_else(|| Error::Infeasible(format!("no routing is stable within {} drones", ev.budget)))
}

/// Calls `f` with every allocation of exactly `total` drones over the
/// facilities where `min[j] > 0`, each at least `min[j]`, in lexicographic
/// order.
fn for_each_allocation(min: &[u32], total: u32, f: &mut impl FnMut(&[u32])) {
    let used: Vec<usize> = (0..min.len()).filter(|&j| min[j] > 0).collect();
    let need: u32 = min.iter().sum();
    if need > total || used.is_empty() {
        return;
    }
    let mut k = min.to_vec();
    fn rec(used: &[usize], pos: usize, left: u32, k: &mut Vec<u32>, min: &[u32], f: &mut impl FnMut(&[u32])) {
        let j = used[pos];
        if pos + 1 == used.len() {
            k[j] = min[j] + left;
            f(k);
            return;
        }
        for extra in 0..=left {
            k[j] = min[j] + extra;
            rec(used, pos + 1, left - extra, k, min, f);
        }
        k[j] = min[j];
    }
    rec(&used, 0, total - need, &mut k, min, f);
}

/// Exact optimum by enumeration of routings and every drone allocation
/// spending the whole budget, each scored by [`queueing::evaluate`].
///
/// Spending less than K never helps: every wait is nonincreasing in its
/// facility's drone count. Ties go to smaller total waiting, then fewer open
/// facilities, then the lexicographically least assignment.
pub fn brute_force(inst: &Instance, budget: u32) -> Result<SolveResult> {
    let started = Instant::now();
    let m = inst.n_facilities();
    // Routed slots: one per node, or one per (node, class) under static priority.
    let units = inst.n_nodes() * slots_per_node(inst);
    if m > BRUTE_MAX_FACILITIES || units > BRUTE_MAX_UNITS || budget > BRUTE_MAX_DRONES {
        return Err(Error::SizeExceeded(format!(
            "{m} facilities, {units} routed slots, budget {budget} (limits {BRUTE_MAX_FACILITIES}, {BRUTE_MAX_UNITS}, {BRUTE_MAX_DRONES})"
        )));
    }
    let bad = inst.unreachable_nodes();
    if !bad.is_empty() {
        return Err(Error::InfeasibleInstance(format!(
            "nodes {bad:?} reach no facility within endurance"
        )));
    }
    let ev = Evaluator::new(inst, budget, Goal::Response);
    let mut best: Option<(Score, Assignment)> = None;
    let mut evaluations = 0u64;
    let mut failure: Option<Error> = None;
    for_each_route(&ev, |route| {
        if failure.is_some() {
            return;
        }
        let shell = ev.assignment(route, vec![0; m]);
        let loads = match queueing::facility_loads(inst, &shell) {
            Ok(l) => l,
            Err(e) => {
                failure = Some(e);
                return;
            }
        };
        let min: Vec<u32> = (0..m)
            .map(|j| {
                if shell.open[j] {
                    min_stable_drones(loads[j].total_load())
                } else {
                    0
                }
            })
            .collect();
        for_each_allocation(&min, budget, &mut |k| {
            evaluations += 1;
            let mut asg = shell.clone();
            asg.drones.copy_from_slice(k);
            let (obj, metrics) = match queueing::evaluate(inst, &asg) {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    return;
                }
            };
            let score = Score {
                excess: 0,
                z: obj.weighted,
                total_wait: metrics.iter().map(|c| c.total_wait).sum(),
                open: asg.open_count(),
            };
            if best.as_ref().is_none_or(|(s, _)| score.better_than(s)) {
                best = Some((score, asg));
            }
        });
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let (_, asg) = best.ok_or_else(|| Error::Infeasible(format!("no routing is stable within {budget} drones")))?;
    SolveResult::from_assignment(inst, asg, Method::BruteForce, budget, evaluations, started, None)
}
