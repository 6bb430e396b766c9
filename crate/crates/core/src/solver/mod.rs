//! Feasibility checks, fleet sizing, the drone budget, an enumeration oracle
//! for tiny instances and a multi-start local search.
//!
//! Both solvers search over routings only. For a fixed routing the drone
//! allocation is solved directly (see [`eval`]), so every structural move is
//! scored with its best allocation.

mod brute;
pub mod eval;
mod search;

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::queueing::{self, is_stable, streams, Assignment, ClassMetrics, ObjectiveValue};

pub use brute::{brute_force, BRUTE_MAX_DRONES, BRUTE_MAX_FACILITIES, BRUTE_MAX_UNITS};
pub use eval::{Evaluator, Goal, Score, TIE_TOL};
pub use search::{local_search, SearchOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BruteForce,
    LocalSearch,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::BruteForce => "brute_force",
            Method::LocalSearch => "local_search",
        })
    }
}

/// Improvement recorded during search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub restart: usize,
    pub evaluations: u64,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub best: Assignment,
    pub objective: ObjectiveValue,
    pub metrics: Vec<ClassMetrics>,
    /// Rate-weighted waiting time summed over classes (first tie-breaker).
    pub total_wait: f64,
    pub method: Method,
    /// Drone budget K the solution respects.
    pub budget: u32,
    /// Routings evaluated.
    pub iterations: u64,
    /// Seconds.
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TracePoint>>,
}

impl SolveResult {
    pub(crate) fn from_assignment(
        inst: &Instance,
        best: Assignment,
        method: Method,
        budget: u32,
        iterations: u64,
        started: Instant,
        trace: Option<Vec<TracePoint>>,
    ) -> Result<Self> {
        let (objective, metrics) = queueing::evaluate(inst, &best)?;
        let total_wait = metrics.iter().map(|m| m.total_wait).sum();
        Ok(SolveResult {
            best,
            objective,
            metrics,
            total_wait,
            method,
            budget,
            iterations,
            wall_time: started.elapsed().as_secs_f64(),
            trace,
        })
    }
}

/// Constraint a candidate assignment breaks first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "constraint", rename_all = "snake_case")]
pub enum Violation {
    /// Wrong dimensions or unknown facility: not a complete single assignment.
    Shape { detail: String },
    /// Demand sent to a facility that is not open.
    ClosedFacility { node: usize, slot: usize, facility: usize },
    /// Facility beyond the drone endurance.
    Range { node: usize, slot: usize, facility: usize },
    /// Open facility whose drones do not exceed its load by the margin.
    Stability { facility: usize, load: f64, drones: u32 },
    /// More drones than the budget.
    Budget { total: u64, budget: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape { detail } => write!(f, "assignment: {detail}"),
            Violation::ClosedFacility { node, slot, facility } => {
                write!(f, "node {node} slot {slot} assigned to closed facility {facility}")
            }
            Violation::Range { node, slot, facility } => {
                write!(f, "node {node} slot {slot} cannot reach facility {facility}")
            }
            Violation::Stability { facility, load, drones } => {
                write!(f, "facility {facility} unstable: load {load:.6} with {drones} drones")
            }
            Violation::Budget { total, budget } => write!(f, "{total} drones exceed the budget of {budget}"),
        }
    }
}

/// Checks single assignment, openness, range, stability and (when given)
/// the drone budget, in that order.
pub fn feasible(inst: &Instance, asg: &Assignment, budget: Option<u32>) -> std::result::Result<(), Violation> {
    if let Err(e) = asg.check_shape(inst) {
        return Err(Violation::Shape { detail: e.to_string() });
    }
    for (i, slots) in asg.y.iter().enumerate() {
        for (s, &j) in slots.iter().enumerate() {
            if !asg.open[j] {
                return Err(Violation::ClosedFacility {
                    node: i,
                    slot: s,
                    facility: j,
                });
            }
        }
    }
    for (i, slots) in asg.y.iter().enumerate() {
        for (s, &j) in slots.iter().enumerate() {
            if !inst.reachable(i, j) {
                return Err(Violation::Range {
                    node: i,
                    slot: s,
                    facility: j,
                });
            }
        }
    }
    let loads = queueing::facility_loads(inst, asg).map_err(|e| Violation::Shape { detail: e.to_string() })?;
    for (j, load) in loads.iter().enumerate() {
        if asg.open[j] && !is_stable(load.total_load(), asg.drones[j]) {
            return Err(Violation::Stability {
                facility: j,
                load: load.total_load(),
                drones: asg.drones[j],
            });
        }
    }
    if let Some(budget) = budget {
        let total = asg.total_drones();
        if total > u64::from(budget) {
            return Err(Violation::Budget { total, budget });
        }
    }
    Ok(())
}

/// Drone budget `floor((1 + alpha) K*)`, capped, and never below K*.
pub fn budget(k_star: u32, alpha: f64, cap: Option<u32>) -> u32 {
    // The small offset keeps products such as 1.1 * 50 = 55.000000000000007
    // or 1.15 * 20 = 22.999999999999996 on the intended integer.
    let scaled = ((1.0 + alpha) * f64::from(k_star) + 1e-9).floor();
    let scaled = if scaled >= f64::from(u32::MAX) {
        u32::MAX
    } else {
        scaled as u32
    };
    let capped = cap.map_or(scaled, |c| scaled.min(c));
    capped.max(k_star)
}

/// Minimum stable fleet and a routing attaining it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FleetResult {
    pub k_star: u32,
    pub assignment: Assignment,
    /// Proven minimal (exhaustive); otherwise a search upper bound.
    pub exact: bool,
    pub method: Method,
}

/// Routings above this count are searched instead of enumerated.
pub const FLEET_ENUMERATION_LIMIT: f64 = 1e6;

/// Side model: fewest drones keeping every queue stable, with no budget.
pub fn min_fleet(inst: &Instance, seed: u64) -> Result<FleetResult> {
    let bad = inst.unreachable_nodes();
    if !bad.is_empty() {
        return Err(Error::InfeasibleInstance(format!(
            "nodes {bad:?} reach no facility within endurance"
        )));
    }
    let ev = Evaluator::new(inst, u32::MAX, Goal::Fleet);
    let count: f64 = ev.units.iter().map(|u| u.options.len() as f64).product();
    if count <= FLEET_ENUMERATION_LIMIT {
        let (route, drones) = brute::enumerate_best(&ev)?;
        let assignment = ev.assignment(&route, drones);
        return Ok(FleetResult {
            k_star: assignment.drones.iter().sum(),
            assignment,
            exact: true,
            method: Method::BruteForce,
        });
    }
    let opts = SearchOptions {
        seed,
        ..SearchOptions::default()
    };
    let (route, drones, _, _) = search::search(&ev, &opts, None)?;
    let assignment = ev.assignment(&route, drones);
    Ok(FleetResult {
        k_star: assignment.drones.iter().sum(),
        assignment,
        exact: false,
        method: Method::LocalSearch,
    })
}

/// Lower bound on K*: each node's load at its cheapest facility, pooled.
pub fn fleet_lower_bound(inst: &Instance) -> u32 {
    let mut pooled = 0.0;
    for s in streams(inst) {
        let best = (0..inst.n_facilities())
            .filter(|&j| inst.reachable(s.node, j))
            .map(|j| inst.service(s.node, j))
            .fold(f64::INFINITY, f64::min);
        pooled += s.rate * best;
    }
    queueing::min_stable_drones(pooled)
}

/// Budget for an instance from its own fleet parameters: K* via
/// [`min_fleet`], then [`budget`] with the instance's alpha and cap.
pub fn instance_budget(inst: &Instance, seed: u64) -> Result<(FleetResult, u32)> {
    let fleet = min_fleet(inst, seed)?;
    let f = inst.fleet();
    let k = budget(fleet.k_star, f.alpha, f.k_hard_cap);
    Ok((fleet, k))
}

/// Number of assignment slots the solvers route, for size checks.
pub fn routed_units(inst: &Instance) -> usize {
    Evaluator::new(inst, 0, Goal::Fleet).units.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queueing::fixtures;

    #[test]
    fn feasibility_verdicts() {
        let inst = fixtures::np(&[0.4], vec![vec![1.0]]);
        let ok = Assignment::from_routes(vec![vec![0]], vec![1]);
        assert_eq!(feasible(&inst, &ok, Some(1)), Ok(()));

        let mut closed = ok.clone();
        closed.open[0] = false;
        assert!(matches!(
            feasible(&inst, &closed, None),
            Err(Violation::ClosedFacility { facility: 0, .. })
        ));

        let tight = fixtures::np(&[1.0], vec![vec![1.0]]);
        let at_load = Assignment::from_routes(vec![vec![0]], vec![1]);
        assert!(matches!(
            feasible(&tight, &at_load, None),
            Err(Violation::Stability { .. })
        ));

        assert!(matches!(
            feasible(&inst, &ok, Some(0)),
            Err(Violation::Budget { total: 1, budget: 0 })
        ));
        let wrong = Assignment::from_routes(vec![vec![0], vec![0]], vec![1]);
        assert!(matches!(feasible(&inst, &wrong, None), Err(Violation::Shape { .. })));
    }

    #[test]
    fn range_violation() {
        let inst = fixtures::np(&[0.4], vec![vec![1.0, 100.0]]);
        let far = Assignment::from_routes(vec![vec![1]], vec![0, 1]);
        assert!(matches!(
            feasible(&inst, &far, None),
            Err(Violation::Range { facility: 1, .. })
        ));
    }

    #[test]
    fn fleet_examples() {
        let one = fixtures::np(&[0.5], vec![vec![1.0]]);
        let r = min_fleet(&one, 0).unwrap();
        assert_eq!(r.k_star, 1);
        assert!(r.exact);
        assert_eq!(min_fleet(&fixtures::np(&[1.2], vec![vec![1.0]]), 0).unwrap().k_star, 2);
        let stranded = fixtures::np(&[0.5], vec![vec![100.0]]);
        assert!(matches!(min_fleet(&stranded, 0), Err(Error::InfeasibleInstance(_))));
    }

    #[test]
    fn fleet_pools_small_loads() {
        // Two 0.4 loads fit one queue (0.8 < 1); split they need two drones.
        let inst = fixtures::np(&[0.4, 0.4], vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        let r = min_fleet(&inst, 0).unwrap();
        assert_eq!(r.k_star, 1);
        assert_eq!(r.assignment.open_count(), 1);
        assert!(r.k_star >= fleet_lower_bound(&inst));
    }

    #[test]
    fn budget_examples() {
        assert_eq!(budget(50, 0.2, None), 60);
        assert_eq!(budget(50, 0.0, None), 50);
        assert_eq!(budget(50, 1.0, Some(60)), 60);
        assert_eq!(budget(50, 0.1, None), 55);
        assert_eq!(budget(20, 0.15, None), 23);
        // A cap below K* never cuts into the minimum fleet.
        assert_eq!(budget(50, 0.5, Some(40)), 50);
    }
}
