//! Closed-form congestion analytics.
//!
//! Every open facility is approximated by a single M/G/1 server whose
//! service time is the drone flight time divided by the drone count k_j.
//! Waiting times follow from Pollaczek-Khinchine (FCFS), the classical
//! non-preemptive static-priority result, and the upper bound for the
//! delay-dependent discipline with unit slopes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, Mode};

/// Required gap between drone count and offered load at an open facility.
pub const STABILITY_MARGIN: f64 = 1e-6;

/// Relative tolerance for analytic comparisons.
pub const REL_TOL: f64 = 1e-9;

/// Location, allocation and fleet decision.
///
/// `y[i][s]` is the facility serving slot `s` of node `i`. Under static
/// priority every class has its own slot; otherwise each node has a single
/// slot carrying all of its requests.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment {
    pub y: Vec<Vec<usize>>,
    pub open: Vec<bool>,
    pub drones: Vec<u32>,
}

impl Assignment {
    /// Opens exactly the facilities used by `y`.
    pub fn from_routes(y: Vec<Vec<usize>>, drones: Vec<u32>) -> Self {
        let mut open = vec![false; drones.len()];
        for slots in &y {
            for &j in slots {
                if j < open.len() {
                    open[j] = true;
                }
            }
        }
        Assignment { y, open, drones }
    }

    pub fn open_count(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    pub fn total_drones(&self) -> u64 {
        self.drones.iter().map(|&k| u64::from(k)).sum()
    }

    pub fn is_open(&self, j: usize) -> bool {
        self.open[j]
    }

    /// Facility serving class `r` requests of node `i`.
    pub fn facility_of(&self, i: usize, r: usize) -> usize {
        let slots = &self.y[i];
        if slots.len() == 1 {
            slots[0]
        } else {
            slots[r]
        }
    }

    pub(crate) fn check_shape(&self, inst: &Instance) -> Result<()> {
        let slots = slots_per_node(inst);
        let m = inst.n_facilities();
        if self.y.len() != inst.n_nodes() {
            return Err(Error::Mismatch(format!(
                "assignment covers {} nodes, instance has {}",
                self.y.len(),
                inst.n_nodes()
            )));
        }
        if self.open.len() != m || self.drones.len() != m {
            return Err(Error::Mismatch(format!("assignment must list all {m} facilities")));
        }
        for (i, s) in self.y.iter().enumerate() {
            if s.len() != slots {
                return Err(Error::Mismatch(format!("node {i} needs {slots} assignment slots")));
            }
            if let Some(&j) = s.iter().find(|&&j| j >= m) {
                return Err(Error::Mismatch(format!("node {i} assigned to unknown facility {j}")));
            }
        }
        Ok(())
    }
}

/// Assignment slots per node: one per class under static priority.
pub fn slots_per_node(inst: &Instance) -> usize {
    if inst.mode() == Mode::Sp {
        inst.n_classes()
    } else {
        1
    }
}

/// Requests of one class from one node, with positive arrival rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stream {
    pub node: usize,
    /// Zero-based class.
    pub class: usize,
    /// Index into `Assignment::y[node]`.
    pub slot: usize,
    pub rate: f64,
}

pub fn streams(inst: &Instance) -> Vec<Stream> {
    let per_class_slots = inst.mode() == Mode::Sp;
    let mut out = Vec::new();
    for i in 0..inst.n_nodes() {
        for r in 0..inst.n_classes() {
            let rate = inst.class_rate(i, r);
            if rate > 0.0 {
                out.push(Stream {
                    node: i,
                    class: r,
                    slot: if per_class_slots { r } else { 0 },
                    rate,
                });
            }
        }
    }
    out
}

/// Class-wise arrival rate, offered load and second moment at one facility.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FacilityLoad {
    /// gamma_jr, requests per minute.
    pub arrival: Vec<f64>,
    /// sum of rate * service (drone-minutes per minute).
    pub load: Vec<f64>,
    /// sum of rate * service^2.
    pub second: Vec<f64>,
}

impl FacilityLoad {
    pub fn new(classes: usize) -> Self {
        FacilityLoad {
            arrival: vec![0.0; classes],
            load: vec![0.0; classes],
            second: vec![0.0; classes],
        }
    }

    pub fn add(&mut self, class: usize, rate: f64, service: f64) {
        self.arrival[class] += rate;
        self.load[class] += rate * service;
        self.second[class] += rate * service * service;
    }

    pub fn total_arrival(&self) -> f64 {
        self.arrival.iter().sum()
    }

    pub fn total_load(&self) -> f64 {
        self.load.iter().sum()
    }

    pub fn total_second(&self) -> f64 {
        self.second.iter().sum()
    }
}

pub fn facility_loads(inst: &Instance, asg: &Assignment) -> Result<Vec<FacilityLoad>> {
    asg.check_shape(inst)?;
    Ok(loads_unchecked(inst, &streams(inst), asg))
}

pub(crate) fn loads_unchecked(inst: &Instance, streams: &[Stream], asg: &Assignment) -> Vec<FacilityLoad> {
    let mut loads = vec![FacilityLoad::new(inst.n_classes()); inst.n_facilities()];
    for s in streams {
        let j = asg.y[s.node][s.slot];
        loads[j].add(s.class, s.rate, inst.service(s.node, j));
    }
    loads
}

/// Smallest integer drone count that keeps a queue with this load stable
/// by the margin: floor(load) + 1, bumped once more when that lands within
/// the margin.
pub fn min_stable_drones(load: f64) -> u32 {
    let k = load.floor() + 1.0;
    let k = if k - load < STABILITY_MARGIN { k + 1.0 } else { k };
    k as u32
}

pub fn is_stable(load: f64, drones: u32) -> bool {
    f64::from(drones) - load >= STABILITY_MARGIN
}

/// Pollaczek-Khinchine wait of the M/G/1 approximation:
/// `second / (2 k (k - load))`.
pub fn pk_wait(second: f64, load: f64, drones: u32) -> f64 {
    if second == 0.0 {
        return 0.0;
    }
    let k = f64::from(drones);
    second / (2.0 * k * (k - load))
}

/// Static non-preemptive priority waits for every class at one facility:
/// `N / (2 (k - C_r)(k - C_{r-1}))` with cumulative loads C and C_0 = 0.
pub fn static_waits(load: &FacilityLoad, drones: u32) -> Vec<f64> {
    let k = f64::from(drones);
    let n = load.total_second();
    let mut prev = 0.0;
    load.load
        .iter()
        .map(|l| {
            let cum = prev + l;
            let w = if n == 0.0 {
                0.0
            } else {
                n / (2.0 * (k - cum) * (k - prev))
            };
            prev = cum;
            w
        })
        .collect()
}

/// Upper-bound waits of the delay-dependent discipline: the FCFS wait plus
/// `sum_{l<r} delta_a(l, r) * L * L_l / k^2`.
pub fn dynamic_waits(load: &FacilityLoad, drones: u32, delta_a: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let base = pk_wait(load.total_second(), load.total_load(), drones);
    let k = f64::from(drones);
    let total = load.total_load();
    (0..load.load.len())
        .map(|r| {
            let extra: f64 = (0..r).map(|l| delta_a(l, r) * total * load.load[l] / (k * k)).sum();
            base + extra
        })
        .collect()
}

/// Per-class waits at one facility under the instance's discipline.
pub fn class_waits(inst: &Instance, load: &FacilityLoad, drones: u32) -> Vec<f64> {
    match inst.mode() {
        Mode::Np => vec![pk_wait(load.total_second(), load.total_load(), drones); load.load.len()],
        Mode::Sp => static_waits(load, drones),
        Mode::Dp => {
            let p = inst.priority();
            dynamic_waits(load, drones, |l, r| p.delta_a(l, r))
        }
    }
}

/// [`class_waits`] without allocation, for search loops. `delta` is the
/// row-major R x R matrix of `delta_a(l, r)` (only read under dynamic
/// priority). Produces the same bits as [`class_waits`].
pub fn class_waits_into(mode: Mode, load: &FacilityLoad, drones: u32, delta: &[f64], out: &mut [f64]) {
    let classes = load.load.len();
    match mode {
        Mode::Np => out.fill(pk_wait(load.total_second(), load.total_load(), drones)),
        Mode::Sp => {
            let k = f64::from(drones);
            let n = load.total_second();
            let mut prev = 0.0;
            for (o, l) in out.iter_mut().zip(&load.load) {
                let cum = prev + l;
                *o = if n == 0.0 {
                    0.0
                } else {
                    n / (2.0 * (k - cum) * (k - prev))
                };
                prev = cum;
            }
        }
        Mode::Dp => {
            let total = load.total_load();
            let base = pk_wait(load.total_second(), total, drones);
            let k = f64::from(drones);
            for (r, o) in out.iter_mut().enumerate() {
                let extra: f64 = (0..r)
                    .map(|l| delta[l * classes + r] * total * load.load[l] / (k * k))
                    .sum();
                *o = base + extra;
            }
        }
    }
}

fn open_stable(asg: &Assignment, load: &FacilityLoad, j: usize) -> Result<bool> {
    if !asg.open[j] {
        return Ok(false);
    }
    let total = load.total_load();
    if !is_stable(total, asg.drones[j]) {
        return Err(Error::Stability {
            facility: j,
            load: total,
            drones: asg.drones[j],
        });
    }
    Ok(true)
}

fn facility_load(inst: &Instance, asg: &Assignment, j: usize) -> Result<FacilityLoad> {
    asg.check_shape(inst)?;
    if j >= inst.n_facilities() {
        return Err(Error::InvalidArgument(format!("facility {j} out of range")));
    }
    let mut load = FacilityLoad::new(inst.n_classes());
    for s in streams(inst) {
        if asg.y[s.node][s.slot] == j {
            load.add(s.class, s.rate, inst.service(s.node, j));
        }
    }
    Ok(load)
}

/// FCFS expected wait at facility j (minutes); zero for closed facilities.
pub fn waiting_np(inst: &Instance, asg: &Assignment, j: usize) -> Result<f64> {
    let load = facility_load(inst, asg, j)?;
    if !open_stable(asg, &load, j)? {
        return Ok(0.0);
    }
    Ok(pk_wait(load.total_second(), load.total_load(), asg.drones[j]))
}

/// Static-priority expected wait of zero-based class `r` at facility j.
pub fn waiting_sp(inst: &Instance, asg: &Assignment, j: usize, r: usize) -> Result<f64> {
    let load = facility_load(inst, asg, j)?;
    check_class(inst, r)?;
    if !open_stable(asg, &load, j)? {
        return Ok(0.0);
    }
    Ok(static_waits(&load, asg.drones[j])[r])
}

/// Dynamic-priority wait bound of zero-based class `r` at facility j.
pub fn waiting_dp(inst: &Instance, asg: &Assignment, j: usize, r: usize) -> Result<f64> {
    let load = facility_load(inst, asg, j)?;
    check_class(inst, r)?;
    if !open_stable(asg, &load, j)? {
        return Ok(0.0);
    }
    let p = inst.priority();
    Ok(dynamic_waits(&load, asg.drones[j], |l, c| p.delta_a(l, c))[r])
}

fn check_class(inst: &Instance, r: usize) -> Result<()> {
    if r >= inst.n_classes() {
        return Err(Error::InvalidArgument(format!("class index {r} out of range")));
    }
    Ok(())
}

/// Per-facility analytics of an assignment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FacilityAnalytics {
    pub facility: usize,
    pub open: bool,
    pub drones: u32,
    pub gamma: f64,
    pub gamma_r: Vec<f64>,
    pub load: f64,
    pub load_r: Vec<f64>,
    /// E[tau_jr], mean inter-service time of class r (service / k).
    pub moment1_r: Vec<f64>,
    /// E[tau_jr^2].
    pub moment2_r: Vec<f64>,
    /// Utilisation of class r: load_r / k.
    pub rho_r: Vec<f64>,
    /// FCFS wait of the facility (W_0 of the priority formulas).
    pub wait: f64,
    /// Class waits under the instance's discipline.
    pub wait_r: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueueAnalytics {
    pub facilities: Vec<FacilityAnalytics>,
}

pub fn analyze(inst: &Instance, asg: &Assignment) -> Result<QueueAnalytics> {
    let loads = facility_loads(inst, asg)?;
    let classes = inst.n_classes();
    let mut facilities = Vec::with_capacity(loads.len());
    for (j, load) in loads.iter().enumerate() {
        let open = open_stable(asg, load, j)?;
        let k = asg.drones[j];
        let kf = f64::from(k);
        let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
        let (wait, wait_r) = if open {
            (
                pk_wait(load.total_second(), load.total_load(), k),
                class_waits(inst, load, k),
            )
        } else {
            (0.0, vec![0.0; classes])
        };
        facilities.push(FacilityAnalytics {
            facility: j,
            open,
            drones: k,
            gamma: load.total_arrival(),
            gamma_r: load.arrival.clone(),
            load: load.total_load(),
            load_r: load.load.clone(),
            moment1_r: (0..classes)
                .map(|r| ratio(load.load[r], kf * load.arrival[r]))
                .collect(),
            moment2_r: (0..classes)
                .map(|r| ratio(load.second[r], kf * kf * load.arrival[r]))
                .collect(),
            rho_r: (0..classes).map(|r| ratio(load.load[r], kf)).collect(),
            wait,
            wait_r,
        });
    }
    Ok(QueueAnalytics { facilities })
}

/// Weighted min-max objective value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    /// NP: the largest response time. SP/DP: sum of w_r * Z_r.
    pub weighted: f64,
    /// Z_r, largest expected response time among class-r demand.
    pub per_class: Vec<f64>,
}

/// Class-wise report metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    /// 1-based class label.
    pub class: usize,
    /// Z_r
    pub max_response: f64,
    /// sumZ_r = sum of rate * (t + W) over class-r demand.
    pub total_response: f64,
    /// W_r
    pub max_wait: f64,
    /// sumW_r
    pub total_wait: f64,
}

/// Objective and metrics in one pass. The maxima run over assigned demand
/// streams only, so a facility's wait enters only through the nodes it
/// serves.
pub fn evaluate(inst: &Instance, asg: &Assignment) -> Result<(ObjectiveValue, Vec<ClassMetrics>)> {
    let loads = facility_loads(inst, asg)?;
    let mut waits = Vec::with_capacity(loads.len());
    for (j, load) in loads.iter().enumerate() {
        waits.push(if open_stable(asg, load, j)? {
            Some(class_waits(inst, load, asg.drones[j]))
        } else {
            None
        });
    }
    let classes = inst.n_classes();
    let mut metrics: Vec<ClassMetrics> = (0..classes)
        .map(|r| ClassMetrics {
            class: r + 1,
            max_response: 0.0,
            total_response: 0.0,
            max_wait: 0.0,
            total_wait: 0.0,
        })
        .collect();
    for s in streams(inst) {
        let j = asg.y[s.node][s.slot];
        let w = match &waits[j] {
            Some(w) => w[s.class],
            None => {
                return Err(Error::Infeasible(format!(
                    "node {} class {} is assigned to closed facility {j}",
                    s.node,
                    s.class + 1
                )))
            }
        };
        let t = inst.travel(s.node, j);
        let m = &mut metrics[s.class];
        m.max_response = m.max_response.max(t + w);
        m.max_wait = m.max_wait.max(w);
        m.total_response += s.rate * (t + w);
        m.total_wait += s.rate * w;
    }
    let per_class: Vec<f64> = metrics.iter().map(|m| m.max_response).collect();
    let weighted = match inst.mode() {
        Mode::Np => per_class.iter().copied().fold(0.0, f64::max),
        Mode::Sp | Mode::Dp => per_class.iter().zip(&inst.priority().weights).map(|(z, w)| z * w).sum(),
    };
    Ok((ObjectiveValue { weighted, per_class }, metrics))
}

pub fn objective(inst: &Instance, asg: &Assignment) -> Result<ObjectiveValue> {
    evaluate(inst, asg).map(|(o, _)| o)
}

pub fn report_metrics(inst: &Instance, asg: &Assignment) -> Result<Vec<ClassMetrics>> {
    evaluate(inst, asg).map(|(_, m)| m)
}

/// Relative closeness test used throughout the analytics checks.
pub fn approx_eq(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn close(a: f64, b: f64) {
        assert!(approx_eq(a, b, 1e-9), "{a} vs {b}");
    }

    #[test]
    fn np_single_node_matches_md1() {
        let inst = np(&[0.4], vec![vec![1.0]]);
        let asg = Assignment::from_routes(vec![vec![0]], vec![1]);
        let w = waiting_np(&inst, &asg, 0).unwrap();
        // M/D/1: rho E[s] / (2 (1 - rho))
        let (rho, es) = (0.4, 1.0);
        close(w, rho * es / (2.0 * (1.0 - rho)));
        close(w, 0.333333333333333);
    }

    #[test]
    fn np_two_nodes_two_drones() {
        let inst = np(&[0.3, 0.2], vec![vec![2.0], vec![1.0]]);
        let asg = Assignment::from_routes(vec![vec![0], vec![0]], vec![2]);
        close(waiting_np(&inst, &asg, 0).unwrap(), 1.4 / 4.8);
        close(waiting_np(&inst, &asg, 0).unwrap(), 0.2916666666666667);
    }

    #[test]
    fn np_idle_facility_is_zero() {
        let inst = np(&[0.3], vec![vec![2.0, 1.0]]);
        let asg = Assignment {
            y: vec![vec![0]],
            open: vec![true, true],
            drones: vec![1, 1],
        };
        assert_eq!(waiting_np(&inst, &asg, 1).unwrap(), 0.0);
    }

    #[test]
    fn unstable_queue_reports_facility_and_load() {
        let inst = np(&[1.0], vec![vec![1.0]]);
        let asg = Assignment::from_routes(vec![vec![0]], vec![1]);
        match waiting_np(&inst, &asg, 0) {
            Err(Error::Stability { facility, load, drones }) => {
                assert_eq!((facility, drones), (0, 1));
                assert_eq!(load, 1.0);
            }
            other => panic!("expected stability error, got {other:?}"),
        }
    }

    #[test]
    fn sp_two_classes_one_node() {
        let inst = sp(&[1.0], &[vec![0.5, 0.5]], vec![vec![1.0]], vec![0.7, 0.3]);
        let asg = Assignment::from_routes(vec![vec![0, 0]], vec![2]);
        close(waiting_sp(&inst, &asg, 0, 0).unwrap(), 1.0 / 6.0);
        close(waiting_sp(&inst, &asg, 0, 1).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn sp_single_class_equals_np() {
        let travel = vec![vec![1.5], vec![0.7]];
        let sp1 = sp(&[0.3, 0.4], &[vec![1.0], vec![1.0]], travel.clone(), vec![1.0]);
        let np1 = np(&[0.3, 0.4], travel);
        let asg = Assignment::from_routes(vec![vec![0], vec![0]], vec![2]);
        assert_eq!(
            waiting_sp(&sp1, &asg, 0, 0).unwrap(),
            waiting_np(&np1, &asg, 0).unwrap()
        );
    }

    #[test]
    fn sp_without_class_two_load() {
        // node has only class-1 demand; class-2 wait uses (k - L1)^2
        let inst = sp(&[0.5], &[vec![1.0, 0.0]], vec![vec![1.0]], vec![0.5, 0.5]);
        let asg = Assignment::from_routes(vec![vec![0, 0]], vec![1]);
        let w1 = waiting_sp(&inst, &asg, 0, 0).unwrap();
        let w2 = waiting_sp(&inst, &asg, 0, 1).unwrap();
        close(w1, 0.5 / (2.0 * 1.0 * 0.5));
        close(w2, 0.5 / (2.0 * 0.5 * 0.5));
        assert!(w2 >= w1);
    }

    #[test]
    fn dp_bound_example() {
        let inst = dp(
            &[0.4, 0.4],
            &[1, 2],
            vec![vec![1.0], vec![1.0]],
            vec![0.7, 0.3],
            vec![3.0, 0.0],
        );
        let asg = Assignment::from_routes(vec![vec![0], vec![0]], vec![1]);
        close(waiting_dp(&inst, &asg, 0, 0).unwrap(), 2.0);
        close(waiting_dp(&inst, &asg, 0, 1).unwrap(), 2.96);
    }

    #[test]
    fn dp_zero_gap_and_no_class_one() {
        let inst = dp(
            &[0.4, 0.4],
            &[1, 2],
            vec![vec![1.0], vec![1.0]],
            vec![0.7, 0.3],
            vec![0.0, 0.0],
        );
        let asg = Assignment::from_routes(vec![vec![0], vec![0]], vec![1]);
        assert_eq!(
            waiting_dp(&inst, &asg, 0, 1).unwrap(),
            waiting_np(&inst, &asg, 0).unwrap()
        );

        let only2 = dp(&[0.4], &[2], vec![vec![1.0]], vec![0.7, 0.3], vec![3.0, 0.0]);
        let asg = Assignment::from_routes(vec![vec![0]], vec![1]);
        assert_eq!(
            waiting_dp(&only2, &asg, 0, 1).unwrap(),
            waiting_np(&only2, &asg, 0).unwrap()
        );
    }

    #[test]
    fn objectives_of_examples() {
        let inst = np(&[0.4], vec![vec![1.0]]);
        let asg = Assignment::from_routes(vec![vec![0]], vec![1]);
        close(objective(&inst, &asg).unwrap().weighted, 1.0 + 1.0 / 3.0);

        let inst = sp(&[1.0], &[vec![0.5, 0.5]], vec![vec![1.0]], vec![0.7, 0.3]);
        let asg = Assignment::from_routes(vec![vec![0, 0]], vec![2]);
        let obj = objective(&inst, &asg).unwrap();
        close(obj.weighted, 0.7 * (1.0 + 1.0 / 6.0) + 0.3 * (1.0 + 1.0 / 3.0));
        close(obj.weighted, 1.2166666666666666);
        let m = report_metrics(&inst, &asg).unwrap();
        close(m[0].total_wait, 0.5 / 6.0);
        close(m[0].total_response, 0.5 * (1.0 + 1.0 / 6.0));
        close(m[1].max_wait, 1.0 / 3.0);
    }

    #[test]
    fn huge_fleet_leaves_travel_only() {
        let inst = sp(
            &[0.5, 0.7],
            &[vec![0.3, 0.7], vec![0.6, 0.4]],
            vec![vec![4.0, 9.0], vec![8.0, 2.5]],
            vec![0.7, 0.3],
        );
        let asg = Assignment::from_routes(vec![vec![0, 1], vec![0, 1]], vec![1_000_000, 1_000_000]);
        let obj = objective(&inst, &asg).unwrap();
        assert!((obj.per_class[0] - 8.0).abs() < 1e-4);
        assert!((obj.per_class[1] - 9.0).abs() < 1e-4);
    }

    #[test]
    fn np_metrics_single_class() {
        let inst = np(&[0.4], vec![vec![1.0]]);
        let asg = Assignment::from_routes(vec![vec![0]], vec![1]);
        let m = report_metrics(&inst, &asg).unwrap();
        assert_eq!(m.len(), 1);
        close(m[0].total_wait, 0.4 / 3.0);
        close(m[0].max_response, 4.0 / 3.0);
    }

    #[test]
    fn analytics_moments() {
        let inst = sp(&[1.0], &[vec![0.5, 0.5]], vec![vec![1.0]], vec![0.7, 0.3]);
        let asg = Assignment::from_routes(vec![vec![0, 0]], vec![2]);
        let a = analyze(&inst, &asg).unwrap();
        let f = &a.facilities[0];
        close(f.gamma, f.gamma_r.iter().sum());
        close(f.moment1_r[0], 0.5);
        close(f.moment2_r[0], 0.25);
        close(f.rho_r[1], 0.25);
        close(f.wait_r[1], 1.0 / 3.0);
    }

    #[test]
    fn min_drones_rule() {
        assert_eq!(min_stable_drones(0.5), 1);
        assert_eq!(min_stable_drones(1.2), 2);
        assert_eq!(min_stable_drones(2.0), 3);
        assert_eq!(min_stable_drones(2.9999999), 4);
        assert_eq!(min_stable_drones(0.0), 1);
    }
}
