//! Discrete-event simulation of every open facility as a k-server queue
//! with deterministic service (the flight time of the request's node) under
//! FCFS, static non-preemptive priority, or delay-dependent priority.
//!
//! Arrival streams come from per-(replication, node) substreams, so runs
//! that share a seed see identical arrivals and classes whatever the
//! discipline or routing (common random numbers).

mod engine;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, Mode};
use crate::queueing::{self, is_stable, Assignment};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Discipline {
    Fcfs,
    Static,
    Dynamic,
}

impl Discipline {
    pub const ALL: [Discipline; 3] = [Discipline::Fcfs, Discipline::Static, Discipline::Dynamic];

    pub fn as_str(self) -> &'static str {
        match self {
            Discipline::Fcfs => "fcfs",
            Discipline::Static => "static",
            Discipline::Dynamic => "dynamic",
        }
    }

    /// Discipline the analytic model of a mode describes.
    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::Np => Discipline::Fcfs,
            Mode::Sp => Discipline::Static,
            Mode::Dp => Discipline::Dynamic,
        }
    }
}

impl fmt::Display for Discipline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Discipline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fcfs" => Ok(Discipline::Fcfs),
            "static" => Ok(Discipline::Static),
            "dynamic" => Ok(Discipline::Dynamic),
            other => Err(Error::InvalidArgument(format!("unknown discipline `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Arrivals are generated on [0, horizon); queues then drain.
    pub horizon: f64,
    /// Fraction of the horizon whose arrivals are discarded from statistics.
    pub warmup: f64,
    pub replications: usize,
    pub seed: u64,
    pub discipline: Discipline,
    /// Share arrival streams across paired runs. When false each run of a
    /// paired comparison draws from its own seed.
    pub paired_streams: bool,
    /// Grid for the tail curves P(wait > t).
    pub tail_grid: Vec<f64>,
    /// Simulate unstable queues instead of refusing them.
    pub allow_unstable: bool,
    /// Keep the per-request log of the first replication.
    pub record_events: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            horizon: 30_000.0,
            warmup: 0.1,
            replications: 10,
            seed: 0,
            discipline: Discipline::Fcfs,
            paired_streams: true,
            tail_grid: (0..=20).map(f64::from).collect(),
            allow_unstable: false,
            record_events: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.warmup) {
            return Err(Error::InvalidArgument("warmup must lie in [0, 1)".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidArgument("at least one replication is required".into()));
        }
        Ok(())
    }
}

/// Across-replication estimate with a normal 95% half-width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
    pub values: Vec<f64>,
}

impl Estimate {
    pub fn from_values(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let half_width = if values.len() < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            1.96 * (var / n).sqrt()
        };
        Estimate {
            mean,
            half_width,
            values,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        (x - self.mean).abs() <= self.half_width
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeClassStats {
    pub node: usize,
    /// 1-based.
    pub class: usize,
    pub facility: usize,
    pub mean_wait: Estimate,
    pub mean_response: Estimate,
    pub count: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub t: f64,
    pub p: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    /// 1-based.
    pub class: usize,
    /// W_r: largest per-node mean wait.
    pub max_wait: Estimate,
    /// sumW_r: rate-weighted sum of per-node mean waits.
    pub total_wait: Estimate,
    /// Z_r: largest per-node mean response time.
    pub max_response: Estimate,
    /// sumZ_r
    pub total_response: Estimate,
    /// Pooled mean wait over all class-r requests.
    pub mean_wait: Estimate,
    pub count: Estimate,
    pub tail: Vec<TailPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FacilityStats {
    pub facility: usize,
    pub drones: u32,
    /// Offered load per class (analytic, drone-minutes per minute).
    pub load: Vec<f64>,
    /// Mean wait per class at this facility.
    pub mean_wait: Vec<Estimate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub arrival: f64,
    pub start: f64,
    pub departure: f64,
    pub node: usize,
    /// 1-based.
    pub class: usize,
    pub facility: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub discipline: Discipline,
    pub config: SimConfig,
    /// NP: max over classes of Z_r; SP/DP: sum of w_r Z_r.
    pub weighted: Estimate,
    pub classes: Vec<ClassStats>,
    pub nodes: Vec<NodeClassStats>,
    pub facilities: Vec<FacilityStats>,
    /// Calendar events over all replications.
    pub events: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_log: Option<Vec<EventRecord>>,
}

impl SimReport {
    pub fn class(&self, r: usize) -> &ClassStats {
        &self.classes[r]
    }
}

/// Per-replication raw statistics.
struct RepStats {
    /// [node][class] -> (count, sum wait)
    node_class: Vec<Vec<(u64, f64)>>,
    /// [facility][class] -> (count, sum wait)
    facility_class: Vec<Vec<(u64, f64)>>,
    /// [class][grid] -> count of waits above the grid point
    tail: Vec<Vec<u64>>,
    events: u64,
    log: Option<Vec<EventRecord>>,
}

fn replicate(inst: &Instance, asg: &Assignment, cfg: &SimConfig, seed: u64, rep: usize) -> RepStats {
    let classes = inst.n_classes();
    let m = inst.n_facilities();
    let mut reqs = engine::generate(inst, asg, seed, rep as u64, cfg.horizon);
    // Group by facility; each group stays in (arrival, node) order.
    reqs.sort_by(|a, b| {
        a.facility
            .cmp(&b.facility)
            .then(a.arrival.total_cmp(&b.arrival))
            .then(a.node.cmp(&b.node))
    });
    let initial = &inst.priority().initial_values;
    let mut events = 0;
    let mut lo = 0;
    while lo < reqs.len() {
        let j = reqs[lo].facility;
        let hi = lo + reqs[lo..].iter().take_while(|r| r.facility == j).count();
        events += engine::run_facility(&mut reqs[lo..hi], asg.drones[j], cfg.discipline, initial);
        lo = hi;
    }
    let cut = cfg.warmup * cfg.horizon;
    let mut node_class = vec![vec![(0u64, 0.0); classes]; inst.n_nodes()];
    let mut facility_class = vec![vec![(0u64, 0.0); classes]; m];
    let mut tail = vec![vec![0u64; cfg.tail_grid.len()]; classes];
    for r in &reqs {
        if r.arrival < cut {
            continue;
        }
        let w = r.start - r.arrival;
        let nc = &mut node_class[r.node][r.class];
        nc.0 += 1;
        nc.1 += w;
        let fc = &mut facility_class[r.facility][r.class];
        fc.0 += 1;
        fc.1 += w;
        for (g, &t) in cfg.tail_grid.iter().enumerate() {
            if w > t {
                tail[r.class][g] += 1;
            }
        }
    }
    let log = (cfg.record_events && rep == 0).then(|| {
        let mut log: Vec<EventRecord> = reqs
            .iter()
            .map(|r| EventRecord {
                arrival: r.arrival,
                start: r.start,
                departure: r.start + r.service,
                node: r.node,
                class: r.class + 1,
                facility: r.facility,
            })
            .collect();
        log.sort_by(|a, b| a.arrival.total_cmp(&b.arrival).then(a.node.cmp(&b.node)));
        log
    });
    RepStats {
        node_class,
        facility_class,
        tail,
        events,
        log,
    }
}

fn check_inputs(inst: &Instance, asg: &Assignment, cfg: &SimConfig) -> Result<()> {
    cfg.validate()?;
    let loads = queueing::facility_loads(inst, asg)?;
    for (j, load) in loads.iter().enumerate() {
        let total = load.total_load();
        if total > 0.0 && !asg.open[j] {
            return Err(Error::Infeasible(format!("demand routed to closed facility {j}")));
        }
        if asg.open[j] && !is_stable(total, asg.drones[j]) && !cfg.allow_unstable {
            return Err(Error::Stability {
                facility: j,
                load: total,
                drones: asg.drones[j],
            });
        }
        if total > 0.0 && asg.drones[j] == 0 {
            return Err(Error::Stability {
                facility: j,
                load: total,
                drones: 0,
            });
        }
    }
    Ok(())
}

/// Simulates `cfg.replications` independent runs and aggregates them.
pub fn simulate(inst: &Instance, asg: &Assignment, cfg: &SimConfig) -> Result<SimReport> {
    simulate_seeded(inst, asg, cfg, cfg.seed)
}

fn simulate_seeded(inst: &Instance, asg: &Assignment, cfg: &SimConfig, seed: u64) -> Result<SimReport> {
    check_inputs(inst, asg, cfg)?;
    let reps: Vec<RepStats> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| replicate(inst, asg, cfg, seed, rep))
        .collect();
    Ok(aggregate(inst, asg, cfg, reps))
}

fn aggregate(inst: &Instance, asg: &Assignment, cfg: &SimConfig, mut reps: Vec<RepStats>) -> SimReport {
    let classes = inst.n_classes();
    let n = inst.n_nodes();
    let mean = |(c, s): (u64, f64)| if c == 0 { 0.0 } else { s / c as f64 };
    let collect = |f: &dyn Fn(&RepStats) -> f64| Estimate::from_values(reps.iter().map(f).collect());

    let mut nodes = Vec::new();
    for i in 0..n {
        for r in 0..classes {
            if inst.class_rate(i, r) <= 0.0 {
                continue;
            }
            let j = asg.facility_of(i, r);
            let t = inst.travel(i, j);
            nodes.push(NodeClassStats {
                node: i,
                class: r + 1,
                facility: j,
                mean_wait: collect(&|s| mean(s.node_class[i][r])),
                mean_response: collect(&|s| t + mean(s.node_class[i][r])),
                count: collect(&|s| s.node_class[i][r].0 as f64),
            });
        }
    }

    // Per replication: class maxima and rate-weighted sums over the nodes
    // that carry class-r demand.
    let per_rep_class = |s: &RepStats, r: usize| {
        let mut out = (0.0f64, 0.0, 0.0f64, 0.0);
        for i in 0..n {
            let rate = inst.class_rate(i, r);
            if rate <= 0.0 || s.node_class[i][r].0 == 0 {
                continue;
            }
            let w = mean(s.node_class[i][r]);
            let z = inst.travel(i, asg.facility_of(i, r)) + w;
            out.0 = out.0.max(w);
            out.1 += rate * w;
            out.2 = out.2.max(z);
            out.3 += rate * z;
        }
        out
    };
    let mut class_stats = Vec::new();
    for r in 0..classes {
        let pooled = |s: &RepStats| {
            let (c, w) = s
                .node_class
                .iter()
                .fold((0u64, 0.0), |acc, nc| (acc.0 + nc[r].0, acc.1 + nc[r].1));
            (c, w)
        };
        let tail = cfg
            .tail_grid
            .iter()
            .enumerate()
            .map(|(g, &t)| TailPoint {
                t,
                p: collect(&|s| {
                    let c = pooled(s).0;
                    if c == 0 {
                        0.0
                    } else {
                        s.tail[r][g] as f64 / c as f64
                    }
                }),
            })
            .collect();
        class_stats.push(ClassStats {
            class: r + 1,
            max_wait: collect(&|s| per_rep_class(s, r).0),
            total_wait: collect(&|s| per_rep_class(s, r).1),
            max_response: collect(&|s| per_rep_class(s, r).2),
            total_response: collect(&|s| per_rep_class(s, r).3),
            mean_wait: collect(&|s| mean(pooled(s))),
            count: collect(&|s| pooled(s).0 as f64),
            tail,
        });
    }
    let weights = &inst.priority().weights;
    let weighted = collect(&|s| {
        let z = (0..classes).map(|r| per_rep_class(s, r).2);
        match inst.mode() {
            Mode::Np => z.fold(0.0, f64::max),
            Mode::Sp | Mode::Dp => z.zip(weights).map(|(z, w)| z * w).sum(),
        }
    });
    let loads = queueing::facility_loads(inst, asg).expect("checked before simulating");
    let facilities = (0..inst.n_facilities())
        .filter(|&j| asg.open[j])
        .map(|j| FacilityStats {
            facility: j,
            drones: asg.drones[j],
            load: loads[j].load.clone(),
            mean_wait: (0..classes)
                .map(|r| collect(&|s| mean(s.facility_class[j][r])))
                .collect(),
        })
        .collect();
    let events = reps.iter().map(|s| s.events).sum();
    let event_log = reps.first_mut().and_then(|s| s.log.take());
    SimReport {
        discipline: cfg.discipline,
        config: cfg.clone(),
        weighted,
        classes: class_stats,
        nodes,
        facilities,
        events,
        event_log,
    }
}

/// One leg of a paired comparison.
#[derive(Clone, Copy, Debug)]
pub struct SimRun<'a> {
    pub instance: &'a Instance,
    pub assignment: &'a Assignment,
    pub discipline: Discipline,
}

fn same_data(a: &Instance, b: &Instance) -> bool {
    a.n_classes() == b.n_classes()
        && a.travel_matrix() == b.travel_matrix()
        && a.nodes().len() == b.nodes().len()
        && (0..a.n_nodes()).all(|i| {
            a.nodes()[i].lambda == b.nodes()[i].lambda
                && (0..a.n_classes()).all(|r| a.class_prob(i, r) == b.class_prob(i, r))
        })
}

/// Simulates every run on common random numbers (when `paired_streams`),
/// each under its own discipline. The runs must describe the same demand
/// data; models and routings may differ.
pub fn paired_compare(runs: &[SimRun<'_>], cfg: &SimConfig) -> Result<Vec<SimReport>> {
    let Some(first) = runs.first() else {
        return Ok(Vec::new());
    };
    if let Some(bad) = runs.iter().position(|r| !same_data(first.instance, r.instance)) {
        return Err(Error::Mismatch(format!(
            "run {bad} uses different demand data than run 0"
        )));
    }
    runs.iter()
        .enumerate()
        .map(|(k, run)| {
            let mut c = cfg.clone();
            c.discipline = run.discipline;
            let seed = if cfg.paired_streams {
                cfg.seed
            } else {
                crate::rng::derive(cfg.seed, &[k as u64])
            };
            simulate_seeded(run.instance, run.assignment, &c, seed)
        })
        .collect()
}

/// Relative gaps `(X - Y) / Y` of one class, paired by replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassGap {
    /// 1-based.
    pub class: usize,
    pub total_response: Estimate,
    pub total_wait: Estimate,
    pub max_response: Estimate,
    pub max_wait: Estimate,
}

fn paired_gap(x: &Estimate, y: &Estimate) -> Estimate {
    Estimate::from_values(
        x.values
            .iter()
            .zip(&y.values)
            .map(|(a, b)| if *b == 0.0 { 0.0 } else { (a - b) / b })
            .collect(),
    )
}

pub fn gaps(x: &SimReport, y: &SimReport) -> Vec<ClassGap> {
    x.classes
        .iter()
        .zip(&y.classes)
        .map(|(a, b)| ClassGap {
            class: a.class,
            total_response: paired_gap(&a.total_response, &b.total_response),
            total_wait: paired_gap(&a.total_wait, &b.total_wait),
            max_response: paired_gap(&a.max_response, &b.max_response),
            max_wait: paired_gap(&a.max_wait, &b.max_wait),
        })
        .collect()
}

/// Writes an event log as CSV (arrival, start, departure, node, class,
/// facility).
pub fn write_event_log(path: impl AsRef<Path>, log: &[EventRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidArgument(format!("{other:?}")),
    })?;
    for rec in log {
        w.serialize(rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queueing::fixtures;

    fn cfg(discipline: Discipline, reps: usize, horizon: f64) -> SimConfig {
        SimConfig {
            horizon,
            replications: reps,
            discipline,
            seed: 11,
            ..SimConfig::default()
        }
    }

    #[test]
    fn md1_matches_pollaczek_khinchine() {
        let inst = fixtures::np(&[0.4], vec![vec![1.0]]);
        let asg = Assignment::from_routes(vec![vec![0]], vec![1]);
        let rep = simulate(&inst, &asg, &cfg(Discipline::Fcfs, 10, 30_000.0)).unwrap();
        let w = &rep.class(0).mean_wait;
        assert!((w.mean - 1.0 / 3.0).abs() / (1.0 / 3.0) < 0.05, "{w:?}");
    }

    #[test]
    fn unstable_queues_are_refused_unless_allowed() {
        let inst = fixtures::np(&[1.2], vec![vec![1.0]]);
        let asg = Assignment::from_routes(vec![vec![0]], vec![1]);
        let mut c = cfg(Discipline::Fcfs, 1, 100.0);
        assert!(matches!(simulate(&inst, &asg, &c), Err(Error::Stability { .. })));
        c.allow_unstable = true;
        assert!(simulate(&inst, &asg, &c).is_ok());
    }

    #[test]
    fn no_arrivals_means_zero_statistics() {
        let inst = fixtures::np(&[0.001], vec![vec![1.0]]);
        let asg = Assignment::from_routes(vec![vec![0]], vec![1]);
        let rep = simulate(&inst, &asg, &cfg(Discipline::Fcfs, 3, 1e-6)).unwrap();
        assert_eq!(rep.events, 0);
        assert_eq!(rep.weighted.mean, 0.0);
        let c = rep.class(0);
        assert_eq!((c.mean_wait.mean, c.count.mean, c.max_wait.mean), (0.0, 0.0, 0.0));
        assert!(c.tail.iter().all(|p| p.p.mean == 0.0));
    }

    #[test]
    fn identical_inputs_give_identical_bytes() {
        let inst = fixtures::sp(
            &[0.3, 0.2],
            &[vec![0.5, 0.5], vec![0.2, 0.8]],
            vec![vec![1.0], vec![0.5]],
            vec![0.7, 0.3],
        );
        let asg = Assignment::from_routes(vec![vec![0, 0], vec![0, 0]], vec![1]);
        let c = cfg(Discipline::Static, 3, 2_000.0);
        let a = serde_json::to_string(&simulate(&inst, &asg, &c).unwrap()).unwrap();
        let b = serde_json::to_string(&simulate(&inst, &asg, &c).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tails_are_survival_curves() {
        let inst = fixtures::np(&[0.7], vec![vec![1.0]]);
        let asg = Assignment::from_routes(vec![vec![0]], vec![1]);
        let rep = simulate(&inst, &asg, &cfg(Discipline::Fcfs, 2, 5_000.0)).unwrap();
        let tail = &rep.class(0).tail;
        assert!(tail.windows(2).all(|w| w[1].p.mean <= w[0].p.mean));
        assert!(tail[0].p.mean <= 1.0 && tail[0].p.mean > 0.0);
    }

    #[test]
    fn mismatched_demand_is_rejected() {
        let a = fixtures::np(&[0.4], vec![vec![1.0]]);
        let b = fixtures::np(&[0.5], vec![vec![1.0]]);
        let asg = Assignment::from_routes(vec![vec![0]], vec![1]);
        let runs = [
            SimRun {
                instance: &a,
                assignment: &asg,
                discipline: Discipline::Fcfs,
            },
            SimRun {
                instance: &b,
                assignment: &asg,
                discipline: Discipline::Fcfs,
            },
        ];
        assert!(matches!(
            paired_compare(&runs, &SimConfig::default()),
            Err(Error::Mismatch(_))
        ));
    }
}
