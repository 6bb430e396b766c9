//! One replication: request generation and the per-facility event loop.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng as _;
use rand_distr::{Distribution, Exp};

use super::Discipline;
use crate::instance::Instance;
use crate::queueing::Assignment;
use crate::rng::substream;

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Request {
    pub node: usize,
    pub class: usize,
    pub facility: usize,
    pub arrival: f64,
    pub service: f64,
    pub start: f64,
}

/// Poisson arrivals per node from dedicated substreams, so the discipline
/// and the routing never shift another node's draws. Each arrival consumes
/// one exponential gap and one uniform class draw.
pub(crate) fn generate(inst: &Instance, asg: &Assignment, seed: u64, rep: u64, horizon: f64) -> Vec<Request> {
    let classes = inst.n_classes();
    let mut out = Vec::new();
    for i in 0..inst.n_nodes() {
        let lambda = inst.nodes()[i].lambda;
        let gap = Exp::new(lambda).expect("positive rate");
        let mut rng = substream(seed, &[rep, i as u64]);
        let mut t = 0.0;
        loop {
            t += gap.sample(&mut rng);
            let u: f64 = rng.random();
            if t >= horizon {
                break;
            }
            let mut class = classes - 1;
            let mut acc = 0.0;
            for r in 0..classes {
                acc += inst.class_prob(i, r);
                if u < acc {
                    class = r;
                    break;
                }
            }
            // Guard against rounding in the cumulative sum landing on a
            // zero-probability tail class.
            while inst.class_prob(i, class) == 0.0 && class > 0 {
                class -= 1;
            }
            let j = asg.facility_of(i, class);
            out.push(Request {
                node: i,
                class,
                facility: j,
                arrival: t,
                service: inst.service(i, j),
                start: f64::NAN,
            });
        }
    }
    out
}

/// Calendar entry ordered by (time, sequence number).
#[derive(Clone, Copy, Debug)]
struct Event {
    time: f64,
    seq: u64,
    /// Index of the arriving request, or `None` for a departure.
    arrival: Option<usize>,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // Reversed: BinaryHeap is a max-heap and the earliest event goes first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

/// Waiting-line key; the smallest key is served next. Every key is fixed at
/// arrival: the dynamic priority `a_r + (now - T)` ranks requests exactly as
/// `T - a_r` does, since `now` is common to all of them.
#[derive(Clone, Copy, Debug)]
struct Waiting {
    primary: f64,
    arrival: f64,
    node: usize,
    idx: usize,
}

impl PartialEq for Waiting {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Waiting {}
impl PartialOrd for Waiting {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Waiting {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .primary
            .total_cmp(&self.primary)
            .then(other.arrival.total_cmp(&self.arrival))
            .then(other.node.cmp(&self.node))
            .then(other.idx.cmp(&self.idx))
    }
}

/// Runs one facility with `servers` drones over its requests (sorted by
/// arrival, then node) and fills in the start times. Returns the number of
/// calendar events processed.
pub(crate) fn run_facility(reqs: &mut [Request], servers: u32, discipline: Discipline, initial: &[f64]) -> u64 {
    if reqs.is_empty() {
        return 0;
    }
    let mut calendar = BinaryHeap::new();
    let mut waiting = BinaryHeap::new();
    let mut seq = 0u64;
    let mut free = servers;
    let mut events = 0u64;
    calendar.push(Event {
        time: reqs[0].arrival,
        seq,
        arrival: Some(0),
    });
    seq += 1;
    let key = |r: &Request, idx: usize| Waiting {
        primary: match discipline {
            Discipline::Fcfs => r.arrival,
            Discipline::Static => r.class as f64,
            Discipline::Dynamic => r.arrival - initial.get(r.class).copied().unwrap_or(0.0),
        },
        arrival: r.arrival,
        node: r.node,
        idx,
    };
    while let Some(ev) = calendar.pop() {
        events += 1;
        let now = ev.time;
        match ev.arrival {
            Some(idx) => {
                if idx + 1 < reqs.len() {
                    calendar.push(Event {
                        time: reqs[idx + 1].arrival,
                        seq,
                        arrival: Some(idx + 1),
                    });
                    seq += 1;
                }
                if free > 0 {
                    free -= 1;
                    reqs[idx].start = now;
                    calendar.push(Event {
                        time: now + reqs[idx].service,
                        seq,
                        arrival: None,
                    });
                    seq += 1;
                } else {
                    waiting.push(key(&reqs[idx], idx));
                }
            }
            None => {
                free += 1;
                if let Some(next) = waiting.pop() {
                    free -= 1;
                    reqs[next.idx].start = now;
                    calendar.push(Event {
                        time: now + reqs[next.idx].service,
                        seq,
                        arrival: None,
                    });
                    seq += 1;
                }
            }
        }
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(node: usize, class: usize, arrival: f64, service: f64) -> Request {
        Request {
            node,
            class,
            facility: 0,
            arrival,
            service,
            start: f64::NAN,
        }
    }

    #[test]
    fn single_server_orders_by_discipline() {
        // Busy until 1; requests of class 1 (arrival 0.2) and 0 (arrival 0.5)
        // wait, then compete at t = 1.
        let base = vec![req(0, 0, 0.0, 1.0), req(1, 1, 0.2, 1.0), req(2, 0, 0.5, 1.0)];
        let mut fcfs = base.clone();
        run_facility(&mut fcfs, 1, Discipline::Fcfs, &[]);
        assert_eq!(fcfs.iter().map(|r| r.start).collect::<Vec<_>>(), vec![0.0, 1.0, 2.0]);
        let mut stat = base.clone();
        run_facility(&mut stat, 1, Discipline::Static, &[]);
        assert_eq!(stat.iter().map(|r| r.start).collect::<Vec<_>>(), vec![0.0, 2.0, 1.0]);
        // A gap of 0.2 does not outweigh the 0.3 head start; 0.4 does.
        let mut dyn_small = base.clone();
        run_facility(&mut dyn_small, 1, Discipline::Dynamic, &[0.2, 0.0]);
        assert_eq!(dyn_small[1].start, 1.0);
        let mut dyn_big = base;
        run_facility(&mut dyn_big, 1, Discipline::Dynamic, &[0.4, 0.0]);
        assert_eq!(dyn_big[2].start, 1.0);
    }

    #[test]
    fn servers_work_in_parallel_and_never_idle_with_a_queue() {
        let mut reqs = vec![req(0, 0, 0.0, 2.0), req(1, 0, 0.1, 2.0), req(2, 0, 0.2, 2.0)];
        let events = run_facility(&mut reqs, 2, Discipline::Fcfs, &[]);
        assert_eq!(reqs.iter().map(|r| r.start).collect::<Vec<_>>(), vec![0.0, 0.1, 2.0]);
        assert_eq!(events, 6);
    }
}
