mod common;

use common::{random_instance, random_stable_assignment, rng};
use dronefleet::instance::Mode;
use dronefleet::simulator::{gaps, paired_compare, simulate, Discipline, EventRecord, SimConfig, SimRun};

fn cfg(discipline: Discipline, seed: u64) -> SimConfig {
    SimConfig {
        horizon: 3_000.0,
        replications: 3,
        seed,
        discipline,
        record_events: true,
        ..SimConfig::default()
    }
}

fn count_le(sorted: &[f64], t: f64) -> usize {
    sorted.partition_point(|&x| x <= t)
}

/// At every arrival and departure instant of a facility, either nobody is
/// waiting or all of its drones are busy.
fn work_conserving(log: &[EventRecord], facility: usize, drones: u32) -> bool {
    let reqs: Vec<&EventRecord> = log.iter().filter(|e| e.facility == facility).collect();
    let sorted = |f: fn(&EventRecord) -> f64| {
        let mut v: Vec<f64> = reqs.iter().map(|e| f(e)).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let (arr, start, dep) = (sorted(|e| e.arrival), sorted(|e| e.start), sorted(|e| e.departure));
    arr.iter().chain(&dep).all(|&t| {
        let waiting = count_le(&arr, t) - count_le(&start, t);
        let busy = count_le(&start, t) - count_le(&dep, t);
        waiting == 0 || busy == drones as usize
    })
}

#[test]
fn servers_never_idle_while_requests_wait() {
    for seed in 0..6u64 {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, Mode::Dp, 6, 2, 2);
        let asg = random_stable_assignment(&mut r, &inst, 1);
        for d in Discipline::ALL {
            let log = simulate(&inst, &asg, &cfg(d, seed)).unwrap().event_log.unwrap();
            assert!(log.iter().all(|e| e.start >= e.arrival && e.departure > e.start));
            for j in (0..2).filter(|&j| asg.open[j]) {
                assert!(work_conserving(&log, j, asg.drones[j]), "seed {seed} {d} facility {j}");
            }
        }
    }
}

#[test]
fn reports_are_byte_identical_for_equal_inputs() {
    let mut r = rng(9);
    let inst = random_instance(&mut r, Mode::Sp, 5, 3, 2);
    let asg = random_stable_assignment(&mut r, &inst, 1);
    let a = serde_json::to_string(&simulate(&inst, &asg, &cfg(Discipline::Static, 4)).unwrap()).unwrap();
    let b = serde_json::to_string(&simulate(&inst, &asg, &cfg(Discipline::Static, 4)).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn tail_curves_are_survival_functions() {
    let mut r = rng(21);
    let inst = random_instance(&mut r, Mode::Sp, 5, 2, 2);
    let asg = random_stable_assignment(&mut r, &inst, 0);
    let mut c = cfg(Discipline::Static, 1);
    c.tail_grid = vec![0.0, 0.5, 1.0, 2.0, 5.0, c.horizon];
    let rep = simulate(&inst, &asg, &c).unwrap();
    for class in &rep.classes {
        let p: Vec<f64> = class.tail.iter().map(|t| t.p.mean).collect();
        assert!(p[0] <= 1.0);
        assert!(p.windows(2).all(|w| w[1] <= w[0]), "{p:?}");
        assert_eq!(*p.last().unwrap(), 0.0);
    }
}

#[test]
fn paired_runs_share_arrivals() {
    let mut r = rng(5);
    let inst = random_instance(&mut r, Mode::Dp, 5, 2, 2);
    let asg = random_stable_assignment(&mut r, &inst, 1);
    let runs: Vec<SimRun<'_>> = Discipline::ALL
        .iter()
        .map(|&discipline| SimRun {
            instance: &inst,
            assignment: &asg,
            discipline,
        })
        .collect();
    let reports = paired_compare(&runs, &cfg(Discipline::Fcfs, 3)).unwrap();
    let arrivals = |k: usize| {
        let mut a: Vec<(f64, usize)> = reports[k]
            .event_log
            .as_ref()
            .unwrap()
            .iter()
            .map(|e| (e.arrival, e.node))
            .collect();
        a.sort_by(|x, y| x.0.total_cmp(&y.0));
        a
    };
    assert_eq!(arrivals(0), arrivals(1));
    assert_eq!(arrivals(0), arrivals(2));
    // A run against itself has zero gaps.
    assert!(gaps(&reports[0], &reports[0]).iter().all(|g| g.total_wait.mean == 0.0));
}
