//! Random instances and stable configurations shared by the integration
//! tests.
#![allow(dead_code)]

use dronefleet::instance::{DemandNode, FleetParams, Instance, Mode, PriorityParams};
use dronefleet::queueing::{facility_loads, min_stable_drones, Assignment};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub type TestRng = Xoshiro256PlusPlus;

pub fn rng(seed: u64) -> TestRng {
    TestRng::seed_from_u64(seed)
}

pub fn node(id: usize, lambda: f64) -> DemandNode {
    DemandNode {
        id,
        coords: [0.0, 0.0],
        lambda,
        class_probs: None,
        fixed_class: None,
    }
}

/// Random instance with travel times in [0.2, 3] and rates in [0.05, 1].
/// SP nodes get a random two-point class mix, DP nodes a random class (both
/// classes always present), NP nodes a single class.
pub fn random_instance(rng: &mut TestRng, mode: Mode, nodes: usize, facilities: usize, classes: usize) -> Instance {
    let travel: Vec<Vec<f64>> = (0..nodes)
        .map(|_| (0..facilities).map(|_| rng.random_range(0.2..3.0)).collect())
        .collect();
    let mut ns: Vec<DemandNode> = (0..nodes).map(|i| node(i, rng.random_range(0.05..1.0))).collect();
    let classes = if mode == Mode::Np { 1 } else { classes };
    match mode {
        Mode::Np => {}
        Mode::Sp => {
            for n in &mut ns {
                let mut p: Vec<f64> = (0..classes).map(|_| rng.random_range(0.0..1.0)).collect();
                let s: f64 = p.iter().sum();
                p.iter_mut().for_each(|x| *x /= s);
                let head: f64 = p[..classes - 1].iter().sum();
                p[classes - 1] = 1.0 - head;
                n.class_probs = Some(p);
            }
        }
        Mode::Dp => {
            for (i, n) in ns.iter_mut().enumerate() {
                n.fixed_class = Some(if i < classes {
                    i + 1
                } else {
                    rng.random_range(1..=classes)
                });
            }
        }
    }
    let mut weights = vec![1.0 / classes as f64; classes];
    let head: f64 = weights[..classes - 1].iter().sum();
    weights[classes - 1] = 1.0 - head;
    let initial_values = if mode == Mode::Dp {
        let mut a: Vec<f64> = (0..classes).map(|_| rng.random_range(0.0..20.0)).collect();
        a.sort_by(|x, y| y.total_cmp(x));
        a
    } else {
        Vec::new()
    };
    let priority = PriorityParams {
        classes,
        weights,
        initial_values,
    };
    let fleet = FleetParams {
        k_hard_cap: None,
        ..FleetParams::default()
    };
    Instance::with_travel_times(mode, ns, travel, fleet, priority).unwrap()
}

/// Random routing with every open facility holding its minimum stable drone
/// count plus up to `extra` more.
pub fn random_stable_assignment(rng: &mut TestRng, inst: &Instance, extra: u32) -> Assignment {
    let m = inst.n_facilities();
    let slots = if inst.mode() == Mode::Sp { inst.n_classes() } else { 1 };
    let y: Vec<Vec<usize>> = (0..inst.n_nodes())
        .map(|_| (0..slots).map(|_| rng.random_range(0..m)).collect())
        .collect();
    let mut asg = Assignment::from_routes(y, vec![0; m]);
    let loads = facility_loads(inst, &asg).unwrap();
    for (j, load) in loads.iter().enumerate() {
        if asg.open[j] {
            asg.drones[j] = min_stable_drones(load.total_load()) + rng.random_range(0..=extra);
        }
    }
    asg
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300) || a == b
}

/// Instance inside the enumeration bounds (4 nodes, 3 facilities, 2 classes
/// for SP/DP) with its oracle budget: K* plus half again, at most 12.
pub fn tiny_instance(seed: u64, mode: Mode) -> Option<(Instance, u32)> {
    let mut r = rng(seed);
    let inst = random_instance(&mut r, mode, 4, 3, 2);
    let k_star = dronefleet::solver::min_fleet(&inst, seed).ok()?.k_star;
    let k = dronefleet::solver::budget(k_star, 0.5, Some(12));
    (k_star <= 12).then_some((inst, k))
}

fn built(mode: Mode, nodes: Vec<DemandNode>, travel: Vec<Vec<f64>>, weights: Vec<f64>, initial: Vec<f64>) -> Instance {
    let priority = PriorityParams {
        classes: weights.len(),
        weights,
        initial_values: initial,
    };
    let fleet = FleetParams {
        k_hard_cap: None,
        ..FleetParams::default()
    };
    Instance::with_travel_times(mode, nodes, travel, fleet, priority).unwrap()
}

/// Single-class instance from rates and a travel matrix.
pub fn np_instance(lambdas: &[f64], travel: Vec<Vec<f64>>) -> Instance {
    let nodes = lambdas.iter().enumerate().map(|(i, &l)| node(i, l)).collect();
    built(Mode::Np, nodes, travel, vec![1.0], Vec::new())
}

/// Static-priority instance; `probs[i]` is node i's class mix.
pub fn sp_instance(lambdas: &[f64], probs: &[Vec<f64>], travel: Vec<Vec<f64>>, weights: Vec<f64>) -> Instance {
    let nodes = lambdas
        .iter()
        .zip(probs)
        .enumerate()
        .map(|(i, (&l, p))| DemandNode {
            class_probs: Some(p.clone()),
            ..node(i, l)
        })
        .collect();
    built(Mode::Sp, nodes, travel, weights, Vec::new())
}

/// Dynamic-priority instance; `classes[i]` is node i's 1-based class.
pub fn dp_instance(
    lambdas: &[f64],
    classes: &[usize],
    travel: Vec<Vec<f64>>,
    weights: Vec<f64>,
    a: Vec<f64>,
) -> Instance {
    let nodes = lambdas
        .iter()
        .zip(classes)
        .enumerate()
        .map(|(i, (&l, &c))| DemandNode {
            fixed_class: Some(c),
            ..node(i, l)
        })
        .collect();
    built(Mode::Dp, nodes, travel, weights, a)
}
