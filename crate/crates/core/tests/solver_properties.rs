mod common;

use common::{random_instance, rng, tiny_instance};
use dronefleet::instance::Mode;
use dronefleet::queueing;
use dronefleet::solver::{brute_force, budget, feasible, fleet_lower_bound, local_search, min_fleet, SearchOptions};
use proptest::prelude::*;

const MODES: [Mode; 3] = [Mode::Np, Mode::Sp, Mode::Dp];

#[test]
fn search_matches_oracle_on_tiny_instances() {
    for mode in MODES {
        let mut done = 0;
        for seed in 0..40u64 {
            let Some((inst, k)) = tiny_instance(seed, mode) else {
                continue;
            };
            let exact = brute_force(&inst, k).unwrap();
            let found = local_search(
                &inst,
                k,
                &SearchOptions {
                    seed,
                    ..SearchOptions::default()
                },
            )
            .unwrap();
            let (a, b) = (exact.objective.weighted, found.objective.weighted);
            assert!(
                (a - b).abs() <= 1e-12 * a,
                "{mode} seed {seed} K={k}: oracle {a} search {b}"
            );
            assert_eq!(feasible(&inst, &exact.best, Some(k)), Ok(()));
            assert_eq!(feasible(&inst, &found.best, Some(k)), Ok(()));
            done += 1;
            if done == 20 {
                break;
            }
        }
        assert_eq!(done, 20, "{mode}: too few instances within the enumeration bounds");
    }
}

#[test]
fn results_reproduce_under_reevaluation() {
    for mode in MODES {
        for seed in 0..10u64 {
            let mut r = rng(1000 + seed);
            let inst = random_instance(&mut r, mode, 9, 5, 2);
            let fleet = min_fleet(&inst, seed).unwrap();
            assert!(fleet.k_star >= fleet_lower_bound(&inst));
            assert_eq!(feasible(&inst, &fleet.assignment, None), Ok(()));
            let k = budget(fleet.k_star, 0.2, None);
            let res = local_search(
                &inst,
                k,
                &SearchOptions {
                    seed,
                    ..SearchOptions::default()
                },
            )
            .unwrap();
            assert_eq!(feasible(&inst, &res.best, Some(k)), Ok(()));
            let again = queueing::objective(&inst, &res.best).unwrap();
            assert!((again.weighted - res.objective.weighted).abs() <= 1e-12 * again.weighted.max(1.0));
        }
    }
}

#[test]
fn more_drones_never_hurt_on_average() {
    // The search is a heuristic, so monotonicity is checked per instance
    // with a small allowance and strictly on the mean.
    let alphas = [0.0, 0.1, 0.2, 0.5, 1.0];
    let mut means = vec![0.0; alphas.len()];
    for seed in 0..10u64 {
        let mut r = rng(2000 + seed);
        let inst = random_instance(&mut r, Mode::Sp, 8, 5, 2);
        let k_star = min_fleet(&inst, seed).unwrap().k_star;
        let mut prev = f64::INFINITY;
        for (a, &alpha) in alphas.iter().enumerate() {
            let k = budget(k_star, alpha, None);
            let z = local_search(
                &inst,
                k,
                &SearchOptions {
                    seed,
                    ..SearchOptions::default()
                },
            )
            .unwrap()
            .objective
            .weighted;
            assert!(z <= prev * 1.02, "seed {seed} alpha {alpha}: {z} after {prev}");
            prev = prev.min(z);
            means[a] += z / 10.0;
        }
    }
    assert!(means.windows(2).all(|w| w[1] <= w[0]), "{means:?}");
}

#[test]
fn budget_oracle_values() {
    let grid = [0.0, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0];
    // floor((1 + alpha) K*) by hand.
    let table = [
        (10, [10, 10, 10, 11, 12, 15, 20]),
        (50, [50, 51, 52, 55, 60, 75, 100]),
        (137, [137, 139, 143, 150, 164, 205, 274]),
    ];
    for (k, expect) in table {
        let got: Vec<u32> = grid.iter().map(|&a| budget(k, a, None)).collect();
        assert_eq!(got, expect, "K* = {k}");
    }
}

proptest! {
    #[test]
    fn budget_is_monotone_and_identity_at_zero(k in 1u32..10_000, a in 0.0f64..3.0, b in 0.0f64..3.0, cap in proptest::option::of(1u32..20_000)) {
        prop_assert_eq!(budget(k, 0.0, None), k);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(budget(k, lo, cap) <= budget(k, hi, cap));
        prop_assert!(budget(k, hi, cap) >= k);
    }
}
