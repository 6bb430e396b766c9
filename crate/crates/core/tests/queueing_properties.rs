mod common;

use common::{random_instance, random_stable_assignment, rng};
use dronefleet::instance::{Instance, Mode, Preset};
use dronefleet::queueing::{
    class_waits, class_waits_into, dynamic_waits, evaluate, facility_loads, min_stable_drones, pk_wait, static_waits,
    waiting_dp, waiting_np, waiting_sp, FacilityLoad,
};
use proptest::prelude::*;

fn load_of(rates: &[(usize, f64, f64)], classes: usize) -> FacilityLoad {
    let mut l = FacilityLoad::new(classes);
    for &(c, rate, s) in rates {
        l.add(c, rate, s);
    }
    l
}

fn streams(classes: usize) -> impl Strategy<Value = Vec<(usize, f64, f64)>> {
    prop::collection::vec((0..classes, 0.01f64..1.0, 0.1f64..3.0), 1..8)
}

proptest! {
    #[test]
    fn wait_decreases_with_drones(s in streams(1), extra in 0u32..5) {
        let l = load_of(&s, 1);
        let k = min_stable_drones(l.total_load()) + extra;
        let w0 = pk_wait(l.total_second(), l.total_load(), k);
        let w1 = pk_wait(l.total_second(), l.total_load(), k + 1);
        prop_assert!(w0 > 0.0);
        prop_assert!(w1 < w0);
    }

    #[test]
    fn static_waits_ordered_by_class(s in streams(3), extra in 0u32..3) {
        let l = load_of(&s, 3);
        let k = min_stable_drones(l.total_load()) + extra;
        let w = static_waits(&l, k);
        prop_assert!(w[0] <= w[1] && w[1] <= w[2], "{:?}", w);
    }

    #[test]
    fn wait_diverges_near_capacity(s in streams(1), k in 1u32..6) {
        // Rescale the rates so the load sits just below k.
        let l0 = load_of(&s, 1);
        let target = f64::from(k) * (1.0 - 1e-6);
        let scale = target / l0.total_load();
        let scaled: Vec<_> = s.iter().map(|&(c, r, t)| (c, r * scale, t)).collect();
        let l = load_of(&scaled, 1);
        let w = pk_wait(l.total_second(), l.total_load(), k);
        let relaxed = pk_wait(l.total_second(), l.total_load(), k + 1);
        prop_assert!(w > 1e4 * relaxed, "{} vs {}", w, relaxed);
    }

    #[test]
    fn dynamic_extra_term_grows_with_gap(s in streams(2), extra in 0u32..3, d1 in 0.0f64..30.0, d2 in 0.0f64..30.0) {
        let l = load_of(&s, 2);
        let k = min_stable_drones(l.total_load()) + extra;
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let base = pk_wait(l.total_second(), l.total_load(), k);
        let a = dynamic_waits(&l, k, |_, _| lo);
        let b = dynamic_waits(&l, k, |_, _| hi);
        prop_assert_eq!(a[0], base);
        prop_assert!(a[1] >= base);
        prop_assert!(b[1] >= a[1]);
    }

    #[test]
    fn single_class_static_is_np(seed in any::<u64>()) {
        let mut r = rng(seed);
        let np = random_instance(&mut r, Mode::Np, 4, 3, 1);
        let sp = np.with_mode(Mode::Sp).unwrap();
        let asg = random_stable_assignment(&mut r, &np, 2);
        for j in 0..3 {
            prop_assert_eq!(waiting_sp(&sp, &asg, j, 0).unwrap(), waiting_np(&np, &asg, j).unwrap());
        }
        prop_assert_eq!(evaluate(&sp, &asg).unwrap().0.weighted, evaluate(&np, &asg).unwrap().0.weighted);
    }

    #[test]
    fn zero_gap_dynamic_is_np(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dp = random_instance(&mut r, Mode::Dp, 5, 3, 2).with_delta_a(0.0).unwrap();
        let np = dp.with_mode(Mode::Np).unwrap();
        let asg = random_stable_assignment(&mut r, &dp, 2);
        for j in 0..3 {
            let w = waiting_np(&np, &asg, j).unwrap();
            prop_assert_eq!(waiting_dp(&dp, &asg, j, 0).unwrap(), w);
            prop_assert_eq!(waiting_dp(&dp, &asg, j, 1).unwrap(), w);
        }
    }

    #[test]
    fn buffered_waits_are_bit_identical(seed in any::<u64>(), extra in 0u32..4) {
        let mut r = rng(seed);
        for mode in [Mode::Np, Mode::Sp, Mode::Dp] {
            let inst = random_instance(&mut r, mode, 5, 3, 3);
            let asg = random_stable_assignment(&mut r, &inst, extra);
            let classes = inst.n_classes();
            let p = inst.priority();
            let delta: Vec<f64> = (0..classes * classes).map(|x| p.delta_a(x / classes, x % classes)).collect();
            let mut out = vec![f64::NAN; classes];
            for (j, load) in facility_loads(&inst, &asg).unwrap().iter().enumerate() {
                if asg.open[j] {
                    class_waits_into(mode, load, asg.drones[j], &delta, &mut out);
                    let want = class_waits(&inst, load, asg.drones[j]);
                    prop_assert_eq!(
                        out.iter().map(|w| w.to_bits()).collect::<Vec<_>>(),
                        want.iter().map(|w| w.to_bits()).collect::<Vec<_>>()
                    );
                }
            }
        }
    }

    #[test]
    fn loads_match_assignment(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, Mode::Sp, 5, 3, 2);
        let asg = random_stable_assignment(&mut r, &inst, 0);
        let loads = facility_loads(&inst, &asg).unwrap();
        let total: f64 = loads.iter().map(|l| l.total_arrival()).sum();
        let lambda: f64 = inst.nodes().iter().map(|n| n.lambda).sum();
        prop_assert!((total - lambda).abs() < 1e-12);
        for (j, l) in loads.iter().enumerate() {
            if asg.open[j] {
                prop_assert!(f64::from(asg.drones[j]) - l.total_load() >= 1e-6);
            }
        }
    }
}

#[test]
fn presets_valid_and_round_trip_over_many_seeds() {
    for seed in 0..1000 {
        for preset in [Preset::SpPaper, Preset::DpPaper] {
            let inst = preset.generate(seed).unwrap();
            let back = Instance::from_json_str(&inst.to_json_string()).unwrap();
            assert_eq!(back, inst);
            assert!(inst.unreachable_nodes().is_empty());
        }
    }
}
