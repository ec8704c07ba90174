use proptest::prelude::*;
use proptest::strategy::ValueTree;
use qci_core::lattice::*;

/// Random admissible window: momenta inside the ball of radius `E[0]`.
fn spec_strategy(max_n: usize) -> impl Strategy<Value = WindowSpec> {
    (2usize..=max_n, any::<u64>(), 0.3f64..1.5, 0.0f64..2.5, 0.0f64..2.5, prop::collection::vec(-1.0f64..1.0, max_n))
        .prop_map(|(n, seed, e0, c1, c2, dirs)| {
            let free = (seed as usize) % n;
            let momenta: Vec<usize> = (0..n).filter(|&i| i != free).collect();
            let raw = &dirs[..n - 1];
            let len = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
            let mut energy = vec![e0];
            energy.extend(raw.iter().map(|v| e0 * v / len));
            WindowSpec::new(TorusFrame::new(n, momenta).unwrap(), energy, c1, c2).unwrap()
        })
}

/// Step keeping the brute-force ball small enough for the dimension.
fn feasible_h(spec: &WindowSpec, u: f64) -> f64 {
    let max_inv = if spec.frame.n == 2 { 500.0 } else { 40.0 };
    let inv_h = 10.0 + u * (max_inv - 10.0);
    spec.energy[0] / inv_h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn optimized_counter_matches_oracle(spec in spec_strategy(3), u in 0.0f64..1.0) {
        let h = feasible_h(&spec, u).min(0.1);
        prop_assert_eq!(count_window(&spec, h).unwrap(), count_window_bruteforce(&spec, h).unwrap(), "{:?} h = {}", spec, h);
    }

    #[test]
    fn wider_windows_count_more(spec in spec_strategy(3), u in 0.0f64..1.0, dc1 in 0.0f64..1.0, dc2 in 0.0f64..1.0) {
        let h = feasible_h(&spec, u).min(0.1);
        let base = count_window(&spec, h).unwrap();
        let wider1 = WindowSpec { c1: spec.c1 + dc1, ..spec.clone() };
        let wider2 = WindowSpec { c2: spec.c2 + dc2, ..spec.clone() };
        prop_assert!(count_window(&wider1, h).unwrap() >= base);
        prop_assert!(count_window(&wider2, h).unwrap() >= base);
    }

    #[test]
    fn coordinate_permutation_preserves_count(spec in spec_strategy(4), u in 0.0f64..1.0, shift in 0usize..4, swap in any::<bool>()) {
        let n = spec.frame.n;
        let h = (spec.energy[0] / (10.0 + 30.0 * u)).min(0.1);
        let base = count_window(&spec, h).unwrap();
        // relabel torus coordinates by a cyclic shift
        let relabel: Vec<usize> = spec.frame.momentum_indices.iter().map(|&i| (i + shift) % n).collect();
        let shifted = WindowSpec::new(TorusFrame::new(n, relabel).unwrap(), spec.energy.clone(), spec.c1, spec.c2).unwrap();
        prop_assert_eq!(count_window(&shifted, h).unwrap(), base);
        // reorder the momenta together with their energies
        if swap && n >= 3 {
            let mut idx = spec.frame.momentum_indices.clone();
            let mut energy = spec.energy.clone();
            idx.swap(0, 1);
            energy.swap(1, 2);
            let reordered = WindowSpec::new(TorusFrame::new(n, idx).unwrap(), energy, spec.c1, spec.c2).unwrap();
            prop_assert_eq!(count_window(&reordered, h).unwrap(), base);
        }
    }

    #[test]
    fn sign_flip_of_momentum_energy_preserves_count(spec in spec_strategy(3), u in 0.0f64..1.0) {
        let h = feasible_h(&spec, u).min(0.1);
        let mut energy = spec.energy.clone();
        energy[1] = -energy[1];
        let flipped = WindowSpec { energy, ..spec.clone() };
        prop_assert_eq!(count_window(&flipped, h).unwrap(), count_window(&spec, h).unwrap());
    }
}

#[test]
fn fifty_random_specs_agree_with_oracle() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let strategy = (spec_strategy(3), 0.0f64..1.0);
    for _ in 0..50 {
        let (spec, u) = strategy.new_tree(&mut runner).unwrap().current();
        let h = feasible_h(&spec, u).min(0.1);
        assert_eq!(count_window(&spec, h).unwrap(), count_window_bruteforce(&spec, h).unwrap());
    }
}

#[test]
fn frame_exponents_on_three_torus() {
    let cmp = frame_compare(3, &standard_h_grid(2024)).unwrap();
    assert_eq!(cmp.p_fit.rank, 1);
    assert_eq!(cmp.q_fit.rank, 2);
    assert!(cmp.p_fit.bounded && cmp.q_fit.bounded);
    assert!(cmp.gap >= 0.4, "gap {}", cmp.gap);
}

#[test]
fn oversized_oracle_refused() {
    let spec = WindowSpec::new(TorusFrame::p_frame(3).unwrap(), vec![1.0, 0.5, 0.0], 1.0, 1.0).unwrap();
    assert!(matches!(count_window_bruteforce(&spec, 1e-4), Err(LatticeError::TooLarge { .. })));
}
