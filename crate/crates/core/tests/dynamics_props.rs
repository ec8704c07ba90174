use std::f64::consts::{FRAC_PI_2, PI, TAU};

use proptest::prelude::*;
use qci_core::dynamics::*;
use qci_core::geometry::Profile;

fn profiles() -> Vec<Profile> {
    vec![Profile::sphere(), Profile::perturbed_sphere(0.05), Profile::spheroid(0.2)]
}

/// Interior launch with Clairaut constant bounded away from zero, so the
/// geodesic keeps clear of the poles.
fn launch(p: &Profile, u: f64, phi0: f64, psi: f64) -> Option<GeodesicState> {
    let t = p.t_minus + (0.2 + 0.6 * u) * p.length();
    let st = initial_state(p, t, phi0, psi).ok()?;
    (clairaut(p, &st).abs() >= 0.1).then_some(st)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn invariants_conserved(which in 0usize..3, u in 0.0f64..1.0, phi0 in 0.0f64..TAU, psi in 0.0f64..TAU) {
        let p = &profiles()[which];
        if let Some(st) = launch(p, u, phi0, psi) {
            let tr = integrate_geodesic(p, st, 100.0, 1e-12).unwrap();
            prop_assert!(!tr.pole_approach);
            prop_assert!(tr.max_speed_drift(p) <= 1e-9);
            prop_assert!(tr.max_clairaut_drift(p) <= 1e-9);
        }
    }

    #[test]
    fn forward_then_backward_returns(which in 0usize..3, u in 0.0f64..1.0, psi in 0.0f64..TAU) {
        let p = &profiles()[which];
        if let Some(st) = launch(p, u, 0.3, psi) {
            let (_, end) = integrate_geodesic(p, st, 20.0, 1e-12).unwrap().end();
            let (_, back) = integrate_geodesic(p, end.reversed(), 20.0, 1e-12).unwrap().end();
            let back = back.reversed();
            for (a, b) in [(back.t, st.t), (back.phi, st.phi), (back.dt_ds, st.dt_ds), (back.dphi_ds, st.dphi_ds)] {
                prop_assert!((a - b).abs() <= 1e-7, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn rotation_shifts_longitude_only(which in 0usize..3, u in 0.0f64..1.0, psi in 0.0f64..TAU, delta in -10.0f64..10.0) {
        let p = &profiles()[which];
        if let Some(st) = launch(p, u, 0.0, psi) {
            let shifted = GeodesicState { phi: delta, ..st };
            let a = integrate_geodesic(p, st, 30.0, 1e-11).unwrap();
            let b = integrate_geodesic(p, shifted, 30.0, 1e-11).unwrap();
            prop_assert_eq!(a.samples.len(), b.samples.len());
            for ((sa, xa), (sb, xb)) in a.samples.iter().zip(&b.samples) {
                prop_assert_eq!(sa, sb);
                prop_assert_eq!(xa.t, xb.t);
                prop_assert_eq!(xa.dt_ds, xb.dt_ds);
                prop_assert_eq!(xa.dphi_ds, xb.dphi_ds);
                prop_assert!((xb.phi - xa.phi - delta).abs() <= 1e-12 * (1.0 + xa.phi.abs() + delta.abs()));
            }
        }
    }

    #[test]
    fn sphere_return_map_is_rigid(psi in 0.05f64..(FRAC_PI_2 - 0.05), k in 1usize..6) {
        let p = Profile::sphere();
        let hits = equator_crossings(&p, psi, k, 1e-12, 100.0).unwrap();
        for (j, h) in hits.iter().enumerate() {
            let expected = (j + 1) as f64 * PI;
            prop_assert!((h.longitude - expected).abs() <= (j + 1) as f64 * 1e-9, "{} vs {expected}", h.longitude);
        }
    }

    #[test]
    fn rational_classification_is_monotone(phi in 0.0f64..TAU, q in 1u32..40, eps in 1e-9f64..1e-2) {
        let base = rational_classify(phi, q, eps);
        if base.rational {
            prop_assert!(rational_classify(phi, q + 7, eps).rational);
            prop_assert!(rational_classify(phi, q, eps * 3.0).rational);
        }
    }
}

#[test]
fn sphere_first_return_matches_half_turn() {
    let p = Profile::sphere();
    let grid: Vec<f64> = (0..16).map(|i| 0.2 + 1.2 * i as f64 / 15.0).collect();
    let v = zoll_test(&p, &grid, 1e-10).unwrap();
    assert!(v.zoll);
    for s in &v.samples {
        assert!((s.longitude - PI).abs() <= 1e-8);
        assert!((s.arclength - PI).abs() <= 1e-8);
    }
}

#[test]
fn spheroid_is_not_zoll() {
    let grid: Vec<f64> = (0..16).map(|i| 0.2 + 1.2 * i as f64 / 15.0).collect();
    let v = zoll_test(&Profile::spheroid(0.2), &grid, 1e-10).unwrap();
    assert!(!v.zoll);
    assert!(v.spread > 1e-3);
}

#[test]
fn nearly_round_spheroid_is_zoll_at_coarse_tolerance() {
    let grid: Vec<f64> = (0..16).map(|i| 0.2 + 1.2 * i as f64 / 15.0).collect();
    let v = zoll_test(&Profile::spheroid(1e-9), &grid, 1e-6).unwrap();
    assert!(v.zoll, "spread {}", v.spread);
}
