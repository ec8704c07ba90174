use proptest::prelude::*;
use qci_core::geometry::{principal_equator, Profile};
use qci_core::quasimode::*;
use qci_core::spectral::solve_highest_weight;

fn profiles() -> Vec<Profile> {
    vec![Profile::sphere(), Profile::perturbed_sphere(0.05)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sphere_phase_is_log_cosine(t in -1.4f64..1.4) {
        let a = phase_integral(&Profile::sphere(), 0.0, t);
        let exact = -(-2.0 * (0.5 * t).sin().powi(2)).ln_1p();
        prop_assert!((a - exact).abs() <= 1e-10 * exact.max(1e-300) + 1e-300, "{a} vs {exact}");
    }

    #[test]
    fn field_peaks_at_equator_and_decays(which in 0usize..2, lambda in 10.0f64..400.0) {
        let p = &profiles()[which];
        let grid = default_grid(p, lambda).unwrap();
        let q = build(p, lambda, &grid).unwrap();
        let t0 = principal_equator(p).unwrap();
        let i0 = q.grid.partition_point(|&t| t < t0);
        for i in 0..q.grid.len() {
            prop_assert!(q.a[i] >= 0.0);
            if i + 1 < q.grid.len() && q.grid[i + 1] <= t0 {
                prop_assert!(q.u_abs[i] <= q.u_abs[i + 1]);
            }
            if i > 0 && q.grid[i - 1] >= t0 {
                prop_assert!(q.u_abs[i] <= q.u_abs[i - 1]);
            }
        }
        let peak = q.u_abs.iter().cloned().fold(0.0, f64::max);
        prop_assert!((peak - lambda.powf(0.25)).abs() <= 1e-3 * peak || i0 == 0);
    }
}

#[test]
fn exponentially_small_away_from_equator() {
    let p = Profile::sphere();
    let lambda = 200.0;
    let q = build(&p, lambda, &[0.0, 0.25, 0.5]).unwrap();
    let ratio = q.u_abs[2] / q.u_abs[0];
    let bound = (-lambda * 0.5f64.powi(2) / 2.0).exp();
    assert!(ratio <= bound, "{ratio} > {bound}");
    assert!((ratio - 0.5f64.cos().powf(lambda)).abs() <= 1e-10 * ratio);
}

#[test]
fn analytic_and_finite_difference_residuals_agree() {
    for p in profiles() {
        for lambda in STANDARD_LAMBDAS {
            let row = quasimode_row(&p, lambda).unwrap();
            assert!(row.residual.agreement <= 1e-3, "{} λ = {lambda}: {}", p.name, row.residual.agreement);
        }
    }
}

#[test]
fn defect_scales_like_h() {
    for p in profiles() {
        let s = defect_and_sup_scaling(&p, &STANDARD_LAMBDAS).unwrap();
        assert!((s.defect_fit.exponent + 1.0).abs() <= 0.05, "{}: {}", p.name, s.defect_fit.exponent);
        assert!((s.sup_fit.exponent - 0.25).abs() <= 0.02, "{}: {}", p.name, s.sup_fit.exponent);
    }
}

#[test]
fn quasimode_sup_tracks_highest_weight_mode() {
    for p in profiles() {
        for lambda in [100.0f64, 150.0, 225.0] {
            let row = quasimode_row(&p, lambda).unwrap();
            let mode = solve_highest_weight(&p, lambda.round() as u32, 8000).unwrap();
            let sup = mode.radial.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let rel = (row.sup_normalized - sup).abs() / sup;
            assert!(rel <= 0.05, "{} λ = {lambda}: {} vs {sup}", p.name, row.sup_normalized);
        }
    }
}

#[test]
fn small_frequencies_rejected() {
    let p = Profile::sphere();
    assert!(matches!(build(&p, 5.0, &[0.0, 0.1, 0.2]), Err(QuasimodeError::LambdaTooSmall { .. })));
}
