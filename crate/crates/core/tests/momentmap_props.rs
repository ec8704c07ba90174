use std::f64::consts::{FRAC_PI_2, PI, TAU};

use proptest::prelude::*;
use qci_core::geometry::Profile;
use qci_core::momentmap::*;

fn liouville() -> SymbolSystem {
    build_system(SystemSpec::LiouvilleTorus(LiouvilleParams::trigonometric(3.0, 0.5, 1.0, 0.3))).unwrap()
}

fn ellipsoid() -> SymbolSystem {
    build_system(SystemSpec::Ellipsoid([3.0, 2.0, 1.0])).unwrap()
}

fn flat(n: usize, momenta: Vec<usize>) -> SymbolSystem {
    build_system(SystemSpec::FlatTorus { n, momenta }).unwrap()
}

/// Point on the unit sphere from two angles.
fn sphere_point(a: f64, b: f64) -> [f64; 3] {
    [a.cos() * b.cos(), a.cos() * b.sin(), a.sin()]
}

/// Random base point and cosphere covector for each bundled family.
fn sample(which: usize, u: f64, v: f64, theta: f64) -> (SymbolSystem, Vec<f64>, Vec<f64>) {
    match which {
        0 => {
            let sys = build_system(SystemSpec::SurfaceOfRevolution(Profile::perturbed_sphere(0.05))).unwrap();
            let x = vec![-1.2 + 2.4 * u, v * TAU];
            let xi = cosphere_point(&sys, &x, theta).unwrap();
            (sys, x, xi.as_slice().to_vec())
        }
        1 => {
            let sys = liouville();
            let x = vec![u, v];
            let xi = cosphere_point(&sys, &x, theta).unwrap();
            (sys, x, xi.as_slice().to_vec())
        }
        2 => {
            let sys = ellipsoid();
            let x = sphere_point(PI * (u - 0.5) * 0.98, TAU * v).to_vec();
            let xi = cosphere_point(&sys, &x, theta).unwrap();
            (sys, x, xi.as_slice().to_vec())
        }
        _ => {
            let sys = flat(3, vec![1, 2]);
            let dir = sphere_point(PI * (u - 0.5), theta);
            let xi = cosphere_solve(&sys, &[0.0; 3], &dir, 1.0).unwrap();
            (sys, vec![0.0; 3], xi.as_slice().to_vec())
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gradients_match_finite_differences(which in 0usize..4, u in 0.01f64..0.99, v in 0.0f64..1.0, theta in 0.0f64..TAU) {
        let (sys, x, xi) = sample(which, u, v, theta);
        let eta = 1e-6;
        for j in 0..sys.n() {
            let g = sys.grad(j, &x, &xi);
            for i in 0..xi.len() {
                let (mut a, mut b) = (xi.clone(), xi.clone());
                a[i] += eta;
                b[i] -= eta;
                let fd = (sys.eval(j, &x, &a) - sys.eval(j, &x, &b)) / (2.0 * eta);
                prop_assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0), "p{} ∂{}: {fd} vs {}", j + 1, i, g[i]);
            }
        }
    }

    #[test]
    fn hamiltonian_is_homogeneous(which in 0usize..4, u in 0.01f64..0.99, v in 0.0f64..1.0, theta in 0.0f64..TAU, c in 0.1f64..10.0) {
        let (sys, x, xi) = sample(which, u, v, theta);
        let scaled: Vec<f64> = xi.iter().map(|a| a * c).collect();
        let expected = c.powf(sys.degree) * sys.eval(0, &x, &xi);
        prop_assert!((sys.eval(0, &x, &scaled) - expected).abs() <= 1e-12 * expected.abs().max(1.0));
    }

    #[test]
    fn rank_invariant_under_rescaling(which in 0usize..4, u in 0.01f64..0.99, v in 0.0f64..1.0, theta in 0.0f64..TAU, c in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0]) {
        let (sys, x, xi) = sample(which, u, v, theta);
        let base = rank_at(&sys, &x, &xi, 1e-8).unwrap().rank;
        for j in 1..sys.n() {
            prop_assert_eq!(rank_at(&sys.scaled(j, c), &x, &xi, 1e-8).unwrap().rank, base);
        }
    }

    #[test]
    fn rank_invariant_under_reordering(n in 3usize..6, seed in 0u64..1000, u in -1.0f64..1.0, theta in 0.0f64..TAU) {
        let mut momenta: Vec<usize> = (0..n).collect();
        momenta.remove((seed as usize) % n);
        let sys = flat(n, momenta);
        let mut dir = vec![0.0; n];
        for (i, d) in dir.iter_mut().enumerate() {
            *d = (theta * (i + 1) as f64 + u).sin();
        }
        let xi = cosphere_solve(&sys, &vec![0.0; n], &dir, 1.0).unwrap();
        let base = rank_at(&sys, &vec![0.0; n], xi.as_slice(), 1e-8).unwrap().rank;
        let mut order: Vec<usize> = (1..n).collect();
        order.rotate_left((seed as usize) % (n - 1));
        order.reverse();
        let permuted = sys.permuted(&order);
        prop_assert_eq!(rank_at(&permuted, &vec![0.0; n], xi.as_slice(), 1e-8).unwrap().rank, base);
    }

    #[test]
    fn derived_symbols_never_raise_rank(which in 0usize..4, u in 0.01f64..0.99, v in 0.0f64..1.0, theta in 0.0f64..TAU) {
        let (sys, x, xi) = sample(which, u, v, theta);
        let base = rank_at(&sys, &x, &xi, 1e-8).unwrap().rank;
        let n = sys.n();
        let extended = sys.with_function_of(
            move |p| p[1..].iter().map(|a| a * a).sum::<f64>() + p[0] * p[n - 1],
            move |p| {
                let mut d: Vec<f64> = p.iter().map(|a| 2.0 * a).collect();
                d[0] = p[n - 1];
                d[n - 1] += p[0];
                d
            },
        );
        prop_assert!(rank_at(&extended, &x, &xi, 1e-8).unwrap().rank <= base);
    }

    #[test]
    fn ellipsoid_tangent_basis_respects_constraint(u in 0.01f64..0.99, v in 0.0f64..1.0, theta in 0.0f64..TAU) {
        let (sys, x, xi) = sample(2, u, v, theta);
        prop_assert!(x.iter().zip(&xi).map(|(a, b)| a * b).sum::<f64>().abs() <= 1e-12);
        let r = rank_at(&sys, &x, &xi, 1e-8).unwrap();
        let gh = sys.grad(0, &x, &xi);
        for c in 0..r.tangent_basis.ncols() {
            let col = r.tangent_basis.column(c);
            let dx: f64 = col.iter().zip(&x).map(|(a, b)| a * b).sum();
            prop_assert!(dx.abs() <= 1e-10);
            prop_assert!(col.dot(&gh).abs() <= 1e-10 * gh.norm().max(1.0));
        }
    }
}

#[test]
fn rank_stable_under_tolerance_refinement() {
    let sor = build_system(SystemSpec::SurfaceOfRevolution(Profile::sphere())).unwrap();
    let cases: Vec<(SymbolSystem, Vec<f64>, Vec<f64>)> = vec![
        (sor.clone(), vec![0.7, 0.0], cosphere_point(&sor, &[0.7, 0.0], 0.3).unwrap().as_slice().to_vec()),
        (sor.clone(), vec![0.7, 0.0], cosphere_point(&sor, &[0.7, 0.0], FRAC_PI_2).unwrap().as_slice().to_vec()),
        (liouville(), vec![0.2, 0.4], cosphere_point(&liouville(), &[0.2, 0.4], 1.0).unwrap().as_slice().to_vec()),
        (liouville(), vec![0.2, 0.4], cosphere_point(&liouville(), &[0.2, 0.4], PI).unwrap().as_slice().to_vec()),
        (flat(3, vec![1, 2]), vec![0.0; 3], vec![0.0, 1.0, 0.0]),
        (flat(3, vec![0, 2]), vec![0.0; 3], vec![0.0, 1.0, 0.0]),
    ];
    for (sys, x, xi) in cases {
        let a = rank_at(&sys, &x, &xi, 1e-8).unwrap().rank;
        let b = rank_at(&sys, &x, &xi, 1e-9).unwrap().rank;
        assert_eq!(a, b, "{}", sys.label);
    }
}

#[test]
fn liouville_critical_values_are_energy_levels() {
    let (alpha, beta) = (2.0, 1.0);
    let sys = build_system(SystemSpec::LiouvilleTorus(LiouvilleParams::constant(alpha, beta))).unwrap();
    let r = morse_check(&sys, &|p| p[1], &[0.4, 0.1], 720, 1e-6).unwrap();
    for (k, c) in r.critical_points.iter().enumerate() {
        let expected = if k % 2 == 0 { beta } else { -alpha };
        assert!((c.value - expected).abs() < 1e-10);
    }
}

#[test]
fn ellipsoid_rank_fails_along_gamma() {
    let sys = ellipsoid();
    for alpha in [0.3f64, 0.7, 1.2, 2.5] {
        let x = [alpha.cos(), 0.0, alpha.sin()];
        let scan = rank_scan(&sys, &x, 360, 1e-8).unwrap();
        assert_eq!(scan.max_rank, 1);
        let tangent: Vec<&ScanPoint> = scan
            .degenerate
            .iter()
            .map(|&i| &scan.points[i])
            .filter(|p| p.xi[1].abs() < 1e-12)
            .collect();
        assert_eq!(tangent.len(), 2, "α = {alpha}");
        for p in tangent {
            assert_eq!(p.report.rank, 0);
            let v = sys.values(&x, p.xi.as_slice());
            assert!((v[1] - v[0] / 2.0).abs() < 1e-12);
        }
        // off Γ the proportionality fails
        let off = cosphere_point(&sys, &x, 0.4).unwrap();
        let v = sys.values(&x, off.as_slice());
        assert!((v[1] - v[0] / 2.0).abs() > 1e-3);
        assert_eq!(rank_at(&sys, &x, off.as_slice(), 1e-8).unwrap().rank, 1);
    }
}

#[test]
fn sor_rank_one_off_vertical_covectors() {
    let sys = build_system(SystemSpec::SurfaceOfRevolution(Profile::spheroid(0.2))).unwrap();
    for t in [0.4, 1.0, 1.57, 2.5] {
        let scan = rank_scan(&sys, &[t, 0.0], 360, 1e-8).unwrap();
        for p in &scan.points {
            let expected = if p.xi[0].abs() < 1e-12 { 0 } else { 1 };
            assert_eq!(p.report.rank, expected, "t = {t}, θ = {:?}", p.theta);
        }
        assert_eq!(scan.degenerate.len(), 2);
    }
}

#[test]
fn unprojected_rank_available_for_comparison() {
    let sys = flat(3, vec![1, 2]);
    let xi = [0.0, 1.0, 0.0];
    assert_eq!(rank_at_with(&sys, &[0.0; 3], &xi, 1e-8, RankMode::Full).unwrap().rank, 2);
    assert_eq!(rank_at_with(&sys, &[0.0; 3], &xi, 1e-8, RankMode::Tangential).unwrap().rank, 1);
}
