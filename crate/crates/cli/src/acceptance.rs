//! Acceptance criteria 1–9 as self-contained experiments. Each criterion has
//! a flat parameter set with defaults, a runtime budget and produces
//! artifacts plus a pass/fail verdict. Criterion 10 (determinism of the whole
//! batch) lives in [`crate::reproduce`].

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::time::Instant;

use anyhow::{ensure, Context, Result};
use qci_core::dynamics::{self, GeodesicState};
use qci_core::geometry::{Profile, ProfileSpec};
use qci_core::lattice::{self, TorusFrame, WindowSpec};
use qci_core::momentmap::{self, LiouvilleParams, SymbolSystem, SystemSpec};
use qci_core::{quasimode, spectral};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cells;
use crate::config::{field, Field, Kind, Params};
use crate::output::{Artifact, Csv};

pub struct Criterion {
    pub id: u32,
    pub title: &'static str,
    /// Wall-clock budget in seconds.
    pub budget: f64,
    pub schema: fn() -> Vec<Field>,
    eval: fn(&Params) -> Result<Evaluation>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub passed: bool,
    pub detail: String,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u32,
    pub title: &'static str,
    /// Numerical verdict and runtime budget both met.
    pub passed: bool,
    pub within_budget: bool,
    pub detail: String,
    pub elapsed: f64,
    pub config_text: String,
    pub artifacts: Vec<Artifact>,
}

impl CriterionResult {
    /// `criterion N: PASS|FAIL  title  detail`.
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2}: {}  {}  [{}; {:.2} s of {} s]",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.elapsed,
            self.budget()
        )
    }

    fn budget(&self) -> f64 {
        criteria().iter().find(|c| c.id == self.id).map(|c| c.budget).unwrap_or(f64::INFINITY)
    }
}

impl Criterion {
    pub fn defaults(&self, seed: u64) -> Params {
        let mut p = Params::new(format!("criterion {}", self.id), &(self.schema)());
        p.set("seed", &seed.to_string()).expect("every criterion has a seed");
        p
    }

    /// Parameter text that is hashed into the manifest.
    pub fn config_text(&self, params: &Params) -> String {
        let mut s = format!("criterion = {}\n", self.id);
        for (k, v) in params.iter() {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn evaluate(&self, params: &Params) -> CriterionResult {
        let start = Instant::now();
        let outcome = (self.eval)(params);
        let elapsed = start.elapsed().as_secs_f64();
        let within_budget = elapsed <= self.budget;
        let (passed, detail, artifacts) = match outcome {
            Ok(e) => (e.passed, e.detail, e.artifacts),
            Err(err) => (false, format!("error: {err:#}"), Vec::new()),
        };
        CriterionResult {
            id: self.id,
            title: self.title,
            passed: passed && within_budget,
            within_budget,
            detail,
            elapsed,
            config_text: self.config_text(params),
            artifacts,
        }
    }
}

pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: 1, title: "sphere spectral oracle", budget: 60.0, schema: schema_1, eval: sphere_oracle },
        Criterion { id: 2, title: "highest-weight sup-norm exponent", budget: 300.0, schema: schema_2, eval: highest_weight_exponent },
        Criterion { id: 3, title: "quasimode defect", budget: 120.0, schema: schema_3, eval: quasimode_defect },
        Criterion { id: 4, title: "quasimode exactness on the sphere", budget: 1.0, schema: schema_4, eval: quasimode_exactness },
        Criterion { id: 5, title: "Clairaut and unit-speed conservation", budget: 120.0, schema: schema_5, eval: conservation },
        Criterion { id: 6, title: "return map Zoll dichotomy", budget: 60.0, schema: schema_6, eval: return_map },
        Criterion { id: 7, title: "rank degeneracies", budget: 30.0, schema: schema_7, eval: rank_degeneracies },
        Criterion { id: 8, title: "lattice exponents on the 3-torus", budget: 180.0, schema: schema_8, eval: lattice_exponents },
        Criterion { id: 9, title: "property suites", budget: 300.0, schema: schema_9, eval: property_suites },
    ]
}

pub fn criterion(id: u32) -> Option<Criterion> {
    criteria().into_iter().find(|c| c.id == id)
}

/// Runs criterion `id` with its defaults.
pub fn run_default(id: u32, seed: u64) -> CriterionResult {
    let c = criterion(id).unwrap_or_else(|| panic!("no criterion {id}"));
    c.evaluate(&c.defaults(seed))
}

fn with_seed(mut fields: Vec<Field>) -> Vec<Field> {
    fields.insert(0, field("seed", Kind::Int, "2024"));
    fields
}

fn profile(raw: &str) -> Result<Profile> {
    let spec: ProfileSpec = raw.parse().with_context(|| format!("geometry: profile = {raw}"))?;
    Ok(spec.build()?)
}

fn profiles(p: &Params, key: &str) -> Result<Vec<Profile>> {
    p.text(key).split(';').map(|s| profile(s.trim())).collect()
}

fn schema_1() -> Vec<Field> {
    with_seed(vec![
        field("m_max", Kind::Int, "50"),
        field("grid_n", Kind::Int, "4000"),
        field("rel_tol", Kind::Real, "1e-4"),
    ])
}

/// Lowest eigenvalue per m against `m(m+1)`; `m = 0` is compared absolutely.
fn sphere_oracle(p: &Params) -> Result<Evaluation> {
    let sphere = Profile::sphere();
    let (grid_n, tol) = (p.usize("grid_n"), p.real("rel_tol"));
    let rows = (0..=p.int("m_max") as u32)
        .into_par_iter()
        .map(|m| {
            let mode = spectral::solve_modes(&sphere, m, grid_n, 1)?.remove(0);
            let exact = f64::from(m) * f64::from(m + 1);
            Ok((m, mode.lambda_sq, exact, (mode.lambda_sq - exact).abs() / exact.max(1.0)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut csv = Csv::new(&["m", "lambda_sq", "exact", "rel_err"]);
    for &(m, l, e, r) in &rows {
        csv.row(cells![m, l, e, r]);
    }
    let worst = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    Ok(Evaluation {
        passed: worst <= tol,
        detail: format!("worst relative error {worst:.2e} (tol {tol:.0e})"),
        artifacts: vec![Artifact::csv("c01_sphere_oracle.csv", csv)],
    })
}

fn schema_2() -> Vec<Field> {
    with_seed(vec![
        field("profile", Kind::Text, "sphere"),
        field("family", Kind::Ints, "20,30,45,67,100,150,225"),
        field("target", Kind::Real, "0.25"),
        field("tol", Kind::Real, "0.02"),
    ])
}

fn highest_weight_exponent(p: &Params) -> Result<Evaluation> {
    let prof = profile(p.text("profile"))?;
    let samples = p
        .ints("family")
        .into_par_iter()
        .map(|m| spectral::highest_weight_sample(&prof, m as u32))
        .collect::<Result<Vec<_>, _>>()?;
    let fit = spectral::fit_family(&samples)?;
    let mut csv = Csv::new(&["m", "grid_n", "lambda", "sup_T", "T_at_equator"]);
    for s in &samples {
        csv.row(cells![s.m, s.grid_n, s.lambda_sq.sqrt(), s.sup.sup, s.sup.at_equator.unwrap_or(f64::NAN)]);
    }
    let err = (fit.exponent - p.real("target")).abs();
    Ok(Evaluation {
        passed: err <= p.real("tol"),
        detail: format!("exponent {:.4} (target {} ± {}), r² {:.6}", fit.exponent, p.real("target"), p.real("tol"), fit.r_squared),
        artifacts: vec![Artifact::csv("c02_highest_weight.csv", csv)],
    })
}

fn schema_3() -> Vec<Field> {
    with_seed(vec![
        field("profiles", Kind::Text, "sphere;perturbed-sphere(0.05)"),
        field("lambdas", Kind::Reals, "50,75,112,169,253,380"),
        field("target", Kind::Real, "-1"),
        field("tol", Kind::Real, "0.05"),
        field("agreement", Kind::Real, "1e-3"),
    ])
}

fn quasimode_defect(p: &Params) -> Result<Evaluation> {
    let (target, tol, agree) = (p.real("target"), p.real("tol"), p.real("agreement"));
    let mut csv = Csv::new(&["profile", "lambda", "sup_normalized", "residual_analytic_sup", "residual_numeric_sup", "agreement"]);
    let mut passed = true;
    let mut parts = Vec::new();
    for prof in profiles(p, "profiles")? {
        let s = quasimode::defect_and_sup_scaling(&prof, &p.reals("lambdas"))?;
        let worst = s.rows.iter().map(|r| r.residual.agreement).fold(0.0, f64::max);
        for r in &s.rows {
            csv.row(cells![prof.name.as_str(), r.lambda, r.sup_normalized, r.residual.analytic_sup, r.residual.numeric_sup, r.residual.agreement]);
        }
        passed &= (s.defect_fit.exponent - target).abs() <= tol && worst <= agree;
        parts.push(format!("{}: exponent {:.4}, agreement {worst:.1e}", prof.name, s.defect_fit.exponent));
    }
    Ok(Evaluation { passed, detail: parts.join("; "), artifacts: vec![Artifact::csv("c03_quasimode_defect.csv", csv)] })
}

fn schema_4() -> Vec<Field> {
    with_seed(vec![field("lambdas", Kind::Reals, "50,200,380"), field("rel_tol", Kind::Real, "1e-10")])
}

/// `A(t)` against `−ln cos t` on the default grid.
fn quasimode_exactness(p: &Params) -> Result<Evaluation> {
    let sphere = Profile::sphere();
    let tol = p.real("rel_tol");
    let mut csv = Csv::new(&["lambda", "nodes", "max_rel_err_A", "max_rel_err_u"]);
    let mut worst = 0.0f64;
    for lambda in p.reals("lambdas") {
        let grid = quasimode::default_grid(&sphere, lambda)?;
        let q = quasimode::build(&sphere, lambda, &grid)?;
        let (mut ea, mut eu) = (0.0f64, 0.0f64);
        for (i, &t) in q.grid.iter().enumerate() {
            let exact = -(-2.0 * (0.5 * t).sin().powi(2)).ln_1p();
            ea = ea.max(if exact == 0.0 { q.a[i].abs() } else { (q.a[i] - exact).abs() / exact });
            let u = lambda.powf(0.25) * t.cos().powf(lambda);
            eu = eu.max((q.u_abs[i] - u).abs() / u);
        }
        csv.row(cells![lambda, q.grid.len(), ea, eu]);
        worst = worst.max(ea);
    }
    Ok(Evaluation {
        passed: worst <= tol,
        detail: format!("worst relative error in A {worst:.2e}"),
        artifacts: vec![Artifact::csv("c04_quasimode_exact.csv", csv)],
    })
}

fn schema_5() -> Vec<Field> {
    with_seed(vec![
        field("profiles", Kind::Text, "sphere;perturbed-sphere(0.05);spheroid(0.2)"),
        field("launches", Kind::Int, "100"),
        field("s_max", Kind::Real, "100"),
        field("tol", Kind::Real, "1e-12"),
        field("drift", Kind::Real, "1e-9"),
        field("gamma_min", Kind::Real, "0.1"),
    ])
}

/// Random interior launch; the Clairaut constant is kept away from zero so
/// the geodesic stays clear of the poles.
fn random_launch(p: &Profile, rng: &mut ChaCha8Rng, gamma_min: f64) -> Result<GeodesicState> {
    loop {
        let t = p.t_minus + (0.2 + 0.6 * rng.random::<f64>()) * p.length();
        let st = dynamics::initial_state(p, t, rng.random_range(0.0..TAU), rng.random_range(0.0..TAU))?;
        if dynamics::clairaut(p, &st).abs() >= gamma_min {
            return Ok(st);
        }
    }
}

fn conservation(p: &Params) -> Result<Evaluation> {
    let (s_max, tol, bound) = (p.real("s_max"), p.real("tol"), p.real("drift"));
    let mut rng = ChaCha8Rng::seed_from_u64(p.int("seed"));
    let mut csv = Csv::new(&["profile", "t", "phi", "dt_ds", "dphi_ds", "clairaut_drift", "speed_drift"]);
    let mut worst = 0.0f64;
    let mut pole = 0;
    for prof in profiles(p, "profiles")? {
        let launches = (0..p.usize("launches"))
            .map(|_| random_launch(&prof, &mut rng, p.real("gamma_min")))
            .collect::<Result<Vec<_>>>()?;
        let rows = launches
            .par_iter()
            .map(|&st| {
                let tr = dynamics::integrate_geodesic(&prof, st, s_max, tol)?;
                Ok((st, tr.max_clairaut_drift(&prof), tr.max_speed_drift(&prof), tr.pole_approach))
            })
            .collect::<Result<Vec<_>>>()?;
        for (st, dc, ds, pa) in rows {
            csv.row(cells![prof.name.as_str(), st.t, st.phi, st.dt_ds, st.dphi_ds, dc, ds]);
            worst = worst.max(dc).max(ds);
            pole += usize::from(pa);
        }
    }
    Ok(Evaluation {
        passed: worst <= bound && pole == 0,
        detail: format!("worst drift {worst:.2e} (bound {bound:.0e}), {pole} pole approaches"),
        artifacts: vec![Artifact::csv("c05_conservation.csv", csv)],
    })
}

fn schema_6() -> Vec<Field> {
    with_seed(vec![
        field("psi", Kind::Range, "0.2:1.4:16"),
        field("zoll_tol", Kind::Real, "1e-10"),
        field("phi_tol", Kind::Real, "1e-8"),
        field("spheroid", Kind::Text, "spheroid(0.2)"),
        field("spread_min", Kind::Real, "1e-3"),
    ])
}

fn return_map(p: &Params) -> Result<Evaluation> {
    let psi = p.linspace("psi");
    let tol = p.real("zoll_tol");
    let sphere = dynamics::zoll_test(&Profile::sphere(), &psi, tol)?;
    let spheroid = dynamics::zoll_test(&profile(p.text("spheroid"))?, &psi, tol)?;
    let mut csv = Csv::new(&["psi", "Phi_sphere", "Phi_spheroid"]);
    for (a, b) in sphere.samples.iter().zip(&spheroid.samples) {
        csv.row(cells![a.psi, a.longitude, b.longitude]);
    }
    let dev = sphere.samples.iter().map(|r| (r.longitude - PI).abs()).fold(0.0, f64::max);
    let passed = sphere.zoll && dev <= p.real("phi_tol") && !spheroid.zoll && spheroid.spread > p.real("spread_min");
    Ok(Evaluation {
        passed,
        detail: format!(
            "sphere |Φ − π| ≤ {dev:.1e} zoll = {}; spheroid spread {:.3e} zoll = {}",
            sphere.zoll, spheroid.spread, spheroid.zoll
        ),
        artifacts: vec![Artifact::csv("c06_return_map.csv", csv)],
    })
}

fn schema_7() -> Vec<Field> {
    with_seed(vec![
        field("tol", Kind::Real, "1e-8"),
        field("samples", Kind::Int, "360"),
        field("sor_profiles", Kind::Text, "sphere;spheroid(0.2);perturbed-sphere(0.05)"),
        field("sor_fractions", Kind::Reals, "0.15,0.35,0.6"),
        field("liouville", Kind::Reals, "3,0.5,1,0.3"),
        field("liouville_x", Kind::Reals, "0.2,0.4"),
        field("axes", Kind::Reals, "3,2,1"),
        field("gamma_alpha", Kind::Reals, "0.3,0.7,1.2,2.5,4.0"),
        field("torus_n", Kind::Ints, "3,4,5"),
    ])
}

/// Rank degeneracies of all four bundled systems.
fn rank_degeneracies(p: &Params) -> Result<Evaluation> {
    let (tol, samples) = (p.real("tol"), p.usize("samples"));
    let mut csv = Csv::new(&["system", "point", "direction", "rank", "expected"]);
    let mut failures = Vec::new();
    let mut record = |csv: &mut Csv, sys: &str, point: String, dir: String, rank: usize, expected: usize| {
        csv.row(cells![sys, point.replace(',', " "), dir.as_str(), rank, expected]);
        if rank != expected {
            failures.push(format!("{sys} at {point} {dir}: rank {rank} ≠ {expected}"));
        }
    };

    // surfaces of revolution: rank 1 except where ξ_t = 0
    for prof in profiles(p, "sor_profiles")? {
        let sys = momentmap::build_system(SystemSpec::SurfaceOfRevolution(prof.clone()))?;
        for frac in p.reals("sor_fractions") {
            let t = prof.t_minus + frac * prof.length();
            let scan = momentmap::rank_scan(&sys, &[t, 0.0], samples, tol)?;
            for pt in &scan.points {
                let expected = usize::from(pt.xi[0].abs() > 1e-12);
                if pt.report.rank != expected || expected == 0 {
                    let dir = format!("theta={:.6}", pt.theta.unwrap_or(f64::NAN));
                    record(&mut csv, &sys.label, format!("t={t:.4}"), dir, pt.report.rank, expected);
                }
            }
            ensure!(scan.points.iter().any(|pt| pt.xi[0].abs() <= 1e-12), "scan grid misses ξ_t = 0");
        }
    }

    // Liouville torus: critical directions at θ = kπ/2
    let v = p.reals("liouville");
    ensure!(v.len() == 4, "liouville needs a0,a1,b0,b1");
    let sys = momentmap::build_system(SystemSpec::LiouvilleTorus(LiouvilleParams::trigonometric(v[0], v[1], v[2], v[3])))?;
    let x = p.reals("liouville_x");
    let scan = momentmap::rank_scan(&sys, &x, samples, tol)?;
    let spacing = TAU / samples as f64;
    let thetas = scan.degenerate_thetas();
    for k in 0..4 {
        let target = k as f64 * FRAC_PI_2;
        let hit = thetas.iter().any(|&th| angle_gap(th, target) <= spacing);
        record(&mut csv, &sys.label, format!("{x:?}"), format!("theta_{k}"), usize::from(!hit), 0);
    }
    for &th in &thetas {
        let near = (0..4).any(|k| angle_gap(th, k as f64 * FRAC_PI_2) <= spacing);
        if !near {
            record(&mut csv, &sys.label, format!("{x:?}"), format!("theta={th:.6}"), 0, 1);
        }
    }

    // ellipsoid: on Γ± the Γ-tangent covectors have P = H/a2 and rank 0
    let axes = p.reals("axes");
    ensure!(axes.len() == 3, "axes needs three semi-axes");
    let sys = momentmap::build_system(SystemSpec::Ellipsoid([axes[0], axes[1], axes[2]]))?;
    for alpha in p.reals("gamma_alpha") {
        let x = [alpha.cos(), 0.0, alpha.sin()];
        let scan = momentmap::rank_scan(&sys, &x, samples, tol)?;
        let tangent: Vec<_> = scan.points.iter().filter(|pt| pt.xi[1].abs() <= 1e-12).collect();
        ensure!(tangent.len() == 2, "scan at α = {alpha} has {} Γ-tangent samples", tangent.len());
        for pt in tangent {
            let vals = sys.values(&x, pt.xi.as_slice());
            let proportional = (vals[1] - vals[0] / axes[1]).abs() <= 1e-12 * vals[0].abs().max(1.0);
            let dir = format!("theta={:.6} P-H/a2={:.1e}", pt.theta.unwrap_or(f64::NAN), vals[1] - vals[0] / axes[1]);
            record(&mut csv, &sys.label, format!("alpha={alpha}"), dir, pt.report.rank + usize::from(!proportional), 0);
        }
        let generic = momentmap::cosphere_point(&sys, &x, 0.4)?;
        let r = momentmap::rank_at(&sys, &x, generic.as_slice(), tol)?.rank;
        record(&mut csv, &sys.label, format!("alpha={alpha}"), "theta=0.4".into(), r, 1);
    }

    // flat torus: 𝓟 rank n − 2 against 𝓠 rank n − 1
    for n in p.ints("torus_n") {
        let n = n as usize;
        let (ps, qs) = lattice::frame_specs(n)?;
        record(&mut csv, &format!("flat_torus P n={n}"), format!("{:?}", ps.center_covector()), "centre".into(), lattice::window_rank(&ps)?, n - 2);
        record(&mut csv, &format!("flat_torus Q n={n}"), format!("{:?}", qs.center_covector()), "centre".into(), lattice::window_rank(&qs)?, n - 1);
    }

    Ok(Evaluation {
        passed: failures.is_empty(),
        detail: if failures.is_empty() { "all integer ranks as predicted".into() } else { failures.join("; ") },
        artifacts: vec![Artifact::csv("c07_rank.csv", csv)],
    })
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn schema_8() -> Vec<Field> {
    with_seed(vec![
        field("n", Kind::Int, "3"),
        field("gap_min", Kind::Real, "0.4"),
        field("oracle_specs", Kind::Int, "50"),
    ])
}

/// Random admissible window small enough for the brute-force oracle.
fn random_feasible_spec(rng: &mut ChaCha8Rng) -> Result<(WindowSpec, f64)> {
    let n = rng.random_range(2..=3usize);
    let free = rng.random_range(0..n);
    let momenta: Vec<usize> = (0..n).filter(|&i| i != free).collect();
    let e0 = rng.random_range(0.3..1.5);
    let raw: Vec<f64> = (0..n - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
    let len = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    let mut energy = vec![e0];
    energy.extend(raw.iter().map(|v| e0 * v / len));
    let spec = WindowSpec::new(TorusFrame::new(n, momenta)?, energy, rng.random_range(0.0..2.5), rng.random_range(0.0..2.5))?;
    let max_inv = if n == 2 { 500.0 } else { 40.0 };
    let h = (e0 / rng.random_range(10.0..max_inv)).min(0.1);
    Ok((spec, h))
}

fn lattice_exponents(p: &Params) -> Result<Evaluation> {
    let seed = p.int("seed");
    let n = p.usize("n");
    let hs = lattice::standard_h_grid(seed);
    let cmp = lattice::frame_compare(n, &hs)?;
    let mut csv = Csv::new(&["h", "count_p", "count_q", "scaled_p", "scaled_q"]);
    for (i, (&(h, a), &(_, b))) in cmp.p_series.rows.iter().zip(&cmp.q_series.rows).enumerate() {
        csv.row(cells![h, a, b, cmp.p_fit.scaled[i].1, cmp.q_fit.scaled[i].1]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs = (0..p.usize("oracle_specs")).map(|_| random_feasible_spec(&mut rng)).collect::<Result<Vec<_>>>()?;
    let checks = specs
        .par_iter()
        .map(|(s, h)| Ok((lattice::count_window(s, *h)?, lattice::count_window_bruteforce(s, *h)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut oracle = Csv::new(&["n", "frame", "energy", "c1", "c2", "h", "count", "oracle"]);
    for ((s, h), (a, b)) in specs.iter().zip(&checks) {
        let e: Vec<String> = s.energy.iter().map(|v| crate::output::real(*v)).collect();
        oracle.row(cells![s.frame.n, s.frame.label().replace(',', " "), e.join(" "), s.c1, s.c2, *h, *a, *b]);
    }
    let mismatches = checks.iter().filter(|(a, b)| a != b).count();
    let passed = cmp.p_fit.bounded && cmp.q_fit.bounded && cmp.gap >= p.real("gap_min") && mismatches == 0;
    Ok(Evaluation {
        passed,
        detail: format!(
            "P exponent {:.3} (bounded {}), Q exponent {:.3} (bounded {}), gap {:.3}; oracle mismatches {mismatches}/{}",
            cmp.p_fit.fit.exponent,
            cmp.p_fit.bounded,
            cmp.q_fit.fit.exponent,
            cmp.q_fit.bounded,
            cmp.gap,
            specs.len()
        ),
        artifacts: vec![Artifact::csv("c08_frames.csv", csv), Artifact::csv("c08_oracle.csv", oracle)],
    })
}

fn schema_9() -> Vec<Field> {
    with_seed(vec![
        field("rank_cases", Kind::Int, "500"),
        field("spectral_cases", Kind::Int, "24"),
        field("dynamics_cases", Kind::Int, "24"),
        field("lattice_cases", Kind::Int, "200"),
    ])
}

fn random_system(rng: &mut ChaCha8Rng) -> Result<(SymbolSystem, Vec<f64>, Vec<f64>)> {
    let which = rng.random_range(0..4);
    let (u, v, theta) = (rng.random_range(0.02..0.98), rng.random::<f64>(), rng.random_range(0.0..TAU));
    Ok(match which {
        0 => {
            let sys = momentmap::build_system(SystemSpec::SurfaceOfRevolution(Profile::perturbed_sphere(0.05)))?;
            let x = vec![-1.2 + 2.4 * u, v * TAU];
            let xi = momentmap::cosphere_point(&sys, &x, theta)?.as_slice().to_vec();
            (sys, x, xi)
        }
        1 => {
            let sys = momentmap::build_system(SystemSpec::LiouvilleTorus(LiouvilleParams::trigonometric(3.0, 0.5, 1.0, 0.3)))?;
            let x = vec![u, v];
            let xi = momentmap::cosphere_point(&sys, &x, theta)?.as_slice().to_vec();
            (sys, x, xi)
        }
        2 => {
            let sys = momentmap::build_system(SystemSpec::Ellipsoid([3.0, 2.0, 1.0]))?;
            let (a, b) = (PI * (u - 0.5) * 0.98, TAU * v);
            let x = vec![a.cos() * b.cos(), a.cos() * b.sin(), a.sin()];
            let xi = momentmap::cosphere_point(&sys, &x, theta)?.as_slice().to_vec();
            (sys, x, xi)
        }
        _ => {
            let n = rng.random_range(3..=5usize);
            let free = rng.random_range(0..n);
            let sys = momentmap::build_system(SystemSpec::FlatTorus { n, momenta: (0..n).filter(|&i| i != free).collect() })?;
            let mut dir: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            // land on the degenerate directions now and then
            if rng.random_bool(0.3) {
                for (i, d) in dir.iter_mut().enumerate() {
                    if i != free {
                        *d = 0.0;
                    }
                }
                dir[free] = 1.0;
            }
            let x = vec![0.0; n];
            let xi = momentmap::cosphere_solve(&sys, &x, &dir, 1.0)?.as_slice().to_vec();
            (sys, x, xi)
        }
    })
}

fn shuffled(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (1..n).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    order
}

/// Rank invariance under rescaling and reordering of `p_2, …, p_n`.
fn rank_suite(cases: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
    let mut failures = 0;
    for _ in 0..cases {
        let (sys, x, xi) = random_system(rng)?;
        let base = momentmap::rank_at(&sys, &x, &xi, 1e-8)?.rank;
        let j = rng.random_range(1..sys.n());
        let c = rng.random_range(0.1..10.0) * if rng.random_bool(0.5) { -1.0 } else { 1.0 };
        let scaled = momentmap::rank_at(&sys.scaled(j, c), &x, &xi, 1e-8)?.rank;
        let permuted = momentmap::rank_at(&sys.permuted(&shuffled(rng, sys.n())), &x, &xi, 1e-8)?.rank;
        failures += usize::from(scaled != base || permuted != base);
    }
    Ok(failures)
}

/// Orthogonality in the mass inner product and one sign change per index.
fn spectral_suite(cases: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
    let profs = [Profile::sphere(), Profile::perturbed_sphere(0.05), Profile::spheroid(0.2)];
    let draws: Vec<(usize, u32)> = (0..cases).map(|_| (rng.random_range(0..3), rng.random_range(0..15))).collect();
    let failures = draws
        .par_iter()
        .map(|&(w, m)| {
            let modes = spectral::solve_modes(&profs[w], m, 800, 5)?;
            let mut bad = false;
            for (i, a) in modes.iter().enumerate() {
                bad |= a.sign_changes != a.index;
                for b in &modes[i + 1..] {
                    bad |= spectral::mass_inner_product(a, b).abs() > 1e-8;
                }
            }
            Ok(usize::from(bad))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(failures.iter().sum())
}

/// Reversibility and invariance under rotation in φ.
fn dynamics_suite(cases: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
    let profs = [Profile::sphere(), Profile::perturbed_sphere(0.05), Profile::spheroid(0.2)];
    let draws = (0..cases)
        .map(|_| {
            let w = rng.random_range(0..3);
            Ok((w, random_launch(&profs[w], rng, 0.1)?, rng.random_range(-10.0..10.0)))
        })
        .collect::<Result<Vec<(usize, GeodesicState, f64)>>>()?;
    let failures = draws
        .par_iter()
        .map(|&(w, st, delta)| {
            let p = &profs[w];
            let (_, end) = dynamics::integrate_geodesic(p, st, 20.0, 1e-12)?.end();
            let (_, back) = dynamics::integrate_geodesic(p, end.reversed(), 20.0, 1e-12)?.end();
            let back = back.reversed();
            let mut bad = [(back.t, st.t), (back.phi, st.phi), (back.dt_ds, st.dt_ds), (back.dphi_ds, st.dphi_ds)]
                .iter()
                .any(|(a, b)| (a - b).abs() > 1e-7);
            let a = dynamics::integrate_geodesic(p, st, 30.0, 1e-11)?;
            let b = dynamics::integrate_geodesic(p, GeodesicState { phi: st.phi + delta, ..st }, 30.0, 1e-11)?;
            bad |= a.samples.len() != b.samples.len();
            for ((sa, xa), (sb, xb)) in a.samples.iter().zip(&b.samples) {
                bad |= sa != sb || xa.t != xb.t || xa.dt_ds != xb.dt_ds || xa.dphi_ds != xb.dphi_ds;
                bad |= (xb.phi - xa.phi - delta).abs() > 1e-12 * (1.0 + xa.phi.abs() + delta.abs());
            }
            Ok(usize::from(bad))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(failures.iter().sum())
}

/// Monotonicity in the widths and equivariance under coordinate relabelling.
fn lattice_suite(cases: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
    let mut failures = 0;
    for _ in 0..cases {
        let (spec, h) = random_feasible_spec(rng)?;
        let n = spec.frame.n;
        let base = lattice::count_window(&spec, h)?;
        let wider1 = WindowSpec { c1: spec.c1 + rng.random_range(0.0..1.0), ..spec.clone() };
        let wider2 = WindowSpec { c2: spec.c2 + rng.random_range(0.0..1.0), ..spec.clone() };
        let mut bad = lattice::count_window(&wider1, h)? < base || lattice::count_window(&wider2, h)? < base;
        let shift = rng.random_range(0..n);
        let relabel = spec.frame.momentum_indices.iter().map(|&i| (i + shift) % n).collect();
        let shifted = WindowSpec::new(TorusFrame::new(n, relabel)?, spec.energy.clone(), spec.c1, spec.c2)?;
        bad |= lattice::count_window(&shifted, h)? != base;
        if n >= 3 {
            let mut idx = spec.frame.momentum_indices.clone();
            let mut energy = spec.energy.clone();
            idx.swap(0, 1);
            energy.swap(1, 2);
            let reordered = WindowSpec::new(TorusFrame::new(n, idx)?, energy, spec.c1, spec.c2)?;
            bad |= lattice::count_window(&reordered, h)? != base;
        }
        failures += usize::from(bad);
    }
    Ok(failures)
}

fn property_suites(p: &Params) -> Result<Evaluation> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.int("seed"));
    let suites: [(&str, usize, fn(usize, &mut ChaCha8Rng) -> Result<usize>); 4] = [
        ("momentmap rank invariance", p.usize("rank_cases"), rank_suite),
        ("spectral orthogonality and oscillation", p.usize("spectral_cases"), spectral_suite),
        ("dynamics reversibility and equivariance", p.usize("dynamics_cases"), dynamics_suite),
        ("lattice monotonicity and permutation", p.usize("lattice_cases"), lattice_suite),
    ];
    let mut csv = Csv::new(&["suite", "cases", "failures"]);
    let mut total = 0;
    let mut parts = Vec::new();
    for (name, cases, suite) in suites {
        let failures = suite(cases, &mut rng)?;
        csv.row(cells![name, cases, failures]);
        total += failures;
        parts.push(format!("{name} {}/{cases}", cases - failures));
    }
    Ok(Evaluation { passed: total == 0, detail: parts.join(", "), artifacts: vec![Artifact::csv("c09_properties.csv", csv)] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_one_through_nine() {
        let ids: Vec<u32> = criteria().iter().map(|c| c.id).collect();
        assert_eq!(ids, (1..=9).collect::<Vec<_>>());
    }

    #[test]
    fn defaults_carry_the_seed() {
        for c in criteria() {
            assert_eq!(c.defaults(7).int("seed"), 7);
            assert!(c.config_text(&c.defaults(7)).starts_with(&format!("criterion = {}\n", c.id)));
        }
    }

    #[test]
    fn tightened_tolerance_fails_criterion() {
        let c = criterion(4).unwrap();
        let mut p = c.defaults(1);
        p.set("rel_tol", "1e-30").unwrap();
        assert!(!c.evaluate(&p).passed);
        assert!(c.evaluate(&c.defaults(1)).passed);
    }

    #[test]
    fn angle_gap_wraps() {
        assert!((angle_gap(0.01, TAU - 0.01) - 0.02).abs() < 1e-12);
        assert_eq!(angle_gap(1.0, 1.0), 0.0);
    }
}
