//! One function per subcommand. Each returns its artifacts in memory; the
//! caller writes them.

use std::collections::BTreeSet;

use anyhow::{bail, Context, Result};
use qci_core::dynamics;
use qci_core::geometry::{self, Profile, ProfileSpec, SurfacePoint, Verdict};
use qci_core::lattice::{self, CountSeries, LatticeFit, TorusFrame, WindowSpec};
use qci_core::momentmap::{self, LiouvilleParams, RankMode, SymbolSystem, SystemSpec};
use qci_core::{quasimode, spectral};
use rayon::prelude::*;
use serde::Serialize;

use crate::cells;
use crate::config::{ExperimentConfig, Params, Subcommand};
use crate::output::{Artifact, Csv, FitJson};

/// Operations of the numerical modules that subcommands expose.
pub const MODULE_OPS: [&str; 27] = [
    "validate_profile",
    "equator_locate",
    "cosphere_embed",
    "initial_state",
    "clairaut",
    "integrate_geodesic",
    "first_return",
    "zoll_test",
    "rational_classify",
    "loop_length",
    "build_system",
    "cosphere_solve",
    "rank_at",
    "rank_scan",
    "morse_check",
    "assemble",
    "solve_highest_weight",
    "sup_norm_profile",
    "fit_scaling",
    "build",
    "residual_analytic",
    "residual_numeric",
    "defect_and_sup_scaling",
    "count_window",
    "count_window_bruteforce",
    "exponent_fit",
    "frame_compare",
];

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    /// One-line result: the key exponent or verdict.
    pub summary: String,
    /// Assumption violations; any entry turns the exit status into 2.
    pub warnings: Vec<String>,
    pub artifacts: Vec<Artifact>,
    /// Module operations this run reached.
    pub ops: BTreeSet<&'static str>,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        if self.warnings.is_empty() { 0 } else { 2 }
    }

    fn reach(&mut self, ops: &[&'static str]) {
        self.ops.extend(ops.iter().copied());
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let p = &cfg.params;
    let mut out = match cfg.subcommand {
        Subcommand::Validate => validate(p),
        Subcommand::Returnmap => returnmap(p),
        Subcommand::Loops => loops(p),
        Subcommand::Rank => rank(p),
        Subcommand::Morse => morse(p),
        Subcommand::Modes => modes(p),
        Subcommand::Quasimode => quasimode_sweep(p),
        Subcommand::Lattice => lattice_cmd(p),
        Subcommand::Scaling => scaling(p),
        Subcommand::Frames => frames(p),
    }
    .with_context(|| format!("{} failed", cfg.subcommand))?;
    out.artifacts.push(Artifact::text("config.txt", cfg.to_text()));
    Ok(out)
}

fn profile(p: &Params, key: &str) -> Result<Profile> {
    let raw = p.text(key);
    let spec: ProfileSpec = raw.parse().with_context(|| format!("geometry: {key} = {raw}"))?;
    spec.build().with_context(|| format!("geometry: {key} = {raw}"))
}

fn validate(p: &Params) -> Result<RunOutput> {
    let prof = profile(p, "profile")?;
    let mut out = RunOutput::default();
    out.reach(&["validate_profile", "equator_locate"]);
    let report = geometry::validate_profile(&prof).context("geometry: validate_profile")?;
    let mut checks = Csv::new(&["check", "verdict", "detail"]);
    for c in &report.checks {
        checks.row(cells![c.name, c.verdict.to_string(), c.detail.replace(',', ";")]);
        if c.verdict != Verdict::Pass {
            out.warnings.push(format!("{}: {} ({})", c.name, c.verdict, c.detail));
        }
    }
    let equators = geometry::equator_locate(&prof, 1e-9).context("geometry: equator_locate")?;
    let mut eq = Csv::new(&["t0", "f_t0", "d2f_t0"]);
    for &(t0, d2) in &equators {
        eq.row(cells![t0, prof.f(t0), d2]);
    }
    out.summary = format!(
        "{}: {} ({} equator{})",
        prof.name,
        if report.passed() { "valid" } else { "invalid" },
        equators.len(),
        if equators.len() == 1 { "" } else { "s" }
    );
    out.artifacts.push(Artifact::csv("checks.csv", checks));
    out.artifacts.push(Artifact::csv("equators.csv", eq));
    Ok(out)
}

fn returnmap(p: &Params) -> Result<RunOutput> {
    let prof = profile(p, "profile")?;
    let psis = p.linspace("psi");
    let tol = p.real("tol");
    let (q_max, eps, s_max) = (p.int("q_max") as u32, p.real("eps"), p.real("s_max"));
    let mut out = RunOutput::default();
    out.reach(&["zoll_test", "first_return", "rational_classify", "initial_state", "clairaut", "integrate_geodesic"]);
    let verdict = dynamics::zoll_test(&prof, &psis, tol).context("dynamics: zoll_test")?;
    let mut csv = Csv::new(&["psi", "S", "Phi", "phi_over_2pi", "rational_flag", "p", "q", "distance"]);
    for r in &verdict.samples {
        let c = dynamics::rational_classify(r.longitude, q_max, eps);
        csv.row(cells![
            r.psi,
            r.arclength,
            r.longitude,
            r.longitude / std::f64::consts::TAU,
            c.rational,
            c.convergent.0,
            c.convergent.1,
            c.distance
        ]);
    }
    // invariant drift along each return orbit
    let t0 = geometry::principal_equator(&prof).context("geometry: principal_equator")?;
    let drift: Vec<(f64, f64, f64, f64, bool)> = verdict
        .samples
        .par_iter()
        .map(|r| {
            let init = dynamics::initial_state(&prof, t0, 0.0, r.psi)
                .with_context(|| format!("dynamics: initial_state at psi = {}", r.psi))?;
            let tr = dynamics::integrate_geodesic(&prof, init, r.arclength.min(s_max), 1e-12)
                .with_context(|| format!("dynamics: integrate_geodesic at psi = {}", r.psi))?;
            Ok((r.psi, dynamics::clairaut(&prof, &init), tr.max_clairaut_drift(&prof), tr.max_speed_drift(&prof), tr.pole_approach))
        })
        .collect::<Result<_>>()?;
    let mut inv = Csv::new(&["psi", "clairaut", "clairaut_drift", "speed_drift", "pole_approach"]);
    for (psi, g, dc, ds, pole) in drift {
        inv.row(cells![psi, g, dc, ds, pole]);
        if pole {
            out.warnings.push(format!("geodesic at psi = {psi} approaches a pole"));
        }
    }
    out.summary = format!("{}: zoll = {}, spread = {:.3e}", prof.name, verdict.zoll, verdict.spread);
    out.artifacts.push(Artifact::csv("returnmap.csv", csv));
    out.artifacts.push(Artifact::csv("invariants.csv", inv));
    Ok(out)
}

fn loops(p: &Params) -> Result<RunOutput> {
    let prof = profile(p, "profile")?;
    let x = SurfacePoint::new(p.real("t"), p.real("phi"));
    let (delta, s_max) = (p.real("delta"), p.real("s_max"));
    let mut out = RunOutput::default();
    out.reach(&["cosphere_embed", "loop_length"]);
    let rows: Vec<(f64, dynamics::LoopResult)> = p
        .linspace("theta")
        .into_par_iter()
        .map(|theta| {
            let xi = geometry::cosphere_embed(&prof, x.t, theta).with_context(|| format!("geometry: t = {}", x.t))?;
            let r = dynamics::loop_length(&prof, x, xi, delta, s_max)
                .with_context(|| format!("dynamics: loop_length at theta = {theta}"))?;
            Ok((theta, r))
        })
        .collect::<Result<_>>()?;
    let mut csv = Csv::new(&["theta", "L_delta", "n_near_returns"]);
    for (theta, r) in &rows {
        csv.row(cells![*theta, r.length, r.near_returns]);
    }
    let closed = rows.iter().filter(|r| r.1.length.is_some()).count();
    out.summary = format!("{}: {closed}/{} directions loop within s = {s_max}", prof.name, rows.len());
    out.artifacts.push(Artifact::csv("loops.csv", csv));
    Ok(out)
}

fn system(p: &Params) -> Result<SymbolSystem> {
    let name = p.text("system.name");
    let spec = match name {
        "sor" => SystemSpec::SurfaceOfRevolution(profile(p, "system.params.profile")?),
        "liouville_torus" => {
            let v = p.reals("system.params.liouville");
            if v.len() != 4 {
                bail!("momentmap: system.params.liouville needs a0,a1,b0,b1, got {} values", v.len());
            }
            SystemSpec::LiouvilleTorus(LiouvilleParams::trigonometric(v[0], v[1], v[2], v[3]))
        }
        "ellipsoid" => {
            let v = p.reals("system.params.axes");
            if v.len() != 3 {
                bail!("momentmap: system.params.axes needs 3 semi-axes, got {}", v.len());
            }
            SystemSpec::Ellipsoid([v[0], v[1], v[2]])
        }
        "flat_torus" => {
            let momenta = p.ints("system.params.momenta");
            if momenta.contains(&0) {
                bail!("momentmap: system.params.momenta are 1-based, got 0");
            }
            SystemSpec::FlatTorus {
                n: p.usize("system.params.n"),
                momenta: momenta.iter().map(|&i| i as usize - 1).collect(),
            }
        }
        other => bail!("momentmap: unknown system.name = {other}"),
    };
    momentmap::build_system(spec).with_context(|| format!("momentmap: build_system with system.name = {name}"))
}

fn rank(p: &Params) -> Result<RunOutput> {
    let sys = system(p)?;
    let x = p.reals("point.x");
    let (samples, tol) = (p.usize("scan.samples"), p.real("scan.tol"));
    let mode = match p.text("scan.mode") {
        "tangential" => RankMode::Tangential,
        "full" => RankMode::Full,
        other => bail!("momentmap: scan.mode = {other} (expected tangential or full)"),
    };
    let mut out = RunOutput::default();
    out.reach(&["build_system", "rank_scan", "rank_at", "cosphere_solve"]);
    let scan = momentmap::rank_scan(&sys, &x, samples, tol).context("momentmap: rank_scan")?;
    let n = sys.n();
    let mut header = vec!["theta".to_string()];
    header.extend((1..n).map(|i| format!("sv_{i}")));
    header.push("rank".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&header);
    let mut ranks = Vec::with_capacity(scan.points.len());
    for (i, pt) in scan.points.iter().enumerate() {
        let report = match mode {
            RankMode::Tangential => pt.report.clone(),
            RankMode::Full => momentmap::rank_at_with(&sys, &x, pt.xi.as_slice(), tol, mode).context("momentmap: rank_at")?,
        };
        let mut row = cells![pt.theta.unwrap_or(i as f64)];
        row.extend((0..n - 1).map(|k| report.singular_values.get(k).copied().unwrap_or(0.0).into()));
        row.push(report.rank.into());
        ranks.push(report.rank);
        csv.row(row);
    }
    let (lo, hi) = (ranks.iter().min().copied().unwrap_or(0), ranks.iter().max().copied().unwrap_or(0));
    let degenerate = ranks.iter().filter(|&&r| r < hi).count();
    out.summary = format!("{}: rank {lo}..{hi}, {degenerate}/{} degenerate directions", sys.label, ranks.len());
    out.artifacts.push(Artifact::csv("rank.csv", csv));
    Ok(out)
}

fn morse(p: &Params) -> Result<RunOutput> {
    let sys = system(p)?;
    let x = p.reals("point.x");
    let coeffs = p.reals("morse.coeffs");
    if coeffs.len() != sys.n() {
        bail!("momentmap: morse.coeffs has {} entries, the system has {} symbols", coeffs.len(), sys.n());
    }
    let combiner = move |v: &[f64]| v.iter().zip(&coeffs).map(|(a, c)| a * c).sum::<f64>();
    let mut out = RunOutput::default();
    out.reach(&["build_system", "morse_check"]);
    let report = momentmap::morse_check(&sys, &combiner, &x, p.usize("morse.grid"), p.real("morse.tol"))
        .context("momentmap: morse_check")?;
    let mut csv = Csv::new(&["theta_c", "q_value", "q_second_derivative", "nondegenerate_flag"]);
    for c in &report.critical_points {
        csv.row(cells![c.theta, c.value, c.second_derivative, c.nondegenerate]);
    }
    if !report.all_nondegenerate {
        out.warnings.push("degenerate critical point: combination is not Morse here".into());
    }
    out.summary = format!(
        "{}: {} critical points, morse = {}",
        sys.label,
        report.critical_points.len(),
        report.all_nondegenerate
    );
    out.artifacts.push(Artifact::csv("morse.csv", csv));
    Ok(out)
}

fn modes(p: &Params) -> Result<RunOutput> {
    let prof = profile(p, "profile")?;
    let (grid_n, count) = (p.usize("grid_n"), p.usize("count"));
    let mut out = RunOutput::default();
    // solve_modes assembles the operator for each m
    out.reach(&["assemble", "sup_norm_profile"]);
    let per_m: Vec<Vec<spectral::Mode>> = p
        .ints("m")
        .into_par_iter()
        .map(|m| {
            spectral::solve_modes(&prof, m as u32, grid_n, count).with_context(|| format!("spectral: m = {m}, grid_n = {grid_n}"))
        })
        .collect::<Result<_>>()?;
    let mut csv = Csv::new(&["m", "index", "lambda_sq", "sup_T", "T_at_equator", "argmax_t", "l2_residual"]);
    for mode in per_m.iter().flatten() {
        let s = spectral::sup_norm_profile(&prof, mode);
        csv.row(cells![mode.m, mode.index, mode.lambda_sq, s.sup, s.at_equator.unwrap_or(f64::NAN), s.argmax_t, mode.residual]);
    }
    let lowest = per_m.first().and_then(|v| v.first()).map(|m| m.lambda_sq).unwrap_or(f64::NAN);
    out.summary = format!("{}: {} modes, lowest λ² = {lowest:.3e}", prof.name, per_m.iter().map(Vec::len).sum::<usize>());
    out.artifacts.push(Artifact::csv("modes.csv", csv));
    Ok(out)
}

#[derive(Serialize)]
struct QuasimodeFits {
    sup: FitJson,
    defect: FitJson,
}

fn quasimode_sweep(p: &Params) -> Result<RunOutput> {
    let prof = profile(p, "profile")?;
    let lambdas = p.reals("lambdas");
    let mut out = RunOutput::default();
    out.reach(&["defect_and_sup_scaling", "build", "residual_analytic", "residual_numeric", "fit_scaling"]);
    let s = quasimode::defect_and_sup_scaling(&prof, &lambdas).context("quasimode: defect_and_sup_scaling")?;
    let mut csv = Csv::new(&["lambda", "sup_normalized", "residual_analytic_sup", "residual_numeric_sup", "agreement"]);
    for r in &s.rows {
        csv.row(cells![r.lambda, r.sup_normalized, r.residual.analytic_sup, r.residual.numeric_sup, r.residual.agreement]);
        if let Some(w) = &r.residual.warning {
            out.warnings.push(format!("lambda = {}: {w}", r.lambda));
        }
    }
    out.summary = format!(
        "{}: defect exponent {:.4}, sup exponent {:.4}",
        prof.name, s.defect_fit.exponent, s.sup_fit.exponent
    );
    out.artifacts.push(Artifact::csv("quasimode.csv", csv));
    out.artifacts.push(Artifact::json(
        "quasimode_fit.json",
        &QuasimodeFits { sup: (&s.sup_fit).into(), defect: (&s.defect_fit).into() },
    ));
    Ok(out)
}

fn h_grid(p: &Params) -> Result<Vec<f64>> {
    let (start, stop, points) = p.range("h_grid");
    let grid = lattice::geometric_grid(start, stop, points);
    match p.text("jitter_seed") {
        "none" => Ok(grid),
        s => {
            let seed: u64 = s.parse().with_context(|| format!("lattice: jitter_seed = {s} (integer or none)"))?;
            Ok(lattice::jitter(&grid, seed, lattice::JITTER))
        }
    }
}

fn frame(p: &Params) -> Result<TorusFrame> {
    let n = p.usize("n");
    let f = match p.text("frame") {
        "P" => TorusFrame::p_frame(n),
        "Q" => TorusFrame::q_frame(n),
        list => {
            let idx = list
                .split(',')
                .map(|s| s.trim().parse::<usize>().ok().filter(|&i| i >= 1).map(|i| i - 1))
                .collect::<Option<Vec<_>>>()
                .with_context(|| format!("lattice: frame = {list} (P, Q or 1-based indices)"))?;
            TorusFrame::new(n, idx)
        }
    };
    f.with_context(|| format!("lattice: frame = {}", p.text("frame")))
}

/// Counts over the grid in parallel; rows keep grid order.
fn series(spec: &WindowSpec, hs: &[f64]) -> Result<CountSeries> {
    if hs.windows(2).any(|w| !(w[1] < w[0])) {
        bail!("lattice: h_grid must be strictly decreasing");
    }
    let rows = hs
        .par_iter()
        .map(|&h| Ok((h, lattice::count_window(spec, h).with_context(|| format!("lattice: count_window at h = {h}"))?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CountSeries { spec: spec.clone(), rows })
}

#[derive(Serialize)]
struct LatticeFitJson {
    #[serde(flatten)]
    fit: FitJson,
    rank: usize,
    bound_exponent: f64,
    max_scaled: f64,
    dropped_zero_rows: usize,
    bounded: bool,
}

impl From<&LatticeFit> for LatticeFitJson {
    fn from(f: &LatticeFit) -> Self {
        Self {
            fit: (&f.fit).into(),
            rank: f.rank,
            bound_exponent: f.bound_exponent,
            max_scaled: f.max_scaled,
            dropped_zero_rows: f.dropped_zero_rows,
            bounded: f.bounded,
        }
    }
}

fn count_csv(series: &CountSeries, power: i32, oracle: Option<&[u64]>) -> Csv {
    let mut header = vec!["h", "count", "count_times_h_pow"];
    if oracle.is_some() {
        header.push("oracle_count");
    }
    let mut csv = Csv::new(&header);
    for (i, &(h, c)) in series.rows.iter().enumerate() {
        let mut row = cells![h, c, c as f64 * h.powi(power)];
        if let Some(o) = oracle {
            row.push(o[i].into());
        }
        csv.row(row);
    }
    csv
}

fn fit_warnings(out: &mut RunOutput, label: &str, fit: &LatticeFit) {
    if !fit.bounded {
        out.warnings.push(format!("{label}: count·h^{} not bounded over the grid", -fit.bound_exponent));
    }
    if fit.dropped_zero_rows > 0 {
        out.warnings.push(format!("{label}: {} empty windows left out of the fit", fit.dropped_zero_rows));
    }
}

fn lattice_cmd(p: &Params) -> Result<RunOutput> {
    let action = p.text("action");
    if action == "frames" {
        return frames(p);
    }
    let spec = WindowSpec::new(frame(p)?, p.reals("energy"), p.real("c1"), p.real("c2")).context("lattice: window spec")?;
    let hs = h_grid(p)?;
    let mut out = RunOutput::default();
    out.reach(&["count_window"]);
    let s = series(&spec, &hs)?;
    let rank = lattice::window_rank(&spec).context("lattice: window rank")?;
    let power = (spec.frame.n - rank - 1) as i32;
    let oracle = if p.flag("oracle") {
        out.reach(&["count_window_bruteforce"]);
        let o = hs
            .par_iter()
            .map(|&h| lattice::count_window_bruteforce(&spec, h).with_context(|| format!("lattice: oracle at h = {h}")))
            .collect::<Result<Vec<u64>>>()?;
        if let Some(i) = (0..o.len()).find(|&i| o[i] != s.rows[i].1) {
            bail!("lattice: counter {} disagrees with oracle {} at h = {}", s.rows[i].1, o[i], hs[i]);
        }
        Some(o)
    } else {
        None
    };
    out.artifacts.push(Artifact::csv("counts.csv", count_csv(&s, power, oracle.as_deref())));
    match action {
        "count" => {
            let total: u64 = s.rows.iter().map(|r| r.1).sum();
            out.summary = format!("frame {}: rank {rank}, {total} lattice points over {} steps", spec.frame.label(), hs.len());
        }
        "fit" => {
            out.reach(&["exponent_fit", "fit_scaling"]);
            let fit = lattice::exponent_fit(&s).context("lattice: exponent_fit")?;
            fit_warnings(&mut out, "fit", &fit);
            out.summary = format!(
                "frame {}: rank {}, exponent {:.4} (bound {})",
                spec.frame.label(),
                fit.rank,
                fit.fit.exponent,
                fit.bound_exponent
            );
            out.artifacts.push(Artifact::json("fit.json", &LatticeFitJson::from(&fit)));
        }
        other => bail!("lattice: action = {other} (expected count, fit or frames)"),
    }
    Ok(out)
}

#[derive(Serialize)]
struct FramesJson {
    p: LatticeFitJson,
    q: LatticeFitJson,
    gap: f64,
}

fn frames(p: &Params) -> Result<RunOutput> {
    let n = p.usize("n");
    let hs = h_grid(p)?;
    let mut out = RunOutput::default();
    out.reach(&["frame_compare", "count_window", "exponent_fit", "fit_scaling"]);
    let (ps, qs) = lattice::frame_specs(n).with_context(|| format!("lattice: n = {n}"))?;
    let cmp = lattice::frame_comparison_from(series(&ps, &hs)?, series(&qs, &hs)?).context("lattice: frame_compare")?;
    fit_warnings(&mut out, "P", &cmp.p_fit);
    fit_warnings(&mut out, "Q", &cmp.q_fit);
    let pp = (n - cmp.p_fit.rank - 1) as i32;
    let qp = (n - cmp.q_fit.rank - 1) as i32;
    let mut ratios = Csv::new(&["h", "count_p", "count_q", "ratio"]);
    for ((&(h, a), &(_, b)), &(_, r)) in cmp.p_series.rows.iter().zip(&cmp.q_series.rows).zip(&cmp.ratios) {
        ratios.row(cells![h, a, b, r]);
    }
    out.summary = format!(
        "n = {n}: P exponent {:.4}, Q exponent {:.4}, gap {:.4}",
        cmp.p_fit.fit.exponent, cmp.q_fit.fit.exponent, cmp.gap
    );
    out.artifacts.push(Artifact::csv("counts_p.csv", count_csv(&cmp.p_series, pp, None)));
    out.artifacts.push(Artifact::csv("counts_q.csv", count_csv(&cmp.q_series, qp, None)));
    out.artifacts.push(Artifact::csv("ratios.csv", ratios));
    out.artifacts.push(Artifact::json(
        "frames.json",
        &FramesJson { p: (&cmp.p_fit).into(), q: (&cmp.q_fit).into(), gap: cmp.gap },
    ));
    Ok(out)
}

fn scaling(p: &Params) -> Result<RunOutput> {
    let prof = profile(p, "profile")?;
    let mut out = RunOutput::default();
    match p.text("family") {
        "highest-weight" => {
            out.reach(&["solve_highest_weight", "assemble", "sup_norm_profile", "fit_scaling"]);
            let samples = p
                .ints("m")
                .into_par_iter()
                .map(|m| spectral::highest_weight_sample(&prof, m as u32).with_context(|| format!("spectral: m = {m}")))
                .collect::<Result<Vec<_>>>()?;
            let fit = spectral::fit_family(&samples).context("spectral: fit over m")?;
            let mut csv = Csv::new(&["m", "grid_n", "lambda", "sup_T", "T_at_equator", "argmax_t"]);
            for s in &samples {
                csv.row(cells![
                    s.m,
                    s.grid_n,
                    s.lambda_sq.sqrt(),
                    s.sup.sup,
                    s.sup.at_equator.unwrap_or(f64::NAN),
                    s.sup.argmax_t
                ]);
            }
            out.summary = format!("{}: highest-weight sup exponent {:.4}", prof.name, fit.exponent);
            out.artifacts.push(Artifact::csv("family.csv", csv));
            out.artifacts.push(Artifact::json("scaling.json", &FitJson::from(&fit)));
        }
        "quasimode" => {
            out.reach(&["defect_and_sup_scaling", "build", "residual_analytic", "residual_numeric", "fit_scaling"]);
            let s = quasimode::defect_and_sup_scaling(&prof, &p.reals("lambdas")).context("quasimode: scaling")?;
            out.summary = format!("{}: quasimode sup exponent {:.4}", prof.name, s.sup_fit.exponent);
            out.artifacts.push(Artifact::json("scaling.json", &FitJson::from(&s.sup_fit)));
        }
        other => bail!("scaling: family = {other} (expected highest-weight or quasimode)"),
    }
    Ok(out)
}
