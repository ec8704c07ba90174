//! Highest-weight quasimodes `u_λ = λ^{1/4} e^{−λA(t)} e^{iλφ}` concentrated
//! on the equator of a surface of revolution with `f ≤ 1`, `f(t0) = 1`.
//!
//! `A(t) = |∫_{t0}^{t} √(1 − f²)/f ds| ≥ 0`. Writing `σ = sign(t − t0)`, a
//! direct computation gives
//! `(−h²Δ − 1)u = −h·σ·f'/√(1 − f²)·u` with `h = 1/λ`, whose relative size is
//! exactly `h` on the round sphere.

use thiserror::Error;

use crate::fit::{fit_scaling, FitError, ScalingFit};
use crate::geometry::{principal_equator, GeometryError, Profile, POLE_RADIUS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuasimodeError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("profile {0} does not assert f ≤ 1 with a unit equator")]
    NotCapped(String),
    #[error("f({t}) = {f} exceeds 1")]
    CapViolation { t: f64, f: f64 },
    #[error("f at the equator t0 = {t0} is {f}, not 1")]
    NoUnitEquator { t0: f64, f: f64 },
    #[error("λ = {0} is below the minimum of 10")]
    LambdaTooSmall(f64),
    #[error("grid spacing {spacing:e} too coarse; need ≤ {required:e} (λ^-1/10)")]
    Resolution { spacing: f64, required: f64 },
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Fit(#[from] FitError),
}

pub const MIN_LAMBDA: f64 = 10.0;
/// Relative tolerance of the adaptive Simpson rule for `A`.
pub const PHASE_TOL: f64 = 1e-12;
/// Half-width around the equator where `f'/√(1−f²)` is replaced by its limit.
pub const EQUATOR_LIMIT_BAND: f64 = 1e-4;
/// Cap on `|f'|/√(1−f²)` above which a bounded-ratio warning is raised.
pub const RATIO_CAP: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub struct QuasimodeField {
    pub lambda: f64,
    pub t0: f64,
    pub grid: Vec<f64>,
    /// `A(t) ≥ 0` on the grid.
    pub a: Vec<f64>,
    /// `|u|(t) = λ^{1/4} e^{−λA(t)}`.
    pub u_abs: Vec<f64>,
}

/// Absolute error floor per unit length, so rounding noise in `1 − f²` near
/// the equator cannot stall the refinement.
const PHASE_FLOOR: f64 = 1e-16;

#[allow(clippy::too_many_arguments)]
fn simpson_step(g: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (g(lm), g(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * (PHASE_TOL * (left + right).abs()).max(PHASE_FLOOR * (b - a)) {
        return left + right + delta / 15.0;
    }
    simpson_step(g, a, m, fa, flm, fm, left, depth - 1) + simpson_step(g, m, b, fm, frm, fb, right, depth - 1)
}

fn adaptive_simpson(g: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (fa, fb, fm) = (g(a), g(b), g(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(g, a, b, fa, fm, fb, whole, 40)
}

/// Eight-point Gauss–Legendre nodes and weights on [0, 1].
const GL8: [(f64, f64); 8] = [
    (0.019855071751231912, 0.050614268145188344),
    (0.10166676129318664, 0.11119051722668717),
    (0.2372337950418355, 0.15685332293894352),
    (0.4082826787521751, 0.18134189168918088),
    (0.5917173212478248, 0.18134189168918088),
    (0.7627662049581645, 0.15685332293894352),
    (0.8983332387068134, 0.11119051722668717),
    (0.9801449282487681, 0.050614268145188344),
];

/// Below this distance from the equator `1 − f` is taken from the Taylor
/// remainder instead of by subtraction.
const REMAINDER_BAND: f64 = 0.1;

/// `1 − f(t)²`, accurate to working precision near the equator where
/// `1 − f = −δ²∫₀¹(1−u) f''(t0 + uδ) du`.
fn one_minus_f_sq(p: &Profile, t0: f64, t: f64) -> f64 {
    let f = p.f(t);
    let delta = t - t0;
    if delta.abs() >= REMAINDER_BAND {
        return (1.0 - f * f).max(0.0);
    }
    let remainder: f64 = GL8.iter().map(|&(u, w)| w * (1.0 - u) * p.d2f(t0 + u * delta)).sum();
    (-delta * delta * remainder * (1.0 + f)).max(0.0)
}

fn phase_density(p: &Profile, t0: f64, t: f64) -> f64 {
    one_minus_f_sq(p, t0, t).sqrt() / p.f(t)
}

/// `∫` of the phase density between `t0 + side·τ_a²` and `t0 + side·τ_b²`,
/// in the variable τ.
fn phase_segment(p: &Profile, t0: f64, side: f64, tau_a: f64, tau_b: f64) -> f64 {
    let g = |tau: f64| 2.0 * tau * phase_density(p, t0, t0 + side * tau * tau);
    adaptive_simpson(&g, tau_a, tau_b)
}

/// `A(t)` for a single point.
pub fn phase_integral(p: &Profile, t0: f64, t: f64) -> f64 {
    if p.f(t) <= POLE_RADIUS {
        return f64::INFINITY;
    }
    let side = if t >= t0 { 1.0 } else { -1.0 };
    phase_segment(p, t0, side, 0.0, (t - t0).abs().sqrt())
}

/// Cumulative `A` over a sorted grid, integrating outward from `t0` on each side.
fn cumulative_phase(p: &Profile, t0: f64, grid: &[f64]) -> Vec<f64> {
    let mut a = vec![0.0; grid.len()];
    let split = grid.partition_point(|&t| t < t0);
    for (side, indices) in [(1.0, (split..grid.len()).collect::<Vec<_>>()), (-1.0, (0..split).rev().collect())] {
        let (mut acc, mut tau_prev) = (0.0f64, 0.0);
        for i in indices {
            if p.f(grid[i]) <= POLE_RADIUS || acc.is_infinite() {
                acc = f64::INFINITY;
            } else {
                let tau = (grid[i] - t0).abs().sqrt();
                acc += phase_segment(p, t0, side, tau_prev, tau);
                tau_prev = tau;
            }
            a[i] = acc;
        }
    }
    a
}

fn check_profile(p: &Profile) -> Result<f64, QuasimodeError> {
    if !p.cap_at_one {
        return Err(QuasimodeError::NotCapped(p.name.clone()));
    }
    let t0 = principal_equator(p)?;
    let f0 = p.f(t0);
    if f0 < 1.0 - 1e-10 || f0 > 1.0 + 1e-12 {
        return Err(QuasimodeError::NoUnitEquator { t0, f: f0 });
    }
    Ok(t0)
}

/// Builds the quasimode on a strictly increasing grid.
pub fn build(p: &Profile, lambda: f64, grid: &[f64]) -> Result<QuasimodeField, QuasimodeError> {
    if !(lambda >= MIN_LAMBDA) {
        return Err(QuasimodeError::LambdaTooSmall(lambda));
    }
    let t0 = check_profile(p)?;
    if grid.len() < 3 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(QuasimodeError::Grid("need ≥ 3 strictly increasing nodes".into()));
    }
    if let Some(&t) = grid.iter().find(|&&t| !p.contains(t)) {
        return Err(QuasimodeError::Grid(format!("node {t} outside the profile domain")));
    }
    for &t in grid {
        let f = p.f(t);
        if f > 1.0 + 1e-12 {
            return Err(QuasimodeError::CapViolation { t, f });
        }
    }
    let a = cumulative_phase(p, t0, grid);
    let amp = lambda.powf(0.25);
    let u_abs = a.iter().map(|&ai| amp * (-lambda * ai).exp()).collect();
    Ok(QuasimodeField { lambda, t0, grid: grid.to_vec(), a, u_abs })
}

/// Uniform grid through `t0` with spacing `1/(20λ)`, extended on each side
/// until `λA > 80` or the pole is near.
pub fn default_grid(p: &Profile, lambda: f64) -> Result<Vec<f64>, QuasimodeError> {
    if !(lambda >= MIN_LAMBDA) {
        return Err(QuasimodeError::LambdaTooSmall(lambda));
    }
    let t0 = check_profile(p)?;
    let spacing = 1.0 / (20.0 * lambda);
    let target = 80.0 / lambda;
    let reach = |end: f64| -> f64 {
        // keep clear of the pole by a few cells
        let edge = end - (end - t0).signum() * 4.0 * spacing;
        if phase_integral(p, t0, edge) <= target {
            return (edge - t0).abs();
        }
        let (mut lo, mut hi) = (t0, edge);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if phase_integral(p, t0, mid) > target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (hi - t0).abs()
    };
    let right = (reach(p.t_plus) / spacing).ceil() as i64;
    let left = (reach(p.t_minus) / spacing).ceil() as i64;
    Ok((-left..=right).map(|k| t0 + k as f64 * spacing).collect())
}

/// `σ·f'/√(1−f²)`, with the equator limit `−√(−f''(t0))` inside the band.
fn residual_ratio(p: &Profile, t0: f64, t: f64) -> f64 {
    if (t - t0).abs() <= EQUATOR_LIMIT_BAND {
        return -(-p.d2f(t0)).max(0.0).sqrt();
    }
    let f = p.f(t);
    let sigma = if t > t0 { 1.0 } else { -1.0 };
    sigma * p.df(t) / (1.0 - f * f).max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub h: f64,
    /// `sup|(−h²Δ−1)u| / sup|u|` from the closed form.
    pub analytic_sup: f64,
    /// The same by fourth-order finite differences (NaN until computed).
    pub numeric_sup: f64,
    /// `|numeric − analytic| / analytic`.
    pub agreement: f64,
    /// Largest `|f'|/√(1−f²)` on the grid.
    pub max_ratio: f64,
    pub warning: Option<String>,
}

/// Closed-form residual; the sup is taken over nodes at least two cells from
/// the grid ends so it is comparable with the finite-difference value.
pub fn residual_analytic(p: &Profile, q: &QuasimodeField) -> ResidualReport {
    let h = 1.0 / q.lambda;
    let n = q.grid.len();
    let peak = q.u_abs.iter().fold(0.0f64, |a, &u| a.max(u));
    let interior = if n > 4 { 2..n - 2 } else { 0..n };
    let mut sup = 0.0f64;
    let mut max_ratio = 0.0f64;
    for i in interior {
        let r = residual_ratio(p, q.t0, q.grid[i]);
        max_ratio = max_ratio.max(r.abs());
        sup = sup.max((h * r * q.u_abs[i]).abs());
    }
    let warning = (max_ratio > RATIO_CAP || !max_ratio.is_finite())
        .then(|| format!("|f'|/√(1−f²) reaches {max_ratio:e} on the grid (cap {RATIO_CAP:e})"));
    ResidualReport { h, analytic_sup: sup / peak, numeric_sup: f64::NAN, agreement: f64::NAN, max_ratio, warning }
}

fn uniform_spacing(grid: &[f64]) -> Result<f64, QuasimodeError> {
    if grid.len() < 5 {
        return Err(QuasimodeError::Grid("finite differences need ≥ 5 nodes".into()));
    }
    let dt = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    if grid.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(QuasimodeError::Grid("finite differences need a uniform grid".into()));
    }
    Ok(dt)
}

/// `−h²(v'' + (f'/f)v' − λ²v/f²) − v` at the interior nodes `2..n−2` by
/// fourth-order central differences; the first and last two entries are NaN.
pub fn apply_radial_operator(p: &Profile, lambda: f64, grid: &[f64], values: &[f64]) -> Result<Vec<f64>, QuasimodeError> {
    let dt = uniform_spacing(grid)?;
    if values.len() != grid.len() {
        return Err(QuasimodeError::Grid("values and grid lengths differ".into()));
    }
    let h2 = 1.0 / (lambda * lambda);
    let n = grid.len();
    let mut out = vec![f64::NAN; n];
    for i in 2..n - 2 {
        let v = &values[i - 2..=i + 2];
        let d1 = (-v[4] + 8.0 * v[3] - 8.0 * v[1] + v[0]) / (12.0 * dt);
        let d2 = (-v[4] + 16.0 * v[3] - 30.0 * v[2] + 16.0 * v[1] - v[0]) / (12.0 * dt * dt);
        let t = grid[i];
        let f = p.f(t);
        let lap = d2 + p.df(t) / f * d1 - lambda * lambda * v[2] / (f * f);
        out[i] = -h2 * lap - v[2];
    }
    Ok(out)
}

/// Closed-form and finite-difference residuals with their agreement.
pub fn residual_numeric(p: &Profile, q: &QuasimodeField) -> Result<ResidualReport, QuasimodeError> {
    let dt = uniform_spacing(&q.grid)?;
    let required = 0.1 / q.lambda;
    if dt > required * (1.0 + 1e-9) {
        return Err(QuasimodeError::Resolution { spacing: dt, required });
    }
    let mut report = residual_analytic(p, q);
    let residual = apply_radial_operator(p, q.lambda, &q.grid, &q.u_abs)?;
    let peak = q.u_abs.iter().fold(0.0f64, |a, &u| a.max(u));
    let sup = residual.iter().filter(|r| r.is_finite()).fold(0.0f64, |a, r| a.max(r.abs()));
    report.numeric_sup = sup / peak;
    report.agreement = (report.numeric_sup - report.analytic_sup).abs() / report.analytic_sup;
    Ok(report)
}

/// `√(2π∫|u|²f dt)` by the trapezoid rule on the field's grid.
pub fn l2_norm(p: &Profile, q: &QuasimodeField) -> f64 {
    let integrand: Vec<f64> = q.grid.iter().zip(&q.u_abs).map(|(&t, &u)| u * u * p.f(t)).collect();
    let s: f64 = q
        .grid
        .windows(2)
        .zip(integrand.windows(2))
        .map(|(t, g)| 0.5 * (t[1] - t[0]) * (g[0] + g[1]))
        .sum();
    (std::f64::consts::TAU * s).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasimodeRow {
    pub lambda: f64,
    /// `sup|u|` after L²(M) normalization.
    pub sup_normalized: f64,
    pub residual: ResidualReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasimodeScaling {
    pub rows: Vec<QuasimodeRow>,
    pub sup_fit: ScalingFit,
    /// Fit of the finite-difference relative defect.
    pub defect_fit: ScalingFit,
}

pub fn quasimode_row(p: &Profile, lambda: f64) -> Result<QuasimodeRow, QuasimodeError> {
    let grid = default_grid(p, lambda)?;
    let q = build(p, lambda, &grid)?;
    let residual = residual_numeric(p, &q)?;
    let peak = q.u_abs.iter().fold(0.0f64, |a, &u| a.max(u));
    Ok(QuasimodeRow { lambda, sup_normalized: peak / l2_norm(p, &q), residual })
}

/// Fits the normalized sup (≈ λ^{1/4}) and the relative defect (≈ λ^{-1}).
pub fn defect_and_sup_scaling(p: &Profile, lambdas: &[f64]) -> Result<QuasimodeScaling, QuasimodeError> {
    let rows = lambdas.iter().map(|&l| quasimode_row(p, l)).collect::<Result<Vec<_>, _>>()?;
    scaling_from_rows(rows)
}

pub fn scaling_from_rows(rows: Vec<QuasimodeRow>) -> Result<QuasimodeScaling, QuasimodeError> {
    let sup: Vec<(f64, f64)> = rows.iter().map(|r| (r.lambda, r.sup_normalized)).collect();
    let defect: Vec<(f64, f64)> = rows.iter().map(|r| (r.lambda, r.residual.numeric_sup)).collect();
    Ok(QuasimodeScaling { sup_fit: fit_scaling(&sup)?, defect_fit: fit_scaling(&defect)?, rows })
}

/// λ values of the standard scaling run.
pub const STANDARD_LAMBDAS: [f64; 6] = [50.0, 75.0, 112.0, 169.0, 253.0, 380.0];
