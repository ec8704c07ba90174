//! Radial Sturm–Liouville problem for joint eigenfunctions `T(t)e^{imφ}` of a
//! surface of revolution.
//!
//! Substituting into `Δ = ∂_t² + (f'/f)∂_t + f^{-2}∂_φ²` gives
//! `−(1/f)(f T')' + (m²/f²)T = λ²T`. The equation is discretized by a
//! cell-centred finite-volume scheme on a cosine-mapped grid (cells cluster
//! quadratically at the poles). Fluxes `f·T'` vanish at the poles on their
//! own. The resulting pencil `A T = λ² B T` with diagonal `B = diag(f·width)` is
//! symmetrized as `B^{-1/2} A B^{-1/2}`, i.e. in the variable `V = √f·T`.
//! Eigenvalues come from Sturm-sequence bisection and eigenvectors from
//! inverse iteration. Reported eigenvalues are Richardson-extrapolated
//! between `grid_n/2` and `grid_n` cells.

use std::f64::consts::{PI, TAU};

use thiserror::Error;

use crate::fit::{fit_scaling, FitError, ScalingFit};
use crate::geometry::{principal_equator, validate_profile, GeometryError, Profile, POLE_RADIUS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("profile not admissible: {0}")]
    Profile(String),
    #[error("grid_n = {grid_n} below the minimum of {min}")]
    GridTooSmall { grid_n: usize, min: usize },
    #[error("m²/f² overflows at the first cell for m = {m}; use grid_n ≤ {suggested}")]
    Refinement { m: u32, suggested: usize },
    #[error("inverse iteration did not converge (relative residual {residual:e})")]
    Convergence { residual: f64 },
    #[error("invalid mode request: {0}")]
    InvalidMode(String),
    #[error(transparent)]
    Fit(#[from] FitError),
}

pub const MIN_GRID: usize = 200;

/// Angular numbers of the highest-weight scaling family.
pub const HIGHEST_WEIGHT_FAMILY: [u32; 7] = [20, 30, 45, 67, 100, 150, 225];

/// Grid size used for the highest-weight family at angular number `m`.
pub fn family_grid_n(m: u32) -> usize {
    (40 * m as usize).max(400)
}

#[derive(Debug, Clone)]
pub struct ModeProblem {
    pub profile: Profile,
    pub m: u32,
    pub grid_n: usize,
    /// Cell centres.
    pub grid: Vec<f64>,
    /// Cell faces, `grid_n + 1` values from pole to pole.
    pub faces: Vec<f64>,
}

fn cosine_map(t_minus: f64, t_plus: f64, s: f64) -> f64 {
    t_minus + (t_plus - t_minus) * (1.0 - (PI * s).cos()) / 2.0
}

impl ModeProblem {
    pub fn new(profile: &Profile, m: u32, grid_n: usize) -> Result<Self, SpectralError> {
        if grid_n < MIN_GRID {
            return Err(SpectralError::GridTooSmall { grid_n, min: MIN_GRID });
        }
        Self::build(profile, m, grid_n)
    }

    fn build(profile: &Profile, m: u32, grid_n: usize) -> Result<Self, SpectralError> {
        if !profile.has_poles {
            return Err(SpectralError::Profile(format!("{} has no poles; a closed surface is required", profile.name)));
        }
        let (a, b) = (profile.t_minus, profile.t_plus);
        let n = grid_n as f64;
        let faces: Vec<f64> = (0..=grid_n).map(|i| cosine_map(a, b, i as f64 / n)).collect();
        let grid: Vec<f64> = (0..grid_n).map(|i| cosine_map(a, b, (i as f64 + 0.5) / n)).collect();
        Ok(Self { profile: profile.clone(), m, grid_n, grid, faces })
    }

    /// Symmetric tridiagonal operator and mass weights for this grid.
    pub fn assemble(&self) -> Result<DiscreteOperator, SpectralError> {
        let n = self.grid_n;
        let p = &self.profile;
        let m2 = f64::from(self.m).powi(2);
        let fc: Vec<f64> = self.grid.iter().map(|&t| p.f(t)).collect();
        if let Some(i) = fc.iter().position(|&f| !(f > POLE_RADIUS) || !f.is_finite()) {
            return Err(SpectralError::Profile(format!("f({}) = {} is not positive", self.grid[i], fc[i])));
        }
        let potential_ok = |f: f64| m2 == 0.0 || (m2 / (f * f)).is_finite();
        if !potential_ok(fc[0]) || !potential_ok(fc[n - 1]) {
            let mut suggested = n / 2;
            while suggested > 1 {
                let t0 = cosine_map(p.t_minus, p.t_plus, 0.5 / suggested as f64);
                let t1 = cosine_map(p.t_minus, p.t_plus, 1.0 - 0.5 / suggested as f64);
                if potential_ok(p.f(t0)) && potential_ok(p.f(t1)) {
                    break;
                }
                suggested /= 2;
            }
            return Err(SpectralError::Refinement { m: self.m, suggested });
        }
        let width: Vec<f64> = self.faces.windows(2).map(|w| w[1] - w[0]).collect();
        let mass: Vec<f64> = (0..n).map(|i| fc[i] * width[i]).collect();
        // flux coefficient through the face between cells i and i+1
        let flux: Vec<f64> = (0..n - 1)
            .map(|i| p.f(self.faces[i + 1]) / (self.grid[i + 1] - self.grid[i]))
            .collect();
        let mut diag = vec![0.0; n];
        for i in 0..n {
            let left = if i > 0 { flux[i - 1] } else { 0.0 };
            let right = if i + 1 < n { flux[i] } else { 0.0 };
            diag[i] = (left + right + m2 * width[i] / fc[i]) / mass[i];
        }
        let off: Vec<f64> = (0..n - 1).map(|i| -flux[i] / (mass[i] * mass[i + 1]).sqrt()).collect();
        Ok(DiscreteOperator { diag, off, mass })
    }
}

/// `B^{-1/2} A B^{-1/2}` as a symmetric tridiagonal matrix, plus `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    pub mass: Vec<f64>,
}

impl DiscreteOperator {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn sturm_count(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0f64;
        for i in 0..self.diag.len() {
            let coupling = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] / q };
            q = self.diag[i] - x - coupling;
            if q == 0.0 {
                q = -f64::EPSILON * (self.diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        assert!(k < self.len(), "eigenvalue index out of range");
        // The operator is positive semi-definite.
        let mut lo = -1.0;
        let mut hi = 1.0;
        while self.sturm_count(hi) <= k {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * mid.abs() {
                break;
            }
            if self.sturm_count(mid) <= k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * v[i + 1];
                }
                s
            })
            .collect()
    }

    /// Unit eigenvector for eigenvalue `sigma` by inverse iteration; returns the
    /// vector and the relative residual `‖Mv − σv‖ / max(|σ|, 1)`.
    pub fn eigenvector(&self, sigma: f64) -> (Vec<f64>, f64) {
        let n = self.len();
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.25 * (0.7 * i as f64).sin()).collect();
        normalize(&mut v);
        let sub = self.off.clone();
        let sup = self.off.clone();
        let shifted: Vec<f64> = self.diag.iter().map(|d| d - sigma).collect();
        let mut residual = f64::INFINITY;
        for _ in 0..6 {
            v = solve_tridiagonal(&sub, &shifted, &sup, &v);
            normalize(&mut v);
            let mv = self.apply(&v);
            residual = mv.iter().zip(&v).map(|(a, b)| (a - sigma * b).powi(2)).sum::<f64>().sqrt() / sigma.abs().max(1.0);
            if residual < 1e-10 {
                break;
            }
        }
        (v, residual)
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sign = if v.iter().map(|&x| x).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    for x in v.iter_mut() {
        *x *= sign / norm;
    }
}

/// Solves a tridiagonal system by Gaussian elimination with partial pivoting.
/// `sub[i]` couples rows `i+1, i`; `sup[i]` couples rows `i, i+1`.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut du = sup.to_vec();
    let mut dl = sub.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut b = rhs.to_vec();
    let tiny = |x: f64| if x == 0.0 { f64::EPSILON * f64::MIN_POSITIVE.sqrt() } else { x };
    for i in 0..n.saturating_sub(1) {
        if d[i].abs() >= dl[i].abs() {
            d[i] = tiny(d[i]);
            let l = dl[i] / d[i];
            dl[i] = l;
            d[i + 1] -= l * du[i];
            b[i + 1] -= l * b[i];
            if i + 2 < n {
                du2[i] = 0.0;
            }
        } else {
            let l = d[i] / dl[i];
            d[i] = dl[i];
            dl[i] = l;
            let tmp = du[i];
            du[i] = d[i + 1];
            d[i + 1] = tmp - l * d[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -l * du[i + 1];
            }
            b.swap(i, i + 1);
            b[i + 1] -= l * b[i];
        }
    }
    d[n - 1] = tiny(d[n - 1]);
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        if i + 1 < n {
            s -= du[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= du2[i] * x[i + 2];
        }
        x[i] = s / d[i];
    }
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub m: u32,
    /// Ordinal of λ among modes with this `m` (0 = lowest).
    pub index: usize,
    /// Richardson-extrapolated eigenvalue of `−Δ`.
    pub lambda_sq: f64,
    pub lambda: f64,
    /// Eigenvalue on the finest grid before extrapolation.
    pub grid_lambda_sq: f64,
    /// Cell centres.
    pub t: Vec<f64>,
    /// `T(t)` at the cell centres, normalized so `2π∫T²f dt = 1`.
    pub radial: Vec<f64>,
    pub l2_norm: f64,
    pub sign_changes: usize,
    /// Relative residual of the discrete eigenpair.
    pub residual: f64,
    /// Mass weights `f·width` of the cells.
    pub mass: Vec<f64>,
}

/// `2π∫g·f dt` by the trapezoid rule on poles plus cell centres (f = 0 at the poles).
pub fn weighted_integral(problem: &ModeProblem, values: &[f64]) -> f64 {
    let p = &problem.profile;
    let mut nodes = Vec::with_capacity(values.len() + 2);
    nodes.push((p.t_minus, 0.0));
    nodes.extend(problem.grid.iter().zip(values).map(|(&t, &g)| (t, g * p.f(t))));
    nodes.push((p.t_plus, 0.0));
    TAU * nodes.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum::<f64>()
}

/// Interior sign changes, ignoring entries below `1e-10·max|T|`.
pub fn count_sign_changes(values: &[f64]) -> usize {
    let peak = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut last = 0.0f64;
    let mut changes = 0;
    for &v in values {
        if v.abs() <= 1e-10 * peak {
            continue;
        }
        if last != 0.0 && v.signum() != last.signum() {
            changes += 1;
        }
        last = v;
    }
    changes
}

fn check_profile(profile: &Profile) -> Result<(), SpectralError> {
    let report = validate_profile(profile)?;
    if !report.passed() {
        let failed: Vec<String> = report
            .checks
            .iter()
            .filter(|c| c.verdict == crate::geometry::Verdict::Fail)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect();
        return Err(SpectralError::Profile(failed.join("; ")));
    }
    Ok(())
}

/// Raw (unextrapolated) lowest `count` eigenvalues on the given grid.
pub fn grid_eigenvalues(profile: &Profile, m: u32, grid_n: usize, count: usize) -> Result<Vec<f64>, SpectralError> {
    let op = ModeProblem::new(profile, m, grid_n)?.assemble()?;
    Ok((0..count.min(op.len())).map(|k| op.eigenvalue(k)).collect())
}

/// The lowest `count` modes for angular number `m`.
pub fn solve_modes(profile: &Profile, m: u32, grid_n: usize, count: usize) -> Result<Vec<Mode>, SpectralError> {
    check_profile(profile)?;
    let problem = ModeProblem::new(profile, m, grid_n)?;
    let op = problem.assemble()?;
    let coarse_n = grid_n / 2;
    let coarse = ModeProblem::build(profile, m, coarse_n)?.assemble()?;
    let ratio_sq = (grid_n as f64 / coarse_n as f64).powi(2);
    let mut modes = Vec::with_capacity(count);
    for k in 0..count.min(coarse.len()) {
        let fine = op.eigenvalue(k);
        let rough = coarse.eigenvalue(k);
        let lambda_sq = ((ratio_sq * fine - rough) / (ratio_sq - 1.0)).max(0.0);
        let (v, residual) = op.eigenvector(fine);
        if !(residual < 1e-6) {
            return Err(SpectralError::Convergence { residual });
        }
        let mut radial: Vec<f64> = v.iter().zip(&op.mass).map(|(x, b)| x / b.sqrt()).collect();
        let norm = weighted_integral(&problem, &radial.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt();
        radial.iter_mut().for_each(|x| *x /= norm);
        let l2_norm = weighted_integral(&problem, &radial.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt();
        modes.push(Mode {
            m,
            index: k,
            lambda_sq,
            lambda: lambda_sq.sqrt(),
            grid_lambda_sq: fine,
            t: problem.grid.clone(),
            sign_changes: count_sign_changes(&radial),
            radial,
            l2_norm,
            residual,
            mass: op.mass.clone(),
        });
    }
    Ok(modes)
}

/// The index-0 mode for `m ≥ 1`.
pub fn solve_highest_weight(profile: &Profile, m: u32, grid_n: usize) -> Result<Mode, SpectralError> {
    if m == 0 {
        return Err(SpectralError::InvalidMode("highest-weight modes need m ≥ 1".into()));
    }
    let mut modes = solve_modes(profile, m, grid_n, 1)?;
    Ok(modes.remove(0))
}

/// Discrete mass inner product `2π Σ b_i T_i S_i` of two modes on the same grid.
pub fn mass_inner_product(a: &Mode, b: &Mode) -> f64 {
    TAU * a.radial.iter().zip(&b.radial).zip(&a.mass).map(|((x, y), w)| x * y * w).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupProfile {
    pub sup: f64,
    /// `|T|` at the principal equator, if the profile has one.
    pub at_equator: Option<f64>,
    pub argmax_t: f64,
}

/// Quadratic through three points; returns (vertex, value at vertex).
fn parabola_peak(x: [f64; 3], y: [f64; 3]) -> Option<(f64, f64)> {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let a = (d2 - d1) / (x[2] - x[0]);
    if !(a < 0.0) {
        return None;
    }
    let b = d1 - a * (x[0] + x[1]);
    let xv = -b / (2.0 * a);
    let yv = y[0] + d1 * (xv - x[0]) + a * (xv - x[0]) * (xv - x[1]);
    (x[0]..=x[2]).contains(&xv).then_some((xv, yv))
}

fn lagrange3(x: [f64; 3], y: [f64; 3], t: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        let mut l = 1.0;
        for j in 0..3 {
            if i != j {
                l *= (t - x[j]) / (x[i] - x[j]);
            }
        }
        s += l * y[i];
    }
    s
}

/// Global sup of `|T|` with parabolic refinement, `|T|` at the equator and
/// the location of the peak.
pub fn sup_norm_profile(profile: &Profile, mode: &Mode) -> SupProfile {
    let abs: Vec<f64> = mode.radial.iter().map(|v| v.abs()).collect();
    let n = abs.len();
    let i = (0..n).max_by(|&a, &b| abs[a].total_cmp(&abs[b])).unwrap_or(0);
    let (mut sup, mut argmax_t) = (abs[i], mode.t[i]);
    if i > 0 && i + 1 < n {
        let xs = [mode.t[i - 1], mode.t[i], mode.t[i + 1]];
        let ys = [abs[i - 1], abs[i], abs[i + 1]];
        if let Some((xv, yv)) = parabola_peak(xs, ys) {
            if yv >= sup {
                sup = yv;
                argmax_t = xv;
            }
        }
    }
    let at_equator = principal_equator(profile).ok().map(|t0| {
        let j = mode.t.partition_point(|&t| t < t0).clamp(1, n - 2);
        let xs = [mode.t[j - 1], mode.t[j], mode.t[j + 1]];
        let ys = [mode.radial[j - 1], mode.radial[j], mode.radial[j + 1]];
        lagrange3(xs, ys, t0).abs()
    });
    SupProfile { sup, at_equator, argmax_t }
}

/// One member of the highest-weight family.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilySample {
    pub m: u32,
    pub grid_n: usize,
    pub lambda_sq: f64,
    pub sup: SupProfile,
}

pub fn highest_weight_sample(profile: &Profile, m: u32) -> Result<FamilySample, SpectralError> {
    let grid_n = family_grid_n(m);
    let mode = solve_highest_weight(profile, m, grid_n)?;
    Ok(FamilySample { m, grid_n, lambda_sq: mode.lambda_sq, sup: sup_norm_profile(profile, &mode) })
}

/// Fits `sup|T| ~ λ^p` over the family samples.
pub fn fit_family(samples: &[FamilySample]) -> Result<ScalingFit, SpectralError> {
    let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.lambda_sq.sqrt(), s.sup.sup)).collect();
    Ok(fit_scaling(&pts)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Γ(ℓ+1)/Γ(ℓ+3/2) by upward recurrence from Γ(1)/Γ(3/2) = 2/√π.
    fn gamma_ratio(l: u32) -> f64 {
        (0..l).fold(2.0 / PI.sqrt(), |r, k| r * (k as f64 + 1.0) / (k as f64 + 1.5))
    }

    fn sphere_sup(l: u32) -> f64 {
        (TAU * PI.sqrt() * gamma_ratio(l)).powf(-0.5)
    }

    #[test]
    fn sphere_zonal_spectrum() {
        let modes = solve_modes(&Profile::sphere(), 0, 2000, 3).unwrap();
        assert!(modes[0].lambda_sq.abs() < 1e-10);
        assert!((modes[1].lambda_sq - 2.0).abs() / 2.0 < 1e-4);
        assert!((modes[2].lambda_sq - 6.0).abs() / 6.0 < 1e-4);
    }

    #[test]
    fn ground_state_is_constant() {
        let p = Profile::sphere();
        let m = &solve_modes(&p, 0, 400, 1).unwrap()[0];
        let c = (4.0 * PI).powf(-0.5);
        assert!(m.radial.iter().all(|v| (v - c).abs() < 1e-4), "{:?}", &m.radial[..3]);
        let s = sup_norm_profile(&p, m);
        assert!((s.sup - c).abs() < 1e-4);
    }

    #[test]
    fn sphere_highest_weight_matches_closed_form() {
        let p = Profile::sphere();
        let m = solve_highest_weight(&p, 10, 2000).unwrap();
        assert!((m.lambda_sq - 110.0).abs() / 110.0 < 1e-4);
        let c = sphere_sup(10);
        let err = m.t.iter().zip(&m.radial).map(|(t, v)| (v - c * t.cos().powi(10)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3, "sup error {err}");
        let s = sup_norm_profile(&p, &m);
        assert!(s.argmax_t.abs() < 1e-6);
        assert!((s.sup - c).abs() < 1e-3);
        assert!((s.at_equator.unwrap() - c).abs() < 1e-3);
        assert_eq!(m.sign_changes, 0);
    }

    #[test]
    fn sphere_m_one_and_five() {
        let p = Profile::sphere();
        assert!((solve_highest_weight(&p, 1, 1000).unwrap().lambda_sq - 2.0).abs() / 2.0 < 1e-4);
        assert!((solve_highest_weight(&p, 5, 2000).unwrap().lambda_sq - 30.0).abs() / 30.0 < 1e-4);
    }

    #[test]
    fn higher_indices_follow_spherical_harmonics() {
        let modes = solve_modes(&Profile::sphere(), 3, 2000, 4).unwrap();
        for (j, mode) in modes.iter().enumerate() {
            let l = 3.0 + j as f64;
            assert!((mode.lambda_sq - l * (l + 1.0)).abs() / (l * (l + 1.0)) < 1e-4);
            assert_eq!(mode.sign_changes, j);
            assert!((mode.l2_norm - 1.0).abs() < 1e-12);
        }
        for a in 0..modes.len() {
            for b in 0..a {
                assert!(mass_inner_product(&modes[a], &modes[b]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn operator_is_symmetric_and_second_order() {
        let p = Profile::sphere();
        let e: Vec<f64> = [500, 1000, 2000]
            .iter()
            .map(|&n| grid_eigenvalues(&p, 4, n, 1).unwrap()[0])
            .collect();
        let (d1, d2) = ((e[1] - e[0]).abs(), (e[2] - e[1]).abs());
        assert!(d2 <= d1 / 3.0, "{e:?}");
    }

    #[test]
    fn perturbed_sphere_mode_is_equatorial() {
        let p = Profile::perturbed_sphere(0.05);
        let m = solve_highest_weight(&p, 10, 2000).unwrap();
        assert!((m.lambda_sq - 110.0).abs() < 0.05 * 100.0 * 2.0);
        assert_eq!(m.sign_changes, 0);
        assert!(sup_norm_profile(&p, &m).argmax_t.abs() < 1e-3);
        let finer = solve_highest_weight(&p, 10, 4000).unwrap();
        assert!((finer.lambda_sq - m.lambda_sq).abs() / m.lambda_sq < 1e-6);
    }

    #[test]
    fn small_grid_rejected() {
        assert!(matches!(ModeProblem::new(&Profile::sphere(), 1, 50), Err(SpectralError::GridTooSmall { .. })));
        assert!(matches!(solve_highest_weight(&Profile::sphere(), 0, 400), Err(SpectralError::InvalidMode(_))));
    }

    #[test]
    fn tridiagonal_solver_with_pivoting() {
        let sub = [3.0, 1.0, 2.0];
        let diag = [1e-20, 2.0, 1.0, 4.0];
        let sup = [1.0, 5.0, 1.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let rhs: Vec<f64> = (0..4)
            .map(|i| {
                diag[i] * x[i] + if i > 0 { sub[i - 1] * x[i - 1] } else { 0.0 } + if i < 3 { sup[i] * x[i + 1] } else { 0.0 }
            })
            .collect();
        let sol = solve_tridiagonal(&sub, &diag, &sup, &rhs);
        for i in 0..4 {
            assert!((sol[i] - x[i]).abs() < 1e-12, "{sol:?}");
        }
    }
}
