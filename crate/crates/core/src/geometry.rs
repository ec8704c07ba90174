//! Surfaces of revolution with metric `ds² = dt² + f(t)² dφ²`.
//!
//! A [`Profile`] carries the generatrix `f` together with its first two
//! derivatives. Bundled profiles use closed-form derivatives; user profiles
//! get them from finite differences or from a cubic spline through a table,
//! and the [`ValidationReport`] records which source was used.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::spline::CubicSpline;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Radii at or below this count as a pole.
pub const POLE_RADIUS: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("profile evaluation is not finite at t = {t}")]
    Evaluation { t: f64 },
    #[error("f(t) = {f} is not positive at t = {t} (pole or outside the surface)")]
    Pole { t: f64, f: f64 },
    #[error("df has no usable sign-change bracket on [{lo}, {hi}]")]
    Bracketing { lo: f64, hi: f64 },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("unknown profile `{0}`")]
    UnknownProfile(String),
    #[error("profile table {path}: {reason}")]
    Table { path: String, reason: String },
}

/// Where the derivative evaluators of a profile come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeSource {
    Analytic,
    /// Five-point centered stencil with step `1e-5 · (t_plus - t_minus)`.
    FiniteDifference,
    Spline,
}

impl fmt::Display for DerivativeSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Analytic => "analytic",
            Self::FiniteDifference => "finite-difference",
            Self::Spline => "spline",
        })
    }
}

/// Generatrix of a surface of revolution, parametrized by meridian arclength.
#[derive(Clone)]
pub struct Profile {
    pub name: String,
    pub t_minus: f64,
    pub t_plus: f64,
    /// The surface closes up at both ends (`f(t_±) = 0`).
    pub has_poles: bool,
    /// Builder asserts `|f'(t_±)| = 1`, i.e. the metric is smooth at the poles.
    pub pole_smooth: bool,
    /// Builder asserts `max f = 1`, attained at the equator.
    pub cap_at_one: bool,
    pub derivatives: DerivativeSource,
    f: RealFn,
    df: RealFn,
    d2f: RealFn,
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Profile")
            .field("name", &self.name)
            .field("t_minus", &self.t_minus)
            .field("t_plus", &self.t_plus)
            .field("has_poles", &self.has_poles)
            .field("pole_smooth", &self.pole_smooth)
            .field("cap_at_one", &self.cap_at_one)
            .field("derivatives", &self.derivatives)
            .finish()
    }
}

impl Profile {
    /// Profile with closed-form derivatives.
    #[allow(clippy::too_many_arguments)]
    pub fn analytic(
        name: impl Into<String>,
        t_minus: f64,
        t_plus: f64,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        has_poles: bool,
        pole_smooth: bool,
        cap_at_one: bool,
    ) -> Self {
        Self {
            name: name.into(),
            t_minus,
            t_plus,
            has_poles,
            pole_smooth,
            cap_at_one,
            derivatives: DerivativeSource::Analytic,
            f: Arc::new(f),
            df: Arc::new(df),
            d2f: Arc::new(d2f),
        }
    }

    /// Round unit sphere, `f = cos t` on `[-π/2, π/2]`.
    pub fn sphere() -> Self {
        Self::analytic(
            "sphere",
            -FRAC_PI_2,
            FRAC_PI_2,
            f64::cos,
            |t| -t.sin(),
            |t| -t.cos(),
            true,
            true,
            true,
        )
    }

    /// `f = cos t · (1 − ε sin²t)` on `[-π/2, π/2]`.
    ///
    /// Keeps `f(0) = 1` at the equator but has `|f'(±π/2)| = 1 − ε`, so the
    /// poles are cone points.
    pub fn perturbed_sphere(eps: f64) -> Self {
        Self::analytic(
            format!("perturbed-sphere({eps})"),
            -FRAC_PI_2,
            FRAC_PI_2,
            move |t| t.cos() * (1.0 - eps * t.sin().powi(2)),
            move |t| {
                let (s, c) = t.sin_cos();
                -s * (1.0 - eps * s * s + 2.0 * eps * c * c)
            },
            move |t| {
                let (s, c) = t.sin_cos();
                // f' = −s·(1 + 2ε − 3ε s²)
                -c * (1.0 + 2.0 * eps - 9.0 * eps * s * s)
            },
            true,
            false,
            true,
        )
    }

    /// `f = sin t · (1 − ε sin²t)` on `[0, π]`; oblate for `ε > 0`.
    pub fn spheroid(eps: f64) -> Self {
        Self::analytic(
            format!("spheroid({eps})"),
            0.0,
            PI,
            move |t| t.sin() * (1.0 - eps * t.sin().powi(2)),
            move |t| {
                let (s, c) = t.sin_cos();
                c * (1.0 - 3.0 * eps * s * s)
            },
            move |t| {
                let (s, c) = t.sin_cos();
                -s * (1.0 - 3.0 * eps * s * s) - 6.0 * eps * s * c * c
            },
            true,
            true,
            false,
        )
    }

    /// User profile with derivatives from a five-point centered stencil.
    pub fn from_fn(
        name: impl Into<String>,
        t_minus: f64,
        t_plus: f64,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        has_poles: bool,
    ) -> Self {
        let f: RealFn = Arc::new(f);
        let step = 1e-5 * (t_plus - t_minus);
        let (f1, f2) = (f.clone(), f.clone());
        let df: RealFn = Arc::new(move |t| {
            (-f1(t + 2.0 * step) + 8.0 * f1(t + step) - 8.0 * f1(t - step) + f1(t - 2.0 * step))
                / (12.0 * step)
        });
        // Second derivative uses a wider step; the 1e-5 step loses too many
        // digits to cancellation.
        let step2 = 1e-3 * (t_plus - t_minus);
        let d2f: RealFn = Arc::new(move |t| {
            (-f2(t + 2.0 * step2) + 16.0 * f2(t + step2) - 30.0 * f2(t) + 16.0 * f2(t - step2)
                - f2(t - 2.0 * step2))
                / (12.0 * step2 * step2)
        });
        Self {
            name: name.into(),
            t_minus,
            t_plus,
            has_poles,
            pole_smooth: false,
            cap_at_one: false,
            derivatives: DerivativeSource::FiniteDifference,
            f,
            df,
            d2f,
        }
    }

    /// Profile interpolated by a natural cubic spline through `(t, f)` samples.
    pub fn from_table(name: impl Into<String>, ts: &[f64], fs: &[f64]) -> Result<Self, GeometryError> {
        let name = name.into();
        let spline = CubicSpline::natural(ts, fs).ok_or_else(|| GeometryError::Table {
            path: name.clone(),
            reason: "need ≥ 3 finite samples with strictly increasing t".into(),
        })?;
        let (t_minus, t_plus) = spline.domain();
        let has_poles = fs[0].abs() <= 1e-12 && fs[fs.len() - 1].abs() <= 1e-12;
        let spline = Arc::new(spline);
        let (s0, s1, s2) = (spline.clone(), spline.clone(), spline);
        Ok(Self {
            name,
            t_minus,
            t_plus,
            has_poles,
            pole_smooth: false,
            cap_at_one: false,
            derivatives: DerivativeSource::Spline,
            f: Arc::new(move |t| s0.eval(t).0),
            df: Arc::new(move |t| s1.eval(t).1),
            d2f: Arc::new(move |t| s2.eval(t).2),
        })
    }

    /// Reads a whitespace- or comma-separated two-column table `t f(t)`.
    /// Lines starting with `#` are ignored.
    pub fn from_table_file(path: impl AsRef<Path>) -> Result<Self, GeometryError> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| GeometryError::Table {
            path: display.clone(),
            reason: e.to_string(),
        })?;
        let mut ts = Vec::new();
        let mut fs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| GeometryError::Table {
                    path: display.clone(),
                    reason: format!("line {}: cannot parse `{s}`", lineno + 1),
                })
            };
            if cols.len() != 2 {
                return Err(GeometryError::Table {
                    path: display,
                    reason: format!("line {}: expected 2 columns, got {}", lineno + 1, cols.len()),
                });
            }
            ts.push(parse(cols[0])?);
            fs.push(parse(cols[1])?);
        }
        let mut profile = Self::from_table(display.clone(), &ts, &fs)?;
        profile.name = format!("custom:{display}");
        Ok(profile)
    }

    pub fn with_cap_at_one(mut self, cap: bool) -> Self {
        self.cap_at_one = cap;
        self
    }

    #[inline]
    pub fn f(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    #[inline]
    pub fn df(&self, t: f64) -> f64 {
        (self.df)(t)
    }

    #[inline]
    pub fn d2f(&self, t: f64) -> f64 {
        (self.d2f)(t)
    }

    pub fn length(&self) -> f64 {
        self.t_plus - self.t_minus
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_minus && t <= self.t_plus
    }

    /// `f(t)`, failing at poles and outside the surface.
    pub fn radius(&self, t: f64) -> Result<f64, GeometryError> {
        let f = self.f(t);
        if !f.is_finite() {
            return Err(GeometryError::Evaluation { t });
        }
        if f <= POLE_RADIUS || !self.contains(t) {
            return Err(GeometryError::Pole { t, f });
        }
        Ok(f)
    }

    /// The cosphere quadratic form `ξ_t² + ξ_φ²/f(t)²`.
    pub fn p1(&self, t: f64, xi: Covector) -> f64 {
        let f = self.f(t);
        xi.xi_t * xi.xi_t + xi.xi_phi * xi.xi_phi / (f * f)
    }
}

/// Named profile families understood by the CLI.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSpec {
    Sphere,
    PerturbedSphere(f64),
    Spheroid(f64),
    Custom(String),
}

impl ProfileSpec {
    pub fn build(&self) -> Result<Profile, GeometryError> {
        match self {
            Self::Sphere => Ok(Profile::sphere()),
            Self::PerturbedSphere(eps) => Ok(Profile::perturbed_sphere(*eps)),
            Self::Spheroid(eps) => Ok(Profile::spheroid(*eps)),
            Self::Custom(path) => Profile::from_table_file(path),
        }
    }
}

impl FromStr for ProfileSpec {
    type Err = GeometryError;

    /// Accepts `sphere`, `perturbed-sphere(eps)`, `spheroid(eps)` and
    /// `custom:<path>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "sphere" {
            return Ok(Self::Sphere);
        }
        if let Some(path) = s.strip_prefix("custom:") {
            return Ok(Self::Custom(path.to_string()));
        }
        let parametrized = |prefix: &str| -> Option<f64> {
            s.strip_prefix(prefix)?
                .strip_prefix('(')?
                .strip_suffix(')')?
                .trim()
                .parse()
                .ok()
        };
        if let Some(eps) = parametrized("perturbed-sphere") {
            return Ok(Self::PerturbedSphere(eps));
        }
        if let Some(eps) = parametrized("spheroid") {
            return Ok(Self::Spheroid(eps));
        }
        Err(GeometryError::UnknownProfile(s.to_string()))
    }
}

impl fmt::Display for ProfileSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sphere => f.write_str("sphere"),
            Self::PerturbedSphere(e) => write!(f, "perturbed-sphere({e})"),
            Self::Spheroid(e) => write!(f, "spheroid({e})"),
            Self::Custom(p) => write!(f, "custom:{p}"),
        }
    }
}

/// A point `(t, φ)` on the surface, `φ` reduced to `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub t: f64,
    pub phi: f64,
}

impl SurfacePoint {
    pub fn new(t: f64, phi: f64) -> Self {
        Self { t, phi: phi.rem_euclid(TAU) }
    }
}

/// Cotangent vector `(ξ_t, ξ_φ)` at a surface point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covector {
    pub xi_t: f64,
    pub xi_phi: f64,
}

/// Point on the cosphere ellipse `ξ_t² + ξ_φ²/f(t)² = 1` at angle `theta`:
/// `(cos θ, f(t) sin θ)`.
pub fn cosphere_embed(p: &Profile, t: f64, theta: f64) -> Result<Covector, GeometryError> {
    let f = p.radius(t)?;
    let (s, c) = theta.sin_cos();
    Ok(Covector { xi_t: c, xi_phi: f * s })
}

/// Inverse of [`cosphere_embed`] for a unit covector; returns θ in `(-π, π]`.
pub fn cosphere_angle(f: f64, xi: Covector) -> f64 {
    (xi.xi_phi / f).atan2(xi.xi_t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Warn,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pass => "pass",
            Self::Warn => "warn",
            Self::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub profile: String,
    pub derivatives: DerivativeSource,
    /// Interior sample points where `f ≤ 0`.
    pub positivity_violations: Vec<f64>,
    pub pole_values: (f64, f64),
    /// `| |f'(t_±)| − 1 |` at each end.
    pub pole_slope_deviation: (f64, f64),
    /// Every interior root of `f'` with the value of `f''` there.
    pub equator_candidates: Vec<(f64, f64)>,
    pub max_f: f64,
    /// Largest relative mismatch of `f'`, `f''` against centered differences.
    pub derivative_mismatch: (f64, f64),
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.verdict != Verdict::Fail)
    }

    pub fn has_warnings(&self) -> bool {
        self.checks.iter().any(|c| c.verdict == Verdict::Warn)
    }

    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const POSITIVITY_SAMPLES: usize = 2000;
const POLE_VALUE_TOL: f64 = 1e-10;
const POLE_SLOPE_TOL: f64 = 1e-8;
const DERIVATIVE_TOL: f64 = 1e-6;
const EQUATOR_TOL: f64 = 1e-10;

fn eval_checked(g: impl Fn(f64) -> f64, t: f64) -> Result<f64, GeometryError> {
    let v = g(t);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(GeometryError::Evaluation { t })
    }
}

/// Checks a profile against the standing assumptions: positivity, vanishing
/// at the poles, unit slope at the poles, derivative consistency and
/// nondegenerate critical circles.
pub fn validate_profile(p: &Profile) -> Result<ValidationReport, GeometryError> {
    if !(p.t_minus.is_finite() && p.t_plus.is_finite() && p.t_plus > p.t_minus) {
        return Err(GeometryError::InvalidProfile(format!(
            "domain [{}, {}] is empty or not finite",
            p.t_minus, p.t_plus
        )));
    }
    let mut checks = Vec::new();
    let len = p.length();

    let mut positivity_violations = Vec::new();
    let mut max_f = f64::NEG_INFINITY;
    for i in 1..POSITIVITY_SAMPLES {
        let t = p.t_minus + len * i as f64 / POSITIVITY_SAMPLES as f64;
        let f = eval_checked(|t| p.f(t), t)?;
        eval_checked(|t| p.df(t), t)?;
        eval_checked(|t| p.d2f(t), t)?;
        if f <= 0.0 {
            positivity_violations.push(t);
        }
        max_f = max_f.max(f);
    }
    checks.push(AssumptionCheck {
        name: "positivity",
        verdict: if positivity_violations.is_empty() { Verdict::Pass } else { Verdict::Fail },
        detail: format!("{} interior samples with f <= 0", positivity_violations.len()),
    });

    let pole_values = (eval_checked(|t| p.f(t), p.t_minus)?, eval_checked(|t| p.f(t), p.t_plus)?);
    let slopes = (eval_checked(|t| p.df(t), p.t_minus)?, eval_checked(|t| p.df(t), p.t_plus)?);
    let pole_slope_deviation = ((slopes.0.abs() - 1.0).abs(), (slopes.1.abs() - 1.0).abs());
    max_f = max_f.max(pole_values.0).max(pole_values.1);

    if p.has_poles {
        let ok = pole_values.0.abs() <= POLE_VALUE_TOL && pole_values.1.abs() <= POLE_VALUE_TOL;
        checks.push(AssumptionCheck {
            name: "poles",
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            detail: format!("f(t_minus) = {:e}, f(t_plus) = {:e}", pole_values.0, pole_values.1),
        });
        let smooth = pole_slope_deviation.0 <= POLE_SLOPE_TOL && pole_slope_deviation.1 <= POLE_SLOPE_TOL;
        checks.push(AssumptionCheck {
            name: "pole-smoothness",
            verdict: if smooth { Verdict::Pass } else { Verdict::Warn },
            detail: if smooth {
                "|f'| = 1 at both poles (first-order smoothness only)".to_string()
            } else {
                format!(
                    "cone point: ||f'| - 1| = {:e} at t_minus, {:e} at t_plus",
                    pole_slope_deviation.0, pole_slope_deviation.1
                )
            },
        });
    }

    let derivative_mismatch = derivative_mismatch(p)?;
    let deriv_ok = derivative_mismatch.0 <= DERIVATIVE_TOL && derivative_mismatch.1 <= DERIVATIVE_TOL;
    checks.push(AssumptionCheck {
        name: "derivatives",
        verdict: if deriv_ok { Verdict::Pass } else { Verdict::Fail },
        detail: format!(
            "{} derivatives; max relative mismatch f' {:e}, f'' {:e}",
            p.derivatives, derivative_mismatch.0, derivative_mismatch.1
        ),
    });

    let equator_candidates = critical_points(p)?;
    let degenerate = equator_candidates
        .iter()
        .filter(|(_, d2)| d2.abs() <= EQUATOR_TOL)
        .count();
    checks.push(AssumptionCheck {
        name: "equator-nondegenerate",
        verdict: if degenerate == 0 { Verdict::Pass } else { Verdict::Fail },
        detail: format!(
            "{} critical circle(s), {} with f'' = 0",
            equator_candidates.len(),
            degenerate
        ),
    });
    if p.has_poles {
        checks.push(AssumptionCheck {
            name: "single-equator",
            verdict: if equator_candidates.len() == 1 { Verdict::Pass } else { Verdict::Warn },
            detail: format!("{} equator(s)", equator_candidates.len()),
        });
    }

    if p.cap_at_one {
        let at_equator = equator_candidates
            .iter()
            .map(|&(t, _)| p.f(t))
            .fold(f64::NEG_INFINITY, f64::max);
        let ok = max_f <= 1.0 + 1e-12 && (at_equator - 1.0).abs() <= 1e-10;
        checks.push(AssumptionCheck {
            name: "cap-at-one",
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            detail: format!("max f = {max_f}, f at equator = {at_equator}"),
        });
    }

    Ok(ValidationReport {
        profile: p.name.clone(),
        derivatives: p.derivatives,
        positivity_violations,
        pole_values,
        pole_slope_deviation,
        equator_candidates,
        max_f,
        derivative_mismatch,
        checks,
    })
}

/// Relative mismatch of `f'` and `f''` against centered differences of `f`
/// at 100 pseudo-random interior points (fixed seed, so reports are
/// reproducible).
fn derivative_mismatch(p: &Profile) -> Result<(f64, f64), GeometryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_f11e);
    let len = p.length();
    let h1 = 1e-5 * len;
    let h2 = 1e-3 * len;
    let margin = 2.0 * h2;
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let t = rng.random_range(p.t_minus + margin..p.t_plus - margin);
        let f = |s: f64| eval_checked(|t| p.f(t), s);
        let fd1 = (-f(t + 2.0 * h1)? + 8.0 * f(t + h1)? - 8.0 * f(t - h1)? + f(t - 2.0 * h1)?) / (12.0 * h1);
        let fd2 = (-f(t + 2.0 * h2)? + 16.0 * f(t + h2)? - 30.0 * f(t)? + 16.0 * f(t - h2)?
            - f(t - 2.0 * h2)?)
            / (12.0 * h2 * h2);
        let d1 = eval_checked(|t| p.df(t), t)?;
        let d2 = eval_checked(|t| p.d2f(t), t)?;
        e1 = e1.max((d1 - fd1).abs() / d1.abs().max(1.0));
        e2 = e2.max((d2 - fd2).abs() / d2.abs().max(1.0));
    }
    Ok((e1, e2))
}

const SCAN_INTERVALS: usize = 4096;

/// All interior roots of `f'` with `f''` there, ordered by `t`, including
/// degenerate ones.
fn critical_points(p: &Profile) -> Result<Vec<(f64, f64)>, GeometryError> {
    let len = p.length();
    let node = |i: usize| p.t_minus + len * i as f64 / SCAN_INTERVALS as f64;
    let mut roots: Vec<f64> = Vec::new();
    let mut prev_t = node(1);
    let mut prev = eval_checked(|t| p.df(t), prev_t)?;
    if prev == 0.0 {
        roots.push(prev_t);
    }
    for i in 2..SCAN_INTERVALS {
        let t = node(i);
        let d = eval_checked(|t| p.df(t), t)?;
        if d == 0.0 {
            roots.push(t);
        } else if prev != 0.0 && prev.signum() != d.signum() {
            roots.push(refine_root(p, prev_t, t)?);
        }
        prev_t = t;
        prev = d;
    }
    roots
        .into_iter()
        .map(|t| Ok((t, eval_checked(|t| p.d2f(t), t)?)))
        .collect()
}

/// Safeguarded Newton on `f'` inside a sign-change bracket.
fn refine_root(p: &Profile, lo: f64, hi: f64) -> Result<f64, GeometryError> {
    let (mut a, mut b) = (lo, hi);
    let fa = p.df(a);
    if !(fa.is_finite() && p.df(b).is_finite()) || fa.signum() == p.df(b).signum() {
        return Err(GeometryError::Bracketing { lo, hi });
    }
    let sa = fa.signum();
    let mut t = 0.5 * (a + b);
    for _ in 0..200 {
        let d = p.df(t);
        if !d.is_finite() {
            return Err(GeometryError::Bracketing { lo, hi });
        }
        if d == 0.0 {
            return Ok(t);
        }
        if d.signum() == sa {
            a = t;
        } else {
            b = t;
        }
        if (b - a).abs() <= 4.0 * f64::EPSILON * t.abs().max(1e-300) {
            break;
        }
        let slope = p.d2f(t);
        let newton = t - d / slope;
        t = if slope != 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
    }
    Ok(t)
}

/// Equators: nondegenerate interior critical circles of `f`, ordered by `t`.
///
/// Each returned `t0` has `|f'(t0)| ≤ tol` and `|f''(t0)| > tol`.
pub fn equator_locate(p: &Profile, tol: f64) -> Result<Vec<(f64, f64)>, GeometryError> {
    Ok(critical_points(p)?
        .into_iter()
        .filter(|&(t, d2)| p.df(t).abs() <= tol && d2.abs() > tol)
        .collect())
}

/// The equator with the largest radius, used as the launch circle for
/// return-map and quasimode experiments.
pub fn principal_equator(p: &Profile) -> Result<f64, GeometryError> {
    equator_locate(p, 1e-9)?
        .into_iter()
        .map(|(t, _)| t)
        .max_by(|a, b| p.f(*a).total_cmp(&p.f(*b)))
        .ok_or_else(|| GeometryError::InvalidProfile(format!("{} has no equator", p.name)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn sphere_passes_with_single_equator() {
        let r = validate_profile(&Profile::sphere()).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        assert!(!r.has_warnings());
        assert_eq!(r.equator_candidates.len(), 1);
        let (t0, d2) = r.equator_candidates[0];
        assert!(t0.abs() < 1e-14);
        assert!((d2 + 1.0).abs() < 1e-12);
        assert!((r.max_f - 1.0).abs() < 1e-6);
    }

    #[test]
    fn truncated_sphere_fails_pole_check() {
        let p = Profile::analytic(
            "cut",
            -FRAC_PI_2,
            FRAC_PI_4,
            f64::cos,
            |t| -t.sin(),
            |t| -t.cos(),
            true,
            true,
            false,
        );
        let r = validate_profile(&p).unwrap();
        assert!(!r.passed());
        assert_eq!(r.check("poles").unwrap().verdict, Verdict::Fail);
        assert!((r.pole_values.1 - FRAC_PI_4.cos()).abs() < 1e-15);
    }

    #[test]
    fn perturbed_sphere_warns_about_cone_points() {
        let eps = 0.1;
        let r = validate_profile(&Profile::perturbed_sphere(eps)).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        assert_eq!(r.check("pole-smoothness").unwrap().verdict, Verdict::Warn);
        // f_ε'(±π/2) = ∓(1 − ε) by direct differentiation.
        assert!((r.pole_slope_deviation.0 - eps).abs() < 1e-12);
        assert!((r.pole_slope_deviation.1 - eps).abs() < 1e-12);
    }

    #[test]
    fn non_finite_profile_reports_offending_point() {
        let p = Profile::analytic("bad", 0.0, 1.0, |t| if t > 0.5 { f64::NAN } else { t }, |_| 1.0, |_| 0.0, false, false, false);
        match validate_profile(&p) {
            Err(GeometryError::Evaluation { t }) => assert!(t > 0.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn monotone_profile_has_no_equator() {
        let p = Profile::analytic("ramp", 0.0, 1.0, |t| t, |_| 1.0, |_| 0.0, false, false, false);
        assert!(equator_locate(&p, 1e-10).unwrap().is_empty());
        assert!(validate_profile(&p).unwrap().passed());
    }

    #[test]
    fn equator_of_perturbed_sphere_matches_bisection() {
        let p = Profile::perturbed_sphere(0.1);
        let eq = equator_locate(&p, 1e-10).unwrap();
        assert_eq!(eq.len(), 1);
        // plain bisection on f'
        let (mut a, mut b) = (-0.3f64, 0.4f64);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if p.df(m).signum() == p.df(a).signum() {
                a = m;
            } else {
                b = m;
            }
        }
        assert!((eq[0].0 - 0.5 * (a + b)).abs() <= 1e-12);
        assert!((eq[0].1 + 1.2).abs() < 1e-12);
    }

    #[test]
    fn finite_difference_profile_is_flagged() {
        let p = Profile::from_fn("fd-sphere", -FRAC_PI_2, FRAC_PI_2, f64::cos, true);
        let r = validate_profile(&p).unwrap();
        assert_eq!(r.derivatives, DerivativeSource::FiniteDifference);
        assert!(r.passed(), "{:?}", r.checks);
        assert!((p.df(0.3) + 0.3f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn cosphere_examples() {
        let s = Profile::sphere();
        let c = cosphere_embed(&s, FRAC_PI_4, FRAC_PI_2).unwrap();
        assert!(c.xi_t.abs() < 1e-16);
        assert!((c.xi_phi - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((s.p1(FRAC_PI_4, c) - 1.0).abs() < 1e-15);

        let c = cosphere_embed(&Profile::spheroid(0.2), 1.0, 0.0).unwrap();
        assert_eq!((c.xi_t, c.xi_phi), (1.0, 0.0));

        let c = cosphere_embed(&s, 0.0, FRAC_PI_4).unwrap();
        assert!((c.xi_t - 0.5f64.sqrt()).abs() < 1e-15 && (c.xi_phi - 0.5f64.sqrt()).abs() < 1e-15);

        assert!(matches!(cosphere_embed(&s, FRAC_PI_2 + 0.1, 0.0), Err(GeometryError::Pole { .. })));
    }

    #[test]
    fn profile_spec_round_trips() {
        for s in ["sphere", "perturbed-sphere(0.05)", "spheroid(0.2)", "custom:/tmp/x.tsv"] {
            let spec: ProfileSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("torus".parse::<ProfileSpec>().is_err());
    }

    #[test]
    fn table_profile_uses_spline_derivatives() {
        let ts: Vec<f64> = (0..=400).map(|i| -FRAC_PI_2 + PI * i as f64 / 400.0).collect();
        let fs: Vec<f64> = ts.iter().map(|t| t.cos().max(0.0)).collect();
        let p = Profile::from_table("table", &ts, &fs).unwrap();
        assert_eq!(p.derivatives, DerivativeSource::Spline);
        assert!(p.has_poles);
        let eq = equator_locate(&p, 1e-8).unwrap();
        assert_eq!(eq.len(), 1);
        assert!(eq[0].0.abs() < 1e-6);
    }
}
