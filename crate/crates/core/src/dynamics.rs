//! Geodesic flow on a surface of revolution.
//!
//! Geodesics are integrated in arclength as the second-order system
//!
//! ```text
//! t''  = f(t) f'(t) φ'²
//! φ''  = −2 (f'(t)/f(t)) t' φ'
//! ```
//!
//! whose first integrals are the unit speed `t'² + f² φ'² = 1` and the
//! Clairaut constant `γ = f² φ' = f sin ψ`. Both are monitored along every
//! trajectory rather than enforced.

use std::f64::consts::{PI, TAU};

use thiserror::Error;

use crate::geometry::{self, Covector, GeometryError, Profile, SurfacePoint};
use crate::ode::{Dopri5, Flow, OdeError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Integrator(#[from] OdeError),
    #[error("integrator tolerance {0:e} outside [1e-13, 1e-6]")]
    Tolerance(f64),
    #[error("launch angle ψ = {0} must lie strictly inside (0, π/2)")]
    LaunchAngle(f64),
    #[error("geodesic with ψ = {psi} does not return to the equator before s = {s_max}")]
    NoReturn { psi: f64, s_max: f64 },
    #[error("covector is not unit: p1 = {0}")]
    NotUnit(f64),
    #[error("{0}")]
    Invalid(String),
}

/// Arclength-parametrized phase point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicState {
    pub t: f64,
    pub phi: f64,
    pub dt_ds: f64,
    pub dphi_ds: f64,
}

impl GeodesicState {
    fn to_array(self) -> [f64; 4] {
        [self.t, self.phi, self.dt_ds, self.dphi_ds]
    }

    fn from_array(y: &[f64; 4]) -> Self {
        Self { t: y[0], phi: y[1], dt_ds: y[2], dphi_ds: y[3] }
    }

    /// `t'² + f² φ'²`, equal to 1 on unit-speed geodesics.
    pub fn speed_sq(&self, p: &Profile) -> f64 {
        let f = p.f(self.t);
        self.dt_ds * self.dt_ds + f * f * self.dphi_ds * self.dphi_ds
    }

    /// Velocity reversed, same base point.
    pub fn reversed(&self) -> Self {
        Self { dt_ds: -self.dt_ds, dphi_ds: -self.dphi_ds, ..*self }
    }

    /// The covector dual to the velocity: `(t', f² φ')`.
    pub fn covector(&self, p: &Profile) -> Covector {
        let f = p.f(self.t);
        Covector { xi_t: self.dt_ds, xi_phi: f * f * self.dphi_ds }
    }
}

/// Launch state at `(t0, φ0)` making angle `ψ` with the meridian:
/// `(t0, φ0, cos ψ, sin ψ / f(t0))`.
pub fn initial_state(p: &Profile, t0: f64, phi0: f64, psi: f64) -> Result<GeodesicState, DynamicsError> {
    let f = p.radius(t0)?;
    let (s, c) = psi.sin_cos();
    Ok(GeodesicState { t: t0, phi: phi0, dt_ds: c, dphi_ds: s / f })
}

/// Launch state with velocity dual to a unit covector.
pub fn state_from_covector(p: &Profile, x: SurfacePoint, xi: Covector) -> Result<GeodesicState, DynamicsError> {
    let f = p.radius(x.t)?;
    let p1 = p.p1(x.t, xi);
    if (p1 - 1.0).abs() > 1e-8 {
        return Err(DynamicsError::NotUnit(p1));
    }
    Ok(GeodesicState { t: x.t, phi: x.phi, dt_ds: xi.xi_t, dphi_ds: xi.xi_phi / (f * f) })
}

/// Clairaut integral `γ = f(t)² dφ/ds`.
pub fn clairaut(p: &Profile, s: &GeodesicState) -> f64 {
    let f = p.f(s.t);
    f * f * s.dphi_ds
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Accepted integrator nodes `(s, state)`, starting with the launch.
    pub samples: Vec<(f64, GeodesicState)>,
    /// Integration was cut short because the geodesic ran into a pole.
    pub pole_approach: bool,
}

impl Trajectory {
    pub fn end(&self) -> (f64, GeodesicState) {
        *self.samples.last().expect("trajectory has at least the launch sample")
    }

    /// Largest `|t'² + f²φ'² − 1|` over the samples.
    pub fn max_speed_drift(&self, p: &Profile) -> f64 {
        self.samples
            .iter()
            .map(|(_, st)| (st.speed_sq(p) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest deviation of the Clairaut integral from its launch value.
    pub fn max_clairaut_drift(&self, p: &Profile) -> f64 {
        let g0 = clairaut(p, &self.samples[0].1);
        self.samples
            .iter()
            .map(|(_, st)| (clairaut(p, st) - g0).abs())
            .fold(0.0, f64::max)
    }
}

fn check_tol(tol: f64) -> Result<(), DynamicsError> {
    if (1e-13..=1e-6).contains(&tol) {
        Ok(())
    } else {
        Err(DynamicsError::Tolerance(tol))
    }
}

/// Right-hand side of the geodesic equations in `(t, φ, t', φ')`.
fn geodesic_rhs(p: &Profile) -> impl Fn(f64, &[f64; 4]) -> [f64; 4] + '_ {
    move |_s, y| {
        let f = p.f(y[0]);
        let df = p.df(y[0]);
        [y[2], y[3], f * df * y[3] * y[3], -2.0 * (df / f) * y[2] * y[3]]
    }
}

const H_MAX: f64 = 0.25;

fn solver(tol: f64, h_max: f64) -> Dopri5<4> {
    // φ gets an absolute error scale so that shifting φ0 leaves the step
    // sequence untouched.
    Dopri5::new(tol).with_h_max(h_max).with_relative([true, false, true, true])
}

/// Bisection for a sign change of `g` inside an accepted step, re-stepping
/// from the left end of the bracket. Stops once `|g| ≤ tol`.
fn bisect_event<F, G>(
    solver: &Dopri5<4>,
    rhs: &F,
    s0: f64,
    y0: &[f64; 4],
    s1: f64,
    g: G,
    tol: f64,
) -> (f64, [f64; 4])
where
    F: Fn(f64, &[f64; 4]) -> [f64; 4],
    G: Fn(&[f64; 4]) -> f64,
{
    let g0 = g(y0);
    let (mut lo, mut hi) = (0.0, s1 - s0);
    let mut best = (s1, solver.advance(rhs, s0, y0, s1 - s0));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let y = solver.advance(rhs, s0, y0, mid);
        let gm = g(&y);
        best = (s0 + mid, y);
        if gm.abs() <= tol || (hi - lo).abs() <= 4.0 * f64::EPSILON * s1.abs().max(1.0) {
            break;
        }
        if gm.signum() == g0.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best
}

/// Integrates the geodesic from `init` over arclength `[0, s_max]`
/// (`s_max < 0` integrates backwards).
pub fn integrate_geodesic(p: &Profile, init: GeodesicState, s_max: f64, tol: f64) -> Result<Trajectory, DynamicsError> {
    check_tol(tol)?;
    p.radius(init.t)?;
    let rhs = geodesic_rhs(p);
    let solver = solver(tol, H_MAX);
    let guard = tol.max(1e-12);
    let (lo, hi) = (p.t_minus + guard, p.t_plus - guard);
    let outside = |y: &[f64; 4]| y[0] < lo || y[0] > hi || p.f(y[0]) <= 0.0;

    let mut samples = vec![(0.0, init)];
    let mut pole_approach = false;
    let result = solver.integrate(&rhs, 0.0, init.to_array(), s_max, |s0, y0, s1, y1| {
        if outside(y1) {
            // distance past the guard band, positive outside
            let g = |y: &[f64; 4]| if y[0] < 0.5 * (lo + hi) { lo - y[0] } else { y[0] - hi };
            let (s, y) = bisect_event(&solver, &rhs, s0, y0, s1, g, tol);
            samples.push((s, GeodesicState::from_array(&y)));
            pole_approach = true;
            return Flow::Stop;
        }
        samples.push((s1, GeodesicState::from_array(y1)));
        Flow::Continue
    });
    match result {
        Ok(_) => {}
        Err(OdeError::StepUnderflow { .. }) if p.has_poles => {
            let (_, last) = samples[samples.len() - 1];
            let near = (last.t - p.t_minus).min(p.t_plus - last.t) < 1e-3 * p.length();
            if !near {
                return Err(OdeError::StepUnderflow { s: samples[samples.len() - 1].0, h: 0.0 }.into());
            }
            pole_approach = true;
        }
        Err(e) => return Err(e.into()),
    }
    Ok(Trajectory { samples, pole_approach })
}

/// First return of an equatorial launch to the equator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnSample {
    pub psi: f64,
    /// Arclength `S(ψ)` of the first return.
    pub arclength: f64,
    /// Longitude increment `Φ(ψ)` reduced to `[0, 2π)`.
    pub longitude: f64,
}

/// Launches from `(t0, 0)` on the principal equator at angle `ψ` to the
/// meridian and stops at the first `s > 0` with `t(s) = t0`, in either
/// direction.
pub fn first_return(p: &Profile, psi: f64, tol: f64, s_max: f64) -> Result<ReturnSample, DynamicsError> {
    let t0 = geometry::principal_equator(p)?;
    first_return_from(p, t0, psi, tol, s_max)
}

pub(crate) fn first_return_from(p: &Profile, t0: f64, psi: f64, tol: f64, s_max: f64) -> Result<ReturnSample, DynamicsError> {
    check_tol(tol)?;
    if !(psi > 0.0 && psi < 0.5 * PI) {
        return Err(DynamicsError::LaunchAngle(psi));
    }
    let init = initial_state(p, t0, 0.0, psi)?;
    let rhs = geodesic_rhs(p);
    let solver = solver(tol, H_MAX);
    let g = |y: &[f64; 4]| y[0] - t0;

    let mut hit: Option<(f64, [f64; 4])> = None;
    solver.integrate(&rhs, 0.0, init.to_array(), s_max, |s0, y0, s1, y1| {
        let (g0, g1) = (g(y0), g(y1));
        let crossed = (g0 * g1 < 0.0) || (g1 == 0.0 && s1 > 0.0);
        if crossed {
            hit = Some(if g1 == 0.0 { (s1, *y1) } else { bisect_event(&solver, &rhs, s0, y0, s1, g, tol) });
            Flow::Stop
        } else {
            Flow::Continue
        }
    })?;
    let (s, y) = hit.ok_or(DynamicsError::NoReturn { psi, s_max })?;
    Ok(ReturnSample { psi, arclength: s, longitude: (y[1] - init.phi).rem_euclid(TAU) })
}

/// The first `k` equator crossings of an equatorial launch, i.e. the return
/// map iterated `k` times. Longitudes are cumulative, not reduced mod 2π.
pub fn equator_crossings(p: &Profile, psi: f64, k: usize, tol: f64, s_max: f64) -> Result<Vec<ReturnSample>, DynamicsError> {
    check_tol(tol)?;
    if !(psi > 0.0 && psi < 0.5 * PI) {
        return Err(DynamicsError::LaunchAngle(psi));
    }
    let t0 = geometry::principal_equator(p)?;
    let init = initial_state(p, t0, 0.0, psi)?;
    let rhs = geodesic_rhs(p);
    let solver = solver(tol, H_MAX);
    let g = |y: &[f64; 4]| y[0] - t0;

    let mut hits = Vec::with_capacity(k);
    solver.integrate(&rhs, 0.0, init.to_array(), s_max, |s0, y0, s1, y1| {
        let (g0, g1) = (g(y0), g(y1));
        if g0 * g1 < 0.0 || (g1 == 0.0 && s1 > 0.0) {
            let (s, y) = if g1 == 0.0 { (s1, *y1) } else { bisect_event(&solver, &rhs, s0, y0, s1, g, tol) };
            hits.push(ReturnSample { psi, arclength: s, longitude: y[1] - init.phi });
        }
        if hits.len() >= k {
            Flow::Stop
        } else {
            Flow::Continue
        }
    })?;
    if hits.len() < k {
        return Err(DynamicsError::NoReturn { psi, s_max });
    }
    Ok(hits)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZollVerdict {
    pub zoll: bool,
    /// `max Φ − min Φ` over the grid.
    pub spread: f64,
    pub samples: Vec<ReturnSample>,
}

/// Zoll test: the first-return longitude is constant over the ψ grid to
/// within `10·tol`. Integration runs at `tol/100` (clamped to the
/// integrator's range).
pub fn zoll_test(p: &Profile, psi_grid: &[f64], tol: f64) -> Result<ZollVerdict, DynamicsError> {
    if psi_grid.len() < 8 {
        return Err(DynamicsError::Invalid(format!(
            "Zoll test needs at least 8 launch angles, got {}",
            psi_grid.len()
        )));
    }
    let integ_tol = (tol * 1e-2).clamp(1e-13, 1e-6);
    let t0 = geometry::principal_equator(p)?;
    let samples = psi_grid
        .iter()
        .map(|&psi| first_return_from(p, t0, psi, integ_tol, 100.0))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(zoll_from_samples(samples, tol))
}

/// Zoll verdict from precomputed return samples.
pub fn zoll_from_samples(samples: Vec<ReturnSample>, tol: f64) -> ZollVerdict {
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.longitude), hi.max(r.longitude)));
    let spread = hi - lo;
    ZollVerdict { zoll: spread <= 10.0 * tol, spread, samples }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecurrenceVerdict {
    pub rational: bool,
    /// Best continued-fraction convergent `p/q` of `Φ/2π` with `q ≤ q_max`.
    pub convergent: (i64, i64),
    /// `|Φ/2π − p/q|`.
    pub distance: f64,
}

impl RecurrenceVerdict {
    pub fn p_over_q(&self) -> Option<(i64, i64)> {
        self.rational.then_some(self.convergent)
    }
}

/// Classifies `Φ/2π` by its continued-fraction convergents: rational when the
/// last convergent with denominator `≤ q_max` is within `eps`.
pub fn rational_classify(phi: f64, q_max: u32, eps: f64) -> RecurrenceVerdict {
    let x = phi / TAU;
    let q_max = i64::from(q_max.max(1));
    let a0 = x.floor();
    // convergents h_k / k_k
    let (mut h_prev, mut h) = (1i64, a0 as i64);
    let (mut k_prev, mut k) = (0i64, 1i64);
    let mut rem = x - a0;
    for _ in 0..64 {
        if rem <= 1e-15 || (x - h as f64 / k as f64).abs() == 0.0 {
            break;
        }
        let inv = 1.0 / rem;
        let a = inv.floor();
        if !a.is_finite() || a > 1e15 {
            break;
        }
        let a_i = a as i64;
        let (h_next, k_next) = match (a_i.checked_mul(h).and_then(|v| v.checked_add(h_prev)), a_i.checked_mul(k).and_then(|v| v.checked_add(k_prev))) {
            (Some(hn), Some(kn)) => (hn, kn),
            _ => break,
        };
        if k_next > q_max {
            break;
        }
        (h_prev, h) = (h, h_next);
        (k_prev, k) = (k, k_next);
        rem = inv - a;
    }
    let distance = (x - h as f64 / k as f64).abs();
    RecurrenceVerdict { rational: distance <= eps, convergent: (h, k), distance }
}

/// Fraction of launch angles whose return longitude is classified rational
/// at `(q_max, eps)`: a finite-resolution stand-in for the measure of the
/// recurrent set.
pub fn recurrence_fraction(samples: &[ReturnSample], q_max: u32, eps: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits = samples
        .iter()
        .filter(|r| rational_classify(r.longitude, q_max, eps).rational)
        .count();
    hits as f64 / samples.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopResult {
    /// Shortest δ-loop length, `None` when no loop closes before `s_max`.
    pub length: Option<f64>,
    /// Number of re-entries into the δ-ball that were examined.
    pub near_returns: usize,
}

fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r == -PI { PI } else { r }
}

/// Length of the shortest geodesic loop from `x` in direction `xi` that comes
/// back within `delta` of `x` with direction within `delta` of `xi`.
///
/// Surface distance is the metric-weighted chart distance
/// `√(Δt² + f(t_x)² Δφ²)`, valid for small `delta`. Directions are compared
/// through the cosphere-ellipse angle θ. Within each visit to the ball the
/// point of closest approach is taken as the candidate loop end.
pub fn loop_length(p: &Profile, x: SurfacePoint, xi: Covector, delta: f64, s_max: f64) -> Result<LoopResult, DynamicsError> {
    if !(delta > 0.0) {
        return Err(DynamicsError::Invalid(format!("delta must be positive, got {delta}")));
    }
    let tol = 1e-11;
    let init = state_from_covector(p, x, xi)?;
    let fx = p.f(x.t);
    let theta0 = geometry::cosphere_angle(fx, xi);
    let rhs = geodesic_rhs(p);
    let solver = solver(tol, H_MAX.min(0.5 * delta));

    let dist = |y: &[f64; 4]| {
        let dt = y[0] - x.t;
        let dphi = wrap_angle(y[1] - x.phi);
        (dt * dt + fx * fx * dphi * dphi).sqrt()
    };
    let direction_gap = |y: &[f64; 4]| {
        let f = p.f(y[0]);
        let theta = (f * y[3]).atan2(y[2]);
        wrap_angle(theta - theta0).abs()
    };

    let mut left_ball = false;
    let mut visit: Vec<(f64, [f64; 4])> = Vec::new();
    let mut near_returns = 0usize;
    let mut found: Option<f64> = None;

    // Closest approach within a visit: golden-section search on the two steps
    // adjacent to the smallest sampled distance.
    let closest = |nodes: &[(f64, [f64; 4])]| -> (f64, [f64; 4]) {
        let (imin, _) = nodes
            .iter()
            .enumerate()
            .min_by(|a, b| dist(&a.1 .1).total_cmp(&dist(&b.1 .1)))
            .expect("non-empty visit");
        let mut best = nodes[imin];
        let mut best_d = dist(&best.1);
        for (a, b) in [(imin.wrapping_sub(1), imin), (imin, imin + 1)] {
            if a >= nodes.len() || b >= nodes.len() {
                continue;
            }
            let (sa, ya) = nodes[a];
            let width = nodes[b].0 - sa;
            let eval = |sigma: f64| solver.advance(&rhs, sa, &ya, sigma);
            let gr = 0.5 * (5f64.sqrt() - 1.0);
            let (mut lo, mut hi) = (0.0, width);
            let mut c = hi - gr * (hi - lo);
            let mut d = lo + gr * (hi - lo);
            let (mut fc, mut fd) = (dist(&eval(c)), dist(&eval(d)));
            for _ in 0..80 {
                if fc < fd {
                    hi = d;
                    d = c;
                    fd = fc;
                    c = hi - gr * (hi - lo);
                    fc = dist(&eval(c));
                } else {
                    lo = c;
                    c = d;
                    fc = fd;
                    d = lo + gr * (hi - lo);
                    fd = dist(&eval(d));
                }
                if hi - lo < 1e-13 {
                    break;
                }
            }
            let sigma = 0.5 * (lo + hi);
            let y = eval(sigma);
            let dy = dist(&y);
            if dy < best_d {
                best_d = dy;
                best = (sa + sigma, y);
            }
        }
        best
    };

    let mut prev: (f64, [f64; 4]) = (0.0, init.to_array());
    let result = solver.integrate(&rhs, 0.0, init.to_array(), s_max, |_s0, _y0, s1, y1| {
        let d = dist(y1);
        if !left_ball {
            if d > delta {
                left_ball = true;
            }
            prev = (s1, *y1);
            return Flow::Continue;
        }
        let inside = d <= delta;
        if inside {
            if visit.is_empty() {
                near_returns += 1;
                visit.push(prev);
            }
            visit.push((s1, *y1));
        } else if !visit.is_empty() {
            visit.push((s1, *y1));
            let (s_star, y_star) = closest(&visit);
            visit.clear();
            if direction_gap(&y_star) <= delta {
                found = Some(s_star);
                return Flow::Stop;
            }
        }
        prev = (s1, *y1);
        Flow::Continue
    });
    match result {
        Ok(_) => {}
        Err(e) => return Err(e.into()),
    }
    if found.is_none() && !visit.is_empty() {
        let (s_star, y_star) = closest(&visit);
        if direction_gap(&y_star) <= delta {
            found = Some(s_star);
        }
    }
    Ok(LoopResult { length: found, near_returns })
}
