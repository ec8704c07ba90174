//! Joint spectrum of the flat torus `𝕋^n = ℝ^n/2πℤ^n` and window counts.
//!
//! Joint eigenfunctions are `e^{ik·x}`, `k ∈ ℤ^n`, with joint eigenvalues
//! `(h|k|, h k_{i_1}, …, h k_{i_{n−1}})` for the operators
//! `(√(−h²Δ), −ih∂_{i_1}, …)`. A window around `E` counts the lattice points
//! with `|h|k| − E_0| ≤ c1·h` and `|h k_{i_j} − E_j| ≤ c2·h`, evaluated as
//! `|‖k‖ − E_0/h| ≤ c1` and `|k_{i_j} − E_j/h| ≤ c2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fit::{fit_scaling_with, FitError, ScalingFit};
use crate::momentmap::{build_system, rank_at, MomentMapError, SystemSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("invalid frame: {0}")]
    Frame(String),
    #[error("invalid window: {0}")]
    Spec(String),
    #[error("h = {0} outside (0, 0.1]")]
    Step(f64),
    #[error("search ball of radius {radius:.1} exceeds the brute-force limit {limit}")]
    TooLarge { radius: f64, limit: f64 },
    #[error("count series is zero at every h")]
    DegenerateSeries,
    #[error("need at least {need} h values, got {got}")]
    TooFewSteps { need: usize, got: usize },
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Rank(#[from] MomentMapError),
}

/// Torus dimension and the 0-based coordinates used as momenta.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TorusFrame {
    pub n: usize,
    pub momentum_indices: Vec<usize>,
}

impl TorusFrame {
    pub fn new(n: usize, momentum_indices: Vec<usize>) -> Result<Self, LatticeError> {
        if n < 2 {
            return Err(LatticeError::Frame(format!("n = {n} < 2")));
        }
        if momentum_indices.len() != n - 1 {
            return Err(LatticeError::Frame(format!("need {} momentum indices, got {}", n - 1, momentum_indices.len())));
        }
        let mut seen = vec![false; n];
        for &i in &momentum_indices {
            if i >= n || seen[i] {
                return Err(LatticeError::Frame(format!("indices {momentum_indices:?} not distinct within 0..{n}")));
            }
            seen[i] = true;
        }
        Ok(Self { n, momentum_indices })
    }

    /// `𝓟`: momenta `ξ_2, …, ξ_n`.
    pub fn p_frame(n: usize) -> Result<Self, LatticeError> {
        Self::new(n, (1..n).collect())
    }

    /// `𝓠`: momenta `ξ_1, ξ_3, …, ξ_n`.
    pub fn q_frame(n: usize) -> Result<Self, LatticeError> {
        Self::new(n, std::iter::once(0).chain(2..n).collect())
    }

    /// The coordinate not used as a momentum.
    pub fn free_index(&self) -> usize {
        (0..self.n).find(|i| !self.momentum_indices.contains(i)).expect("n − 1 of n indices used")
    }

    /// 1-based indices, as printed.
    pub fn label(&self) -> String {
        self.momentum_indices.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpec {
    pub frame: TorusFrame,
    /// `E[0]` for `|ξ|`, then one entry per momentum in frame order.
    pub energy: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
}

impl WindowSpec {
    pub fn new(frame: TorusFrame, energy: Vec<f64>, c1: f64, c2: f64) -> Result<Self, LatticeError> {
        if energy.len() != frame.n {
            return Err(LatticeError::Spec(format!("energy has {} entries, need {}", energy.len(), frame.n)));
        }
        if energy.iter().chain([&c1, &c2]).any(|v| !v.is_finite()) {
            return Err(LatticeError::Spec("non-finite energy or width".into()));
        }
        if !(energy[0] > 0.0) {
            return Err(LatticeError::Spec(format!("E[0] = {} must be positive", energy[0])));
        }
        if c1 < 0.0 || c2 < 0.0 {
            return Err(LatticeError::Spec(format!("window widths must be non-negative, got c1 = {c1}, c2 = {c2}")));
        }
        let momenta = energy[1..].iter().map(|e| e * e).sum::<f64>().sqrt();
        if momenta > energy[0] * (1.0 + 1e-12) {
            return Err(LatticeError::Spec(format!(
                "|E momenta| = {momenta} exceeds E[0] = {}: outside the moment-map image",
                energy[0]
            )));
        }
        Ok(Self { frame, energy, c1, c2 })
    }

    /// Centre covector of the window: momenta from `E`, the free coordinate
    /// the non-negative root of `|ξ| = E[0]`.
    pub fn center_covector(&self) -> Vec<f64> {
        let mut xi = vec![0.0; self.frame.n];
        for (j, &i) in self.frame.momentum_indices.iter().enumerate() {
            xi[i] = self.energy[j + 1];
        }
        let rest: f64 = self.energy[1..].iter().map(|e| e * e).sum();
        xi[self.frame.free_index()] = (self.energy[0] * self.energy[0] - rest).max(0.0).sqrt();
        xi
    }
}

/// Membership predicate shared by the optimized counter and the oracle,
/// evaluated in lattice units: `|‖k‖ − E_0/h| ≤ c1`, `|k_{i_j} − E_j/h| ≤ c2`.
pub fn in_window(spec: &WindowSpec, h: f64, k: &[i64]) -> bool {
    let norm = k.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
    if (norm - spec.energy[0] / h).abs() > spec.c1 {
        return false;
    }
    spec.frame
        .momentum_indices
        .iter()
        .zip(&spec.energy[1..])
        .all(|(&i, &e)| (k[i] as f64 - e / h).abs() <= spec.c2)
}

fn check_step(h: f64) -> Result<(), LatticeError> {
    if h > 0.0 && h <= 0.1 {
        Ok(())
    } else {
        Err(LatticeError::Step(h))
    }
}

const MAX_COORD: f64 = 1e9;

/// Counts the window by looping over the constrained coordinates and solving
/// the norm condition for the free one.
pub fn count_window(spec: &WindowSpec, h: f64) -> Result<u64, LatticeError> {
    check_step(h)?;
    let outer = (spec.energy[0] + spec.c1 * h) / h;
    if !(outer.is_finite() && outer < MAX_COORD) {
        return Err(LatticeError::Spec(format!("free-coordinate range unbounded (radius {outer})")));
    }
    let inner = ((spec.energy[0] - spec.c1 * h) / h).max(0.0);
    let ranges: Vec<(i64, i64)> = spec.energy[1..]
        .iter()
        .map(|&e| (((e - spec.c2 * h) / h).ceil() as i64 - 1, ((e + spec.c2 * h) / h).floor() as i64 + 1))
        .collect();
    let free = spec.frame.free_index();
    let n = spec.frame.n;
    let mut k = vec![0i64; n];
    let mut count = 0u64;
    let mut counter = vec![0i64; ranges.len()];
    if ranges.iter().any(|(lo, hi)| lo > hi) {
        return Ok(0);
    }
    for (c, r) in counter.iter_mut().zip(&ranges) {
        *c = r.0;
    }
    loop {
        for (j, &i) in spec.frame.momentum_indices.iter().enumerate() {
            k[i] = counter[j];
        }
        let s: f64 = counter.iter().map(|&v| (v as f64) * (v as f64)).sum();
        if s <= (outer + 1.0) * (outer + 1.0) {
            let lo = ((inner * inner - s).max(0.0).sqrt().floor() as i64 - 1).max(0);
            let hi = ((outer * outer - s).max(0.0).sqrt().ceil() as i64) + 1;
            for a in lo..=hi {
                let signs = [a, -a];
                for &v in &signs[..if a == 0 { 1 } else { 2 }] {
                    k[free] = v;
                    if in_window(spec, h, &k) {
                        count += 1;
                    }
                }
            }
        }
        // odometer increment
        let mut j = 0;
        loop {
            if j == counter.len() {
                return Ok(count);
            }
            if counter[j] < ranges[j].1 {
                counter[j] += 1;
                break;
            }
            counter[j] = ranges[j].0;
            j += 1;
        }
    }
}

pub const BRUTE_FORCE_LIMIT: f64 = 2000.0;

/// Enumerates the integer ball `|k| ≤ (E[0] + c1·h)/h + 1` point by point.
pub fn count_window_bruteforce(spec: &WindowSpec, h: f64) -> Result<u64, LatticeError> {
    check_step(h)?;
    let radius = (spec.energy[0] + spec.c1 * h) / h;
    if !(radius <= BRUTE_FORCE_LIMIT) {
        return Err(LatticeError::TooLarge { radius, limit: BRUTE_FORCE_LIMIT });
    }
    let r = radius.ceil() as i64 + 1;
    let r2 = r * r;
    let mut k = vec![0i64; spec.frame.n];
    fn walk(spec: &WindowSpec, h: f64, k: &mut [i64], depth: usize, used: i64, r: i64, r2: i64) -> u64 {
        if depth == k.len() {
            return u64::from(in_window(spec, h, k));
        }
        let mut total = 0;
        for v in -r..=r {
            let used_next = used + v * v;
            if used_next > r2 {
                continue;
            }
            k[depth] = v;
            total += walk(spec, h, k, depth + 1, used_next, r, r2);
        }
        total
    }
    Ok(walk(spec, h, &mut k, 0, 0, r, r2))
}

/// `points` geometrically spaced values from `start` down to `stop`.
pub fn geometric_grid(start: f64, stop: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![start];
    }
    (0..points)
        .map(|i| start * (stop / start).powf(i as f64 / (points - 1) as f64))
        .collect()
}

/// Multiplies each value by `1 + δ`, `δ` uniform in `[−amplitude, amplitude]`.
pub fn jitter(grid: &[f64], seed: u64, amplitude: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    grid.iter().map(|&h| h * (1.0 + rng.random_range(-amplitude..=amplitude))).collect()
}

pub const JITTER: f64 = 0.05;
/// Standard h grid: 16 points from 5e-2 to 2e-3.
pub fn standard_h_grid(seed: u64) -> Vec<f64> {
    jitter(&geometric_grid(5e-2, 2e-3, 16), seed, JITTER)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountSeries {
    pub spec: WindowSpec,
    pub rows: Vec<(f64, u64)>,
}

pub fn count_series(spec: &WindowSpec, hs: &[f64]) -> Result<CountSeries, LatticeError> {
    if hs.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(LatticeError::Spec("h values must be strictly decreasing".into()));
    }
    let rows = hs.iter().map(|&h| Ok((h, count_window(spec, h)?))).collect::<Result<Vec<_>, LatticeError>>()?;
    Ok(CountSeries { spec: spec.clone(), rows })
}

/// Minimum h-values and decades for [`exponent_fit`].
pub const FIT_MIN_STEPS: usize = 6;
pub const FIT_MIN_DECADES: f64 = 1.3;

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeFit {
    /// Fit of `count ~ h^p` over the non-zero rows.
    pub fit: ScalingFit,
    /// Rank of the configuration at the window centre.
    pub rank: usize,
    /// Predicted bound exponent `−(n − k − 1)`.
    pub bound_exponent: f64,
    /// `count·h^{n−k−1}` per row.
    pub scaled: Vec<(f64, f64)>,
    pub max_scaled: f64,
    pub dropped_zero_rows: usize,
    /// Scaled count over the finer half of the grid stays within twice the
    /// coarser half, and `p ≥ −(n−k−1) − 0.3`.
    pub bounded: bool,
}

/// Rank of the flat-torus system of `spec`'s frame at the window centre.
pub fn window_rank(spec: &WindowSpec) -> Result<usize, LatticeError> {
    let n = spec.frame.n;
    let sys = build_system(SystemSpec::FlatTorus { n, momenta: spec.frame.momentum_indices.clone() })?;
    let xi = spec.center_covector();
    Ok(rank_at(&sys, &vec![0.0; n], &xi, 1e-8)?.rank)
}

pub fn exponent_fit(series: &CountSeries) -> Result<LatticeFit, LatticeError> {
    if series.rows.len() < FIT_MIN_STEPS {
        return Err(LatticeError::TooFewSteps { need: FIT_MIN_STEPS, got: series.rows.len() });
    }
    let nonzero: Vec<(f64, f64)> = series.rows.iter().filter(|r| r.1 > 0).map(|&(h, c)| (h, c as f64)).collect();
    if nonzero.is_empty() {
        return Err(LatticeError::DegenerateSeries);
    }
    let fit = fit_scaling_with(&nonzero, 2, FIT_MIN_DECADES)?;
    let rank = window_rank(&series.spec)?;
    let power = (series.spec.frame.n - rank - 1) as i32;
    let scaled: Vec<(f64, f64)> = series.rows.iter().map(|&(h, c)| (h, c as f64 * h.powi(power))).collect();
    let max_scaled = scaled.iter().fold(0.0f64, |a, s| a.max(s.1));
    let half = scaled.len() / 2;
    let coarse = scaled[..half].iter().fold(0.0f64, |a, s| a.max(s.1));
    let fine = scaled[half..].iter().fold(0.0f64, |a, s| a.max(s.1));
    let bound_exponent = 0.0 - f64::from(power);
    let bounded = fine <= 2.0 * coarse && fit.exponent >= bound_exponent - 0.3;
    Ok(LatticeFit {
        fit,
        rank,
        bound_exponent,
        scaled,
        max_scaled,
        dropped_zero_rows: series.rows.len() - nonzero.len(),
        bounded,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameComparison {
    pub p_series: CountSeries,
    pub q_series: CountSeries,
    pub p_fit: LatticeFit,
    pub q_fit: LatticeFit,
    /// `(h, count_𝓟 / count_𝓠)`.
    pub ratios: Vec<(f64, f64)>,
    /// `q_fit.exponent − p_fit.exponent`.
    pub gap: f64,
}

/// The `𝓟` window at `E = (1, 1, 0, …)` and the `𝓠` window at
/// `F = (1, 0, …)`, both with unit widths.
pub fn frame_specs(n: usize) -> Result<(WindowSpec, WindowSpec), LatticeError> {
    if n < 3 {
        return Err(LatticeError::Frame(format!("frame comparison needs n ≥ 3, got {n}")));
    }
    let mut e = vec![0.0; n];
    e[0] = 1.0;
    e[1] = 1.0;
    let mut f = vec![0.0; n];
    f[0] = 1.0;
    Ok((
        WindowSpec::new(TorusFrame::p_frame(n)?, e, 1.0, 1.0)?,
        WindowSpec::new(TorusFrame::q_frame(n)?, f, 1.0, 1.0)?,
    ))
}

pub fn frame_compare(n: usize, h_grid: &[f64]) -> Result<FrameComparison, LatticeError> {
    let (p, q) = frame_specs(n)?;
    let p_series = count_series(&p, h_grid)?;
    let q_series = count_series(&q, h_grid)?;
    frame_comparison_from(p_series, q_series)
}

pub fn frame_comparison_from(p_series: CountSeries, q_series: CountSeries) -> Result<FrameComparison, LatticeError> {
    let p_fit = exponent_fit(&p_series)?;
    let q_fit = exponent_fit(&q_series)?;
    let ratios = p_series
        .rows
        .iter()
        .zip(&q_series.rows)
        .map(|(&(h, a), &(_, b))| (h, if b == 0 { f64::INFINITY } else { a as f64 / b as f64 }))
        .collect();
    let gap = q_fit.fit.exponent - p_fit.fit.exponent;
    Ok(FrameComparison { p_series, q_series, p_fit, q_fit, ratios, gap })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, momenta: Vec<usize>, e: Vec<f64>, c1: f64, c2: f64) -> WindowSpec {
        WindowSpec::new(TorusFrame::new(n, momenta).unwrap(), e, c1, c2).unwrap()
    }

    #[test]
    fn two_dimensional_window_matches_oracle() {
        let s = spec(2, vec![1], vec![1.0, 0.0], 1.0, 1.0);
        let fast = count_window(&s, 0.01).unwrap();
        assert_eq!(fast, count_window_bruteforce(&s, 0.01).unwrap());
        // k2 ∈ {−1, 0, 1}; |k1| with ||k| − 100| ≤ 1
        let mut expected = 0;
        for k2 in -1i64..=1 {
            for k1 in -110i64..=110 {
                let r = ((k1 * k1 + k2 * k2) as f64).sqrt();
                if (r - 100.0).abs() <= 1.0 {
                    expected += 1;
                }
            }
        }
        assert_eq!(fast, expected);
    }

    #[test]
    fn three_dimensional_window_matches_oracle() {
        let s = spec(3, vec![1, 2], vec![1.0, 0.0, 0.0], 1.0, 1.0);
        assert_eq!(count_window(&s, 0.05).unwrap(), count_window_bruteforce(&s, 0.05).unwrap());
    }

    #[test]
    fn empty_window() {
        let s = spec(2, vec![1], vec![1.0, 0.3], 0.0, 0.0);
        assert_eq!(count_window(&s, 0.07).unwrap(), 0);
        assert_eq!(count_window_bruteforce(&s, 0.07).unwrap(), 0);
    }

    #[test]
    fn spec_validation() {
        let f = TorusFrame::p_frame(3).unwrap();
        assert!(WindowSpec::new(f.clone(), vec![1.0, 2.0, 0.0], 1.0, 1.0).is_err());
        assert!(WindowSpec::new(f.clone(), vec![0.0, 0.0, 0.0], 1.0, 1.0).is_err());
        assert!(WindowSpec::new(f, vec![1.0, 0.0], 1.0, 1.0).is_err());
        assert!(TorusFrame::new(3, vec![1, 1]).is_err());
        let s = spec(2, vec![1], vec![1.0, 0.0], 1.0, 1.0);
        assert!(matches!(count_window(&s, 0.2), Err(LatticeError::Step(_))));
        assert!(matches!(count_window_bruteforce(&s, 1e-4), Err(LatticeError::TooLarge { .. })));
    }

    #[test]
    fn synthetic_inverse_series() {
        let hs = geometric_grid(5e-2, 1e-3, 12);
        let s = spec(2, vec![1], vec![1.0, 0.0], 1.0, 1.0);
        let series = CountSeries { spec: s, rows: hs.iter().map(|&h| (h, (1.0 / h).round() as u64)).collect() };
        let fit = exponent_fit(&series).unwrap();
        assert!((fit.fit.exponent + 1.0).abs() < 0.01);
    }

    #[test]
    fn window_ranks() {
        let (p, q) = frame_specs(3).unwrap();
        assert_eq!(window_rank(&p).unwrap(), 1);
        assert_eq!(window_rank(&q).unwrap(), 2);
        assert_eq!(p.center_covector(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn jitter_is_seeded_and_keeps_order() {
        let a = standard_h_grid(7);
        assert_eq!(a, standard_h_grid(7));
        assert_ne!(a, standard_h_grid(8));
        assert!(a.windows(2).all(|w| w[1] < w[0]));
    }
}
