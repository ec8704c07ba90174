//! Embedded Runge–Kutta 5(4) (Dormand–Prince) with PI step-size control.
//!
//! Fixed-size state vectors; the driver hands every accepted step to an
//! observer, which is where event detection happens.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at s = {s} (h = {h:e})")]
    StepUnderflow { s: f64, h: f64 },
    #[error("non-finite state at s = {s}")]
    NonFinite { s: f64 },
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
}

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b̂ (fifth minus fourth order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Whether the observer wants integration to go on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

#[derive(Debug, Clone)]
pub struct Dopri5<const N: usize> {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
    /// Components whose error scale grows with their magnitude. Components
    /// marked `false` use the fixed scale `atol + rtol`, which keeps the step
    /// sequence independent of e.g. an additive angle offset.
    pub relative: [bool; N],
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

impl<const N: usize> Dopri5<N> {
    pub fn new(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            h_max: f64::INFINITY,
            max_steps: 10_000_000,
            relative: [true; N],
        }
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }

    pub fn with_relative(mut self, relative: [bool; N]) -> Self {
        self.relative = relative;
        self
    }

    /// One Dormand–Prince step from `(s, y)` with step `h`, given `k1 = rhs(s, y)`.
    /// Returns the fifth-order solution, the derivative there, and the
    /// embedded error vector.
    fn raw_step<F>(&self, rhs: &F, s: f64, y: &[f64; N], k1: &[f64; N], h: f64) -> ([f64; N], [f64; N], [f64; N])
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        let k2 = rhs(s + C2 * h, &axpy(y, h, &[(A21, k1)]));
        let k3 = rhs(s + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]));
        let k4 = rhs(s + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
        let k5 = rhs(s + C5 * h, &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = rhs(s + h, &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y_new = axpy(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = rhs(s + h, &y_new);
        let mut err = [0.0; N];
        for i in 0..N {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        (y_new, k7, err)
    }

    /// A single fifth-order step of size `h` (may be negative), no error control.
    /// Used to land on event locations inside an accepted step.
    pub fn advance<F>(&self, rhs: &F, s: f64, y: &[f64; N], h: f64) -> [f64; N]
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        if h == 0.0 {
            return *y;
        }
        let k1 = rhs(s, y);
        self.raw_step(rhs, s, y, &k1, h).0
    }

    fn error_norm(&self, y: &[f64; N], y_new: &[f64; N], err: &[f64; N]) -> f64 {
        let mut acc = 0.0;
        for i in 0..N {
            let sc = if self.relative[i] {
                self.atol + self.rtol * y[i].abs().max(y_new[i].abs())
            } else {
                self.atol + self.rtol
            };
            let r = err[i] / sc;
            acc += r * r;
        }
        (acc / N as f64).sqrt()
    }

    fn initial_step<F>(&self, rhs: &F, s: f64, y: &[f64; N], k1: &[f64; N], direction: f64) -> f64
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        let scale = |i: usize, v: f64| {
            if self.relative[i] {
                self.atol + self.rtol * v.abs()
            } else {
                self.atol + self.rtol
            }
        };
        let rms = |v: &[f64; N], base: &[f64; N]| {
            (v.iter()
                .enumerate()
                .map(|(i, x)| (x / scale(i, base[i])).powi(2))
                .sum::<f64>()
                / N as f64)
                .sqrt()
        };
        // absolute-scale components do not count towards |y|
        let mut sized = *y;
        for (i, v) in sized.iter_mut().enumerate() {
            if !self.relative[i] {
                *v = 0.0;
            }
        }
        let d0 = rms(&sized, y);
        let d1 = rms(k1, y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.h_max);
        let y1 = axpy(y, direction * h0, &[(1.0, k1)]);
        let k2 = rhs(s + direction * h0, &y1);
        let mut diff = [0.0; N];
        for i in 0..N {
            diff[i] = k2[i] - k1[i];
        }
        let d2 = rms(&diff, y) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.h_max)
    }

    /// Integrates from `s0` to `s_end` (either direction). The observer sees
    /// every accepted step as `(s_prev, y_prev, s, y)` and may stop early.
    /// Returns the last accepted `(s, y)`.
    pub fn integrate<F, O>(
        &self,
        rhs: &F,
        s0: f64,
        y0: [f64; N],
        s_end: f64,
        mut observer: O,
    ) -> Result<(f64, [f64; N], StepStats), OdeError>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
        O: FnMut(f64, &[f64; N], f64, &[f64; N]) -> Flow,
    {
        const SAFETY: f64 = 0.9;
        const BETA: f64 = 0.04;
        const ALPHA: f64 = 0.2 - 0.75 * BETA;
        const FAC_MIN: f64 = 0.2;
        const FAC_MAX: f64 = 10.0;

        let mut stats = StepStats::default();
        let direction = if s_end >= s0 { 1.0 } else { -1.0 };
        let mut s = s0;
        let mut y = y0;
        if s_end == s0 {
            return Ok((s, y, stats));
        }
        let mut k1 = rhs(s, &y);
        stats.evaluations += 1;
        let mut h = self.initial_step(rhs, s, &y, &k1, direction);
        stats.evaluations += 1;
        let mut err_old: f64 = 1e-4;
        let mut rejected_last = false;

        loop {
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(OdeError::TooManySteps(self.max_steps));
            }
            let remaining = (s_end - s) * direction;
            let mut last = false;
            if h >= remaining {
                h = remaining;
                last = true;
            }
            if h < 1e-14 * s.abs().max(1.0) && !last {
                return Err(OdeError::StepUnderflow { s, h });
            }
            let (y_new, k7, err) = self.raw_step(rhs, s, &y, &k1, direction * h);
            stats.evaluations += 6;
            if y_new.iter().any(|v| !v.is_finite()) {
                // Treat as a rejected step; a pole or blow-up shows up as underflow.
                stats.rejected += 1;
                h *= FAC_MIN;
                rejected_last = true;
                continue;
            }
            let e = self.error_norm(&y, &y_new, &err);
            if e <= 1.0 {
                stats.accepted += 1;
                let s_new = if last { s_end } else { s + direction * h };
                let flow = observer(s, &y, s_new, &y_new);
                s = s_new;
                y = y_new;
                k1 = k7;
                if flow == Flow::Stop || last {
                    return Ok((s, y, stats));
                }
                let e = e.max(1e-10);
                let mut fac = SAFETY * e.powf(-ALPHA) * err_old.powf(BETA);
                fac = fac.clamp(FAC_MIN, FAC_MAX);
                if rejected_last {
                    fac = fac.min(1.0);
                }
                h = (h * fac).min(self.h_max);
                err_old = e;
                rejected_last = false;
            } else {
                stats.rejected += 1;
                let fac = (SAFETY * e.powf(-ALPHA)).max(FAC_MIN);
                h *= fac;
                rejected_last = true;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_energy_and_phase() {
        let rhs = |_s: f64, y: &[f64; 2]| [y[1], -y[0]];
        let solver = Dopri5::<2>::new(1e-12);
        let (s, y, stats) = solver
            .integrate(&rhs, 0.0, [1.0, 0.0], 20.0, |_, _, _, _| Flow::Continue)
            .unwrap();
        assert_eq!(s, 20.0);
        assert!((y[0] - 20f64.cos()).abs() < 1e-9, "{}", y[0] - 20f64.cos());
        assert!((y[1] + 20f64.sin()).abs() < 1e-9);
        assert!(stats.accepted > 100);
    }

    #[test]
    fn integrates_backwards() {
        let rhs = |_s: f64, y: &[f64; 1]| [y[0]];
        let solver = Dopri5::<1>::new(1e-10);
        let (_, y, _) = solver
            .integrate(&rhs, 1.0, [1.0f64.exp()], 0.0, |_, _, _, _| Flow::Continue)
            .unwrap();
        assert!((y[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn observer_can_stop() {
        let rhs = |_s: f64, _y: &[f64; 1]| [1.0];
        let solver = Dopri5::<1>::new(1e-8).with_h_max(0.1);
        let (s, _, _) = solver
            .integrate(&rhs, 0.0, [0.0], 10.0, |_, _, s, _| if s > 1.0 { Flow::Stop } else { Flow::Continue })
            .unwrap();
        assert!(s > 1.0 && s < 1.2);
    }

    #[test]
    fn single_step_is_fifth_order() {
        let rhs = |_s: f64, y: &[f64; 1]| [y[0]];
        let solver = Dopri5::<1>::new(1e-8);
        let e1 = (solver.advance(&rhs, 0.0, &[1.0], 0.1)[0] - 0.1f64.exp()).abs();
        let e2 = (solver.advance(&rhs, 0.0, &[1.0], 0.05)[0] - 0.05f64.exp()).abs();
        // local error ~ h^6
        assert!(e1 / e2 > 40.0, "{}", e1 / e2);
    }
}
