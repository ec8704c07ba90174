//! Natural cubic spline through sampled `(t, f(t))` data.
//!
//! Used for user-supplied profile tables, where first and second
//! derivatives have to come from the interpolant.

#[derive(Debug, Clone)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    /// Second derivatives at the knots.
    moments: Vec<f64>,
}

impl CubicSpline {
    /// Builds the natural spline (zero second derivative at both ends).
    ///
    /// Returns `None` when fewer than three knots are given, the knots are
    /// not strictly increasing, or any sample is non-finite.
    pub fn natural(knots: &[f64], values: &[f64]) -> Option<Self> {
        let n = knots.len();
        if n < 3 || values.len() != n {
            return None;
        }
        if knots.iter().chain(values).any(|v| !v.is_finite()) {
            return None;
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return None;
        }

        // Tridiagonal system for the interior moments (Thomas algorithm,
        // diagonally dominant so no pivoting needed).
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let m = n - 2;
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for i in 0..m {
            diag[i] = 2.0 * (h[i] + h[i + 1]);
            upper[i] = h[i + 1];
            rhs[i] = 6.0
                * ((values[i + 2] - values[i + 1]) / h[i + 1] - (values[i + 1] - values[i]) / h[i]);
        }
        for i in 1..m {
            let w = h[i] / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut moments = vec![0.0; n];
        for i in (0..m).rev() {
            let next = if i + 1 < m { moments[i + 2] } else { 0.0 };
            moments[i + 1] = (rhs[i] - upper[i] * next) / diag[i];
        }

        Some(Self {
            knots: knots.to_vec(),
            values: values.to_vec(),
            moments,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    fn segment(&self, t: f64) -> usize {
        let last = self.knots.len() - 2;
        match self.knots.binary_search_by(|k| k.total_cmp(&t)) {
            Ok(i) => i.min(last),
            Err(0) => 0,
            Err(i) => (i - 1).min(last),
        }
    }

    /// Value, first and second derivative at `t` (extrapolates the end cubics).
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let i = self.segment(t);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - t) / h;
        let b = (t - self.knots[i]) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.moments[i], self.moments[i + 1]);

        let value = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 = (y1 - y0) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        let d2 = a * m0 + b * m1;
        (value, d1, d2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubic_interior_to_high_accuracy() {
        let knots: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0 * std::f64::consts::PI).collect();
        let values: Vec<f64> = knots.iter().map(|t| t.sin()).collect();
        let s = CubicSpline::natural(&knots, &values).unwrap();
        for &t in &[0.5, 1.0, 1.5707963, 2.2] {
            let (v, d1, d2) = s.eval(t);
            assert!((v - f64::sin(t)).abs() < 1e-8);
            assert!((d1 - f64::cos(t)).abs() < 1e-5);
            assert!((d2 + f64::sin(t)).abs() < 1e-3);
        }
    }

    #[test]
    fn rejects_unsorted_knots() {
        assert!(CubicSpline::natural(&[0.0, 2.0, 1.0], &[0.0, 1.0, 2.0]).is_none());
        assert!(CubicSpline::natural(&[0.0, 1.0], &[0.0, 1.0]).is_none());
    }
}
