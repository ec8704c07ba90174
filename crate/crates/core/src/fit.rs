//! Log-log least-squares fits of power laws `value ≈ C·λ^p`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("samples span {span:.3} decades, need at least {need}")]
    NarrowRange { span: f64, need: f64 },
    #[error("non-positive or non-finite sample ({x}, {y})")]
    Domain { x: f64, y: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub exponent: f64,
    /// Natural log of the prefactor `C`.
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: Vec<(f64, f64)>,
}

impl ScalingFit {
    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.exponent * x.ln()).exp()
    }
}

/// Minimum number of samples and decades of `x` required by [`fit_scaling`].
pub const MIN_SAMPLES: usize = 5;
pub const MIN_DECADES: f64 = 0.8;

/// Ordinary least squares on `(ln x, ln y)`.
pub fn fit_scaling(samples: &[(f64, f64)]) -> Result<ScalingFit, FitError> {
    fit_scaling_with(samples, MIN_SAMPLES, MIN_DECADES)
}

pub fn fit_scaling_with(samples: &[(f64, f64)], min_samples: usize, min_decades: f64) -> Result<ScalingFit, FitError> {
    if samples.len() < min_samples.max(2) {
        return Err(FitError::TooFewSamples { need: min_samples.max(2), got: samples.len() });
    }
    if let Some(&(x, y)) = samples
        .iter()
        .find(|(x, y)| !(x.is_finite() && y.is_finite() && *x > 0.0 && *y > 0.0))
    {
        return Err(FitError::Domain { x, y });
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &(x, _)| (lo.min(x), hi.max(x)));
    let span = (hi / lo).log10();
    if span + 1e-12 < min_decades {
        return Err(FitError::NarrowRange { span, need: min_decades });
    }

    let n = samples.len() as f64;
    let pts: Vec<(f64, f64)> = samples.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - exponent * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(ScalingFit { exponent, intercept, r_squared, samples: samples.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometric(lo: f64, hi: f64, k: usize) -> Vec<f64> {
        (0..k).map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64)).collect()
    }

    #[test]
    fn exact_power_law() {
        let s: Vec<_> = geometric(10.0, 1000.0, 7).into_iter().map(|l| (l, l.powf(0.25))).collect();
        let fit = fit_scaling(&s).unwrap();
        assert!((fit.exponent - 0.25).abs() < 1e-13);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!((fit.predict(50.0) - 50f64.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn constant_samples() {
        let s: Vec<_> = geometric(1.0, 100.0, 6).into_iter().map(|l| (l, 3.5)).collect();
        let fit = fit_scaling(&s).unwrap();
        assert!(fit.exponent.abs() < 1e-12);
        assert!((fit.intercept - 3.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let s: Vec<_> = geometric(1.0, 100.0, 6).into_iter().map(|l| (l, l - 1.0)).collect();
        assert!(matches!(fit_scaling(&s), Err(FitError::Domain { .. })));
        let s: Vec<_> = geometric(1.0, 2.0, 6).into_iter().map(|l| (l, l)).collect();
        assert!(matches!(fit_scaling(&s), Err(FitError::NarrowRange { .. })));
        assert!(matches!(fit_scaling(&[(1.0, 1.0); 3]), Err(FitError::TooFewSamples { .. })));
    }
}
