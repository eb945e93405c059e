//! Least-squares exponent fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Result of a straight-line fit `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in the fitted coordinates.
    pub residual: f64,
    /// `‖y − ŷ‖₂ / ‖y‖₂` in the fitted coordinates.
    pub relative_residual: f64,
    /// Half-width of the 95% confidence interval of the slope
    /// (normal approximation; zero for two points).
    pub slope_ci: f64,
    pub n_points: usize,
    pub x_range: (f64, f64),
}

/// Ordinary least squares on `(x, y)`.
pub fn linear(x: &[f64], y: &[f64]) -> Result<FitResult> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::EmptySample);
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("fit abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let yy: f64 = y.iter().map(|b| b * b).sum();
    let slope_ci = if n > 2 { 1.96 * (ss / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(FitResult {
        slope,
        intercept,
        residual: (ss / nf).sqrt(),
        relative_residual: if yy > 0.0 { (ss / yy).sqrt() } else { 0.0 },
        slope_ci,
        n_points: n,
        x_range: (lo, hi),
    })
}

/// Fit of `ln y` against `ln x`; all values must be positive.
pub fn loglog(x: &[f64], y: &[f64]) -> Result<FitResult> {
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("log-log fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mut f = linear(&lx, &ly)?;
    f.x_range = (
        x.iter().cloned().fold(f64::INFINITY, f64::min),
        x.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_line() {
        let f = linear(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-15 && (f.intercept - 1.0).abs() < 1e-15);
        assert!(f.residual < 1e-15);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(linear(&[1.0], &[1.0]).is_err());
        assert!(linear(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(loglog(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn recovers_power_laws(a in -3.0f64..3.0, c in 0.1f64..10.0) {
            let x: Vec<f64> = (1..10).map(|q| 2f64.powi(q)).collect();
            let y: Vec<f64> = x.iter().map(|v| c * v.powf(a)).collect();
            let f = loglog(&x, &y).unwrap();
            prop_assert!((f.slope - a).abs() < 1e-10);
        }
    }
}
