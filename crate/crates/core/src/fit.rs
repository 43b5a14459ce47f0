//! Least-squares fits of rates and decay laws.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Errors below this are treated as exact zeros.
pub const EXACT_THRESHOLD: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub rms: f64,
    /// Standard error of the slope (0 with two points).
    pub slope_stderr: f64,
}

/// Ordinary least squares `y ≈ slope · x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return Err(Error::Fit(format!("need at least two paired samples, got {n} and {}", ys.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite sample".into()));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let slope_stderr = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LineFit {
        slope,
        intercept,
        rms: (sse / nf).sqrt(),
        slope_stderr,
    })
}

/// Division of errors by `(ln(ε⁻¹ R₀ + 2))^q` before fitting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogCorrection {
    pub r0: f64,
    pub q: f64,
}

impl LogCorrection {
    pub fn factor(&self, eps: f64) -> f64 {
        (self.r0 / eps + 2.0).ln().powf(self.q)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    /// `exp(intercept)`
    pub constant: f64,
    /// RMS residual in log space.
    pub residual: f64,
    /// 95% confidence interval of the slope.
    pub slope_ci95: (f64, f64),
    /// All errors were below [`EXACT_THRESHOLD`]; slope and residual are reported as 0.
    pub exact: bool,
}

impl RateFit {
    pub fn within(&self, window: (f64, f64)) -> bool {
        self.exact || (self.slope >= window.0 && self.slope <= window.1)
    }
}

/// Fit `error ≈ C ε^s` (optionally after the log correction) on log–log axes.
pub fn fit_rate(eps: &[f64], errors: &[f64], correction: Option<LogCorrection>) -> Result<RateFit> {
    if eps.len() < 3 || errors.len() != eps.len() {
        return Err(Error::Fit(format!(
            "need at least three (eps, error) pairs, got {} and {}",
            eps.len(),
            errors.len()
        )));
    }
    if eps.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Fit("eps values must be positive".into()));
    }
    if errors.iter().all(|e| e.abs() < EXACT_THRESHOLD) {
        return Ok(RateFit {
            slope: 0.0,
            constant: errors.iter().fold(0.0f64, |a, e| a.max(e.abs())),
            residual: 0.0,
            slope_ci95: (0.0, 0.0),
            exact: true,
        });
    }
    if let Some(bad) = errors.iter().find(|&&e| !(e > 0.0)) {
        return Err(Error::Fit(format!("errors must be positive, got {bad}")));
    }
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = eps
        .iter()
        .zip(errors)
        .map(|(&e, &err)| (err / correction.map_or(1.0, |c| c.factor(e))).ln())
        .collect();
    let line = linear_fit(&xs, &ys)?;
    let dof = (xs.len() - 2) as f64;
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::Fit(e.to_string()))?
        .inverse_cdf(0.975);
    let half = t * line.slope_stderr;
    Ok(RateFit {
        slope: line.slope,
        constant: line.intercept.exp(),
        residual: line.rms,
        slope_ci95: (line.slope - half, line.slope + half),
        exact: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const EPS: [f64; 4] = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];

    #[test]
    fn exact_power() {
        let errs: Vec<f64> = EPS.iter().map(|e| 0.7 * e).collect();
        let f = fit_rate(&EPS, &errs, None).unwrap();
        assert_relative_eq!(f.slope, 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.constant, 0.7, epsilon = 1e-12);
        assert!(f.residual < 1e-12);
    }

    #[test]
    fn log_correction_cancels() {
        let c = LogCorrection { r0: 2f64.sqrt(), q: 1.0 };
        let errs: Vec<f64> = EPS.iter().map(|&e| 3.0 * e * c.factor(e)).collect();
        let f = fit_rate(&EPS, &errs, Some(c)).unwrap();
        assert_relative_eq!(f.slope, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn noisy_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let eps: Vec<f64> = (0..8).map(|k| 2f64.powi(-(k + 2))).collect();
        let errs: Vec<f64> = eps.iter().map(|e| 2.0 * e.powf(1.5) * (1.0 + rng.gen_range(-0.01..0.01))).collect();
        let f = fit_rate(&eps, &errs, None).unwrap();
        assert!((1.45..=1.55).contains(&f.slope));
        assert!(f.slope_ci95.0 <= f.slope && f.slope <= f.slope_ci95.1);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_rate(&EPS, &[1e-12; 4], None).unwrap().exact);
        assert!(matches!(fit_rate(&EPS, &[1.0, 0.5, -0.1, 0.1], None), Err(Error::Fit(_))));
        assert!(matches!(fit_rate(&EPS[..2], &[1.0, 0.5], None), Err(Error::Fit(_))));
    }
}
