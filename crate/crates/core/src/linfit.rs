//! Ordinary least-squares line fit `y ≈ slope·x + intercept`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LineFitError {
    #[error("need at least two observations, got {0}")]
    TooFew(usize),
    #[error("all abscissae are equal; slope is undetermined")]
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square of `y − (slope·x + intercept)`.
    pub residual_rms: f64,
}

impl LineFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

pub fn fit_line(points: &[(f64, f64)]) -> Result<LineFit, LineFitError> {
    if points.len() < 2 {
        return Err(LineFitError::TooFew(points.len()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    // relative test so that tiny-but-distinct abscissae still fit
    let scale = points.iter().map(|p| p.0 * p.0).sum::<f64>() / n;
    if sxx == 0.0 || sxx <= 1e-24 * scale * n {
        return Err(LineFitError::Singular);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = points
        .iter()
        .map(|&(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    Ok(LineFit {
        slope,
        intercept,
        residual_rms: (ss / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let pts: Vec<_> = (0..5).map(|i| (i as f64, 3.0 * i as f64 - 2.0)).collect();
        let fit = fit_line(&pts).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12);
        assert!((fit.intercept + 2.0).abs() < 1e-12);
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(fit_line(&[(1.0, 2.0)]), Err(LineFitError::TooFew(1)));
        assert_eq!(
            fit_line(&[(1.0, 2.0), (1.0, 3.0)]),
            Err(LineFitError::Singular)
        );
    }
}
