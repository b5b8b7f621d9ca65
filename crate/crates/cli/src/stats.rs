//! Summary statistics for campaign cells.

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("need at least two samples, got {0}")]
    TooFewSamples(usize),
}

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Mean and half-width of the two-sided 99% Student-t confidence interval.
pub fn mean_ci99(samples: &[f64]) -> Result<(f64, f64), StatsError> {
    let n = samples.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples(n));
    }
    let m = mean(samples);
    let var = samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Ok((m, 0.0));
    }
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.995);
    Ok((m, t * (var / n as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_values() {
        assert_eq!(mean_ci99(&[0.0, 1.0]).unwrap().0, 0.5);
        assert_eq!(mean_ci99(&[0.3; 7]).unwrap().1, 0.0);
        // t(0.995, 4) = 4.604 from printed tables, s = sqrt(2.5).
        let (m, h) = mean_ci99(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(m, 3.0);
        let expected = 4.604_094_5 * (2.5f64).sqrt() / 5f64.sqrt();
        assert!((h - expected).abs() < 1e-6, "{h} vs {expected}");
        assert_eq!(mean_ci99(&[1.0]), Err(StatsError::TooFewSamples(1)));
    }
}
