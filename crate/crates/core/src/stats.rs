//! Binomial proportion estimates with Wilson score intervals.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_ci(k: u64, n: u64, confidence: f64) -> Result<(f64, f64)> {
    if n == 0 || k > n {
        return Err(Error::OutOfRange(format!("need 0 <= k <= n and n >= 1, got k={k}, n={n}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::OutOfRange(format!("confidence {confidence} not in (0, 1)")));
    }
    let z = Normal::standard().inverse_cdf(0.5 + confidence / 2.0);
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = z / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    // pin the exact endpoints at the boundaries
    let low = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let high = if k == n { 1.0 } else { (centre + half).min(1.0) };
    Ok((low, high))
}

/// Point estimate of a proportion plus its confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithCI {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub successes: u64,
    pub n_trials: u64,
}

impl EstimateWithCI {
    pub fn from_counts(successes: u64, n_trials: u64, confidence: f64) -> Result<Self> {
        let (ci_low, ci_high) = wilson_ci(successes, n_trials, confidence)?;
        let point = successes as f64 / n_trials as f64;
        Ok(Self { point, ci_low: ci_low.min(point), ci_high: ci_high.max(point), successes, n_trials })
    }

    pub fn width(&self) -> f64 {
        self.ci_high - self.ci_low
    }

    pub fn contains(&self, p: f64) -> bool {
        self.ci_low <= p && p <= self.ci_high
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn boundaries() {
        let (lo, hi) = wilson_ci(0, 20, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.2);
        let (lo, hi) = wilson_ci(20, 20, 0.95).unwrap();
        assert_eq!(hi, 1.0);
        assert!(lo > 0.8);
    }

    #[test]
    fn half_of_hundred() {
        // Wilson formula evaluated with z = Φ⁻¹(0.975) in numpy/scipy
        let (lo, hi) = wilson_ci(50, 100, 0.95).unwrap();
        assert_relative_eq!(lo, 0.403_831_530_365_995_6, epsilon = 1e-9);
        assert_relative_eq!(hi, 0.596_168_469_634_004_4, epsilon = 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(wilson_ci(3, 2, 0.95).is_err());
        assert!(wilson_ci(0, 0, 0.95).is_err());
        assert!(wilson_ci(1, 2, 1.0).is_err());
    }

    #[test]
    fn estimate_invariants() {
        for k in 0..=30 {
            let e = EstimateWithCI::from_counts(k, 30, 0.99).unwrap();
            assert!(0.0 <= e.ci_low && e.ci_low <= e.point && e.point <= e.ci_high && e.ci_high <= 1.0);
        }
    }
}
