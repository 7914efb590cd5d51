//! Exact (Clopper-Pearson) and score (Wilson) intervals for a binomial
//! proportion.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::special::inverse_regularized_beta;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl ConfidenceInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }

    pub fn contains_interval(&self, other: &ConfidenceInterval) -> bool {
        self.lower <= other.lower && other.upper <= self.upper
    }
}

fn check(k: u64, n: u64, level: f64) -> Result<()> {
    if n == 0 || k > n || !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArguments(format!(
            "binomial interval needs 0 <= k <= n, n >= 1 and level in (0,1); got k={k}, n={n}, level={level}"
        )));
    }
    Ok(())
}

/// Exact two-sided interval: the bounds are the beta quantiles
/// `B(α/2; k, n-k+1)` and `B(1-α/2; k+1, n-k)`, found by inverting the
/// regularized incomplete beta.
pub fn clopper_pearson(k: u64, n: u64, level: f64) -> Result<ConfidenceInterval> {
    check(k, n, level)?;
    let alpha = 1.0 - level;
    let (kf, nf) = (k as f64, n as f64);
    let lower = if k == 0 {
        0.0
    } else {
        inverse_regularized_beta(alpha / 2.0, kf, nf - kf + 1.0)
    };
    let upper = if k == n {
        1.0
    } else {
        inverse_regularized_beta(1.0 - alpha / 2.0, kf + 1.0, nf - kf)
    };
    Ok(ConfidenceInterval { lower, upper, level })
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(p)
}

/// Wilson score interval, clamped to [0, 1].
pub fn wilson(k: u64, n: u64, level: f64) -> Result<ConfidenceInterval> {
    check(k, n, level)?;
    let z = normal_quantile(1.0 - (1.0 - level) / 2.0);
    let (kf, nf) = (k as f64, n as f64);
    let p = kf / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lower = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let upper = if k == n { 1.0 } else { (center + half).min(1.0) };
    Ok(ConfidenceInterval { lower, upper, level })
}
