//! Pairwise association between mutant outcomes and the second-order
//! correlated binomial (Bahadur) model.

use serde::{Deserialize, Serialize};

use super::special::binomial_pmf;
use crate::error::{Error, Result};

/// Second-order Bahadur correction term.
pub fn g2(y: u64, n: u64, p: f64) -> f64 {
    let dev = y as f64 - n as f64 * p;
    (dev * dev - (1.0 - 2.0 * p) * dev - n as f64 * p * (1.0 - p)) / (2.0 * p * (1.0 - p))
}

fn check_params(n: u64, p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArguments(format!("p must lie in (0,1), got {p}")));
    }
    if n == 0 {
        return Err(Error::InvalidArguments("N must be positive".into()));
    }
    Ok(())
}

/// Whole correlated binomial pmf over `Y = 0..=n`. Rejects `(p, r2)` that
/// make any term negative.
pub fn correlated_binomial_distribution(n: u64, p: f64, r2: f64) -> Result<Vec<f64>> {
    check_params(n, p)?;
    (0..=n)
        .map(|y| {
            let factor = 1.0 + r2 * g2(y, n, p);
            if factor < 0.0 {
                Err(Error::NegativeProbability(format!(
                    "1 + r2*g2 = {factor} at Y={y} (N={n}, p={p}, r2={r2})"
                )))
            } else {
                Ok(binomial_pmf(y, n, p) * factor)
            }
        })
        .collect()
}

pub fn correlated_binomial_pmf(y: u64, n: u64, p: f64, r2: f64) -> Result<f64> {
    if y > n {
        return Err(Error::InvalidArguments(format!("Y={y} exceeds N={n}")));
    }
    Ok(correlated_binomial_distribution(n, p, r2)?[y as usize])
}

/// 2x2 table over paired outcomes of two mutants: `a` both killed, `b` only
/// the first killed, `c` only the second killed, `d` both live.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contingency {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl Contingency {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        Contingency { a, b, c, d }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut t = Contingency::default();
        for (first, second) in pairs {
            match (first, second) {
                (true, true) => t.a += 1,
                (true, false) => t.b += 1,
                (false, true) => t.c += 1,
                (false, false) => t.d += 1,
            }
        }
        t
    }
}

pub fn yules_q(t: Contingency) -> Result<f64> {
    let ad = t.a as f64 * t.d as f64;
    let bc = t.b as f64 * t.c as f64;
    if ad + bc == 0.0 {
        return Err(Error::Undefined("Yule's Q with ad + bc = 0"));
    }
    Ok((ad - bc) / (ad + bc))
}

pub fn odds_ratio(t: Contingency) -> Result<f64> {
    let bc = t.b as f64 * t.c as f64;
    if bc == 0.0 {
        return Err(Error::Undefined("odds ratio with bc = 0"));
    }
    Ok(t.a as f64 * t.d as f64 / bc)
}

/// Error sum of squares between an observed histogram and a model pmf.
pub fn ess(observed: &[f64], model: &[f64]) -> Result<f64> {
    if observed.len() != model.len() {
        return Err(Error::LengthMismatch(observed.len(), model.len()));
    }
    let total: f64 = observed.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArguments(format!("histogram sums to {total}, not 1")));
    }
    Ok(observed.iter().zip(model).map(|(h, m)| (h - m) * (h - m)).sum())
}

/// Grid for the least-squares fit of `(p, r2)`. The `p` axis is centered on
/// the reference score; the `r2` axis is centered on zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitGrid {
    pub p_step: f64,
    pub p_radius: f64,
    pub r2_step: f64,
    pub r2_radius: f64,
}

impl Default for FitGrid {
    fn default() -> Self {
        FitGrid {
            p_step: 0.002,
            p_radius: 0.1,
            r2_step: 0.0001,
            r2_radius: 0.005,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub p: f64,
    pub r2: f64,
    /// ESS of the fitted correlated binomial.
    pub ess_correlated: f64,
    /// ESS of the plain binomial at the reference score.
    pub ess_binomial: f64,
}

/// Dense grid search minimizing the correlated-binomial ESS. Invalid grid
/// points (negative mass) are skipped. `(p_ref, 0)` is always a grid point,
/// so the fitted ESS never exceeds the binomial one.
pub fn fit_correlated_binomial(observed: &[f64], p_ref: f64, grid: FitGrid) -> Result<FitResult> {
    if observed.len() < 2 {
        return Err(Error::InvalidArguments("histogram needs at least N+1 = 2 bins".into()));
    }
    let n = observed.len() as u64 - 1;
    check_params(n, p_ref)?;
    let binomial: Vec<f64> = (0..=n).map(|y| binomial_pmf(y, n, p_ref)).collect();
    let ess_binomial = ess(observed, &binomial)?;

    let p_steps = (grid.p_radius / grid.p_step).round() as i64;
    let r2_steps = (grid.r2_radius / grid.r2_step).round() as i64;
    let mut best = FitResult {
        p: p_ref,
        r2: 0.0,
        ess_correlated: ess_binomial,
        ess_binomial,
    };
    for i in -p_steps..=p_steps {
        let p = p_ref + i as f64 * grid.p_step;
        if !(p > 0.0 && p < 1.0) {
            continue;
        }
        let base: Vec<f64> = (0..=n).map(|y| binomial_pmf(y, n, p)).collect();
        let terms: Vec<f64> = (0..=n).map(|y| g2(y, n, p)).collect();
        for j in -r2_steps..=r2_steps {
            let r2 = j as f64 * grid.r2_step;
            if terms.iter().any(|g| 1.0 + r2 * g < 0.0) {
                continue;
            }
            let e: f64 = observed
                .iter()
                .zip(base.iter().zip(&terms))
                .map(|(h, (b, g))| {
                    let diff = h - b * (1.0 + r2 * g);
                    diff * diff
                })
                .sum();
            if e < best.ess_correlated {
                best.p = p;
                best.r2 = r2;
                best.ess_correlated = e;
            }
        }
    }
    Ok(best)
}

/// First quartile, median and third quartile with linear interpolation.
pub fn quartiles(values: &[f64]) -> Option<(f64, f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |f: f64| {
        let pos = f * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    Some((q(0.25), q(0.5), q(0.75)))
}
