//! Mutant sampling: proportional (uniform or per function), fixed size, and
//! fixed-width sequential confidence intervals (FSCI).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mutator::Mutant;
use crate::seed;
use crate::stats::{clopper_pearson, wilson, ConfidenceInterval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    ProportionalUniform,
    ProportionalMethod,
    FixedSize,
    Fsci,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::ProportionalUniform => "proportional-uniform",
            Strategy::ProportionalMethod => "proportional-method",
            Strategy::FixedSize => "fixed-size",
            Strategy::Fsci => "fsci",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Strategy::ProportionalUniform, Strategy::ProportionalMethod, Strategy::FixedSize, Strategy::Fsci]
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::InvalidArguments(format!("unknown sampling strategy `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub strategy: Strategy,
    pub ratio: f64,
    pub fixed_size: usize,
    pub t_ci: f64,
    pub level: f64,
    pub seed: u64,
    pub calibration_size: usize,
    /// No stopping test before this many mutants have been tested.
    pub min_samples: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            strategy: Strategy::Fsci,
            ratio: 1.0,
            fixed_size: 400,
            t_ci: 0.10,
            level: 0.95,
            seed: 0,
            calibration_size: 100,
            min_samples: 10,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad("confidence level must lie in (0, 1)");
        }
        match self.strategy {
            Strategy::ProportionalUniform | Strategy::ProportionalMethod if !(self.ratio > 0.0 && self.ratio <= 1.0) => {
                bad("sampling ratio must lie in (0, 1]")
            }
            Strategy::FixedSize if self.fixed_size == 0 => bad("fixed sample size must be positive"),
            Strategy::Fsci if !(self.t_ci > 0.0) => bad("interval width threshold must be positive"),
            Strategy::Fsci if self.calibration_size == 0 => bad("calibration size must be positive"),
            _ => Ok(()),
        }
    }
}

fn ceil_share(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// `⌈r·|mutants|⌉` mutants uniformly, or `⌈r·|stratum|⌉` from each function
/// stratum when `by_method` is set. Input order is preserved.
pub fn sample_proportional(mutants: &[Mutant], ratio: f64, by_method: bool, seed: u64) -> Vec<Mutant> {
    let mut rng = seed::rng(seed, "sample:proportional");
    let mut picked: Vec<usize> = if by_method {
        let mut strata: BTreeMap<(&str, Option<&str>), Vec<usize>> = BTreeMap::new();
        for (i, m) in mutants.iter().enumerate() {
            strata.entry((&m.file, m.function.as_deref())).or_default().push(i);
        }
        strata
            .values()
            .flat_map(|s| {
                let k = ceil_share(ratio, s.len());
                index::sample(&mut rng, s.len(), k).into_iter().map(|j| s[j]).collect::<Vec<_>>()
            })
            .collect()
    } else {
        index::sample(&mut rng, mutants.len(), ceil_share(ratio, mutants.len())).into_vec()
    };
    picked.sort_unstable();
    picked.into_iter().map(|i| mutants[i].clone()).collect()
}

/// `min(n, |mutants|)` mutants uniformly without replacement.
pub fn sample_fixed(mutants: &[Mutant], n: usize, seed: u64) -> Vec<Mutant> {
    let mut rng = seed::rng(seed, "sample:fixed");
    let mut picked = index::sample(&mut rng, mutants.len(), n.min(mutants.len())).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| mutants[i].clone()).collect()
}

/// Seeded permutation used as the FSCI population order.
pub fn shuffled<T: Clone>(items: &[T], seed: u64) -> Vec<T> {
    let mut out = items.to_vec();
    out.shuffle(&mut seed::rng(seed, "sample:fsci"));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KillErrorEstimate {
    pub observed_errors: u64,
    pub sample_size: u64,
    pub interval: ConfidenceInterval,
}

/// Kill-error rate from (full-suite killed, reduced-suite killed) pairs: the
/// share of mutants killed by the full suite but missed by the reduced one,
/// with a Wilson interval.
pub fn kerr_from_verdicts(pairs: &[(bool, bool)], level: f64) -> Result<KillErrorEstimate> {
    if pairs.is_empty() {
        return Err(Error::EmptyCalibration);
    }
    let errors = pairs.iter().filter(|(full, reduced)| *full && !*reduced).count() as u64;
    let n = pairs.len() as u64;
    Ok(KillErrorEstimate {
        observed_errors: errors,
        sample_size: n,
        interval: wilson(errors, n, level)?,
    })
}

/// Runs both suites on every calibration mutant. Mutants for which either
/// executor is inconclusive are left out.
pub fn estimate_kerr<T>(
    calibration: &[T],
    mut full: impl FnMut(&T) -> Option<bool>,
    mut reduced: impl FnMut(&T) -> Option<bool>,
    level: f64,
) -> Result<(KillErrorEstimate, Vec<Option<(bool, bool)>>)> {
    let verdicts: Vec<Option<(bool, bool)>> = calibration.iter().map(|m| Some((full(m)?, reduced(m)?))).collect();
    let pairs: Vec<(bool, bool)> = verdicts.iter().flatten().copied().collect();
    Ok((kerr_from_verdicts(&pairs, level)?, verdicts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsciStep {
    pub index: usize,
    pub killed: bool,
    pub tested: usize,
    pub kills: usize,
    pub interval: ConfidenceInterval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FsciOutcome<T> {
    pub sampled: Vec<(T, bool)>,
    /// Clopper-Pearson interval on the final tally.
    pub raw: ConfidenceInterval,
    /// `raw`, widened by the kill-error upper bound when one is in use.
    pub interval: ConfidenceInterval,
    pub converged: bool,
    /// The kill-error bound exceeded the width threshold; nothing was run.
    pub fallback: bool,
    pub inconclusive: usize,
    pub trace: Vec<FsciStep>,
}

impl<T> FsciOutcome<T> {
    pub fn estimate(&self) -> Option<f64> {
        let n = self.sampled.len();
        (n > 0).then(|| self.sampled.iter().filter(|(_, k)| *k).count() as f64 / n as f64)
    }
}

/// Tests mutants in population order until the interval is narrower than
/// `config.t_ci`. `executor` returns `None` for inconclusive mutants, which
/// are skipped.
pub fn fsci_loop<T>(
    population: impl IntoIterator<Item = T>,
    mut executor: impl FnMut(&T) -> Option<bool>,
    config: &SamplingConfig,
    kerr: Option<&KillErrorEstimate>,
) -> Result<FsciOutcome<T>> {
    let full = ConfidenceInterval {
        lower: 0.0,
        upper: 1.0,
        level: config.level,
    };
    let widen = kerr.map_or(0.0, |k| k.interval.upper);
    if widen > config.t_ci {
        return Ok(FsciOutcome {
            sampled: Vec::new(),
            raw: full,
            interval: full,
            converged: false,
            fallback: true,
            inconclusive: 0,
            trace: Vec::new(),
        });
    }
    let mut out = FsciOutcome {
        sampled: Vec::new(),
        raw: full,
        interval: full,
        converged: false,
        fallback: false,
        inconclusive: 0,
        trace: Vec::new(),
    };
    let mut kills = 0usize;
    for (index, item) in population.into_iter().enumerate() {
        let Some(killed) = executor(&item) else {
            out.inconclusive += 1;
            continue;
        };
        kills += killed as usize;
        out.sampled.push((item, killed));
        let n = out.sampled.len();
        out.raw = clopper_pearson(kills as u64, n as u64, config.level)?;
        let width = out.raw.upper + widen - out.raw.lower;
        out.interval = ConfidenceInterval {
            upper: (out.raw.upper + widen).min(1.0),
            ..out.raw
        };
        out.trace.push(FsciStep {
            index,
            killed,
            tested: n,
            kills,
            interval: out.interval,
        });
        if n >= config.min_samples && width < config.t_ci {
            out.converged = true;
            break;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedFsciOutcome<T> {
    pub kerr: KillErrorEstimate,
    pub outcome: FsciOutcome<T>,
    /// The reduced suite was refused and the loop ran with the full suite.
    pub used_full_suite: bool,
    /// Calibration mutants left out of the tally because the two suites
    /// disagreed on them.
    pub excluded: usize,
}

/// FSCI with a reduced test suite. The first `calibration_size` mutants of
/// the population are run with both suites to bound the kill error; those
/// on which the suites agree enter the tally without rerunning. When the
/// bound exceeds the width threshold the loop falls back to the full suite.
pub fn fsci_with_reduced_suite<T: Clone>(
    population: &[T],
    mut full: impl FnMut(&T) -> Option<bool>,
    mut reduced: impl FnMut(&T) -> Option<bool>,
    config: &SamplingConfig,
) -> Result<ReducedFsciOutcome<T>> {
    let m_r = config.calibration_size.min(population.len());
    let (calibration, rest) = population.split_at(m_r);
    let (kerr, verdicts) = estimate_kerr(calibration, &mut full, &mut reduced, config.level)?;

    let fallback = kerr.interval.upper > config.t_ci;
    let mut excluded = 0;
    let mut cached: Vec<(T, bool)> = Vec::new();
    for (m, v) in calibration.iter().zip(&verdicts) {
        match v {
            Some((f, _)) if fallback => cached.push((m.clone(), *f)),
            Some((f, r)) if f == r => cached.push((m.clone(), *r)),
            Some(_) => excluded += 1,
            None => {}
        }
    }
    let from_cache = cached.len();
    let items = cached
        .into_iter()
        .map(|(m, v)| (m, Some(v)))
        .chain(rest.iter().map(|m| (m.clone(), None)));
    let mut run = |(m, v): &(T, Option<bool>)| match v {
        Some(v) => Some(*v),
        None if fallback => full(m),
        None => reduced(m),
    };
    let outcome = fsci_loop(items, &mut run, config, (!fallback).then_some(&kerr))?;
    log::debug!("reduced-suite sampling reused {from_cache} calibration verdicts");
    Ok(ReducedFsciOutcome {
        kerr,
        outcome: FsciOutcome {
            sampled: outcome.sampled.into_iter().map(|((m, _), k)| (m, k)).collect(),
            raw: outcome.raw,
            interval: outcome.interval,
            converged: outcome.converged,
            fallback: outcome.fallback,
            inconclusive: outcome.inconclusive,
            trace: outcome.trace,
        },
        used_full_suite: fallback,
        excluded,
    })
}
