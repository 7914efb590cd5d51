//! Final analysis report, its text rendering, and the association report over
//! replicated kill outcomes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::coverage::DistanceMetric;
use crate::error::Result;
use crate::exec::Savings;
use crate::sampler::{KillErrorEstimate, Strategy};
use crate::stats::{fit_correlated_binomial, odds_ratio, quartiles, yules_q, ConfidenceInterval, Contingency, FitGrid, FitResult};

/// Terminal classification of a generated mutant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    CompileFailed,
    TriviallyEquivalent,
    TriviallyDuplicate,
    /// No test reaches the mutated statement.
    Uncovered,
    NotSampled,
    /// Calibration mutant on which the full and reduced suites disagreed.
    CalibrationExcluded,
    Inconclusive,
    Killed,
    LiveNonequivalent,
    LikelyEquivalent,
    Duplicate,
    /// Live, but no coverage was recorded.
    Unclassified,
}

impl Classification {
    pub const ALL: [Classification; 12] = [
        Classification::CompileFailed,
        Classification::TriviallyEquivalent,
        Classification::TriviallyDuplicate,
        Classification::Uncovered,
        Classification::NotSampled,
        Classification::CalibrationExcluded,
        Classification::Inconclusive,
        Classification::Killed,
        Classification::LiveNonequivalent,
        Classification::LikelyEquivalent,
        Classification::Duplicate,
        Classification::Unclassified,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Classification::CompileFailed => "compile-failed",
            Classification::TriviallyEquivalent => "trivially-equivalent",
            Classification::TriviallyDuplicate => "trivially-duplicate",
            Classification::Uncovered => "uncovered",
            Classification::NotSampled => "not-sampled",
            Classification::CalibrationExcluded => "calibration-excluded",
            Classification::Inconclusive => "inconclusive",
            Classification::Killed => "killed",
            Classification::LiveNonequivalent => "live-nonequivalent",
            Classification::LikelyEquivalent => "likely-equivalent",
            Classification::Duplicate => "duplicate",
            Classification::Unclassified => "unclassified",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingSummary {
    pub strategy: Strategy,
    pub population: usize,
    pub tested: usize,
    /// Killed share of the tested mutants; the quantity `interval` bounds.
    pub estimate: Option<f64>,
    pub interval: Option<ConfidenceInterval>,
    pub converged: Option<bool>,
    pub used_full_suite: Option<bool>,
    pub kill_error: Option<KillErrorEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageNote {
    pub stage: String,
    pub skipped: bool,
    pub notice: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub seed: u64,
    pub metric: DistanceMetric,
    pub t_e: f64,
    pub t_d: f64,
    pub duplicates_discarded: bool,
    /// `None` when no mutant was killed or live and not likely equivalent.
    /// Unclassified live mutants count as nonequivalent.
    pub mutation_score: Option<f64>,
    pub sampling: SamplingSummary,
    pub counts: BTreeMap<Classification, usize>,
    pub compiled_share: Option<f64>,
    pub excluded_levels: Vec<String>,
    pub savings: Option<Savings>,
    pub duplicate_groups: Vec<Vec<String>>,
    pub stages: Vec<StageNote>,
    pub mutants: BTreeMap<String, Classification>,
}

impl AnalysisReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn count(&self, c: Classification) -> usize {
        self.counts.get(&c).copied().unwrap_or(0)
    }
}

pub fn count_classes(mutants: &BTreeMap<String, Classification>) -> BTreeMap<Classification, usize> {
    let mut out: BTreeMap<Classification, usize> = Classification::ALL.iter().map(|c| (*c, 0)).collect();
    for c in mutants.values() {
        *out.entry(*c).or_default() += 1;
    }
    out
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

/// Human-readable summary table.
pub fn render_summary(r: &AnalysisReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mutation analysis summary (seed {})", r.seed);
    let _ = writeln!(s, "{}", "-".repeat(48));
    for c in Classification::ALL {
        let _ = writeln!(s, "{:<28}{:>20}", c.as_str(), r.count(c));
    }
    let _ = writeln!(s, "{:<28}{:>20}", "total", r.mutants.len());
    let _ = writeln!(s, "{}", "-".repeat(48));
    let score = r.mutation_score.map_or("n/a".to_string(), pct);
    let formula = if r.duplicates_discarded { "without duplicates" } else { "all nonduplicate" };
    let _ = writeln!(s, "{:<28}{:>20}", format!("score ({formula})"), score);
    if let Some(e) = r.sampling.estimate {
        let _ = writeln!(s, "{:<28}{:>20}", "sample kill ratio", pct(e));
    }
    if let Some(ci) = r.sampling.interval {
        let _ = writeln!(
            s,
            "{:<28}{:>20}",
            format!("{:.0}% interval", 100.0 * ci.level),
            format!("[{}, {}]", pct(ci.lower), pct(ci.upper))
        );
    }
    let _ = writeln!(s, "{:<28}{:>20}", "sampling", r.sampling.strategy.as_str());
    let _ = writeln!(s, "{:<28}{:>20}", "sampled / population", format!("{} / {}", r.sampling.tested, r.sampling.population));
    if let Some(k) = &r.sampling.kill_error {
        let _ = writeln!(s, "{:<28}{:>20}", "kill error upper bound", pct(k.interval.upper));
    }
    if let Some(share) = r.compiled_share {
        let _ = writeln!(s, "{:<28}{:>20}", "compiled", pct(share));
    }
    if let Some(sv) = &r.savings {
        let _ = writeln!(s, "{:<28}{:>20}", "test saving", pct(sv.test_saving));
        let _ = writeln!(s, "{:<28}{:>20}", "time saving", pct(sv.time_saving));
    }
    let _ = writeln!(s, "{:<28}{:>20}", "metric / T_E", format!("{} / {}", r.metric, r.t_e));
    for st in r.stages.iter().filter(|st| st.skipped) {
        let _ = writeln!(s, "note: {} skipped: {}", st.stage, st.notice.as_deref().unwrap_or(""));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub defined: usize,
}

fn summarize(mut values: Vec<f64>) -> Option<Quartiles> {
    values.retain(|v| v.is_finite());
    let (q1, median, q3) = quartiles(&values)?;
    Some(Quartiles { q1, median, q3, defined: values.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationReport {
    pub mutants: usize,
    pub replicates: usize,
    pub pairs: usize,
    pub yules_q: Option<Quartiles>,
    pub odds_ratio: Option<Quartiles>,
    /// Histogram of killed counts per group of `group_size` mutants.
    pub group_size: usize,
    pub histogram: Vec<f64>,
    pub fit: Option<FitResult>,
}

/// Pairwise association of kill outcomes across replicates (limited to the
/// first `max_mutants` mutants), plus a correlated-binomial fit of the
/// killed-count histogram over consecutive mutant groups.
pub fn association_report(replicates: &[Vec<bool>], max_mutants: usize, group_size: usize) -> Result<AssociationReport> {
    let n = replicates.first().map_or(0, Vec::len);
    let m = n.min(max_mutants);
    let (mut qs, mut ors) = (Vec::new(), Vec::new());
    for i in 0..m {
        for j in i + 1..m {
            let t = Contingency::from_pairs(replicates.iter().map(|r| (r[i], r[j])));
            if let Ok(q) = yules_q(t) {
                qs.push(q);
            }
            if let Ok(o) = odds_ratio(t) {
                ors.push(o);
            }
        }
    }
    let group_size = group_size.max(1);
    let mut histogram = vec![0.0; group_size + 1];
    let mut total = 0.0;
    for r in replicates {
        for chunk in r.chunks_exact(group_size) {
            histogram[chunk.iter().filter(|b| **b).count()] += 1.0;
            total += 1.0;
        }
    }
    let fit = if total > 0.0 {
        histogram.iter_mut().for_each(|h| *h /= total);
        let mean: f64 = histogram.iter().enumerate().map(|(y, h)| y as f64 * h).sum::<f64>() / group_size as f64;
        let p_ref = mean.clamp(0.01, 0.99);
        fit_correlated_binomial(&histogram, p_ref, FitGrid::default()).ok()
    } else {
        None
    };
    Ok(AssociationReport {
        mutants: n,
        replicates: replicates.len(),
        pairs: m * m.saturating_sub(1) / 2,
        yules_q: summarize(qs),
        odds_ratio: summarize(ors),
        group_size,
        histogram,
        fit,
    })
}
