//! Coverage-based classification of live and duplicate mutants, and the
//! mutation score.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::coverage::{count_distance, CoverageIndex, CoverageVector, DistanceMetric};
use crate::error::{Error, Result};
use crate::exec::ExecutionVerdict;
use crate::mutator::Mutant;

pub const DEFAULT_METRIC: DistanceMetric = DistanceMetric::Cosine;
pub const DEFAULT_T_E: f64 = 0.0;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Equivalence {
    pub nonequivalent: BTreeSet<String>,
    pub likely_equivalent: BTreeSet<String>,
    /// Live mutants with no recorded coverage.
    pub unclassified: BTreeSet<String>,
}

/// Largest per-test distance between the original run and the mutant run of
/// the same test. `None` when the mutant has no coverage.
pub fn max_distance(
    mutant: &Mutant,
    original: &CoverageIndex,
    runs: &[CoverageVector],
    metric: DistanceMetric,
) -> Option<f64> {
    let empty = BTreeMap::new();
    runs.iter()
        .map(|v| {
            let base = original.get(&mutant.file, &v.test).map_or(&empty, |o| &o.counts);
            count_distance(base, &v.counts, metric)
        })
        .reduce(f64::max)
}

/// A live mutant is nonequivalent when some executed test puts its coverage
/// further than `t_e` from the original program's coverage for that test.
pub fn classify_equivalent<'a>(
    live: impl IntoIterator<Item = &'a Mutant>,
    original: &CoverageIndex,
    mutant_coverage: &BTreeMap<String, Vec<CoverageVector>>,
    metric: DistanceMetric,
    t_e: f64,
) -> Equivalence {
    classify_equivalent_voting(live, original, mutant_coverage, metric, t_e, 1)
}

/// [`classify_equivalent`] over repeated coverage runs: a test shows a
/// difference only when at least `votes` of its runs are further than `t_e`
/// from the original.
pub fn classify_equivalent_voting<'a>(
    live: impl IntoIterator<Item = &'a Mutant>,
    original: &CoverageIndex,
    mutant_coverage: &BTreeMap<String, Vec<CoverageVector>>,
    metric: DistanceMetric,
    t_e: f64,
    votes: usize,
) -> Equivalence {
    let empty = BTreeMap::new();
    let mut out = Equivalence::default();
    for m in live {
        let runs = mutant_coverage.get(&m.id).map(Vec::as_slice).unwrap_or_default();
        if runs.is_empty() {
            log::warn!("{}: no coverage recorded, left unclassified", m.id);
            out.unclassified.insert(m.id.clone());
            continue;
        }
        let mut differing: BTreeMap<&str, usize> = BTreeMap::new();
        for v in runs {
            let base = original.get(&m.file, &v.test).map_or(&empty, |o| &o.counts);
            if count_distance(base, &v.counts, metric) > t_e {
                *differing.entry(&v.test).or_default() += 1;
            }
        }
        if differing.values().any(|n| *n >= votes.max(1)) {
            out.nonequivalent.insert(m.id.clone());
        } else {
            out.likely_equivalent.insert(m.id.clone());
        }
    }
    out
}

/// Whether two executed mutants must be kept apart.
///
/// Mutants of different files, mutants killed by different tests, and a
/// killed/live pair are never duplicates. Otherwise they are nonduplicate
/// when some test run on both shows a distance above `t_d`; with no common
/// test there is no evidence of duplication.
pub fn nonduplicate(
    a: (&Mutant, &ExecutionVerdict),
    b: (&Mutant, &ExecutionVerdict),
    coverage: &BTreeMap<String, Vec<CoverageVector>>,
    metric: DistanceMetric,
    t_d: f64,
) -> bool {
    let ((ma, va), (mb, vb)) = (a, b);
    if ma.file != mb.file || va.killed != vb.killed || va.killing_test != vb.killing_test {
        return true;
    }
    let runs = |m: &Mutant| -> BTreeMap<&str, &CoverageVector> {
        coverage.get(&m.id).into_iter().flatten().map(|v| (v.test.as_str(), v)).collect()
    };
    let (ra, rb) = (runs(ma), runs(mb));
    let mut common = false;
    for (test, x) in &ra {
        if let Some(y) = rb.get(test) {
            common = true;
            if count_distance(&x.counts, &y.counts, metric) > t_d {
                return true;
            }
        }
    }
    !common
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateGroups {
    /// Every mutant appears in exactly one group; groups are sorted and the
    /// first member is the representative.
    pub groups: Vec<Vec<String>>,
}

impl DuplicateGroups {
    /// Non-representative members of multi-mutant groups.
    pub fn duplicates(&self) -> BTreeSet<String> {
        self.groups.iter().flat_map(|g| g.iter().skip(1).cloned()).collect()
    }

    pub fn representative(&self, id: &str) -> Option<&str> {
        self.groups.iter().find(|g| g.iter().any(|m| m == id)).map(|g| g[0].as_str())
    }
}

/// Transitive closure of the duplicate relation within each file.
pub fn classify_duplicates(
    executed: &[(&Mutant, &ExecutionVerdict)],
    coverage: &BTreeMap<String, Vec<CoverageVector>>,
    metric: DistanceMetric,
    t_d: f64,
) -> DuplicateGroups {
    let mut order: Vec<usize> = (0..executed.len()).collect();
    order.sort_by(|&i, &j| executed[i].0.id.cmp(&executed[j].0.id));
    let mut uf = UnionFind::new(executed.len());
    for (x, &i) in order.iter().enumerate() {
        for &j in &order[x + 1..] {
            if executed[i].0.file == executed[j].0.file && !nonduplicate(executed[i], executed[j], coverage, metric, t_d) {
                uf.union(i, j);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for &i in &order {
        groups.entry(uf.find(i)).or_default().push(executed[i].0.id.clone());
    }
    let mut groups: Vec<Vec<String>> = groups.into_values().collect();
    groups.sort();
    DuplicateGroups { groups }
}

/// Killed over killed plus live, both counted without duplicates.
pub fn mutation_score(killed_nondup: u64, live_nonequivalent_nondup: u64) -> Result<f64> {
    let total = killed_nondup + live_nonequivalent_nondup;
    if total == 0 {
        return Err(Error::EmptyDenominator);
    }
    Ok(killed_nondup as f64 / total as f64)
}

/// Score that treats every mutant as nonduplicate.
pub fn mutation_score_nodup(killed: u64, live_nonequivalent: u64) -> Result<f64> {
    mutation_score(killed, live_nonequivalent)
}

#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}
