//! Coverage-diversity ordering of the tests that reach a mutant.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;

use crate::coverage::{count_distance, CoverageIndex, DistanceMetric};
use crate::error::{Error, Result};
use crate::mutator::Mutant;
use crate::seed;

/// Count-based metrics treat anything at or below this as no difference.
pub const COUNT_METRIC_FLOOR: f64 = 1e-12;

/// Distances closer than this compare as equal.
pub const DISTANCE_TIE_TOL: f64 = 1e-12;

/// Greedy farthest-point order over `tests`, truncated once no remaining test
/// differs from the selected ones.
///
/// The first test executes the mutated statement the most. Each following
/// test maximizes its minimum distance to those already chosen. Ties go to
/// the higher statement count, then to a seeded random rank.
pub fn prioritize_and_reduce(
    mutant: &Mutant,
    tests: &BTreeSet<String>,
    coverage: &CoverageIndex,
    metric: DistanceMetric,
    seed: u64,
) -> Result<Vec<String>> {
    if tests.is_empty() {
        return Err(Error::EmptyTests);
    }
    let empty = BTreeMap::new();
    let ids: Vec<&String> = tests.iter().collect();
    let vectors: Vec<&BTreeMap<u32, u64>> = ids
        .iter()
        .map(|t| coverage.get(&mutant.file, t).map_or(&empty, |v| &v.counts))
        .collect();
    let counts: Vec<u64> = vectors.iter().map(|v| v.get(&mutant.statement).copied().unwrap_or(0)).collect();
    let rank = random_rank(ids.len(), seed, &mutant.id);
    let floor = if metric.is_binary() { 0.0 } else { COUNT_METRIC_FLOOR };

    let better = |i: usize, j: usize, di: f64, dj: f64| {
        if (di - dj).abs() > DISTANCE_TIE_TOL {
            return di > dj;
        }
        (counts[i], std::cmp::Reverse(rank[i])) > (counts[j], std::cmp::Reverse(rank[j]))
    };

    let first = (1..ids.len()).fold(0, |b, i| if better(i, b, 0.0, 0.0) { i } else { b });
    let mut order = vec![first];
    let mut remaining: Vec<usize> = (0..ids.len()).filter(|&i| i != first).collect();
    let mut min_dist: Vec<f64> = vec![f64::INFINITY; ids.len()];

    while !remaining.is_empty() {
        let last = *order.last().unwrap();
        for &i in &remaining {
            min_dist[i] = min_dist[i].min(count_distance(vectors[i], vectors[last], metric));
        }
        let mut best = 0;
        for k in 1..remaining.len() {
            let (i, b) = (remaining[k], remaining[best]);
            if better(i, b, min_dist[i], min_dist[b]) {
                best = k;
            }
        }
        if min_dist[remaining[best]] <= floor {
            break;
        }
        order.push(remaining.swap_remove(best));
    }
    Ok(order.into_iter().map(|i| ids[i].clone()).collect())
}

/// One covering test chosen uniformly at random.
pub fn random_baseline(mutant: &Mutant, tests: &BTreeSet<String>, seed: u64) -> Result<Vec<String>> {
    let ids: Vec<&String> = tests.iter().collect();
    let mut rng = seed::rng(seed, &format!("baseline:{}", mutant.id));
    ids.choose(&mut rng).map(|t| vec![(*t).clone()]).ok_or(Error::EmptyTests)
}

/// `rank[i]` is the position of the i-th test (by id) in a seeded shuffle.
pub fn random_rank(n: usize, seed: u64, mutant: &str) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed::rng(seed, &format!("prioritize:{mutant}")));
    let mut rank = vec![0; n];
    for (pos, i) in perm.into_iter().enumerate() {
        rank[i] = pos;
    }
    rank
}
