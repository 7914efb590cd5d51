//! Synthetic workloads for benchmarking.

use std::collections::{BTreeMap, BTreeSet};

use mutscope_core::coverage::CoverageIndex;
use mutscope_core::{CoverageVector, Mutant, MutantStatus, MutationOperator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct PrioritizeWorkload {
    pub mutant: Mutant,
    pub tests: BTreeSet<String>,
    pub coverage: CoverageIndex,
}

/// Sparse statement counts, roughly half the statements executed.
pub fn random_counts(rng: &mut impl Rng, statements: u32) -> BTreeMap<u32, u64> {
    let mut out = BTreeMap::new();
    for s in 0..statements {
        if rng.gen_bool(0.5) {
            out.insert(s, rng.gen_range(1..=20));
        }
    }
    out
}

pub fn coverage_pair(statements: u32, seed: u64) -> (BTreeMap<u32, u64>, BTreeMap<u32, u64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (random_counts(&mut rng, statements), random_counts(&mut rng, statements))
}

/// `tests` covering tests over one file; statement 0 is mutated and every
/// test reaches it.
pub fn prioritize_workload(tests: usize, statements: u32, seed: u64) -> PrioritizeWorkload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<String> = (0..tests).map(|t| format!("t{t:04}")).collect();
    let coverage = CoverageIndex::new(ids.iter().map(|id| {
        let mut counts = random_counts(&mut rng, statements);
        counts.insert(0, rng.gen_range(1..=5));
        CoverageVector::new("bench.c", id, counts)
    }));
    let mutant = Mutant {
        id: "m0".into(),
        operator: MutationOperator::Sdl,
        file: "bench.c".into(),
        function: None,
        statement: 0,
        line_start: 1,
        line_end: 1,
        offset: 0,
        original: "x = 1;".into(),
        mutated: ";".into(),
        status: MutantStatus::Sampled,
    };
    PrioritizeWorkload {
        mutant,
        tests: ids.into_iter().collect(),
        coverage,
    }
}

/// Kill outcomes with the given share of kills.
pub fn kill_vector(len: usize, ms: f64, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_bool(ms)).collect()
}
