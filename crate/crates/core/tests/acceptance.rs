//! Acceptance criteria. Each test prints one PASS/FAIL line to stdout
//! (bypassing the test harness capture) and then asserts.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mutscope_core::analyze::{classify_equivalent, mutation_score, mutation_score_nodup};
use mutscope_core::bench::{generate_bench, BenchBundle, BenchSpec};
use mutscope_core::build::{detect_trivial, HashRecord, TrivialOutcome, ORIGINAL};
use mutscope_core::config::ProjectConfig;
use mutscope_core::coverage::CoverageIndex;
use mutscope_core::exec::{run_mutant, savings_report, suite, KillMatrix, SimulatedExecutor, TestCase, TestOutcome};
use mutscope_core::pipeline::{run_pipeline, Stage};
use mutscope_core::prioritize::{prioritize_and_reduce, random_rank};
use mutscope_core::sampler::{fsci_loop, fsci_with_reduced_suite, shuffled, SamplingConfig};
use mutscope_core::stats::{
    clopper_pearson, correlated_binomial_distribution, fit_correlated_binomial, odds_ratio, yules_q, Contingency, FitGrid,
};
use mutscope_core::{CoverageVector, DistanceMetric, Mutant, MutantStatus, MutationOperator};

// Pinned tolerances and thresholds.
const CP_BOUND_TOL: f64 = 1e-9;
const CP_COVERAGE_SLACK: f64 = 1e-12;
const CP_RUNTIME_SECS: f64 = 30.0;
const FSCI_SEEDS: u64 = 100;
const FSCI_MUTANTS: usize = 5000;
const FSCI_T_CI: f64 = 0.10;
const FSCI_ACCURACY: f64 = 0.05;
const FSCI_MIN_ACCURATE: usize = 95;
const FSCI_MEDIAN_RANGE: (f64, f64) = (250.0, 450.0);
const FSCI_RANGE_MS: f64 = 0.70;
const FSCI_MEDIAN_CAP: f64 = 1000.0;
const FSCI_RUNTIME_SECS: f64 = 120.0;
const KERR_MISS_PROB: f64 = 0.05;
const KERR_CALIBRATION: usize = 100;
const KERR_MIN_WIDENED: usize = 95;
const KERR_MAX_UNWIDENED: usize = 89;
const PRIORITIZE_INSTANCES: u64 = 1000;
const TIE_TOL: f64 = 1e-9;
const SAVINGS_SEEDS: u64 = 20;
const SAVINGS_MIN_TEST_SAVING: f64 = 0.5;
const DEDUP_LEDGERS: u64 = 10_000;
const EQUIV_INSTANCES: u64 = 2000;
const SCORE_TUPLES: u64 = 50;
const PMF_SUM_TOL: f64 = 1e-10;
const PMF_BINOMIAL_TOL: f64 = 1e-12;
const ASSOC_TOL: f64 = 1e-12;
const ASSOC_MAX_ENTRY: u64 = 100;

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!("{} criterion {id:>2} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn mutant(id: &str, file: &str, statement: u32) -> Mutant {
    Mutant {
        id: id.into(),
        operator: MutationOperator::Sdl,
        file: file.into(),
        function: None,
        statement,
        line_start: 1,
        line_end: 1,
        offset: 0,
        original: "x;".into(),
        mutated: ";".into(),
        status: MutantStatus::Sampled,
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

// ---------------------------------------------------------------------------
// 1. Clopper-Pearson exactness

fn ln_factorial(n: u64) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = vec![0.0];
        for i in 1..=1000u64 {
            t.push(t[i as usize - 1] + (i as f64).ln());
        }
        t
    });
    table[n as usize]
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn oracle_pmf(k: u64, n: u64, p: f64) -> f64 {
    if p == 0.0 {
        return (k == 0) as u8 as f64;
    }
    if p == 1.0 {
        return (k == n) as u8 as f64;
    }
    (ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
}

fn bisect(mut lo: f64, mut hi: f64, increasing: bool, target: f64, f: impl Fn(f64) -> f64) -> f64 {
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < target) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Bounds from inverting binomial tails by bisection.
fn oracle_interval(k: u64, n: u64, alpha: f64) -> (f64, f64) {
    let lower = if k == 0 {
        0.0
    } else {
        bisect(0.0, 1.0, true, alpha / 2.0, |p| (k..=n).map(|j| oracle_pmf(j, n, p)).sum())
    };
    let upper = if k == n {
        1.0
    } else {
        bisect(0.0, 1.0, false, alpha / 2.0, |p| (0..=k).map(|j| oracle_pmf(j, n, p)).sum())
    };
    (lower, upper)
}

#[test]
fn criterion_01_clopper_pearson_exactness() {
    let start = Instant::now();
    let mut worst_bound = 0.0f64;
    let mut worst_coverage = 1.0f64;
    let mut impl_secs = 0.0;
    for n in 5..=200u64 {
        let t = Instant::now();
        let intervals: Vec<_> = (0..=n).map(|k| clopper_pearson(k, n, 0.95).unwrap()).collect();
        impl_secs += t.elapsed().as_secs_f64();
        for (k, ci) in intervals.iter().enumerate() {
            let (lo, hi) = oracle_interval(k as u64, n, 0.05);
            worst_bound = worst_bound.max((ci.lower - lo).abs()).max((ci.upper - hi).abs());
        }
        for i in 1..=19 {
            let p = i as f64 / 20.0;
            let coverage: f64 = intervals
                .iter()
                .enumerate()
                .filter(|(_, ci)| ci.lower <= p && p <= ci.upper)
                .map(|(k, _)| oracle_pmf(k as u64, n, p))
                .sum();
            worst_coverage = worst_coverage.min(coverage);
        }
    }
    let total = start.elapsed().as_secs_f64();
    let pass = worst_bound <= CP_BOUND_TOL && worst_coverage >= 0.95 - CP_COVERAGE_SLACK && impl_secs < CP_RUNTIME_SECS;
    verdict(
        1,
        "clopper-pearson exactness",
        pass,
        &format!(
            "max |bound - oracle| = {worst_bound:.2e} (tol {CP_BOUND_TOL:e}), min coverage = {worst_coverage:.5}, \
             interval time {impl_secs:.3}s (limit {CP_RUNTIME_SECS}s), with oracle {total:.1}s"
        ),
    );
}

// ---------------------------------------------------------------------------
// Shared independent benches: full-suite kill vector and true score.

struct KillBench {
    kills: Vec<bool>,
    true_ms: f64,
}

fn run_full_suite(bundle: &BenchBundle) -> Vec<bool> {
    let idx = bundle.original_index();
    let ex = bundle.executor();
    bundle
        .mutants
        .iter()
        .map(|m| {
            let order: Vec<String> = idx.covered_tests(m).into_iter().collect();
            run_mutant(m, &order, &bundle.tests, &ex).killed
        })
        .collect()
}

fn kill_bench(ms: f64) -> &'static KillBench {
    static CACHE: [OnceLock<KillBench>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let slot = match ms {
        x if x == 0.65 => 0,
        x if x == 0.70 => 1,
        x if x == 0.82 => 2,
        _ => panic!("no cached bench for {ms}"),
    };
    CACHE[slot].get_or_init(|| {
        let spec = BenchSpec {
            mutants: FSCI_MUTANTS,
            true_ms: ms,
            seed: 17 + slot as u64,
            ..Default::default()
        };
        let bundle = generate_bench(&spec).unwrap();
        let kills = run_full_suite(&bundle);
        let true_ms = kills.iter().filter(|k| **k).count() as f64 / kills.len() as f64;
        assert_eq!(true_ms, bundle.empirical_ms());
        KillBench { kills, true_ms }
    })
}

// ---------------------------------------------------------------------------
// 2. FSCI accuracy

#[test]
fn criterion_02_fsci_accuracy() {
    let start = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    let mut pooled = Vec::new();
    for ms in [0.65, 0.70, 0.82] {
        let bench = kill_bench(ms);
        let idx: Vec<usize> = (0..bench.kills.len()).collect();
        let mut accurate = 0;
        let mut sizes = Vec::new();
        for seed in 0..FSCI_SEEDS {
            let cfg = SamplingConfig {
                t_ci: FSCI_T_CI,
                seed,
                ..Default::default()
            };
            let out = fsci_loop(shuffled(&idx, seed), |i| Some(bench.kills[*i]), &cfg, None).unwrap();
            let est = out.estimate().unwrap();
            accurate += ((est - bench.true_ms).abs() <= FSCI_ACCURACY) as usize;
            sizes.push(out.sampled.len() as f64);
        }
        pooled.extend(sizes.iter().copied());
        let med = median(&mut sizes);
        pass &= accurate >= FSCI_MIN_ACCURATE && med < FSCI_MEDIAN_CAP;
        if ms == FSCI_RANGE_MS {
            pass &= (FSCI_MEDIAN_RANGE.0..=FSCI_MEDIAN_RANGE.1).contains(&med);
        }
        details.push(format!("MS {:.4}: {accurate}/{FSCI_SEEDS} within {FSCI_ACCURACY}, median n {med}", bench.true_ms));
    }
    let med = median(&mut pooled);
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < FSCI_RUNTIME_SECS;
    details.push(format!(
        "pooled median n {med}; need >= {FSCI_MIN_ACCURATE} accurate per MS, median n in {:?} at MS {FSCI_RANGE_MS} \
         and < {FSCI_MEDIAN_CAP} everywhere; {secs:.1}s",
        FSCI_MEDIAN_RANGE
    ));
    verdict(2, "fsci accuracy", pass, &details.join("; "));
}

// ---------------------------------------------------------------------------
// 3. Reduced-suite correction

#[test]
fn criterion_03_reduced_suite_correction() {
    let bench = kill_bench(0.70);
    let idx: Vec<usize> = (0..bench.kills.len()).collect();
    let (mut widened, mut unwidened, mut fallbacks) = (0, 0, 0);
    for seed in 0..FSCI_SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d69_7373);
        let miss: Vec<bool> = idx.iter().map(|_| rng.gen_bool(KERR_MISS_PROB)).collect();
        let full = |i: &usize| Some(bench.kills[*i]);
        let reduced = |i: &usize| Some(bench.kills[*i] && !miss[*i]);
        let cfg = SamplingConfig {
            t_ci: FSCI_T_CI,
            calibration_size: KERR_CALIBRATION,
            seed,
            ..Default::default()
        };
        let population = shuffled(&idx, seed);
        let w = fsci_with_reduced_suite(&population, full, reduced, &cfg).unwrap();
        fallbacks += w.used_full_suite as usize;
        widened += w.outcome.interval.contains(bench.true_ms) as usize;
        let u = fsci_loop(population.iter().copied(), reduced, &cfg, None).unwrap();
        unwidened += u.interval.contains(bench.true_ms) as usize;
    }
    let pass = widened >= KERR_MIN_WIDENED && unwidened <= KERR_MAX_UNWIDENED;
    verdict(
        3,
        "reduced-suite correction",
        pass,
        &format!(
            "widened contains true MS in {widened}/{FSCI_SEEDS} (need >= {KERR_MIN_WIDENED}, {fallbacks} fell back to the full suite), \
             unwidened in {unwidened}/{FSCI_SEEDS} (need < 90)"
        ),
    );
}

// ---------------------------------------------------------------------------
// 4. PrioritizeAndReduce against a from-scratch greedy oracle

fn oracle_distance(a: &[u64], b: &[u64], metric: DistanceMetric) -> f64 {
    let za = a.iter().all(|x| *x == 0);
    let zb = b.iter().all(|x| *x == 0);
    if za && zb {
        return 0.0;
    }
    match metric {
        DistanceMetric::Jaccard | DistanceMetric::Ochiai => {
            let sa: BTreeSet<usize> = (0..a.len()).filter(|&i| a[i] > 0).collect();
            let sb: BTreeSet<usize> = (0..b.len()).filter(|&i| b[i] > 0).collect();
            let inter = sa.intersection(&sb).count() as f64;
            if metric == DistanceMetric::Jaccard {
                1.0 - inter / sa.union(&sb).count() as f64
            } else if za || zb {
                1.0
            } else {
                1.0 - inter / ((sa.len() * sb.len()) as f64).sqrt()
            }
        }
        DistanceMetric::Euclidean => {
            let norm = |v: &[u64]| v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
            let diff: f64 = a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum::<f64>().sqrt();
            diff / (norm(a) + norm(b))
        }
        DistanceMetric::Cosine => {
            if za || zb {
                return 1.0;
            }
            let dot: f64 = a.iter().zip(b).map(|(x, y)| (*x * *y) as f64).sum();
            let norm = |v: &[u64]| v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
            (1.0 - dot / (norm(a) * norm(b))).max(0.0)
        }
    }
}

/// (distance, count, rank) with lower rank preferred; distances within
/// `TIE_TOL` tie.
fn oracle_better(a: (f64, u64, usize), b: (f64, u64, usize)) -> bool {
    if (a.0 - b.0).abs() > TIE_TOL {
        return a.0 > b.0;
    }
    if a.1 != b.1 {
        return a.1 > b.1;
    }
    a.2 < b.2
}

fn oracle_prioritize(vectors: &[Vec<u64>], statement: usize, rank: &[usize], metric: DistanceMetric) -> Vec<usize> {
    let n = vectors.len();
    let floor = if metric.is_binary() { 0.0 } else { 1e-12 };
    let count = |i: usize| vectors[i][statement];
    let mut first = 0;
    for i in 1..n {
        if oracle_better((0.0, count(i), rank[i]), (0.0, count(first), rank[first])) {
            first = i;
        }
    }
    let mut chosen = vec![first];
    loop {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|i| !chosen.contains(i)) {
            let d = chosen
                .iter()
                .map(|&j| oracle_distance(&vectors[i], &vectors[j], metric))
                .fold(f64::INFINITY, f64::min);
            let better = match best {
                None => true,
                Some((b, db)) => oracle_better((d, count(i), rank[i]), (db, count(b), rank[b])),
            };
            if better {
                best = Some((i, d));
            }
        }
        match best {
            Some((i, d)) if d > floor + TIE_TOL => chosen.push(i),
            _ => return chosen,
        }
    }
}

#[test]
fn criterion_04_prioritize_and_reduce_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut agree, mut total, mut identical, mut identical_ok) = (0, 0, 0, 0);
    for inst in 0..PRIORITIZE_INSTANCES {
        let n_tests = rng.gen_range(1..=10);
        let n_stmts = rng.gen_range(1..=20);
        let all_identical = rng.gen_bool(0.15);
        let mut vectors: Vec<Vec<u64>> = Vec::new();
        for t in 0..n_tests {
            let v = if all_identical && t > 0 {
                vectors[0].clone()
            } else if t > 0 && rng.gen_bool(0.3) {
                vectors[rng.gen_range(0..t)].clone()
            } else if t > 0 && rng.gen_bool(0.15) {
                let k = rng.gen_range(2..=3);
                vectors[rng.gen_range(0..t)].iter().map(|x| x * k).collect()
            } else {
                (0..n_stmts).map(|_| if rng.gen_bool(0.5) { 0 } else { rng.gen_range(1..=3) }).collect()
            };
            vectors.push(v);
        }
        let statement = rng.gen_range(0..n_stmts);
        let ids: Vec<String> = (0..n_tests).map(|t| format!("t{t:02}")).collect();
        let idx = CoverageIndex::new(ids.iter().zip(&vectors).map(|(id, v)| {
            let counts = v.iter().enumerate().filter(|(_, c)| **c > 0).map(|(s, c)| (s as u32, *c)).collect();
            CoverageVector::new("f.c", id, counts)
        }));
        let m = mutant(&format!("m{inst}"), "f.c", statement as u32);
        let tests: BTreeSet<String> = ids.iter().cloned().collect();
        let rank = random_rank(n_tests, inst, &m.id);
        for metric in DistanceMetric::ALL {
            let got = prioritize_and_reduce(&m, &tests, &idx, metric, inst).unwrap();
            let want: Vec<String> = oracle_prioritize(&vectors, statement, &rank, metric)
                .into_iter()
                .map(|i| ids[i].clone())
                .collect();
            total += 1;
            agree += (got == want) as usize;
            if all_identical {
                identical += 1;
                identical_ok += (got.len() == 1) as usize;
            }
        }
    }
    verdict(
        4,
        "prioritize-and-reduce",
        agree == total && identical_ok == identical && identical > 0,
        &format!("{agree}/{total} orders equal the greedy oracle; {identical_ok}/{identical} identical-coverage runs reduce to one test"),
    );
}

// ---------------------------------------------------------------------------
// 5. Early-stop savings direction

#[test]
fn criterion_05_savings_direction() {
    let mut worst = f64::INFINITY;
    let mut missed_kills = 0;
    for seed in 0..SAVINGS_SEEDS {
        let bundle = generate_bench(&BenchSpec { seed, ..Default::default() }).unwrap();
        let idx = bundle.original_index();
        let ex = bundle.executor();
        let (mut new, mut base) = (Vec::new(), Vec::new());
        for m in &bundle.mutants {
            let covering = idx.covered_tests(m);
            if covering.is_empty() {
                continue;
            }
            let original: Vec<String> = covering.iter().cloned().collect();
            let prioritized = prioritize_and_reduce(m, &covering, &idx, DistanceMetric::Cosine, seed).unwrap();
            let b = run_mutant(m, &original, &bundle.tests, &ex);
            let n = run_mutant(m, &prioritized, &bundle.tests, &ex);
            missed_kills += (b.killed && !n.killed) as usize;
            base.push(b);
            new.push(n);
        }
        worst = worst.min(savings_report(&new, &base).test_saving);
    }

    // Prioritization picks a slow, distinctive killer over a cheap one that
    // original order would reach second.
    let tests = suite([TestCase::new("t1", 1.0), TestCase::new("t2", 1.0), TestCase::new("t3", 10.0)]);
    let idx = CoverageIndex::new([
        CoverageVector::new("f.c", "t1", [(0, 1), (1, 1)].into()),
        CoverageVector::new("f.c", "t2", [(0, 1), (1, 1)].into()),
        CoverageVector::new("f.c", "t3", [(0, 5), (2, 1)].into()),
    ]);
    let m = mutant("m", "f.c", 0);
    let mut km = KillMatrix::new();
    km.set("m", "t2", TestOutcome::Fail);
    km.set("m", "t3", TestOutcome::Fail);
    let ex = SimulatedExecutor::new(km);
    let covering = idx.covered_tests(&m);
    let original: Vec<String> = covering.iter().cloned().collect();
    let prioritized = prioritize_and_reduce(&m, &covering, &idx, DistanceMetric::Cosine, 0).unwrap();
    let s = savings_report(&[run_mutant(&m, &prioritized, &tests, &ex)], &[run_mutant(&m, &original, &tests, &ex)]);
    let constructed = s.test_saving > 0.0 && s.time_saving < 0.0;

    verdict(
        5,
        "early-stop savings",
        worst >= SAVINGS_MIN_TEST_SAVING && constructed,
        &format!(
            "min test saving over {SAVINGS_SEEDS} seeds {:.1}% (need >= {:.0}%), kills lost to reduction {missed_kills}; \
             constructed instance test saving {:.0}%, time saving {:.0}%",
            100.0 * worst,
            100.0 * SAVINGS_MIN_TEST_SAVING,
            100.0 * s.test_saving,
            100.0 * s.time_saving
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. Trivial dedup

fn random_ledger(rng: &mut ChaCha8Rng) -> Vec<HashRecord> {
    let levels: Vec<String> = (0..rng.gen_range(1..=3)).map(|l| format!("O{l}")).collect();
    let digest = |rng: &mut ChaCha8Rng| format!("d{}", rng.gen_range(0..5));
    let mut out = Vec::new();
    for l in &levels {
        out.push(HashRecord {
            mutant: ORIGINAL.into(),
            file: String::new(),
            level: l.clone(),
            digest: Some(digest(rng)),
            build_ok: true,
        });
    }
    for m in 0..rng.gen_range(1..=12) {
        let file = format!("f{}.c", rng.gen_range(0..3));
        for l in &levels {
            let ok = !rng.gen_bool(0.05);
            out.push(HashRecord {
                mutant: format!("m{m:02}"),
                file: file.clone(),
                level: l.clone(),
                digest: ok.then(|| digest(rng)),
                build_ok: ok,
            });
        }
    }
    out
}

fn oracle_trivial(records: &[HashRecord]) -> TrivialOutcome {
    let original: BTreeMap<&str, &str> = records
        .iter()
        .filter(|r| r.mutant == ORIGINAL)
        .map(|r| (r.level.as_str(), r.digest.as_deref().unwrap()))
        .collect();
    let failed: BTreeSet<String> = records
        .iter()
        .filter(|r| r.mutant != ORIGINAL && !r.build_ok)
        .map(|r| r.mutant.clone())
        .collect();
    let mut ok: BTreeMap<&str, (&str, BTreeMap<&str, &str>)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.mutant != ORIGINAL && !failed.contains(&r.mutant)) {
        let e = ok.entry(&r.mutant).or_insert((&r.file, BTreeMap::new()));
        e.1.insert(&r.level, r.digest.as_deref().unwrap());
    }
    let equivalent: BTreeSet<String> = ok
        .iter()
        .filter(|(_, (_, d))| d.iter().any(|(l, x)| original[l] == *x))
        .map(|(m, _)| m.to_string())
        .collect();
    let ids: Vec<&str> = ok.keys().copied().collect();
    let linked = |a: &str, b: &str| {
        let (fa, da) = &ok[a];
        let (fb, db) = &ok[b];
        fa == fb && da.iter().any(|(l, x)| db.get(l) == Some(x))
    };
    let mut seen = BTreeSet::new();
    let mut groups = Vec::new();
    for &start in &ids {
        if !seen.insert(start) {
            continue;
        }
        let mut group = vec![start];
        let mut frontier = vec![start];
        while let Some(x) = frontier.pop() {
            for &y in &ids {
                if !seen.contains(y) && linked(x, y) {
                    seen.insert(y);
                    group.push(y);
                    frontier.push(y);
                }
            }
        }
        if group.len() > 1 {
            let mut g: Vec<String> = group.into_iter().map(str::to_string).collect();
            g.sort();
            groups.push(g);
        }
    }
    groups.sort();
    let duplicates = groups
        .iter()
        .flat_map(|g| g.iter().filter(|m| !equivalent.contains(*m)).skip(1).cloned())
        .collect();
    TrivialOutcome {
        equivalent,
        groups,
        duplicates,
        compile_failed: failed,
    }
}

#[test]
fn criterion_06_trivial_dedup() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut matches, mut same_file, mut invariant) = (0, 0, 0);
    for _ in 0..DEDUP_LEDGERS {
        let ledger = random_ledger(&mut rng);
        let got = detect_trivial(&ledger).unwrap();
        matches += (got == oracle_trivial(&ledger)) as usize;
        let file: BTreeMap<&str, &str> = ledger.iter().map(|r| (r.mutant.as_str(), r.file.as_str())).collect();
        same_file += got.groups.iter().all(|g| g.iter().all(|m| file[m.as_str()] == file[g[0].as_str()])) as usize;
        let mut shuffled_ledger = ledger.clone();
        shuffled_ledger.shuffle(&mut rng);
        invariant += (detect_trivial(&shuffled_ledger).unwrap() == got) as usize;
    }

    // Hand-built cases: equal to the original only at O2; a chain linked at
    // different levels; an identical digest across files.
    let rec = |m: &str, f: &str, l: &str, d: &str| HashRecord {
        mutant: m.into(),
        file: f.into(),
        level: l.into(),
        digest: Some(d.into()),
        build_ok: true,
    };
    let ledger = vec![
        rec(ORIGINAL, "", "O0", "o0"),
        rec(ORIGINAL, "", "O2", "o2"),
        rec("a", "x.c", "O0", "a0"),
        rec("a", "x.c", "O2", "o2"),
        rec("b", "x.c", "O0", "b0"),
        rec("b", "x.c", "O2", "s"),
        rec("c", "x.c", "O0", "b0"),
        rec("c", "x.c", "O2", "c2"),
        rec("d", "x.c", "O0", "d0"),
        rec("d", "x.c", "O2", "s"),
        rec("e", "y.c", "O0", "b0"),
        rec("e", "y.c", "O2", "s"),
    ];
    let t = detect_trivial(&ledger).unwrap();
    let hand = t.equivalent == BTreeSet::from(["a".to_string()])
        && t.groups == vec![vec!["b".to_string(), "c".into(), "d".into()]]
        && t.duplicates == BTreeSet::from(["c".to_string(), "d".into()]);

    let n = DEDUP_LEDGERS as usize;
    verdict(
        6,
        "trivial dedup",
        matches == n && same_file == n && invariant == n && hand,
        &format!(
            "oracle agreement {matches}/{n}, same-file groups {same_file}/{n}, permutation invariant {invariant}/{n}, \
             hand-built any-level/transitive/cross-file cases {}",
            if hand { "ok" } else { "wrong" }
        ),
    );
}

// ---------------------------------------------------------------------------
// 7. T_E = 0 classification and monotonicity

/// Whether two executions differ in a way the metric can see.
fn oracle_differs(a: &[u64], b: &[u64], metric: DistanceMetric) -> bool {
    match metric {
        DistanceMetric::Jaccard | DistanceMetric::Ochiai => a.iter().zip(b).any(|(x, y)| (*x > 0) != (*y > 0)),
        DistanceMetric::Euclidean => a != b,
        DistanceMetric::Cosine => {
            let za = a.iter().all(|x| *x == 0);
            let zb = b.iter().all(|x| *x == 0);
            if za || zb {
                return za != zb;
            }
            let (sa, sb): (u64, u64) = (a.iter().sum(), b.iter().sum());
            a.iter().zip(b).any(|(x, y)| x * sb != y * sa)
        }
    }
}

#[test]
fn criterion_07_equivalence_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let thresholds = [0.0, 0.001, 0.01, 0.05, 0.1, 0.2, 0.5, 0.9, 1.0];
    let (mut agree, mut total, mut monotone, mut checks) = (0, 0, 0, 0);
    for _ in 0..EQUIV_INSTANCES {
        let n_stmts = rng.gen_range(1..=8);
        let n_tests = rng.gen_range(1..=5);
        let random_vec = |rng: &mut ChaCha8Rng| -> Vec<u64> {
            (0..n_stmts).map(|_| if rng.gen_bool(0.4) { 0 } else { rng.gen_range(1..=3) }).collect()
        };
        let originals: Vec<Vec<u64>> = (0..n_tests).map(|_| random_vec(&mut rng)).collect();
        let to_map = |v: &[u64]| -> BTreeMap<u32, u64> {
            v.iter().enumerate().filter(|(_, c)| **c > 0).map(|(s, c)| (s as u32, *c)).collect()
        };
        let idx = CoverageIndex::new(
            originals.iter().enumerate().map(|(t, v)| CoverageVector::new("f.c", &format!("t{t}"), to_map(v))),
        );
        let mut mutants = Vec::new();
        let mut runs: BTreeMap<String, Vec<CoverageVector>> = BTreeMap::new();
        let mut raw: BTreeMap<String, Vec<(usize, Vec<u64>)>> = BTreeMap::new();
        for k in 0..rng.gen_range(1..=5) {
            let id = format!("m{k}");
            mutants.push(mutant(&id, "f.c", 0));
            let mut executed = Vec::new();
            for (t, o) in originals.iter().enumerate() {
                if rng.gen_bool(0.2) {
                    continue;
                }
                let v: Vec<u64> = match rng.gen_range(0..5) {
                    0 | 1 => o.clone(),
                    2 => o.iter().map(|x| x * 2).collect(),
                    3 => {
                        let mut v = o.clone();
                        let s = rng.gen_range(0..n_stmts);
                        v[s] = rng.gen_range(0..=3);
                        v
                    }
                    _ => random_vec(&mut rng),
                };
                executed.push((t, v));
            }
            if !executed.is_empty() {
                runs.insert(
                    id.clone(),
                    executed
                        .iter()
                        .map(|(t, v)| CoverageVector::new("f.c", &format!("t{t}"), to_map(v)).for_mutant(&id))
                        .collect(),
                );
            }
            raw.insert(id, executed);
        }
        for metric in DistanceMetric::ALL {
            let eq = classify_equivalent(&mutants, &idx, &runs, metric, 0.0);
            for m in &mutants {
                let executed = &raw[&m.id];
                let want = if executed.is_empty() {
                    "unclassified"
                } else if executed.iter().any(|(t, v)| oracle_differs(v, &originals[*t], metric)) {
                    "nonequivalent"
                } else {
                    "equivalent"
                };
                let got = if eq.nonequivalent.contains(&m.id) {
                    "nonequivalent"
                } else if eq.likely_equivalent.contains(&m.id) {
                    "equivalent"
                } else {
                    "unclassified"
                };
                total += 1;
                agree += (want == got) as usize;
            }
            let classes: Vec<_> = thresholds
                .iter()
                .map(|t| classify_equivalent(&mutants, &idx, &runs, metric, *t))
                .collect();
            for w in classes.windows(2) {
                checks += 1;
                monotone += (w[1].nonequivalent.is_subset(&w[0].nonequivalent)
                    && w[0].likely_equivalent.is_subset(&w[1].likely_equivalent)
                    && w[0].unclassified == w[1].unclassified) as usize;
            }
        }
    }
    verdict(
        7,
        "equivalence threshold",
        agree == total && monotone == checks,
        &format!("T_E = 0 agrees with the coverage-difference oracle on {agree}/{total} mutants; monotone in T_E on {monotone}/{checks} steps"),
    );
}

// ---------------------------------------------------------------------------
// 8. Score formulas

#[test]
fn criterion_08_score_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut exact = 0;
    for i in 0..SCORE_TUPLES {
        // Denominators are powers of two, so every score is exact in binary.
        let total = 1u64 << rng.gen_range(0..=10);
        let killed = rng.gen_range(0..=total);
        let live = total - killed;
        let with_dups = mutation_score(killed, live).unwrap();
        let all_nondup = mutation_score_nodup(killed, live).unwrap();
        let ok = with_dups * total as f64 == killed as f64 && all_nondup * total as f64 == killed as f64;
        exact += ok as usize;
        assert!(ok, "tuple {i}: ({killed}, {live})");
    }
    let hand = mutation_score(3, 1).unwrap() == 0.75
        && mutation_score(1, 3).unwrap() == 0.25
        && mutation_score_nodup(7, 1).unwrap() == 0.875
        && mutation_score(0, 0).is_err();

    let mut never_decreases = true;
    for _ in 0..10_000 {
        let k = rng.gen_range(0..50u64);
        let l = rng.gen_range(0..50u64);
        let d = rng.gen_range(0..=l);
        if k + l - d == 0 {
            continue;
        }
        never_decreases &= mutation_score(k, l - d).unwrap() >= mutation_score(k, l).unwrap();
    }

    // Bench run: 40% of live mutants leave coverage unchanged.
    let bundle = generate_bench(&BenchSpec {
        mutants: 1000,
        equivalent_share: 0.4,
        seed: 8,
        ..Default::default()
    })
    .unwrap();
    let idx = bundle.original_index();
    let ex = bundle.executor();
    let mut live = Vec::new();
    let mut coverage = BTreeMap::new();
    let mut killed = 0u64;
    for m in &bundle.mutants {
        let order: Vec<String> = idx.covered_tests(m).into_iter().collect();
        let v = run_mutant(m, &order, &bundle.tests, &ex);
        if v.killed {
            killed += 1;
        } else {
            coverage.insert(m.id.clone(), v.coverage);
            live.push(m);
        }
    }
    let eq = classify_equivalent(live.iter().copied(), &idx, &coverage, DistanceMetric::Cosine, 0.0);
    let naive = killed as f64 / bundle.mutants.len() as f64;
    let score = mutation_score_nodup(killed, eq.nonequivalent.len() as u64).unwrap();
    let share = eq.likely_equivalent.len() as f64 / live.len() as f64;

    verdict(
        8,
        "score formulas",
        exact == SCORE_TUPLES as usize && hand && never_decreases && score > naive,
        &format!(
            "{exact}/{SCORE_TUPLES} tuples exact, hand cases {}, discarding d = 0 never lowered the score: {never_decreases}; \
             bench with {:.0}% d = 0 live mutants: {:.2}% -> {:.2}%",
            if hand { "ok" } else { "wrong" },
            100.0 * share,
            100.0 * naive,
            100.0 * score
        ),
    );
}

// ---------------------------------------------------------------------------
// 9. Association machinery

#[test]
fn criterion_09_association_machinery() {
    let mut worst_sum = 0.0f64;
    let mut worst_binomial = 0.0f64;
    let mut valid_points = 0;
    for n in 1..=50u64 {
        for i in 1..=19 {
            let p = i as f64 / 20.0;
            let b = correlated_binomial_distribution(n, p, 0.0).unwrap();
            for (y, v) in b.iter().enumerate() {
                worst_binomial = worst_binomial.max((v - oracle_pmf(y as u64, n, p)).abs());
            }
            for r2 in [-0.01, -0.001, 0.0, 0.0005, 0.002, 0.01, 0.05] {
                if let Ok(pmf) = correlated_binomial_distribution(n, p, r2) {
                    valid_points += 1;
                    worst_sum = worst_sum.max((pmf.iter().sum::<f64>() - 1.0).abs());
                }
            }
        }
    }

    let mut table_failures = 0u64;
    let mut tables = 0u64;
    for a in 0..=ASSOC_MAX_ENTRY {
        for b in 0..=ASSOC_MAX_ENTRY {
            for c in 0..=ASSOC_MAX_ENTRY {
                for d in 0..=ASSOC_MAX_ENTRY {
                    tables += 1;
                    let t = Contingency::new(a, b, c, d);
                    let (ad, bc) = (a * d, b * c);
                    let q = yules_q(t);
                    let or = odds_ratio(t);
                    let mut ok = q.is_ok() == (ad + bc > 0) && or.is_ok() == (bc > 0);
                    if let Ok(q) = q {
                        let want = (ad as f64 - bc as f64) / (ad + bc) as f64;
                        ok &= (q - want).abs() <= ASSOC_TOL && q.abs() <= 1.0;
                        ok &= yules_q(Contingency::new(c, d, a, b)).map_or(false, |s| s == -q);
                        if let Ok(or) = or {
                            ok &= (q - (or - 1.0) / (or + 1.0)).abs() <= ASSOC_TOL;
                        }
                    }
                    if let (Ok(or), Ok(flipped)) = (or, odds_ratio(Contingency::new(c, d, a, b))) {
                        ok &= (or * flipped - 1.0).abs() <= ASSOC_TOL;
                    }
                    table_failures += !ok as u64;
                }
            }
        }
    }

    let grid = FitGrid::default();
    let mut recovered = 0;
    let cases = [(20u64, 0.70, 0.002), (20, 0.818, 0.0), (30, 0.5, 0.004), (10, 0.65, -0.003), (40, 0.3, 0.001)];
    for (n, p, r2) in cases {
        let observed = correlated_binomial_distribution(n, p, r2).unwrap();
        let fit = fit_correlated_binomial(&observed, p - 5.0 * grid.p_step, grid).unwrap();
        recovered += ((fit.p - p).abs() <= grid.p_step / 2.0 && (fit.r2 - r2).abs() <= grid.r2_step / 2.0) as usize;
    }

    verdict(
        9,
        "association machinery",
        worst_sum <= PMF_SUM_TOL && worst_binomial <= PMF_BINOMIAL_TOL && table_failures == 0 && recovered == cases.len(),
        &format!(
            "max |sum - 1| {worst_sum:.1e} over {valid_points} valid (N, p, r2), r2 = 0 vs binomial {worst_binomial:.1e}, \
             {table_failures} identity failures over {tables} tables, fit recovered {recovered}/{} injected (p, r2)",
            cases.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// 10. End-to-end determinism

#[test]
fn criterion_10_end_to_end_determinism() {
    let dir = tempfile::tempdir().unwrap();
    generate_bench(&BenchSpec { mutants: 2000, seed: 10, ..Default::default() })
        .unwrap()
        .write(&dir.path().join("bench"))
        .unwrap();
    let run = |workspace: &str, jobs: usize| -> Vec<u8> {
        let text = format!(
            "seed = 42\nmode = \"simulated\"\nworkspace = \"{workspace}\"\n[bench]\nbundle = \"bench\"\n[analysis]\njobs = {jobs}\n"
        );
        let cfg = ProjectConfig::parse(&text, dir.path()).unwrap();
        run_pipeline(&cfg, Stage::Report, false).unwrap();
        std::fs::read(cfg.workspace.join("07-report/report.json")).unwrap()
    };
    let first = run("a", 1);
    let second = run("b", 1);
    let parallel = run("c", 4);
    verdict(
        10,
        "end-to-end determinism",
        first == second && first == parallel,
        &format!(
            "report.json ({} bytes) identical across two runs: {}, and with 4 jobs: {}",
            first.len(),
            first == second,
            first == parallel
        ),
    );
}
