//! Synthetic benches with known ground truth.
//!
//! Tests come in clusters that share identical statement coverage. Exactly
//! `round(true_ms · mutants)` mutants are killable; each is killed by tests
//! of one cluster that reaches its statement. Live mutants are either
//! equivalent (coverage unchanged) or perturb coverage after the mutated
//! statement; a share of the perturbing ones copy another mutant's
//! perturbation and are therefore duplicates of it.
//!
//! A bundle directory holds:
//!
//! | file              | content                                          |
//! |-------------------|--------------------------------------------------|
//! | `bench.json`      | the [`BenchSpec`]                                |
//! | `tests.tsv`       | `id<TAB>duration`                                |
//! | `mutants.jsonl`   | mutant manifest                                  |
//! | `kills.tsv`       | `mutant<TAB>test<TAB>outcome`, non-pass only     |
//! | `coverage.tsv`    | original-program coverage matrix                 |
//! | `truth.tsv`       | `mutant<TAB>class<TAB>perturbation key`          |
//! | `replicates.tsv`  | optional, `replicate<TAB>0/1 per mutant`         |

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coverage::{count_distance, read_coverage_matrix, write_coverage_matrix, CoverageIndex, CoverageVector, DistanceMetric};
use crate::error::{Error, Result};
use crate::exec::{read_tests, suite, write_tests, KillMatrix, MutantCoverage, SimulatedExecutor, TestCase, TestOutcome, TestSuite};
use crate::mutator::{read_manifest, write_manifest, Mutant, MutantStatus, MutationOperator};
use crate::seed;

/// True mutation score of the high-coverage preset.
pub const HIGH_COVERAGE_MS: f64 = 0.8182;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSpec {
    pub mutants: usize,
    pub tests: usize,
    /// Groups of tests with identical coverage.
    pub clusters: usize,
    pub files: usize,
    pub statements_per_file: u32,
    pub true_ms: f64,
    /// Probability that a cluster reaches a statement beyond the one it is
    /// guaranteed to cover.
    pub reach_prob: f64,
    /// Share of tests in the killer cluster that kill a killable mutant
    /// (at least one always does).
    pub killer_share: f64,
    /// Share of kills reported as timeouts.
    pub timeout_share: f64,
    /// Share of live mutants whose coverage equals the original's.
    pub equivalent_share: f64,
    /// Share of coverage-perturbing live mutants that copy the perturbation
    /// of an earlier live mutant on the same statement.
    pub duplicate_share: f64,
    /// Per-statement probability of an extra count change in perturbed runs.
    pub perturb_prob: f64,
    pub min_duration: f64,
    pub max_duration: f64,
    /// Replicated kill vectors with pairwise correlation `r2`.
    pub replicates: usize,
    pub r2: f64,
    pub seed: u64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            mutants: 500,
            tests: 60,
            clusters: 12,
            files: 2,
            statements_per_file: 40,
            true_ms: 0.7,
            reach_prob: 0.3,
            killer_share: 1.0,
            timeout_share: 0.05,
            equivalent_share: 0.4,
            duplicate_share: 0.1,
            perturb_prob: 0.1,
            min_duration: 0.5,
            max_duration: 5.0,
            replicates: 0,
            r2: 0.0,
            seed: 0,
        }
    }
}

impl BenchSpec {
    pub fn preset(name: &str) -> Option<BenchSpec> {
        match name {
            "default" => Some(BenchSpec::default()),
            "high-coverage" => Some(BenchSpec {
                true_ms: HIGH_COVERAGE_MS,
                ..BenchSpec::default()
            }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InfeasibleBench(m));
        if !(self.true_ms > 0.0 && self.true_ms < 1.0) {
            return bad(format!("true mutation score {} outside (0, 1)", self.true_ms));
        }
        if self.mutants == 0 || self.tests == 0 || self.clusters == 0 || self.files == 0 {
            return bad("mutant, test, cluster and file counts must be positive".into());
        }
        if self.clusters > self.tests {
            return bad(format!("{} clusters cannot be filled by {} tests", self.clusters, self.tests));
        }
        if self.statements_per_file < 2 {
            return bad("at least two statements per file are needed".into());
        }
        for (name, v) in [
            ("reach_prob", self.reach_prob),
            ("killer_share", self.killer_share),
            ("timeout_share", self.timeout_share),
            ("equivalent_share", self.equivalent_share),
            ("duplicate_share", self.duplicate_share),
            ("perturb_prob", self.perturb_prob),
            ("r2", self.r2),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} outside [0, 1]"));
            }
        }
        if !(self.min_duration > 0.0 && self.min_duration <= self.max_duration) {
            return bad("durations must satisfy 0 < min <= max".into());
        }
        Ok(())
    }

    pub fn killable(&self) -> usize {
        (self.true_ms * self.mutants as f64).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthClass {
    Killable,
    Equivalent,
    Live,
    Duplicate,
}

impl TruthClass {
    fn as_str(self) -> &'static str {
        match self {
            TruthClass::Killable => "killable",
            TruthClass::Equivalent => "equivalent",
            TruthClass::Live => "live",
            TruthClass::Duplicate => "duplicate",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [TruthClass::Killable, TruthClass::Equivalent, TruthClass::Live, TruthClass::Duplicate]
            .into_iter()
            .find(|c| c.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truth {
    pub class: TruthClass,
    /// Mutant whose perturbation this one's coverage follows; `None` for
    /// equivalent mutants.
    pub key: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchBundle {
    pub spec: BenchSpec,
    pub tests: TestSuite,
    pub mutants: Vec<Mutant>,
    pub kills: KillMatrix,
    pub coverage: Vec<CoverageVector>,
    pub truth: BTreeMap<String, Truth>,
    /// One kill vector per replicate, indexed like `mutants`.
    pub replicates: Vec<Vec<bool>>,
}

pub fn file_name(f: usize) -> String {
    format!("bench/unit{f:02}.c")
}

pub fn generate_bench(spec: &BenchSpec) -> Result<BenchBundle> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed, "bench");
    let s = spec.statements_per_file;

    let mut cluster_of: Vec<usize> = (0..spec.tests).map(|i| i % spec.clusters).collect();
    cluster_of.shuffle(&mut rng);
    let tests = suite((0..spec.tests).map(|i| {
        TestCase::new(format!("t{i:05}"), round3(rng.gen_range(spec.min_duration..=spec.max_duration)))
    }));
    let test_ids: Vec<String> = tests.keys().cloned().collect();

    // cluster -> file -> statement counts
    let mut base: Vec<Vec<BTreeMap<u32, u64>>> = vec![vec![BTreeMap::new(); spec.files]; spec.clusters];
    for f in 0..spec.files {
        for st in 0..s {
            for (c, cl) in base.iter_mut().enumerate() {
                let guaranteed = st as usize % spec.clusters == c;
                if guaranteed || rng.gen_bool(spec.reach_prob) {
                    cl[f].insert(st, rng.gen_range(1..=20));
                }
            }
        }
    }
    let mut coverage = Vec::with_capacity(spec.tests * spec.files);
    for (t, id) in test_ids.iter().enumerate() {
        for f in 0..spec.files {
            let mut counts: BTreeMap<u32, u64> = (0..s).map(|st| (st, 0)).collect();
            counts.extend(base[cluster_of[t]][f].iter().map(|(k, v)| (*k, *v)));
            coverage.push(CoverageVector::new(file_name(f), id.clone(), counts));
        }
    }

    let ops = MutationOperator::ALL;
    let mut alt: BTreeMap<(usize, u32, MutationOperator), u32> = BTreeMap::new();
    let mut mutants = Vec::with_capacity(spec.mutants);
    for i in 0..spec.mutants {
        let f = rng.gen_range(0..spec.files);
        let st = rng.gen_range(0..s);
        let op = ops[i % ops.len()];
        let a = alt.entry((f, st, op)).or_insert(0);
        let line = st as usize + 2;
        mutants.push(Mutant {
            id: format!("{}:{st:05}:{}:{a:03}", file_name(f), op.name()),
            operator: op,
            file: file_name(f),
            function: Some(format!("fn{:02}", st / 10)),
            statement: st,
            line_start: line,
            line_end: line,
            offset: 0,
            original: format!("s{st}"),
            mutated: format!("s{st}'{}", *a),
            status: MutantStatus::Generated,
        });
        *a += 1;
    }
    mutants.sort_by(|x, y| x.id.cmp(&y.id));

    let killable: BTreeSet<usize> = index::sample(&mut rng, spec.mutants, spec.killable()).into_iter().collect();
    let mut kills = KillMatrix::new();
    let mut truth = BTreeMap::new();
    let mut first_live: BTreeMap<(String, u32), String> = BTreeMap::new();
    let file_index = |m: &Mutant| -> usize { m.file[10..12].parse().expect("bench file name") };
    for (i, m) in mutants.iter().enumerate() {
        if killable.contains(&i) {
            let f = file_index(m);
            let reaching: Vec<usize> = (0..spec.clusters).filter(|c| base[*c][f].contains_key(&m.statement)).collect();
            let killer = *reaching.choose(&mut rng).expect("every statement is reached");
            let members: Vec<usize> = (0..spec.tests).filter(|t| cluster_of[*t] == killer).collect();
            let forced = *members.choose(&mut rng).expect("clusters are nonempty");
            for &t in &members {
                if t == forced || rng.gen_bool(spec.killer_share) {
                    let outcome = if rng.gen_bool(spec.timeout_share) { TestOutcome::Timeout } else { TestOutcome::Fail };
                    kills.set(&m.id, &test_ids[t], outcome);
                }
            }
            truth.insert(m.id.clone(), Truth { class: TruthClass::Killable, key: Some(m.id.clone()) });
        } else if rng.gen_bool(spec.equivalent_share) {
            truth.insert(m.id.clone(), Truth { class: TruthClass::Equivalent, key: None });
        } else {
            let slot = (m.file.clone(), m.statement);
            match first_live.get(&slot) {
                Some(k) if rng.gen_bool(spec.duplicate_share) => {
                    truth.insert(m.id.clone(), Truth { class: TruthClass::Duplicate, key: Some(k.clone()) });
                }
                _ => {
                    first_live.entry(slot).or_insert_with(|| m.id.clone());
                    truth.insert(m.id.clone(), Truth { class: TruthClass::Live, key: Some(m.id.clone()) });
                }
            }
        }
    }

    let replicates = correlated_replicates(spec.mutants, spec.replicates, spec.true_ms, spec.r2, &mut rng);
    Ok(BenchBundle {
        spec: spec.clone(),
        tests,
        mutants,
        kills,
        coverage,
        truth,
        replicates,
    })
}

/// Kill vectors whose entries are Bernoulli(p) with pairwise correlation
/// `r2`: each entry copies a per-replicate shared draw with probability
/// `sqrt(r2)` and is drawn independently otherwise.
pub fn correlated_replicates(n: usize, replicates: usize, p: f64, r2: f64, rng: &mut impl Rng) -> Vec<Vec<bool>> {
    let lambda = r2.sqrt();
    (0..replicates)
        .map(|_| {
            let shared = rng.gen_bool(p);
            (0..n)
                .map(|_| if rng.gen_bool(lambda) { shared } else { rng.gen_bool(p) })
                .collect()
        })
        .collect()
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

impl BenchBundle {
    pub fn original_index(&self) -> CoverageIndex {
        CoverageIndex::new(self.coverage.iter().cloned())
    }

    pub fn coverage_model(&self) -> BenchCoverage {
        BenchCoverage {
            seed: self.spec.seed,
            statements: self.spec.statements_per_file,
            perturb_prob: self.spec.perturb_prob,
            original: self.original_index(),
            truth: self.truth.clone(),
        }
    }

    pub fn executor(&self) -> SimulatedExecutor {
        SimulatedExecutor::new(self.kills.clone()).with_coverage(Arc::new(self.coverage_model()))
    }

    /// Full-suite mutation score over all mutants.
    pub fn empirical_ms(&self) -> f64 {
        let k = self.mutants.iter().filter(|m| self.kills.is_killable(&m.id)).count();
        k as f64 / self.mutants.len() as f64
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("bench.json"), serde_json::to_string_pretty(&self.spec)? + "\n")?;
        write_tests(&dir.join("tests.tsv"), &self.tests)?;
        write_manifest(&dir.join("mutants.jsonl"), &self.mutants)?;
        self.kills.write(&dir.join("kills.tsv"))?;
        write_coverage_matrix(&dir.join("coverage.tsv"), &self.coverage)?;
        let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("truth.tsv"))?);
        writeln!(w, "# mutant\tclass\tkey")?;
        for (m, t) in &self.truth {
            writeln!(w, "{m}\t{}\t{}", t.class.as_str(), t.key.as_deref().unwrap_or("-"))?;
        }
        w.flush()?;
        if !self.replicates.is_empty() {
            let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("replicates.tsv"))?);
            for (r, row) in self.replicates.iter().enumerate() {
                let bits: String = row.iter().map(|b| if *b { '1' } else { '0' }).collect();
                writeln!(w, "{r}\t{bits}")?;
            }
            w.flush()?;
        }
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let spec: BenchSpec = serde_json::from_str(&std::fs::read_to_string(dir.join("bench.json"))?)?;
        let truth_path = dir.join("truth.tsv");
        let mut truth = BTreeMap::new();
        for (n, line) in BufReader::new(std::fs::File::open(&truth_path)?).lines().enumerate() {
            let line = line?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let class = match cols.as_slice() {
                [_, c, _] => TruthClass::parse(c),
                _ => None,
            };
            let Some(class) = class else {
                return Err(Error::Format {
                    path: truth_path.display().to_string(),
                    line: n + 1,
                    message: "expected `mutant<TAB>class<TAB>key`".into(),
                });
            };
            let key = (cols[2] != "-").then(|| cols[2].to_string());
            truth.insert(cols[0].to_string(), Truth { class, key });
        }
        let mut replicates = Vec::new();
        let rep_path = dir.join("replicates.tsv");
        if rep_path.exists() {
            for line in BufReader::new(std::fs::File::open(&rep_path)?).lines() {
                let line = line?;
                if let Some((_, bits)) = line.split_once('\t') {
                    replicates.push(bits.chars().map(|c| c == '1').collect());
                }
            }
        }
        Ok(BenchBundle {
            spec,
            tests: read_tests(&dir.join("tests.tsv"))?,
            mutants: read_manifest(&dir.join("mutants.jsonl"))?,
            kills: KillMatrix::read(&dir.join("kills.tsv"))?,
            coverage: read_coverage_matrix(&dir.join("coverage.tsv"))?,
            truth,
            replicates,
        })
    }
}

/// Deterministic mutant coverage for a bench: the original coverage of the
/// test plus a perturbation drawn from the mutant's key. Runs that do not
/// reach the mutated statement are unchanged.
#[derive(Debug, Clone)]
pub struct BenchCoverage {
    pub seed: u64,
    pub statements: u32,
    pub perturb_prob: f64,
    pub original: CoverageIndex,
    pub truth: BTreeMap<String, Truth>,
}

impl BenchCoverage {
    fn delta(&self, key: &str, statement: u32) -> (u32, BTreeMap<u32, u64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(self.seed, &format!("perturb:{key}")));
        let mut forced = rng.gen_range(0..self.statements);
        if forced == statement {
            forced = (forced + 1) % self.statements;
        }
        let mut out = BTreeMap::new();
        out.insert(forced, rng.gen_range(1..=3));
        for st in 0..self.statements {
            if rng.gen_bool(self.perturb_prob) {
                *out.entry(st).or_insert(0) += rng.gen_range(1..=3);
            }
        }
        (forced, out)
    }
}

impl MutantCoverage for BenchCoverage {
    fn coverage(&self, mutant: &Mutant, test: &str) -> Option<CoverageVector> {
        let base = self.original.get(&mutant.file, test)?;
        let mut v = base.clone().for_mutant(&mutant.id);
        let key = self.truth.get(&mutant.id).and_then(|t| t.key.as_deref());
        if let (Some(key), true) = (key, base.count(mutant.statement) > 0) {
            let (forced, delta) = self.delta(key, mutant.statement);
            for (st, d) in delta {
                *v.counts.entry(st).or_insert(0) += d;
            }
            // A delta proportional to the base run would not show under cosine.
            if count_distance(&base.counts, &v.counts, DistanceMetric::Cosine) == 0.0 {
                *v.counts.entry(forced).or_insert(0) += 1;
            }
        }
        Some(v)
    }
}
