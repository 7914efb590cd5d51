//! Test execution against mutants with early stop on the first kill.
//!
//! Each test gets a timeout of three times its baseline duration on the
//! original program; a timeout counts as a kill. Two executors are provided:
//! [`SimulatedExecutor`] answers from a kill matrix, [`ProcessExecutor`]
//! runs shell commands.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coverage::{parse_gcov, statement_counts, CoverageVector};
use crate::error::{Error, Result};
use crate::mutator::{Mutant, SourceUnit};

pub const TIMEOUT_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    /// Shell command template; `{exe}`, `{test}` and `{mutant}` are substituted.
    pub command: Option<String>,
    /// Seconds taken on the original program.
    pub baseline: f64,
}

impl TestCase {
    pub fn new(id: impl Into<String>, baseline: f64) -> Self {
        TestCase { id: id.into(), command: None, baseline }
    }

    pub fn timeout(&self) -> f64 {
        TIMEOUT_FACTOR * self.baseline
    }
}

pub type TestSuite = BTreeMap<String, TestCase>;

pub fn suite(tests: impl IntoIterator<Item = TestCase>) -> TestSuite {
    tests.into_iter().map(|t| (t.id.clone(), t)).collect()
}

/// Reads `id<TAB>duration[<TAB>command]` rows.
pub fn read_tests(path: &Path) -> Result<TestSuite> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = TestSuite::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::Format {
            path: path.display().to_string(),
            line: n + 1,
            message,
        };
        let mut cols = line.splitn(3, '\t');
        let id = cols.next().unwrap_or_default();
        let dur = cols.next().ok_or_else(|| bad("missing duration".into()))?;
        let baseline: f64 = dur.trim().parse().map_err(|_| bad(format!("bad duration `{dur}`")))?;
        if !(baseline > 0.0) {
            return Err(bad(format!("duration must be positive, got {baseline}")));
        }
        out.insert(
            id.to_string(),
            TestCase {
                id: id.to_string(),
                command: cols.next().map(str::to_string),
                baseline,
            },
        );
    }
    Ok(out)
}

pub fn write_tests(path: &Path, tests: &TestSuite) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# test\tduration\tcommand")?;
    for t in tests.values() {
        match &t.command {
            Some(c) => writeln!(w, "{}\t{}\t{}", t.id, t.baseline, c)?,
            None => writeln!(w, "{}\t{}", t.id, t.baseline)?,
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestOutcome {
    Pass,
    Fail,
    Timeout,
}

impl TestOutcome {
    pub fn kills(self) -> bool {
        self != TestOutcome::Pass
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TestOutcome::Pass => "pass",
            TestOutcome::Fail => "fail",
            TestOutcome::Timeout => "timeout",
        }
    }
}

impl fmt::Display for TestOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestOutcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pass" => Ok(TestOutcome::Pass),
            "fail" => Ok(TestOutcome::Fail),
            "timeout" => Ok(TestOutcome::Timeout),
            _ => Err(Error::InvalidArguments(format!("unknown outcome `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestRun {
    pub outcome: TestOutcome,
    /// Seconds actually spent, before timeout capping.
    pub duration: f64,
    /// One vector per coverage collection; empty when none was recorded.
    pub coverage: Vec<CoverageVector>,
}

pub trait TestExecutor: Sync {
    /// Runs one test on one mutant. An `Err` is a harness failure, not a kill.
    fn run(&self, mutant: &Mutant, test: &TestCase) -> Result<TestRun>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionVerdict {
    pub mutant: String,
    pub killed: bool,
    pub killing_test: Option<String>,
    pub tests_run: usize,
    /// Seconds charged, each test capped at its timeout.
    pub wall_time: f64,
    pub timeout_kills: usize,
    pub inconclusive: bool,
    #[serde(skip)]
    pub coverage: Vec<CoverageVector>,
}

/// Runs `ordered` in order on `mutant`, stopping at the first failing or
/// timed-out test.
pub fn run_mutant(mutant: &Mutant, ordered: &[String], tests: &TestSuite, executor: &dyn TestExecutor) -> ExecutionVerdict {
    let mut verdict = ExecutionVerdict {
        mutant: mutant.id.clone(),
        killed: false,
        killing_test: None,
        tests_run: 0,
        wall_time: 0.0,
        timeout_kills: 0,
        inconclusive: false,
        coverage: Vec::new(),
    };
    for id in ordered {
        let Some(test) = tests.get(id) else {
            log::warn!("{}: unknown test `{id}`, verdict inconclusive", mutant.id);
            verdict.inconclusive = true;
            return verdict;
        };
        let run = match executor.run(mutant, test) {
            Ok(run) => run,
            Err(e) => {
                log::warn!("{}: harness failure on `{id}`: {e}; verdict inconclusive", mutant.id);
                verdict.inconclusive = true;
                return verdict;
            }
        };
        verdict.tests_run += 1;
        verdict.wall_time += run.duration.min(test.timeout());
        verdict.coverage.extend(run.coverage);
        if run.outcome.kills() {
            verdict.killed = true;
            verdict.killing_test = Some(id.clone());
            if run.outcome == TestOutcome::Timeout {
                verdict.timeout_kills += 1;
            }
            break;
        }
    }
    verdict
}

/// Runs every `(mutant, ordered tests)` job on up to `jobs` threads. Results
/// keep the input order.
pub fn run_all(
    work: &[(Mutant, Vec<String>)],
    tests: &TestSuite,
    executor: &dyn TestExecutor,
    jobs: usize,
) -> Result<Vec<ExecutionVerdict>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Executor(e.to_string()))?;
    Ok(pool.install(|| work.par_iter().map(|(m, order)| run_mutant(m, order, tests, executor)).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Savings {
    pub base_time: f64,
    pub new_time: f64,
    pub base_tests: usize,
    pub new_tests: usize,
    pub time_saving: f64,
    pub test_saving: f64,
}

/// Relative reduction of charged time and executed tests against a baseline
/// run of the full suite. Negative values mean the new run cost more.
pub fn savings_report(verdicts: &[ExecutionVerdict], baseline: &[ExecutionVerdict]) -> Savings {
    let sum = |v: &[ExecutionVerdict]| (v.iter().map(|x| x.wall_time).sum::<f64>(), v.iter().map(|x| x.tests_run).sum::<usize>());
    let (new_time, new_tests) = sum(verdicts);
    let (base_time, base_tests) = sum(baseline);
    let ratio = |b: f64, n: f64| if b > 0.0 { (b - n) / b } else { 0.0 };
    Savings {
        base_time,
        new_time,
        base_tests,
        new_tests,
        time_saving: ratio(base_time, new_time),
        test_saving: ratio(base_tests as f64, new_tests as f64),
    }
}

/// Non-pass outcomes keyed by (mutant, test). Missing entries pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KillMatrix {
    entries: BTreeMap<String, BTreeMap<String, TestOutcome>>,
}

impl KillMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, mutant: &str, test: &str, outcome: TestOutcome) {
        if outcome == TestOutcome::Pass {
            if let Some(row) = self.entries.get_mut(mutant) {
                row.remove(test);
            }
        } else {
            self.entries.entry(mutant.to_string()).or_default().insert(test.to_string(), outcome);
        }
    }

    pub fn outcome(&self, mutant: &str, test: &str) -> TestOutcome {
        self.entries
            .get(mutant)
            .and_then(|r| r.get(test))
            .copied()
            .unwrap_or(TestOutcome::Pass)
    }

    pub fn killers(&self, mutant: &str) -> BTreeSet<&str> {
        self.entries.get(mutant).into_iter().flat_map(|r| r.keys().map(String::as_str)).collect()
    }

    pub fn is_killable(&self, mutant: &str) -> bool {
        self.entries.get(mutant).is_some_and(|r| !r.is_empty())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, TestOutcome)> {
        self.entries
            .iter()
            .flat_map(|(m, row)| row.iter().map(move |(t, o)| (m.as_str(), t.as_str(), *o)))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "# mutant\ttest\toutcome")?;
        for (m, t, o) in self.iter() {
            writeln!(w, "{m}\t{t}\t{o}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut out = KillMatrix::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let outcome = match cols.as_slice() {
                [_, _, o] => o.parse::<TestOutcome>().ok(),
                _ => None,
            };
            let Some(outcome) = outcome else {
                return Err(Error::Format {
                    path: path.display().to_string(),
                    line: n + 1,
                    message: "expected `mutant<TAB>test<TAB>outcome`".into(),
                });
            };
            out.set(cols[0], cols[1], outcome);
        }
        Ok(out)
    }
}

/// Source of per-(mutant, test) coverage for simulated runs.
pub trait MutantCoverage: Send + Sync {
    fn coverage(&self, mutant: &Mutant, test: &str) -> Option<CoverageVector>;
}

/// Coverage looked up from a precomputed table.
#[derive(Debug, Clone, Default)]
pub struct CoverageTable(pub BTreeMap<(String, String), CoverageVector>);

impl CoverageTable {
    pub fn new(vectors: impl IntoIterator<Item = CoverageVector>) -> Self {
        CoverageTable(
            vectors
                .into_iter()
                .filter_map(|v| Some(((v.mutant.clone()?, v.test.clone()), v)))
                .collect(),
        )
    }
}

impl MutantCoverage for CoverageTable {
    fn coverage(&self, mutant: &Mutant, test: &str) -> Option<CoverageVector> {
        self.0.get(&(mutant.id.clone(), test.to_string())).cloned()
    }
}

/// Answers from a [`KillMatrix`]. Passing and failing tests take their
/// baseline duration; timeouts take the full timeout.
#[derive(Clone)]
pub struct SimulatedExecutor {
    pub matrix: Arc<KillMatrix>,
    pub coverage: Option<Arc<dyn MutantCoverage>>,
}

impl SimulatedExecutor {
    pub fn new(matrix: KillMatrix) -> Self {
        SimulatedExecutor {
            matrix: Arc::new(matrix),
            coverage: None,
        }
    }

    pub fn with_coverage(mut self, coverage: Arc<dyn MutantCoverage>) -> Self {
        self.coverage = Some(coverage);
        self
    }
}

impl TestExecutor for SimulatedExecutor {
    fn run(&self, mutant: &Mutant, test: &TestCase) -> Result<TestRun> {
        let outcome = self.matrix.outcome(&mutant.id, &test.id);
        let duration = if outcome == TestOutcome::Timeout { test.timeout() } else { test.baseline };
        let coverage = self.coverage.as_ref().and_then(|c| c.coverage(mutant, &test.id)).into_iter().collect();
        Ok(TestRun { outcome, duration, coverage })
    }
}

/// Runs test commands through `sh -c`. A nonzero exit status is a kill.
#[derive(Debug, Clone)]
pub struct ProcessExecutor {
    /// Directory holding one archived executable per mutant, named by
    /// [`executable_name`].
    pub executables: PathBuf,
    /// Environment variables forwarded to tests; everything else is cleared.
    pub env_passthrough: Vec<String>,
    pub workdir: Option<PathBuf>,
    /// Optional command printing a gcov text report for the mutated file
    /// after each test. Takes the same placeholders plus `{file}`.
    pub coverage_command: Option<String>,
    /// Times the coverage command runs per test.
    pub coverage_repeats: usize,
    pub units: BTreeMap<String, Arc<SourceUnit>>,
}

/// File name under which a mutant executable is archived.
pub fn executable_name(mutant_id: &str) -> String {
    mutant_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

impl ProcessExecutor {
    pub fn new(executables: impl Into<PathBuf>) -> Self {
        ProcessExecutor {
            executables: executables.into(),
            env_passthrough: vec!["PATH".into(), "HOME".into()],
            workdir: None,
            coverage_command: None,
            coverage_repeats: 1,
            units: BTreeMap::new(),
        }
    }

    fn expand(&self, template: &str, mutant: &Mutant, test: &TestCase) -> String {
        let exe = self.executables.join(executable_name(&mutant.id));
        template
            .replace("{exe}", &exe.display().to_string())
            .replace("{test}", &test.id)
            .replace("{mutant}", &mutant.id)
            .replace("{file}", &mutant.file)
    }

    fn command(&self, script: &str) -> Command {
        let mut cmd = Command::new("sh");
        cmd.arg("-c").arg(script).env_clear().stdin(Stdio::null());
        for var in &self.env_passthrough {
            if let Ok(v) = std::env::var(var) {
                cmd.env(var, v);
            }
        }
        if let Some(dir) = &self.workdir {
            cmd.current_dir(dir);
        }
        cmd
    }

    fn collect_coverage(&self, mutant: &Mutant, test: &TestCase) -> Option<CoverageVector> {
        let template = self.coverage_command.as_ref()?;
        let unit = self.units.get(&mutant.file)?;
        let out = self.command(&self.expand(template, mutant, test)).stderr(Stdio::null()).output().ok()?;
        if !out.status.success() {
            log::warn!("{}: coverage command failed for `{}`", mutant.id, test.id);
            return None;
        }
        let lines = parse_gcov(&String::from_utf8_lossy(&out.stdout));
        Some(CoverageVector::new(&mutant.file, &test.id, statement_counts(unit, &lines)).for_mutant(&mutant.id))
    }
}

impl TestExecutor for ProcessExecutor {
    fn run(&self, mutant: &Mutant, test: &TestCase) -> Result<TestRun> {
        let template = test
            .command
            .as_ref()
            .ok_or_else(|| Error::Executor(format!("test `{}` has no command", test.id)))?;
        let limit = Duration::from_secs_f64(test.timeout());
        let start = Instant::now();
        let mut child = self
            .command(&self.expand(template, mutant, test))
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| Error::Executor(format!("cannot spawn `{}`: {e}", test.id)))?;
        let outcome = loop {
            if let Some(status) = child.try_wait()? {
                break if status.success() { TestOutcome::Pass } else { TestOutcome::Fail };
            }
            if start.elapsed() >= limit {
                let _ = child.kill();
                let _ = child.wait();
                break TestOutcome::Timeout;
            }
            std::thread::sleep(Duration::from_millis(2));
        };
        let duration = start.elapsed().as_secs_f64();
        Ok(TestRun {
            outcome,
            duration,
            coverage: (0..self.coverage_repeats).filter_map(|_| self.collect_coverage(mutant, test)).collect(),
        })
    }
}
