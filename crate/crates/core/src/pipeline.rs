//! Stage orchestration with a resumable artifact store.
//!
//! Every stage writes into `<workspace>/<NN>-<stage>/` and finishes by
//! writing `stage.json`, which records a digest of the stage inputs and of
//! each output file. A stage whose record matches its current inputs and
//! whose outputs are intact is reused instead of rerun.
//!
//! Seeds: stage `s` draws from `seed::derive(config.seed, s)`.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha512};

use crate::analyze::{classify_duplicates, classify_equivalent_voting, mutation_score, DuplicateGroups, Equivalence};
use crate::bench::BenchBundle;
use crate::build::{compile_all, compiled_share, detect_trivial, original_records, read_ledger, sha512_hex, write_ledger, HashRecord, TrivialOutcome};
use crate::config::{Mode, ProjectConfig};
use crate::coverage::{parse_coverage_line, read_coverage_matrix, write_coverage_line, write_coverage_matrix, CoverageIndex, CoverageVector};
use crate::error::{Error, Result};
use crate::exec::{read_tests, run_all, run_mutant, savings_report, write_tests, ExecutionVerdict, ProcessExecutor, Savings, TestExecutor, TestSuite};
use crate::mutator::{generate_mutants, parse_unit, read_manifest, write_manifest, Mutant, MutantStatus, MutationOperator, SourceUnit};
use crate::prioritize::prioritize_and_reduce;
use crate::report::{count_classes, render_summary, AnalysisReport, Classification, SamplingSummary, StageNote};
use crate::sampler::{fsci_loop, fsci_with_reduced_suite, sample_fixed, sample_proportional, shuffled, SamplingConfig, Strategy};
use crate::seed;
use crate::stats::clopper_pearson;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Mutate,
    Compile,
    Dedup,
    Sample,
    Run,
    Analyze,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Mutate,
        Stage::Compile,
        Stage::Dedup,
        Stage::Sample,
        Stage::Run,
        Stage::Analyze,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Mutate => "mutate",
            Stage::Compile => "compile",
            Stage::Dedup => "dedup",
            Stage::Sample => "sample",
            Stage::Run => "run",
            Stage::Analyze => "analyze",
            Stage::Report => "report",
        }
    }

    pub fn dir_name(self) -> String {
        format!("{:02}-{}", self as usize + 1, self.name())
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidArguments(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub input_digest: String,
    pub skipped: bool,
    pub notice: Option<String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub executed: Vec<Stage>,
    pub reused: Vec<Stage>,
    pub report: Option<AnalysisReport>,
}

/// Mutant-level data written by the sampling and run stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SampleEntry {
    mutant: String,
    killed: Option<bool>,
    interval: Option<crate::stats::ConfidenceInterval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SamplingRecord {
    summary: SamplingSummary,
    excluded: Vec<String>,
    uncovered: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AnalysisRecord {
    equivalence: Equivalence,
    duplicates: DuplicateGroups,
    mutation_score: Option<f64>,
}

struct Ctx<'a> {
    cfg: &'a ProjectConfig,
}

impl Ctx<'_> {
    fn dir(&self, stage: Stage) -> PathBuf {
        self.cfg.workspace.join(stage.dir_name())
    }

    fn seed(&self, label: &str) -> u64 {
        seed::derive(self.cfg.seed, label)
    }

    fn stage_err(&self, stage: Stage, e: impl fmt::Display) -> Error {
        Error::Stage {
            stage: stage.name().into(),
            path: self.dir(stage),
            message: e.to_string(),
        }
    }

    fn bundle(&self) -> Result<BenchBundle> {
        let b = self.cfg.bench.as_ref().ok_or_else(|| Error::Config("no [bench] bundle".into()))?;
        BenchBundle::read(&b.bundle)
    }

    fn suite(&self) -> Result<TestSuite> {
        read_tests(&self.dir(Stage::Mutate).join("tests.tsv"))
    }

    fn original(&self) -> Result<CoverageIndex> {
        Ok(CoverageIndex::new(read_coverage_matrix(&self.dir(Stage::Mutate).join("coverage.tsv"))?))
    }

    fn units(&self) -> Result<BTreeMap<String, SourceUnit>> {
        let mut out = BTreeMap::new();
        for (rel, path) in source_files(self.cfg)? {
            let text = std::fs::read_to_string(path)?;
            let unit = parse_unit(&text, &rel)?;
            out.insert(rel, unit);
        }
        Ok(out)
    }

    fn executor(&self) -> Result<Box<dyn TestExecutor>> {
        match self.cfg.mode {
            Mode::Simulated => Ok(Box::new(self.bundle()?.executor())),
            Mode::Process => {
                let level = read_json::<Vec<String>>(&self.dir(Stage::Compile).join("levels.json"))?
                    .into_iter()
                    .next()
                    .ok_or_else(|| Error::Executor("no usable optimization level".into()))?;
                let tests = self.cfg.tests.as_ref().expect("validated");
                let mut ex = ProcessExecutor::new(self.dir(Stage::Compile).join("archive").join(level));
                ex.env_passthrough = tests.env_passthrough.clone();
                ex.workdir = self.cfg.build_profile().map(|p| p.workdir);
                ex.coverage_command = tests.coverage_command.clone();
                ex.coverage_repeats = self.cfg.analysis.coverage_repeats;
                ex.units = self.units()?.into_iter().map(|(k, v)| (k, Arc::new(v))).collect();
                Ok(Box::new(ex))
            }
        }
    }

    /// Test orders for one mutant: (reduced or chosen order, full order).
    fn orders(&self, m: &Mutant, idx: &CoverageIndex) -> Result<(Vec<String>, Vec<String>)> {
        let covering = idx.covered_tests(m);
        let original: Vec<String> = covering.iter().cloned().collect();
        if !self.cfg.analysis.prioritize || covering.is_empty() {
            return Ok((original.clone(), original));
        }
        let reduced = prioritize_and_reduce(m, &covering, idx, self.cfg.analysis.metric, self.seed("prioritize"))?;
        let chosen: BTreeSet<&String> = reduced.iter().collect();
        let mut full = reduced.clone();
        full.extend(original.iter().filter(|t| !chosen.contains(t)).cloned());
        Ok((reduced, full))
    }
}

/// Source files to mutate, keyed by their path relative to the sources root.
fn source_files(cfg: &ProjectConfig) -> Result<BTreeMap<String, PathBuf>> {
    let Some(src) = &cfg.sources else {
        return Ok(BTreeMap::new());
    };
    let mut files: Vec<PathBuf> = src.files.clone();
    if files.is_empty() {
        for e in walkdir::WalkDir::new(&src.root).sort_by_file_name() {
            let e = e.map_err(|e| Error::Io(e.into()))?;
            if e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "c") {
                files.push(e.path().strip_prefix(&src.root).expect("below root").to_path_buf());
            }
        }
    }
    Ok(files
        .into_iter()
        .map(|f| (f.to_string_lossy().replace('\\', "/"), src.root.join(f)))
        .collect())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(std::fs::File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Format {
            path: path.display().to_string(),
            line: n + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

fn write_mutant_coverage(path: &Path, verdicts: &[ExecutionVerdict]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# context\ttest\tfile\tstatement:count ...")?;
    for v in verdicts {
        for c in &v.coverage {
            write_coverage_line(&mut w, c)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_mutant_coverage(path: &Path) -> Result<BTreeMap<String, Vec<CoverageVector>>> {
    let mut out: BTreeMap<String, Vec<CoverageVector>> = BTreeMap::new();
    for (n, line) in BufReader::new(std::fs::File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let v = parse_coverage_line(&line).map_err(|message| Error::Format {
            path: path.display().to_string(),
            line: n + 1,
            message,
        })?;
        if let Some(m) = v.mutant.clone() {
            out.entry(m).or_default().push(v);
        }
    }
    Ok(out)
}

fn file_digest(path: &Path) -> Result<String> {
    Ok(sha512_hex(&std::fs::read(path)?))
}

/// Digest of every regular file below `path` (or of `path` itself).
fn tree_digest(path: &Path) -> Result<String> {
    let mut h = Sha512::new();
    if path.is_file() {
        h.update(std::fs::read(path)?);
    } else {
        for e in walkdir::WalkDir::new(path).sort_by_file_name() {
            let e = e.map_err(|e| Error::Io(e.into()))?;
            if e.file_type().is_file() {
                h.update(e.path().strip_prefix(path).unwrap_or(e.path()).to_string_lossy().as_bytes());
                h.update([0]);
                h.update(std::fs::read(e.path())?);
            }
        }
    }
    Ok(hex::encode(h.finalize()))
}

fn stage_inputs(cfg: &ProjectConfig, stage: Stage) -> Result<serde_json::Value> {
    use serde_json::json;
    let a = &cfg.analysis;
    Ok(match stage {
        Stage::Mutate => {
            let mut external: BTreeMap<String, String> = BTreeMap::new();
            if let Some(b) = &cfg.bench {
                external.insert("bench".into(), tree_digest(&b.bundle)?);
            }
            for (rel, path) in source_files(cfg)? {
                external.insert(format!("source:{rel}"), file_digest(&path)?);
            }
            if let Some(t) = &cfg.tests {
                external.insert("tests".into(), tree_digest(&t.manifest)?);
            }
            if let Some(c) = &cfg.coverage {
                external.insert("coverage".into(), tree_digest(&c.matrix)?);
            }
            json!({"mode": cfg.mode, "sources": cfg.sources, "external": external})
        }
        Stage::Compile => json!({"build": cfg.build}),
        Stage::Dedup => json!({}),
        Stage::Sample => json!({
            "seed": cfg.seed, "sampling": cfg.sampling, "prioritize": a.prioritize, "metric": a.metric,
            "tests": cfg.tests, "coverage_repeats": a.coverage_repeats,
        }),
        Stage::Run => json!({
            "seed": cfg.seed, "prioritize": a.prioritize, "metric": a.metric, "baseline": a.baseline,
            "coverage_repeats": a.coverage_repeats,
        }),
        Stage::Analyze => json!({
            "metric": a.metric, "t_e": a.t_e, "t_d": a.t_d, "discard": a.discard_duplicates, "votes": a.coverage_votes,
        }),
        Stage::Report => json!({"seed": cfg.seed}),
    })
}

fn input_digest(cfg: &ProjectConfig, stage: Stage, previous: Option<&StageRecord>) -> Result<String> {
    let mut h = Sha512::new();
    h.update(stage.name().as_bytes());
    h.update(serde_json::to_vec(&stage_inputs(cfg, stage)?)?);
    if let Some(p) = previous {
        h.update(serde_json::to_vec(p)?);
    }
    Ok(hex::encode(h.finalize()))
}

fn reusable(dir: &Path, digest: &str) -> Option<StageRecord> {
    let record: StageRecord = read_json(&dir.join("stage.json")).ok()?;
    if record.input_digest != digest {
        return None;
    }
    for (name, d) in &record.outputs {
        if file_digest(&dir.join(name)).ok()? != *d {
            return None;
        }
    }
    Some(record)
}

/// Runs stages in order up to and including `until`. Completed stages whose
/// inputs are unchanged are reused unless `force` is set.
pub fn run_pipeline(cfg: &ProjectConfig, until: Stage, force: bool) -> Result<RunSummary> {
    cfg.validate()?;
    let ctx = Ctx { cfg };
    std::fs::create_dir_all(&cfg.workspace)?;
    let mut summary = RunSummary::default();
    let mut previous: Option<StageRecord> = None;
    for stage in Stage::ALL.into_iter().filter(|s| *s <= until) {
        let dir = ctx.dir(stage);
        let digest = input_digest(cfg, stage, previous.as_ref()).map_err(|e| ctx.stage_err(stage, e))?;
        if !force {
            if let Some(record) = reusable(&dir, &digest) {
                log::info!("{stage}: up to date, reusing {}", dir.display());
                summary.reused.push(stage);
                previous = Some(record);
                continue;
            }
        }
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|e| ctx.stage_err(stage, e))?;
        }
        std::fs::create_dir_all(&dir).map_err(|e| ctx.stage_err(stage, e))?;
        log::info!("{stage}: running");
        let notice = run_stage(&ctx, stage, &dir).map_err(|e| match e {
            e @ (Error::Stage { .. } | Error::Config(_)) => e,
            e => ctx.stage_err(stage, e),
        })?;
        if let Some(n) = &notice {
            log::info!("{stage}: skipped: {n}");
        }
        let mut outputs = BTreeMap::new();
        for e in std::fs::read_dir(&dir)? {
            let e = e?;
            if e.file_type()?.is_file() {
                let name = e.file_name().to_string_lossy().into_owned();
                outputs.insert(name, file_digest(&e.path())?);
            }
        }
        let record = StageRecord {
            stage: stage.name().into(),
            input_digest: digest,
            skipped: notice.is_some(),
            notice,
            outputs,
        };
        write_json(&dir.join("stage.json"), &record)?;
        summary.executed.push(stage);
        previous = Some(record);
    }
    if until == Stage::Report {
        summary.report = Some(read_json(&ctx.dir(Stage::Report).join("report.json"))?);
    }
    Ok(summary)
}

fn run_stage(ctx: &Ctx, stage: Stage, dir: &Path) -> Result<Option<String>> {
    match stage {
        Stage::Mutate => stage_mutate(ctx, dir).map(|_| None),
        Stage::Compile => stage_compile(ctx, dir),
        Stage::Dedup => stage_dedup(ctx, dir),
        Stage::Sample => stage_sample(ctx, dir).map(|_| None),
        Stage::Run => stage_run(ctx, dir).map(|_| None),
        Stage::Analyze => stage_analyze(ctx, dir).map(|_| None),
        Stage::Report => stage_report(ctx, dir).map(|_| None),
    }
}

fn stage_mutate(ctx: &Ctx, dir: &Path) -> Result<()> {
    match ctx.cfg.mode {
        Mode::Simulated => {
            let b = ctx.bundle()?;
            write_manifest(&dir.join("mutants.jsonl"), &b.mutants)?;
            write_tests(&dir.join("tests.tsv"), &b.tests)?;
            write_coverage_matrix(&dir.join("coverage.tsv"), &b.coverage)?;
        }
        Mode::Process => {
            let src = ctx.cfg.sources.as_ref().expect("validated");
            let tests = read_tests(&ctx.cfg.tests.as_ref().expect("validated").manifest)?;
            let coverage = read_coverage_matrix(&ctx.cfg.coverage.as_ref().expect("validated").matrix)?;
            let idx = CoverageIndex::new(coverage.iter().cloned());
            let ops: BTreeSet<MutationOperator> = match &src.operators {
                Some(ops) => ops.iter().copied().collect(),
                None => MutationOperator::all(),
            };
            let mut mutants = Vec::new();
            for (file, unit) in ctx.units()? {
                let covered = src.gate_on_coverage.then(|| idx.covered_statements(&file));
                mutants.extend(generate_mutants(&unit, &ops, covered.as_ref()));
            }
            write_manifest(&dir.join("mutants.jsonl"), &mutants)?;
            write_tests(&dir.join("tests.tsv"), &tests)?;
            write_coverage_matrix(&dir.join("coverage.tsv"), &coverage)?;
        }
    }
    Ok(())
}

fn stage_compile(ctx: &Ctx, dir: &Path) -> Result<Option<String>> {
    let mut mutants = read_manifest(&ctx.dir(Stage::Mutate).join("mutants.jsonl"))?;
    let Some(profile) = ctx.cfg.build_profile() else {
        for m in &mut mutants {
            m.advance(MutantStatus::Compiled)?;
        }
        write_manifest(&dir.join("mutants.jsonl"), &mutants)?;
        return Ok(Some("no build profile; every mutant is treated as compiled".into()));
    };
    let (originals, excluded) = original_records(&profile)?;
    let levels: Vec<String> = profile.levels.iter().filter(|l| !excluded.contains(l)).cloned().collect();
    let jobs = ctx.cfg.build.as_ref().map_or(1, |b| b.jobs);
    let units = ctx.units()?;
    let records = compile_all(&profile, &units, &mutants, &levels, jobs, Some(&dir.join("archive")))?;
    let failed: BTreeSet<&str> = records.iter().filter(|r| !r.build_ok).map(|r| r.mutant.as_str()).collect();
    for m in &mut mutants {
        let next = if failed.contains(m.id.as_str()) { MutantStatus::CompileFailed } else { MutantStatus::Compiled };
        m.advance(next)?;
    }
    let mut ledger = originals;
    ledger.extend(records);
    write_ledger(&dir.join("hashes.jsonl"), &ledger)?;
    write_json(&dir.join("levels.json"), &levels)?;
    write_json(&dir.join("excluded_levels.json"), &excluded)?;
    write_manifest(&dir.join("mutants.jsonl"), &mutants)?;
    Ok(None)
}

fn stage_dedup(ctx: &Ctx, dir: &Path) -> Result<Option<String>> {
    let mut mutants = read_manifest(&ctx.dir(Stage::Compile).join("mutants.jsonl"))?;
    let ledger = ctx.dir(Stage::Compile).join("hashes.jsonl");
    if !ledger.exists() {
        write_manifest(&dir.join("mutants.jsonl"), &mutants)?;
        return Ok(Some("no hash ledger; trivial equivalence and duplication not checked".into()));
    }
    let records: Vec<HashRecord> = read_ledger(&ledger)?;
    let trivial = detect_trivial(&records)?;
    for m in &mut mutants {
        if m.status != MutantStatus::Compiled {
            continue;
        }
        if trivial.equivalent.contains(&m.id) {
            m.advance(MutantStatus::TriviallyEquivalent)?;
        } else if trivial.duplicates.contains(&m.id) {
            m.advance(MutantStatus::TriviallyDuplicate)?;
        }
    }
    write_json(&dir.join("trivial.json"), &trivial)?;
    write_json(&dir.join("compiled_share.json"), &compiled_share(&records))?;
    write_manifest(&dir.join("mutants.jsonl"), &mutants)?;
    Ok(None)
}

fn stage_sample(ctx: &Ctx, dir: &Path) -> Result<()> {
    let mutants = read_manifest(&ctx.dir(Stage::Dedup).join("mutants.jsonl"))?;
    let idx = ctx.original()?;
    let (unique, uncovered): (Vec<Mutant>, Vec<Mutant>) = mutants
        .into_iter()
        .filter(|m| m.status == MutantStatus::Compiled)
        .partition(|m| !idx.covered_tests(m).is_empty());
    let mut cfg: SamplingConfig = ctx.cfg.sampling.clone();
    cfg.seed = ctx.seed("sample");

    let mut entries = Vec::new();
    let mut verdicts: Vec<ExecutionVerdict> = Vec::new();
    let mut excluded = Vec::new();
    let summary = match cfg.strategy {
        Strategy::ProportionalUniform | Strategy::ProportionalMethod | Strategy::FixedSize => {
            let chosen = match cfg.strategy {
                Strategy::FixedSize => sample_fixed(&unique, cfg.fixed_size, cfg.seed),
                s => sample_proportional(&unique, cfg.ratio, s == Strategy::ProportionalMethod, cfg.seed),
            };
            entries.extend(chosen.iter().map(|m| SampleEntry {
                mutant: m.id.clone(),
                killed: None,
                interval: None,
            }));
            SamplingSummary {
                strategy: cfg.strategy,
                population: unique.len(),
                tested: chosen.len(),
                estimate: None,
                interval: None,
                converged: None,
                used_full_suite: None,
                kill_error: None,
            }
        }
        Strategy::Fsci => {
            let tests = ctx.suite()?;
            let executor = ctx.executor()?;
            let population = shuffled(&unique, cfg.seed);
            let orders: BTreeMap<&str, (Vec<String>, Vec<String>)> = population
                .iter()
                .map(|m| Ok((m.id.as_str(), ctx.orders(m, &idx)?)))
                .collect::<Result<_>>()?;
            let full_runs: RefCell<BTreeMap<String, ExecutionVerdict>> = RefCell::default();
            let reduced_runs: RefCell<BTreeMap<String, ExecutionVerdict>> = RefCell::default();
            let run = |m: &Mutant, full: bool| -> Option<bool> {
                let (reduced, all) = &orders[m.id.as_str()];
                let v = run_mutant(m, if full { all } else { reduced }, &tests, executor.as_ref());
                let killed = (!v.inconclusive).then_some(v.killed);
                let store = if full { &full_runs } else { &reduced_runs };
                store.borrow_mut().insert(m.id.clone(), v);
                killed
            };
            let (outcome, used_full, kill_error) = if ctx.cfg.analysis.prioritize {
                let r = fsci_with_reduced_suite(&population, |m| run(m, true), |m| run(m, false), &cfg)?;
                let tallied: BTreeSet<&str> = r.outcome.sampled.iter().map(|(m, _)| m.id.as_str()).collect();
                let calibration = population.iter().take(cfg.calibration_size);
                excluded.extend(
                    calibration
                        .filter(|m| !tallied.contains(m.id.as_str()) && full_runs.borrow().contains_key(&m.id))
                        .filter(|m| reduced_runs.borrow().get(&m.id).is_some_and(|v| !v.inconclusive))
                        .filter(|m| full_runs.borrow().get(&m.id).is_some_and(|v| !v.inconclusive))
                        .map(|m| m.id.clone()),
                );
                (r.outcome, r.used_full_suite, Some(r.kerr))
            } else {
                (fsci_loop(population.iter().cloned(), |m| run(m, true), &cfg, None)?, true, None)
            };
            for (step, (m, killed)) in outcome.trace.iter().zip(&outcome.sampled) {
                entries.push(SampleEntry {
                    mutant: m.id.clone(),
                    killed: Some(*killed),
                    interval: Some(step.interval),
                });
                let source = if used_full || !reduced_runs.borrow().contains_key(&m.id) { &full_runs } else { &reduced_runs };
                verdicts.push(source.borrow()[&m.id].clone());
            }
            let tallied: BTreeSet<&str> = entries.iter().map(|e| e.mutant.as_str()).collect();
            for m in &population {
                if tallied.contains(m.id.as_str()) || excluded.contains(&m.id) {
                    continue;
                }
                let inconclusive = [&full_runs, &reduced_runs]
                    .iter()
                    .any(|r| r.borrow().get(&m.id).is_some_and(|v| v.inconclusive));
                if inconclusive {
                    verdicts.push(ExecutionVerdict {
                        inconclusive: true,
                        ..run_placeholder(&m.id)
                    });
                }
            }
            SamplingSummary {
                strategy: cfg.strategy,
                population: unique.len(),
                tested: outcome.sampled.len(),
                estimate: outcome.estimate(),
                interval: Some(outcome.interval),
                converged: Some(outcome.converged),
                used_full_suite: Some(used_full),
                kill_error,
            }
        }
    };
    write_jsonl(&dir.join("sample.jsonl"), &entries)?;
    write_json(
        &dir.join("sampling.json"),
        &SamplingRecord {
            summary,
            excluded,
            uncovered: uncovered.iter().map(|m| m.id.clone()).collect(),
        },
    )?;
    if cfg.strategy == Strategy::Fsci {
        write_jsonl(&dir.join("verdicts.jsonl"), &verdicts)?;
        write_mutant_coverage(&dir.join("mutant_coverage.tsv"), &verdicts)?;
    }
    Ok(())
}

fn run_placeholder(id: &str) -> ExecutionVerdict {
    ExecutionVerdict {
        mutant: id.into(),
        killed: false,
        killing_test: None,
        tests_run: 0,
        wall_time: 0.0,
        timeout_kills: 0,
        inconclusive: false,
        coverage: Vec::new(),
    }
}

fn stage_run(ctx: &Ctx, dir: &Path) -> Result<()> {
    let sample_dir = ctx.dir(Stage::Sample);
    let mutants: BTreeMap<String, Mutant> = read_manifest(&ctx.dir(Stage::Dedup).join("mutants.jsonl"))?
        .into_iter()
        .map(|m| (m.id.clone(), m))
        .collect();
    let entries: Vec<SampleEntry> = read_jsonl(&sample_dir.join("sample.jsonl"))?;
    let idx = ctx.original()?;
    let tests = ctx.suite()?;
    let jobs = ctx.cfg.analysis.jobs;
    let executor = ctx.executor()?;

    let verdicts: Vec<ExecutionVerdict> = if sample_dir.join("verdicts.jsonl").exists() {
        let mut coverage = read_mutant_coverage(&sample_dir.join("mutant_coverage.tsv"))?;
        let mut vs: Vec<ExecutionVerdict> = read_jsonl(&sample_dir.join("verdicts.jsonl"))?;
        for v in &mut vs {
            v.coverage = coverage.remove(&v.mutant).unwrap_or_default();
        }
        vs
    } else {
        let work = entries
            .iter()
            .map(|e| {
                let m = mutants[&e.mutant].clone();
                let order = ctx.orders(&m, &idx)?.0;
                Ok((m, order))
            })
            .collect::<Result<Vec<_>>>()?;
        run_all(&work, &tests, executor.as_ref(), jobs)?
    };

    if ctx.cfg.analysis.baseline {
        let executed: Vec<&ExecutionVerdict> = verdicts.iter().filter(|v| !v.inconclusive).collect();
        let work: Vec<(Mutant, Vec<String>)> = executed
            .iter()
            .map(|v| {
                let m = mutants[&v.mutant].clone();
                let order: Vec<String> = idx.covered_tests(&m).into_iter().collect();
                (m, order)
            })
            .collect();
        let baseline = run_all(&work, &tests, executor.as_ref(), jobs)?;
        let mine: Vec<ExecutionVerdict> = executed.into_iter().cloned().collect();
        write_jsonl(&dir.join("baseline.jsonl"), &baseline)?;
        write_json(&dir.join("savings.json"), &savings_report(&mine, &baseline))?;
    }
    write_jsonl(&dir.join("verdicts.jsonl"), &verdicts)?;
    write_mutant_coverage(&dir.join("mutant_coverage.tsv"), &verdicts)?;
    Ok(())
}

fn stage_analyze(ctx: &Ctx, dir: &Path) -> Result<()> {
    let run_dir = ctx.dir(Stage::Run);
    let mutants: BTreeMap<String, Mutant> = read_manifest(&ctx.dir(Stage::Dedup).join("mutants.jsonl"))?
        .into_iter()
        .map(|m| (m.id.clone(), m))
        .collect();
    let verdicts: Vec<ExecutionVerdict> = read_jsonl(&run_dir.join("verdicts.jsonl"))?;
    let coverage = read_mutant_coverage(&run_dir.join("mutant_coverage.tsv"))?;
    let idx = ctx.original()?;
    let a = &ctx.cfg.analysis;

    let executed: Vec<&ExecutionVerdict> = verdicts.iter().filter(|v| !v.inconclusive).collect();
    let live: Vec<&Mutant> = executed.iter().filter(|v| !v.killed).map(|v| &mutants[&v.mutant]).collect();
    let equivalence = classify_equivalent_voting(live, &idx, &coverage, a.metric, a.t_e, a.coverage_votes);

    let candidates: Vec<(&Mutant, &ExecutionVerdict)> = executed
        .iter()
        .filter(|v| v.killed || !equivalence.likely_equivalent.contains(&v.mutant))
        .map(|v| (&mutants[&v.mutant], *v))
        .collect();
    let duplicates = classify_duplicates(&candidates, &coverage, a.metric, a.t_d);
    let dups = duplicates.duplicates();
    let counted = |pred: &dyn Fn(&ExecutionVerdict) -> bool| -> u64 {
        candidates
            .iter()
            .filter(|(_, v)| pred(v) && !(a.discard_duplicates && dups.contains(&v.mutant)))
            .count() as u64
    };
    let killed = counted(&|v| v.killed);
    let live_ne = counted(&|v| !v.killed);
    write_json(
        &dir.join("analysis.json"),
        &AnalysisRecord {
            equivalence,
            duplicates,
            mutation_score: mutation_score(killed, live_ne).ok(),
        },
    )?;
    Ok(())
}

fn stage_report(ctx: &Ctx, dir: &Path) -> Result<()> {
    let cfg = ctx.cfg;
    let mutate = read_manifest(&ctx.dir(Stage::Mutate).join("mutants.jsonl"))?;
    let deduped: BTreeMap<String, Mutant> = read_manifest(&ctx.dir(Stage::Dedup).join("mutants.jsonl"))?
        .into_iter()
        .map(|m| (m.id.clone(), m))
        .collect();
    let sampling: SamplingRecord = read_json(&ctx.dir(Stage::Sample).join("sampling.json"))?;
    let verdicts: Vec<ExecutionVerdict> = read_jsonl(&ctx.dir(Stage::Run).join("verdicts.jsonl"))?;
    let analysis: AnalysisRecord = read_json(&ctx.dir(Stage::Analyze).join("analysis.json"))?;
    let savings: Option<Savings> = read_json(&ctx.dir(Stage::Run).join("savings.json")).ok();
    let compiled_share: Option<f64> = read_json(&ctx.dir(Stage::Dedup).join("compiled_share.json")).ok();
    let excluded_levels: Vec<String> = read_json(&ctx.dir(Stage::Compile).join("excluded_levels.json")).unwrap_or_default();

    let verdict: BTreeMap<&str, &ExecutionVerdict> = verdicts.iter().map(|v| (v.mutant.as_str(), v)).collect();
    let excluded: BTreeSet<&str> = sampling.excluded.iter().map(String::as_str).collect();
    let uncovered: BTreeSet<&str> = sampling.uncovered.iter().map(String::as_str).collect();
    let dups = analysis.duplicates.duplicates();
    let mut classes = BTreeMap::new();
    for m in &mutate {
        let status = deduped.get(&m.id).map_or(m.status, |d| d.status);
        let id = m.id.as_str();
        let class = match status {
            MutantStatus::CompileFailed => Classification::CompileFailed,
            MutantStatus::TriviallyEquivalent => Classification::TriviallyEquivalent,
            MutantStatus::TriviallyDuplicate => Classification::TriviallyDuplicate,
            _ if uncovered.contains(id) => Classification::Uncovered,
            _ if excluded.contains(id) => Classification::CalibrationExcluded,
            _ => match verdict.get(id) {
                None => Classification::NotSampled,
                Some(v) if v.inconclusive => Classification::Inconclusive,
                Some(_) if cfg.analysis.discard_duplicates && dups.contains(id) => Classification::Duplicate,
                Some(v) if v.killed => Classification::Killed,
                Some(_) if analysis.equivalence.nonequivalent.contains(id) => Classification::LiveNonequivalent,
                Some(_) if analysis.equivalence.likely_equivalent.contains(id) => Classification::LikelyEquivalent,
                Some(_) => Classification::Unclassified,
            },
        };
        classes.insert(m.id.clone(), class);
    }

    let mut summary = sampling.summary;
    let tested = verdicts.iter().filter(|v| !v.inconclusive).count() as u64;
    let kills = verdicts.iter().filter(|v| !v.inconclusive && v.killed).count() as u64;
    if summary.interval.is_none() && tested > 0 {
        summary.estimate = Some(kills as f64 / tested as f64);
        summary.interval = Some(clopper_pearson(kills, tested, cfg.sampling.level)?);
    }
    let mut stages = Vec::new();
    for st in Stage::ALL.into_iter().filter(|s| *s < Stage::Report) {
        let r: StageRecord = read_json(&ctx.dir(st).join("stage.json"))?;
        stages.push(StageNote {
            stage: r.stage,
            skipped: r.skipped,
            notice: r.notice,
        });
    }
    let report = AnalysisReport {
        seed: cfg.seed,
        metric: cfg.analysis.metric,
        t_e: cfg.analysis.t_e,
        t_d: cfg.analysis.t_d,
        duplicates_discarded: cfg.analysis.discard_duplicates,
        mutation_score: analysis.mutation_score,
        sampling: summary,
        counts: count_classes(&classes),
        compiled_share,
        excluded_levels,
        savings,
        duplicate_groups: analysis.duplicates.groups.into_iter().filter(|g| g.len() > 1).collect(),
        stages,
        mutants: classes,
    };
    std::fs::write(dir.join("report.json"), report.to_json()?)?;
    std::fs::write(dir.join("summary.txt"), render_summary(&report))?;
    Ok(())
}

/// Trivial-dedup outcome persisted by the dedup stage, if any.
pub fn load_trivial(workspace: &Path) -> Result<Option<TrivialOutcome>> {
    let p = workspace.join(Stage::Dedup.dir_name()).join("trivial.json");
    if p.exists() {
        Ok(Some(read_json(&p)?))
    } else {
        Ok(None)
    }
}
