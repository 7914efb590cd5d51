//! Mutant compilation and hash-based detection of trivially equivalent and
//! duplicate mutants.
//!
//! Each mutant is compiled in place: the source file is backed up, replaced
//! by the mutated text, the project build command runs, the executable is
//! hashed and archived, and the original text is written back. Rewriting
//! (rather than renaming) the original gives it a fresh mtime so the next
//! incremental build recompiles it.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha512};

use crate::analyze::UnionFind;
use crate::error::{Error, Result};
use crate::exec::executable_name;
use crate::mutator::{render_mutant, Mutant, SourceUnit};

/// Mutant id used for records of the unmutated program.
pub const ORIGINAL: &str = "ORIGINAL";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildProfile {
    /// Shell command run in `workdir`; `{level}` is replaced by the level label.
    pub command: String,
    /// Executable produced by the command, relative to `workdir`.
    pub artifact: PathBuf,
    pub levels: Vec<String>,
    pub workdir: PathBuf,
}

impl BuildProfile {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::InvalidProfile("no optimization levels".into()));
        }
        let unique: BTreeSet<&String> = self.levels.iter().collect();
        if unique.len() != self.levels.len() {
            return Err(Error::InvalidProfile("duplicate optimization level".into()));
        }
        if self.command.trim().is_empty() {
            return Err(Error::InvalidProfile("empty build command".into()));
        }
        Ok(())
    }

    fn in_workdir(&self, workdir: &Path) -> BuildProfile {
        BuildProfile {
            workdir: workdir.to_path_buf(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashRecord {
    pub mutant: String,
    /// Source file of the mutant; empty for [`ORIGINAL`].
    pub file: String,
    pub level: String,
    /// Lowercase hex SHA-512 of the executable; present iff `build_ok`.
    pub digest: Option<String>,
    pub build_ok: bool,
}

pub fn sha512_hex(bytes: &[u8]) -> String {
    hex::encode(Sha512::digest(bytes))
}

fn build(profile: &BuildProfile, level: &str) -> Result<Option<String>> {
    let status = Command::new("sh")
        .arg("-c")
        .arg(profile.command.replace("{level}", level))
        .current_dir(&profile.workdir)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()?;
    if !status.success() {
        return Ok(None);
    }
    let artifact = profile.workdir.join(&profile.artifact);
    match std::fs::read(&artifact) {
        Ok(bytes) => Ok(Some(sha512_hex(&bytes))),
        Err(e) => {
            log::warn!("build at {level} succeeded but {} is unreadable: {e}", artifact.display());
            Ok(None)
        }
    }
}

/// Builds the unmutated tree at `level`.
pub fn compile_original(profile: &BuildProfile, level: &str) -> Result<HashRecord> {
    let digest = build(profile, level)?;
    Ok(HashRecord {
        mutant: ORIGINAL.into(),
        file: String::new(),
        level: level.into(),
        build_ok: digest.is_some(),
        digest,
    })
}

/// Builds the original twice per level. Levels whose two digests differ, or
/// that fail to build, are returned as excluded.
pub fn original_records(profile: &BuildProfile) -> Result<(Vec<HashRecord>, Vec<String>)> {
    let mut records = Vec::new();
    let mut excluded = Vec::new();
    for level in &profile.levels {
        let first = compile_original(profile, level)?;
        let second = compile_original(profile, level)?;
        if !first.build_ok {
            return Err(Error::InvalidProfile(format!("original program does not build at {level}")));
        }
        if first.digest != second.digest {
            log::warn!("level {level} produces non-reproducible executables; excluded");
            excluded.push(level.clone());
            continue;
        }
        records.push(first);
    }
    Ok((records, excluded))
}

/// Compiles one mutant at one level and restores the source file whatever
/// the outcome. The executable is copied to `archive/<level>/` on success.
pub fn compile_mutant(
    profile: &BuildProfile,
    unit: &SourceUnit,
    mutant: &Mutant,
    level: &str,
    archive: Option<&Path>,
) -> Result<HashRecord> {
    let source = profile.workdir.join(&mutant.file);
    let original = std::fs::read(&source).map_err(|_| Error::MissingOriginal(source.display().to_string()))?;
    let mutated = render_mutant(unit, mutant)?;
    let backup = backup_path(&source);
    std::fs::write(&backup, &original)?;

    let outcome = std::fs::write(&source, mutated.as_bytes())
        .map_err(Error::from)
        .and_then(|_| build(profile, level));

    std::fs::write(&source, &original).map_err(|e| Error::Restore {
        path: source.clone(),
        source: e,
    })?;
    let _ = std::fs::remove_file(&backup);

    let digest = outcome?;
    if let (Some(dir), Some(_)) = (archive, &digest) {
        let dir = dir.join(level);
        std::fs::create_dir_all(&dir)?;
        std::fs::copy(profile.workdir.join(&profile.artifact), dir.join(executable_name(&mutant.id)))?;
    }
    Ok(HashRecord {
        mutant: mutant.id.clone(),
        file: mutant.file.clone(),
        level: level.into(),
        build_ok: digest.is_some(),
        digest,
    })
}

fn backup_path(source: &Path) -> PathBuf {
    let mut name = source.file_name().unwrap_or_default().to_os_string();
    name.push(".orig");
    source.with_file_name(name)
}

/// Compiles every mutant at every level of `levels`. With `jobs > 1` the
/// mutants are dealt round-robin to workers, each building in its own copy
/// of the workdir. Records come back in (mutant, level) input order.
pub fn compile_all(
    profile: &BuildProfile,
    units: &BTreeMap<String, SourceUnit>,
    mutants: &[Mutant],
    levels: &[String],
    jobs: usize,
    archive: Option<&Path>,
) -> Result<Vec<HashRecord>> {
    let jobs = jobs.max(1).min(mutants.len().max(1));
    let run = |profile: &BuildProfile, idx: &[usize]| -> Result<Vec<(usize, Vec<HashRecord>)>> {
        let mut out = Vec::with_capacity(idx.len());
        for &i in idx {
            let m = &mutants[i];
            let unit = units
                .get(&m.file)
                .ok_or_else(|| Error::MissingOriginal(format!("no parsed unit for {}", m.file)))?;
            let records = levels
                .iter()
                .map(|level| compile_mutant(profile, unit, m, level, archive))
                .collect::<Result<Vec<_>>>()?;
            out.push((i, records));
        }
        Ok(out)
    };
    if jobs == 1 {
        let all: Vec<usize> = (0..mutants.len()).collect();
        return Ok(run(profile, &all)?.into_iter().flat_map(|(_, r)| r).collect());
    }
    let chunks: Vec<Vec<usize>> = (0..jobs).map(|w| (w..mutants.len()).step_by(jobs).collect()).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Executor(e.to_string()))?;
    let results: Vec<Result<Vec<(usize, Vec<HashRecord>)>>> = pool.install(|| {
        chunks
            .par_iter()
            .map(|idx| {
                let dir = tempfile::Builder::new().prefix("mutscope-build").tempdir()?;
                copy_tree(&profile.workdir, dir.path())?;
                run(&profile.in_workdir(dir.path()), idx)
            })
            .collect()
    });
    let mut merged = Vec::new();
    for r in results {
        merged.extend(r?);
    }
    merged.sort_by_key(|(i, _)| *i);
    Ok(merged.into_iter().flat_map(|(_, r)| r).collect())
}

/// Recursive copy preserving relative layout.
pub fn copy_tree(from: &Path, to: &Path) -> Result<()> {
    for entry in walkdir::WalkDir::new(from) {
        let entry = entry.map_err(|e| Error::Io(e.into()))?;
        let rel = entry.path().strip_prefix(from).expect("walkdir yields children");
        let dest = to.join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&dest)?;
        } else if entry.file_type().is_file() {
            std::fs::copy(entry.path(), &dest)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrivialOutcome {
    pub equivalent: BTreeSet<String>,
    /// Sorted classes of the same-file digest-sharing relation with two or
    /// more members. Trivially equivalent mutants may appear in a group but
    /// are never its representative.
    pub groups: Vec<Vec<String>>,
    /// Non-representative, non-equivalent members of `groups`.
    pub duplicates: BTreeSet<String>,
    /// Mutants with a failed build at some level.
    pub compile_failed: BTreeSet<String>,
}

impl TrivialOutcome {
    /// Compiled mutants left after discarding equivalents and duplicates.
    pub fn unique<'a>(&self, mutants: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        mutants
            .into_iter()
            .filter(|m| !self.compile_failed.contains(*m) && !self.equivalent.contains(*m) && !self.duplicates.contains(*m))
            .map(str::to_string)
            .collect()
    }
}

/// Any-level digest comparison against the original and between mutants of
/// the same file.
pub fn detect_trivial(records: &[HashRecord]) -> Result<TrivialOutcome> {
    let mut original: BTreeMap<&str, &str> = BTreeMap::new();
    let mut failed: BTreeSet<&str> = BTreeSet::new();
    let mut mutants: BTreeMap<&str, (&str, Vec<(&str, &str)>)> = BTreeMap::new();
    for r in records {
        if r.mutant == ORIGINAL {
            if let Some(d) = &r.digest {
                original.insert(&r.level, d);
            }
            continue;
        }
        let entry = mutants.entry(&r.mutant).or_insert((&r.file, Vec::new()));
        match (&r.digest, r.build_ok) {
            (Some(d), true) => entry.1.push((&r.level, d)),
            _ => {
                failed.insert(&r.mutant);
            }
        }
    }
    for (_, (_, digests)) in &mutants {
        for (level, _) in digests {
            if !original.contains_key(level) {
                return Err(Error::MissingOriginal(format!("no original record at level {level}")));
            }
        }
    }

    let compiled: Vec<(&str, &str, &Vec<(&str, &str)>)> = mutants
        .iter()
        .filter(|(id, _)| !failed.contains(*id))
        .map(|(id, (file, d))| (*id, *file, d))
        .collect();

    let equivalent: BTreeSet<String> = compiled
        .iter()
        .filter(|(_, _, d)| d.iter().any(|(level, digest)| original[level] == *digest))
        .map(|(id, _, _)| id.to_string())
        .collect();

    let mut uf = UnionFind::new(compiled.len());
    let mut seen: BTreeMap<(&str, &str, &str), usize> = BTreeMap::new();
    for (i, (_, file, digests)) in compiled.iter().enumerate() {
        for (level, digest) in digests.iter() {
            match seen.get(&(*file, *level, *digest)) {
                Some(&j) => uf.union(i, j),
                None => {
                    seen.insert((file, level, digest), i);
                }
            }
        }
    }
    let mut classes: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (i, (id, _, _)) in compiled.iter().enumerate() {
        classes.entry(uf.find(i)).or_default().push(id.to_string());
    }
    let mut groups: Vec<Vec<String>> = classes.into_values().filter(|g| g.len() > 1).collect();
    for g in &mut groups {
        g.sort();
    }
    groups.sort();
    let mut duplicates = BTreeSet::new();
    for g in &groups {
        let mut rest = g.iter().filter(|m| !equivalent.contains(*m));
        rest.next();
        duplicates.extend(rest.cloned());
    }
    Ok(TrivialOutcome {
        equivalent,
        groups,
        duplicates,
        compile_failed: failed.into_iter().map(str::to_string).collect(),
    })
}

/// Fraction of mutants that built at every level.
pub fn compiled_share(records: &[HashRecord]) -> f64 {
    let mut ok: BTreeMap<&str, bool> = BTreeMap::new();
    for r in records.iter().filter(|r| r.mutant != ORIGINAL) {
        *ok.entry(&r.mutant).or_insert(true) &= r.build_ok;
    }
    if ok.is_empty() {
        return 0.0;
    }
    ok.values().filter(|b| **b).count() as f64 / ok.len() as f64
}

pub fn write_ledger(path: &Path, records: &[HashRecord]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ledger(path: &Path) -> Result<Vec<HashRecord>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
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
