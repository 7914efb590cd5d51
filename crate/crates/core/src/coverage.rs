//! Statement coverage scoped to one source file, and the distances used to
//! compare two executions.
//!
//! Coverage matrix files hold one vector per line:
//!
//! ```text
//! # context <TAB> test <TAB> file <TAB> statement:count ...
//! original	t1	src/a.c	0:3 1:0 4:12
//! src/a.c:00004:ROR:002	t1	src/a.c	0:3 1:1 4:12
//! ```
//!
//! `context` is `original` for the unmutated program, otherwise a mutant id.

use std::cmp::Ordering;
use std::collections::{btree_map, BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::iter::Peekable;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mutator::{Mutant, SourceUnit};

pub const ORIGINAL_CONTEXT: &str = "original";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageVector {
    pub file: String,
    pub test: String,
    /// `None` for the original program, otherwise the mutant id.
    pub mutant: Option<String>,
    pub counts: BTreeMap<u32, u64>,
}

impl CoverageVector {
    pub fn new(file: impl Into<String>, test: impl Into<String>, counts: BTreeMap<u32, u64>) -> Self {
        CoverageVector {
            file: file.into(),
            test: test.into(),
            mutant: None,
            counts,
        }
    }

    pub fn for_mutant(mut self, mutant: impl Into<String>) -> Self {
        self.mutant = Some(mutant.into());
        self
    }

    pub fn count(&self, statement: u32) -> u64 {
        self.counts.get(&statement).copied().unwrap_or(0)
    }

    pub fn covered(&self) -> BTreeSet<u32> {
        self.counts.iter().filter(|(_, c)| **c > 0).map(|(s, _)| *s).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.counts.values().all(|c| *c == 0)
    }

    pub fn context(&self) -> &str {
        self.mutant.as_deref().unwrap_or(ORIGINAL_CONTEXT)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    Jaccard,
    Ochiai,
    Euclidean,
    Cosine,
}

impl DistanceMetric {
    pub const ALL: [DistanceMetric; 4] = [Self::Jaccard, Self::Ochiai, Self::Euclidean, Self::Cosine];

    /// Metrics over covered-statement sets rather than counts.
    pub fn is_binary(self) -> bool {
        matches!(self, Self::Jaccard | Self::Ochiai)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Jaccard => "jaccard",
            Self::Ochiai => "ochiai",
            Self::Euclidean => "euclidean",
            Self::Cosine => "cosine",
        }
    }
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArguments(format!("unknown distance metric `{s}`")))
    }
}

/// Normalized distance in [0, 1] between two executions of the same file.
pub fn distance(a: &CoverageVector, b: &CoverageVector, metric: DistanceMetric) -> Result<f64> {
    if a.file != b.file {
        return Err(Error::FileMismatch(a.file.clone(), b.file.clone()));
    }
    Ok(count_distance(&a.counts, &b.counts, metric))
}

/// Count pairs over the union of statement ids of two sorted maps.
#[derive(Clone)]
struct Aligned<'a> {
    a: Peekable<btree_map::Iter<'a, u32, u64>>,
    b: Peekable<btree_map::Iter<'a, u32, u64>>,
}

impl Iterator for Aligned<'_> {
    type Item = (u64, u64);

    fn next(&mut self) -> Option<(u64, u64)> {
        let order = match (self.a.peek(), self.b.peek()) {
            (None, None) => return None,
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (Some((i, _)), Some((j, _))) => i.cmp(j),
        };
        match order {
            Ordering::Less => self.a.next().map(|(_, x)| (*x, 0)),
            Ordering::Greater => self.b.next().map(|(_, y)| (0, *y)),
            Ordering::Equal => Some((*self.a.next()?.1, *self.b.next()?.1)),
        }
    }
}

/// [`distance`] on bare count maps; ids missing on one side count as 0.
pub fn count_distance(a: &BTreeMap<u32, u64>, b: &BTreeMap<u32, u64>, metric: DistanceMetric) -> f64 {
    let pairs = Aligned {
        a: a.iter().peekable(),
        b: b.iter().peekable(),
    };
    match metric {
        DistanceMetric::Jaccard | DistanceMetric::Ochiai => {
            let (mut inter, mut only_a, mut only_b) = (0u64, 0u64, 0u64);
            for (x, y) in pairs {
                match (x > 0, y > 0) {
                    (true, true) => inter += 1,
                    (true, false) => only_a += 1,
                    (false, true) => only_b += 1,
                    (false, false) => {}
                }
            }
            let (size_a, size_b) = (inter + only_a, inter + only_b);
            if size_a == 0 && size_b == 0 {
                return 0.0;
            }
            if metric == DistanceMetric::Jaccard {
                1.0 - inter as f64 / (inter + only_a + only_b) as f64
            } else if size_a == 0 || size_b == 0 {
                1.0
            } else {
                (1.0 - inter as f64 / ((size_a * size_b) as f64).sqrt()).max(0.0)
            }
        }
        DistanceMetric::Euclidean => {
            let (mut diff, mut sa, mut sb) = (0f64, 0f64, 0f64);
            for (x, y) in pairs {
                let (x, y) = (x as f64, y as f64);
                diff += (x - y) * (x - y);
                sa += x * x;
                sb += y * y;
            }
            let norms = sa.sqrt() + sb.sqrt();
            if norms == 0.0 {
                0.0
            } else {
                (diff.sqrt() / norms).min(1.0)
            }
        }
        DistanceMetric::Cosine => {
            let (mut dot, mut sa, mut sb) = (0u128, 0u128, 0u128);
            let mut overflow = false;
            for (x, y) in pairs.clone() {
                let (x, y) = (x as u128, y as u128);
                match (dot.checked_add(x * y), sa.checked_add(x * x), sb.checked_add(y * y)) {
                    (Some(d), Some(p), Some(q)) => (dot, sa, sb) = (d, p, q),
                    _ => {
                        overflow = true;
                        break;
                    }
                }
            }
            if !overflow {
                if sa == 0 && sb == 0 {
                    return 0.0;
                }
                if sa == 0 || sb == 0 {
                    return 1.0;
                }
                // Parallel vectors are exactly zero apart.
                if let (Some(l), Some(r)) = (dot.checked_mul(dot), sa.checked_mul(sb)) {
                    if l == r {
                        return 0.0;
                    }
                }
                return (1.0 - dot as f64 / ((sa as f64).sqrt() * (sb as f64).sqrt())).clamp(0.0, 1.0);
            }
            let (mut dot, mut sa, mut sb) = (0f64, 0f64, 0f64);
            for (x, y) in pairs {
                let (x, y) = (x as f64, y as f64);
                dot += x * y;
                sa += x * x;
                sb += y * y;
            }
            (1.0 - dot / (sa.sqrt() * sb.sqrt())).clamp(0.0, 1.0)
        }
    }
}

/// Tests whose original-program coverage reaches the mutated statement.
pub fn covered_tests(mutant: &Mutant, original: &[CoverageVector]) -> BTreeSet<String> {
    original
        .iter()
        .filter(|v| v.file == mutant.file && v.mutant.is_none() && v.count(mutant.statement) > 0)
        .map(|v| v.test.clone())
        .collect()
}

/// Lookup of original-program coverage by (file, test).
#[derive(Debug, Clone, Default)]
pub struct CoverageIndex {
    by_file: BTreeMap<String, BTreeMap<String, CoverageVector>>,
}

impl CoverageIndex {
    pub fn new(vectors: impl IntoIterator<Item = CoverageVector>) -> Self {
        let mut by_file: BTreeMap<String, BTreeMap<String, CoverageVector>> = BTreeMap::new();
        for v in vectors {
            by_file.entry(v.file.clone()).or_default().insert(v.test.clone(), v);
        }
        CoverageIndex { by_file }
    }

    pub fn get(&self, file: &str, test: &str) -> Option<&CoverageVector> {
        self.by_file.get(file)?.get(test)
    }

    pub fn file(&self, file: &str) -> impl Iterator<Item = &CoverageVector> {
        self.by_file.get(file).into_iter().flat_map(|m| m.values())
    }

    pub fn covered_tests(&self, mutant: &Mutant) -> BTreeSet<String> {
        self.file(&mutant.file)
            .filter(|v| v.count(mutant.statement) > 0)
            .map(|v| v.test.clone())
            .collect()
    }

    /// Statements of `file` covered by at least one test.
    pub fn covered_statements(&self, file: &str) -> BTreeSet<u32> {
        self.file(file).flat_map(|v| v.covered()).collect()
    }
}

pub fn write_coverage_matrix(path: &Path, vectors: &[CoverageVector]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# context\ttest\tfile\tstatement:count ...")?;
    for v in vectors {
        write_coverage_line(&mut w, v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_coverage_line(w: &mut impl Write, v: &CoverageVector) -> Result<()> {
    let counts: Vec<String> = v.counts.iter().map(|(s, c)| format!("{s}:{c}")).collect();
    writeln!(w, "{}\t{}\t{}\t{}", v.context(), v.test, v.file, counts.join(" "))?;
    Ok(())
}

pub fn parse_coverage_line(line: &str) -> std::result::Result<CoverageVector, String> {
    let mut cols = line.split('\t');
    let (Some(context), Some(test), Some(file)) = (cols.next(), cols.next(), cols.next()) else {
        return Err("expected at least 3 tab-separated columns".into());
    };
    let mut counts = BTreeMap::new();
    for pair in cols.next().unwrap_or("").split_whitespace() {
        let (s, c) = pair.split_once(':').ok_or_else(|| format!("bad pair `{pair}`"))?;
        let s: u32 = s.parse().map_err(|_| format!("bad statement id `{s}`"))?;
        let c: u64 = c.parse().map_err(|_| format!("bad count `{c}`"))?;
        counts.insert(s, c);
    }
    Ok(CoverageVector {
        file: file.to_string(),
        test: test.to_string(),
        mutant: (context != ORIGINAL_CONTEXT).then(|| context.to_string()),
        counts,
    })
}

pub fn read_coverage_matrix(path: &Path) -> Result<Vec<CoverageVector>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_coverage_line(&line).map_err(|message| Error::Format {
            path: path.display().to_string(),
            line: n + 1,
            message,
        })?);
    }
    Ok(out)
}

/// Line counts from a textual gcov report (`count:line:source` rows).
/// Non-executable lines (`-`) are skipped; `#####`/`=====` read as 0.
pub fn parse_gcov(text: &str) -> BTreeMap<usize, u64> {
    let mut out = BTreeMap::new();
    for row in text.lines() {
        let mut parts = row.splitn(3, ':');
        let (Some(count), Some(line)) = (parts.next(), parts.next()) else {
            continue;
        };
        let count = count.trim().trim_end_matches('*');
        let Ok(line) = line.trim().parse::<usize>() else {
            continue;
        };
        if line == 0 {
            continue;
        }
        let value = match count {
            "-" => continue,
            "#####" | "=====" => 0,
            c => match c.parse::<u64>() {
                Ok(v) => v,
                Err(_) => continue,
            },
        };
        out.insert(line, value);
    }
    out
}

/// Maps line counts onto statements: a statement takes the largest count
/// recorded on any of its lines.
pub fn statement_counts(unit: &SourceUnit, lines: &BTreeMap<usize, u64>) -> BTreeMap<u32, u64> {
    let mut out = BTreeMap::new();
    for stmt in &unit.statements {
        if let Some(c) = lines.range(stmt.line_start..=stmt.line_end).map(|(_, c)| *c).max() {
            out.insert(stmt.id, c);
        }
    }
    out
}
