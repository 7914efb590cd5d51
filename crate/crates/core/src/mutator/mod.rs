//! Source parsing and first-order mutant generation.

mod lexer;
mod operators;
mod parse;

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use self::lexer::{tokenize, Token, TokenKind};
pub use self::parse::{parse_unit, Function, SourceUnit, Statement, StatementKind};
use crate::error::{Error, Result};

/// The extended sufficient operator set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MutationOperator {
    /// Sign inversion of a variable use.
    Abs,
    /// Arithmetic operator replacement.
    Aor,
    /// Integer constant replacement.
    Icr,
    /// Logical connector replacement.
    Lcr,
    /// Relational operator replacement.
    Ror,
    /// Statement deletion.
    Sdl,
    /// Post-increment of the last variable use.
    Uoi,
    /// Arithmetic operator deletion.
    Aod,
    /// Logical operator deletion.
    Lod,
    /// Relational operator deletion.
    Rod,
    /// Bitwise operator deletion.
    Bod,
    /// Shift operator deletion.
    Sod,
    /// Literal value replacement.
    Lvr,
}

impl MutationOperator {
    pub const ALL: [MutationOperator; 13] = [
        Self::Abs,
        Self::Aor,
        Self::Icr,
        Self::Lcr,
        Self::Ror,
        Self::Sdl,
        Self::Uoi,
        Self::Aod,
        Self::Lod,
        Self::Rod,
        Self::Bod,
        Self::Sod,
        Self::Lvr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Abs => "ABS",
            Self::Aor => "AOR",
            Self::Icr => "ICR",
            Self::Lcr => "LCR",
            Self::Ror => "ROR",
            Self::Sdl => "SDL",
            Self::Uoi => "UOI",
            Self::Aod => "AOD",
            Self::Lod => "LOD",
            Self::Rod => "ROD",
            Self::Bod => "BOD",
            Self::Sod => "SOD",
            Self::Lvr => "LVR",
        }
    }

    pub fn all() -> BTreeSet<MutationOperator> {
        Self::ALL.into_iter().collect()
    }
}

impl fmt::Display for MutationOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MutationOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|op| op.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArguments(format!("unknown mutation operator `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutantStatus {
    Generated,
    Compiled,
    CompileFailed,
    TriviallyEquivalent,
    TriviallyDuplicate,
    Sampled,
    Killed,
    Live,
    DiscardedEquivalent,
    DiscardedDuplicate,
}

impl MutantStatus {
    pub fn can_advance_to(self, next: MutantStatus) -> bool {
        use MutantStatus::*;
        matches!(
            (self, next),
            (Generated, Compiled | CompileFailed)
                | (Compiled, TriviallyEquivalent | TriviallyDuplicate | Sampled)
                | (Sampled, Killed | Live)
                | (Live, DiscardedEquivalent | DiscardedDuplicate)
                | (Killed, DiscardedDuplicate)
        )
    }

    pub fn as_str(self) -> &'static str {
        use MutantStatus::*;
        match self {
            Generated => "generated",
            Compiled => "compiled",
            CompileFailed => "compile-failed",
            TriviallyEquivalent => "trivially-equivalent",
            TriviallyDuplicate => "trivially-duplicate",
            Sampled => "sampled",
            Killed => "killed",
            Live => "live",
            DiscardedEquivalent => "discarded-equivalent",
            DiscardedDuplicate => "discarded-duplicate",
        }
    }
}

impl fmt::Display for MutantStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One syntactic change to one statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutant {
    pub id: String,
    pub operator: MutationOperator,
    pub file: String,
    #[serde(default)]
    pub function: Option<String>,
    pub statement: u32,
    pub line_start: usize,
    pub line_end: usize,
    /// Byte offset of `original` in the file.
    pub offset: usize,
    pub original: String,
    pub mutated: String,
    pub status: MutantStatus,
}

impl Mutant {
    pub fn advance(&mut self, next: MutantStatus) -> Result<()> {
        if !self.status.can_advance_to(next) {
            return Err(Error::StatusTransition {
                mutant: self.id.clone(),
                from: self.status.to_string(),
                to: next.to_string(),
            });
        }
        self.status = next;
        Ok(())
    }
}

/// Mutants for every (statement, operator, alternative) in deterministic
/// order. With `covered` set, only those statements are mutated.
pub fn generate_mutants(
    unit: &SourceUnit,
    operators: &BTreeSet<MutationOperator>,
    covered: Option<&BTreeSet<u32>>,
) -> Vec<Mutant> {
    let mut out = Vec::new();
    for stmt in &unit.statements {
        if covered.is_some_and(|c| !c.contains(&stmt.id)) {
            continue;
        }
        // Iterate in catalog order, not in `Ord` order of the set.
        for op in MutationOperator::ALL.into_iter().filter(|op| operators.contains(op)) {
            for (alt, edit) in operators::edits(unit, stmt, op).into_iter().enumerate() {
                let original = &unit.text[edit.start..edit.end];
                let mutated = keep_line_count(original, edit.replacement);
                if mutated == original {
                    continue;
                }
                out.push(Mutant {
                    id: format!("{}:{:05}:{}:{:03}", unit.path, stmt.id, op, alt),
                    operator: op,
                    file: unit.path.clone(),
                    function: unit.function_name(stmt).map(str::to_string),
                    statement: stmt.id,
                    line_start: stmt.line_start,
                    line_end: stmt.line_end,
                    offset: edit.start,
                    original: original.to_string(),
                    mutated,
                    status: MutantStatus::Generated,
                });
            }
        }
    }
    out
}

/// Pads `replacement` with the newlines it removed so line numbers after
/// the fragment do not move.
fn keep_line_count(original: &str, mut replacement: String) -> String {
    let lost = original.matches('\n').count().saturating_sub(replacement.matches('\n').count());
    replacement.extend(std::iter::repeat('\n').take(lost));
    replacement
}

/// Full text of the mutated file.
pub fn render_mutant(unit: &SourceUnit, mutant: &Mutant) -> Result<String> {
    let stale = || Error::StaleMutant {
        mutant: mutant.id.clone(),
        offset: mutant.offset,
        expected: mutant.original.clone(),
    };
    let stmt = unit.statement(mutant.statement).ok_or_else(stale)?;
    let (first, last) = (&unit.tokens[stmt.tokens.start], &unit.tokens[stmt.tokens.end - 1]);
    let end = mutant.offset + mutant.original.len();
    if mutant.offset < first.start || end > last.end || unit.text.get(mutant.offset..end) != Some(mutant.original.as_str()) {
        return Err(stale());
    }
    let mut out = String::with_capacity(unit.text.len() + mutant.mutated.len());
    out.push_str(&unit.text[..mutant.offset]);
    out.push_str(&mutant.mutated);
    out.push_str(&unit.text[end..]);
    Ok(out)
}

/// Writes one JSON object per line, fields in declaration order.
pub fn write_manifest(path: &Path, mutants: &[Mutant]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for m in mutants {
        serde_json::to_writer(&mut w, m)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<Mutant>> {
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

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"int limit = 10;

int clamp(int v, int lo) {
    int r = v;
    if (v < lo && lo > 0) {
        r = lo + 1;
    }
    while (r > limit)
        r = r -
            2;
    return r * -1;
}
"#;

    fn unit() -> SourceUnit {
        parse_unit(SAMPLE, "src/clamp.c").unwrap()
    }

    #[test]
    fn ror_on_a_less_than_b() {
        let u = parse_unit("void f() { if (a < b) g(); }", "r.c").unwrap();
        let ms = generate_mutants(&u, &[MutationOperator::Ror].into(), None);
        let got: Vec<_> = ms.iter().map(|m| m.mutated.as_str()).collect();
        assert_eq!(got, ["<=", ">", ">=", "==", "!="]);
    }

    #[test]
    fn abs_single_mutant() {
        let u = parse_unit("void f() { x = -y; }", "a.c").unwrap();
        let ms = generate_mutants(&u, &[MutationOperator::Abs].into(), None);
        assert_eq!(ms.len(), 1);
        assert_eq!(render_mutant(&u, &ms[0]).unwrap(), "void f() { x = -(-y); }");
    }

    #[test]
    fn sdl_one_per_statement() {
        let u = unit();
        let ms = generate_mutants(&u, &[MutationOperator::Sdl].into(), None);
        let mutable = u.statements.iter().filter(|s| s.kind != StatementKind::Declaration).count();
        assert_eq!(ms.len(), mutable);
        let stmts: BTreeSet<_> = ms.iter().map(|m| m.statement).collect();
        assert_eq!(stmts.len(), ms.len());
    }

    #[test]
    fn render_examples() {
        let u = parse_unit("void f() {\n  a = b + c;\n  y = 1;\n  v = w + v;\n}\n", "e.c").unwrap();
        let aor = generate_mutants(&u, &[MutationOperator::Aor].into(), None);
        let minus = aor.iter().find(|m| m.statement == 0 && m.mutated == "-").unwrap();
        assert!(render_mutant(&u, minus).unwrap().contains("  a = b - c;\n"));

        let sdl = generate_mutants(&u, &[MutationOperator::Sdl].into(), Some(&[1].into()));
        assert_eq!(render_mutant(&u, &sdl[0]).unwrap(), "void f() {\n  a = b + c;\n  ;\n  v = w + v;\n}\n");

        let uoi = generate_mutants(&u, &[MutationOperator::Uoi].into(), Some(&[2].into()));
        assert_eq!(uoi.len(), 1);
        assert!(render_mutant(&u, &uoi[0]).unwrap().contains("v = w + v++;"));
    }

    #[test]
    fn sdl_keeps_line_numbers() {
        let u = unit();
        for m in generate_mutants(&u, &MutationOperator::all(), None) {
            let text = render_mutant(&u, &m).unwrap();
            assert_eq!(text.lines().count(), SAMPLE.lines().count(), "{}", m.id);
        }
    }

    #[test]
    fn coverage_gating() {
        let u = unit();
        assert!(generate_mutants(&u, &MutationOperator::all(), Some(&BTreeSet::new())).is_empty());
        let only: BTreeSet<u32> = [2].into();
        let ms = generate_mutants(&u, &MutationOperator::all(), Some(&only));
        assert!(!ms.is_empty());
        assert!(ms.iter().all(|m| m.statement == 2));
    }

    #[test]
    fn ids_unique_and_ordered() {
        let ms = generate_mutants(&unit(), &MutationOperator::all(), None);
        let ids: BTreeSet<_> = ms.iter().map(|m| m.id.as_str()).collect();
        assert_eq!(ids.len(), ms.len());
        assert!(ms.windows(2).all(|w| w[0].statement <= w[1].statement));
        assert!(ms.iter().all(|m| m.original != m.mutated));
        assert_eq!(ms[0].function, None);
        assert!(ms.iter().filter(|m| m.statement > 0).all(|m| m.function.as_deref() == Some("clamp")));
    }

    #[test]
    fn stale_mutant_detected() {
        let u = unit();
        let mut m = generate_mutants(&u, &[MutationOperator::Ror].into(), None).remove(0);
        m.offset += 1;
        assert!(matches!(render_mutant(&u, &m), Err(Error::StaleMutant { .. })));
        let mut m2 = generate_mutants(&u, &[MutationOperator::Ror].into(), None).remove(0);
        m2.statement = 999;
        assert!(matches!(render_mutant(&u, &m2), Err(Error::StaleMutant { .. })));
    }

    #[test]
    fn status_transitions() {
        let mut m = generate_mutants(&unit(), &[MutationOperator::Sdl].into(), None).remove(0);
        assert!(m.advance(MutantStatus::Killed).is_err());
        m.advance(MutantStatus::Compiled).unwrap();
        m.advance(MutantStatus::Sampled).unwrap();
        m.advance(MutantStatus::Live).unwrap();
        m.advance(MutantStatus::DiscardedEquivalent).unwrap();
        assert!(m.advance(MutantStatus::Compiled).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mutants.jsonl");
        let ms = generate_mutants(&unit(), &MutationOperator::all(), None);
        write_manifest(&path, &ms).unwrap();
        let first = std::fs::read_to_string(&path).unwrap();
        assert!(first.lines().next().unwrap().starts_with(r#"{"id":"src/clamp.c:00000:"#));
        assert_eq!(read_manifest(&path).unwrap(), ms);
    }

    #[test]
    fn operator_names_parse() {
        for op in MutationOperator::ALL {
            assert_eq!(op.name().parse::<MutationOperator>().unwrap(), op);
        }
        assert!("XYZ".parse::<MutationOperator>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn program() -> impl Strategy<Value = String> {
            let var = prop::sample::select(vec!["a", "b", "c", "n"]);
            let lit = prop::sample::select(vec!["0", "1", "7", "2.5"]);
            let op = prop::sample::select(vec!["+", "-", "*", "<", ">=", "==", "&&", "||", "&", "<<"]);
            let atom = prop_oneof![var.clone().prop_map(str::to_string), lit.prop_map(str::to_string)];
            let expr = (atom.clone(), op, atom).prop_map(|(l, o, r)| format!("{l} {o} {r}"));
            let stmt = prop_oneof![
                (var.clone(), expr.clone()).prop_map(|(v, e)| format!("    {v} = {e};\n")),
                expr.clone().prop_map(|e| format!("    if ({e}) {{ n = n + 1; }}\n")),
                expr.clone().prop_map(|e| format!("    return {e};\n")),
                (var, expr).prop_map(|(v, e)| format!("    int {v}2 = {e};\n")),
            ];
            prop::collection::vec(stmt, 0..6).prop_map(|body| format!("int f(int a, int b) {{\n    int c = 0, n = 1;\n{}}}\n", body.concat()))
        }

        proptest! {
            #[test]
            fn render_then_revert_is_identity(src in program()) {
                let u = parse_unit(&src, "p.c").unwrap();
                for m in generate_mutants(&u, &MutationOperator::all(), None) {
                    let text = render_mutant(&u, &m).unwrap();
                    // Exactly one fragment differs.
                    let prefix = &text[..m.offset];
                    let suffix = &text[m.offset + m.mutated.len()..];
                    prop_assert_eq!(prefix, &src[..m.offset]);
                    prop_assert_eq!(suffix, &src[m.offset + m.original.len()..]);
                    let reverted = format!("{prefix}{}{suffix}", m.original);
                    prop_assert_eq!(&reverted, &src);
                }
            }

            #[test]
            fn deterministic_and_closed(src in program(), mask in 1u16..(1 << 13)) {
                let ops: BTreeSet<_> = MutationOperator::ALL
                    .into_iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, op)| op)
                    .collect();
                let u = parse_unit(&src, "p.c").unwrap();
                let a = generate_mutants(&u, &ops, None);
                let b = generate_mutants(&parse_unit(&src, "p.c").unwrap(), &ops, None);
                prop_assert_eq!(&a, &b);
                prop_assert!(a.iter().all(|m| ops.contains(&m.operator)));
            }
        }
    }
}
