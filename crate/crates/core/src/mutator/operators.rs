//! Operator catalog: where each operator applies inside a statement and what
//! it replaces the matched fragment with.

use std::ops::Range;

use super::lexer::TokenKind;
use super::parse::{is_keyword, SourceUnit, Statement, StatementKind, ASSIGN_OPS};
use super::MutationOperator;

/// A single textual substitution of `unit.text[start..end]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edit {
    pub start: usize,
    pub end: usize,
    pub replacement: String,
}

const RELATIONAL: &[&str] = &["<", "<=", ">", ">=", "==", "!="];
const ARITHMETIC: &[&str] = &["+", "-", "*", "/", "%"];
const LOGICAL: &[&str] = &["&&", "||"];
const BITWISE: &[&str] = &["&", "|", "^"];
const SHIFT: &[&str] = &["<<", ">>"];

/// Token view of one statement with the helpers every operator needs.
struct Ctx<'a> {
    unit: &'a SourceUnit,
    stmt: &'a Statement,
    /// Tokens an operator may touch.
    region: Range<usize>,
    /// Assignment target tokens, never mutated by ABS/UOI.
    lvalue: Range<usize>,
}

impl<'a> Ctx<'a> {
    fn new(unit: &'a SourceUnit, stmt: &'a Statement) -> Self {
        let toks = stmt.tokens.clone();
        let text = |i: usize| unit.tok(i);
        let body_end = if text(toks.end - 1) == ";" { toks.end - 1 } else { toks.end };
        let first_assign = top_level_indices(unit, toks.start, body_end).find(|&i| ASSIGN_OPS.contains(&text(i)));
        let empty = toks.start..toks.start;
        let (region, lvalue) = match stmt.kind {
            StatementKind::Declaration => (empty.clone(), empty),
            StatementKind::Condition => {
                let open = toks.start + 1;
                let close = matching_forward(unit, open).unwrap_or(open);
                (open + 1..close, empty)
            }
            StatementKind::Return => (toks.start + 1..body_end, empty),
            StatementKind::Assignment if stmt.declares => {
                let eq = first_assign.unwrap_or(body_end - 1);
                (eq + 1..body_end, empty)
            }
            _ => match first_assign {
                Some(eq) => (toks.start..body_end, toks.start..eq),
                None => (toks.start..body_end, empty),
            },
        };
        Ctx {
            unit,
            stmt,
            region,
            lvalue,
        }
    }

    fn text(&self, i: usize) -> &'a str {
        self.unit.tok(i)
    }

    fn kind(&self, i: usize) -> TokenKind {
        self.unit.tokens[i].kind
    }

    fn in_region(&self, i: usize) -> bool {
        self.region.contains(&i)
    }

    fn is_operand_end(&self, i: usize) -> bool {
        match self.kind(i) {
            TokenKind::Ident => !is_keyword(self.text(i)),
            TokenKind::Int | TokenKind::Float | TokenKind::Str | TokenKind::Char => true,
            TokenKind::Punct => matches!(self.text(i), ")" | "]" | "++" | "--"),
        }
    }

    /// Operator token at `i` used in binary position.
    fn is_binary(&self, i: usize) -> bool {
        i > self.region.start && self.is_operand_end(i - 1)
    }

    fn binary_ops(&self, set: &'static [&'static str]) -> impl Iterator<Item = usize> + '_ {
        self.region
            .clone()
            .filter(move |&i| self.kind(i) == TokenKind::Punct && set.contains(&self.text(i)) && self.is_binary(i))
    }

    fn span(&self, first: usize, last: usize) -> (usize, usize) {
        (self.unit.tokens[first].start, self.unit.tokens[last].end)
    }

    fn slice(&self, first: usize, last: usize) -> &'a str {
        let (s, e) = self.span(first, last);
        &self.unit.text[s..e]
    }

    fn replace_token(&self, i: usize, replacement: impl Into<String>) -> Edit {
        let t = &self.unit.tokens[i];
        Edit {
            start: t.start,
            end: t.end,
            replacement: replacement.into(),
        }
    }

    /// Identifiers that denote a readable, negatable variable use.
    fn variable_uses(&self) -> Vec<usize> {
        self.region
            .clone()
            .filter(|&i| {
                if self.kind(i) != TokenKind::Ident || is_keyword(self.text(i)) || self.lvalue.contains(&i) {
                    return false;
                }
                let next = (i + 1 < self.region.end).then(|| self.text(i + 1));
                if matches!(next, Some("(" | "." | "->" | "[" | "++" | "--")) {
                    return false;
                }
                if next.is_some_and(|n| ASSIGN_OPS.contains(&n)) {
                    return false;
                }
                if i > self.region.start {
                    let prev = self.text(i - 1);
                    if matches!(prev, "." | "->" | "++" | "--") {
                        return false;
                    }
                    if matches!(prev, "&" | "*") && !self.is_binary(i - 1) {
                        return false;
                    }
                    // `(T)x`: a cast type, not a variable.
                    if prev == "("
                        && next == Some(")")
                        && i + 2 < self.region.end
                        && (self.is_operand_end(i + 2) || self.text(i + 2) == "(")
                    {
                        return false;
                    }
                }
                true
            })
            .collect()
    }

    /// First token of the operand ending at `last`, if it stays in the region.
    fn left_operand(&self, last: usize) -> Option<usize> {
        let mut j = last;
        while self.in_region(j) && matches!(self.text(j), "++" | "--") {
            j = j.checked_sub(1)?;
        }
        loop {
            if !self.in_region(j) {
                return None;
            }
            match self.text(j) {
                ")" | "]" => {
                    let open = matching_backward(self.unit, j)?;
                    if !self.in_region(open) {
                        return None;
                    }
                    // Call or subscript: keep walking to the callee.
                    if open > self.region.start {
                        let p = open - 1;
                        if self.kind(p) == TokenKind::Ident || matches!(self.text(p), ")" | "]") {
                            j = p;
                            continue;
                        }
                    }
                    j = open;
                }
                "sizeof" => {}
                _ if self.is_operand_end(j) => {}
                _ => return None,
            }
            if j >= self.region.start + 2 && matches!(self.text(j - 1), "." | "->") {
                j -= 2;
                continue;
            }
            break;
        }
        // Prefix unary operators.
        while j > self.region.start {
            let p = j - 1;
            let unary = matches!(self.text(p), "-" | "+" | "!" | "~" | "*" | "&" | "++" | "--")
                && (p == self.region.start || !self.is_operand_end(p - 1));
            if !unary {
                break;
            }
            j = p;
        }
        Some(j)
    }

    /// Last token of the operand starting at `first`.
    fn right_operand(&self, first: usize) -> Option<usize> {
        let mut j = first;
        while self.in_region(j) && matches!(self.text(j), "-" | "+" | "!" | "~" | "*" | "&" | "++" | "--") {
            j += 1;
        }
        if !self.in_region(j) {
            return None;
        }
        if self.text(j) == "sizeof" {
            j += 1;
            if !self.in_region(j) {
                return None;
            }
        }
        let mut end = match self.text(j) {
            "(" => matching_forward(self.unit, j)?,
            _ if self.is_operand_end(j) && !matches!(self.text(j), ")" | "]" | "++" | "--") => j,
            _ => return None,
        };
        loop {
            let n = end + 1;
            if !self.in_region(n) {
                break;
            }
            match self.text(n) {
                "(" | "[" => end = matching_forward(self.unit, n)?,
                "." | "->" if self.in_region(n + 1) => end = n + 1,
                "++" | "--" => end = n,
                _ => break,
            }
        }
        self.in_region(end).then_some(end)
    }

    /// Delete the operator at `op` with either of its operands.
    fn delete_operator(&self, op: usize) -> Vec<Edit> {
        let (Some(l), Some(r)) = (self.left_operand(op - 1), self.right_operand(op + 1)) else {
            return Vec::new();
        };
        let (start, end) = self.span(l, r);
        vec![
            Edit {
                start,
                end,
                replacement: self.slice(op + 1, r).to_string(),
            },
            Edit {
                start,
                end,
                replacement: self.slice(l, op - 1).to_string(),
            },
        ]
    }

    fn literals(&self) -> impl Iterator<Item = usize> + '_ {
        self.region
            .clone()
            .filter(|&i| matches!(self.kind(i), TokenKind::Int | TokenKind::Float))
    }

    fn negated_literal(&self, i: usize) -> bool {
        i > self.region.start && self.text(i - 1) == "-" && !self.is_binary(i - 1)
    }
}

fn top_level_indices(unit: &SourceUnit, start: usize, end: usize) -> impl Iterator<Item = usize> + '_ {
    let mut depth = 0i32;
    (start..end).filter(move |&i| match unit.tok(i) {
        "(" | "[" | "{" => {
            depth += 1;
            false
        }
        ")" | "]" | "}" => {
            depth -= 1;
            false
        }
        _ => depth == 0,
    })
}

fn matching_forward(unit: &SourceUnit, open: usize) -> Option<usize> {
    let close = match unit.tok(open) {
        "(" => ")",
        "[" => "]",
        "{" => "}",
        _ => return None,
    };
    let opener = unit.tok(open);
    let mut depth = 0;
    for i in open..unit.tokens.len() {
        let t = unit.tok(i);
        if t == opener {
            depth += 1;
        } else if t == close {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

fn matching_backward(unit: &SourceUnit, close: usize) -> Option<usize> {
    let open = match unit.tok(close) {
        ")" => "(",
        "]" => "[",
        _ => return None,
    };
    let closer = unit.tok(close);
    let mut depth = 0;
    for i in (0..=close).rev() {
        let t = unit.tok(i);
        if t == closer {
            depth += 1;
        } else if t == open {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

/// Integer literal value and suffix, e.g. `0x1Fu` -> (31, "u").
fn parse_int(text: &str) -> Option<(i128, &str)> {
    let digits_end = text.trim_end_matches(['u', 'U', 'l', 'L']).len();
    let (body, suffix) = text.split_at(digits_end);
    let value = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i128::from_str_radix(hex, 16).ok()?
    } else if body.len() > 1 && body.starts_with('0') {
        i128::from_str_radix(&body[1..], 8).ok()?
    } else {
        body.parse().ok()?
    };
    Some((value, suffix))
}

fn parse_float(text: &str) -> Option<(f64, &str)> {
    let body_end = text.trim_end_matches(['f', 'F', 'l', 'L']).len();
    let (body, suffix) = text.split_at(body_end);
    body.parse().ok().map(|v| (v, suffix))
}

fn render_int(value: i128, suffix: &str) -> String {
    if value < 0 {
        format!("({value}{suffix})")
    } else {
        format!("{value}{suffix}")
    }
}

pub(crate) fn edits(unit: &SourceUnit, stmt: &Statement, op: MutationOperator) -> Vec<Edit> {
    if stmt.kind == StatementKind::Declaration {
        return Vec::new();
    }
    let cx = Ctx::new(unit, stmt);
    match op {
        MutationOperator::Ror => replace_among(&cx, RELATIONAL),
        MutationOperator::Aor => replace_among(&cx, ARITHMETIC),
        MutationOperator::Lcr => replace_among(&cx, LOGICAL),
        MutationOperator::Icr => cx
            .literals()
            .filter(|&i| cx.kind(i) == TokenKind::Int)
            .flat_map(|i| {
                let Some((c, suffix)) = parse_int(cx.text(i)) else {
                    return Vec::new();
                };
                let mut seen = Vec::new();
                for v in [0, 1, -1, c + 1, c - 1] {
                    if v != c && !seen.contains(&v) {
                        seen.push(v);
                    }
                }
                seen.into_iter().map(|v| cx.replace_token(i, render_int(v, suffix))).collect()
            })
            .collect(),
        MutationOperator::Lvr => cx.literals().flat_map(|i| lvr(&cx, i)).collect(),
        MutationOperator::Abs => cx
            .variable_uses()
            .into_iter()
            .map(|i| cx.replace_token(i, format!("(-{})", cx.text(i))))
            .collect(),
        MutationOperator::Uoi => cx
            .variable_uses()
            .last()
            .map(|&i| cx.replace_token(i, format!("{}++", cx.text(i))))
            .into_iter()
            .collect(),
        MutationOperator::Sdl => vec![sdl(&cx)],
        MutationOperator::Aod => delete_among(&cx, ARITHMETIC),
        MutationOperator::Lod => delete_among(&cx, LOGICAL),
        MutationOperator::Rod => delete_among(&cx, RELATIONAL),
        MutationOperator::Bod => delete_among(&cx, BITWISE),
        MutationOperator::Sod => delete_among(&cx, SHIFT),
    }
}

fn replace_among(cx: &Ctx<'_>, set: &'static [&'static str]) -> Vec<Edit> {
    cx.binary_ops(set)
        .flat_map(|i| {
            let current = cx.text(i);
            set.iter()
                .filter(move |alt| **alt != current)
                .map(move |alt| cx.replace_token(i, *alt))
        })
        .collect()
}

fn delete_among(cx: &Ctx<'_>, set: &'static [&'static str]) -> Vec<Edit> {
    cx.binary_ops(set).flat_map(|i| cx.delete_operator(i)).collect()
}

fn lvr(cx: &Ctx<'_>, i: usize) -> Vec<Edit> {
    let text = cx.text(i);
    let negated = cx.negated_literal(i);
    let float = cx.kind(i) == TokenKind::Float;
    let (is_zero, suffix) = if float {
        match parse_float(text) {
            Some((v, s)) => (v == 0.0, s),
            None => return Vec::new(),
        }
    } else {
        match parse_int(text) {
            Some((v, s)) => (v == 0, s),
            None => return Vec::new(),
        }
    };
    let (zero, one) = if float {
        (format!("0.0{suffix}"), format!("1.0{suffix}"))
    } else {
        (format!("0{suffix}"), format!("1{suffix}"))
    };
    let first = if negated { i - 1 } else { i };
    let (start, end) = cx.span(first, i);
    let edit = |replacement: String| Edit { start, end, replacement };
    if is_zero {
        vec![edit(one.clone()), edit(format!("(-{one})"))]
    } else if negated {
        vec![edit(zero), edit(text.to_string())]
    } else {
        vec![edit(zero), edit(format!("(-{text})"))]
    }
}

fn sdl(cx: &Ctx<'_>) -> Edit {
    let toks = &cx.stmt.tokens;
    if cx.stmt.declares {
        // Keep the declaration, drop its initializer: `int a = b;` -> `int a;`
        let eq = cx.region.start - 1;
        let (start, end) = cx.span(eq, cx.region.end - 1);
        return Edit {
            start,
            end,
            replacement: String::new(),
        };
    }
    let (start, end) = cx.span(toks.start, toks.end - 1);
    Edit {
        start,
        end,
        replacement: ";".into(),
    }
}
