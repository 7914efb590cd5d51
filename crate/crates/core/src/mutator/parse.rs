//! Statement-level parser.
//!
//! This is not a C grammar. It splits a token stream into statements using
//! parenthesis and brace nesting, recognizes function definitions by the
//! `ident ( ... ) {` shape at file scope, and classifies each statement with
//! a handful of lexical rules. Anything it cannot classify becomes
//! [`StatementKind::Other`].

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::lexer::{tokenize, Token, TokenKind};
use crate::error::{Error, Result};

pub(crate) const KEYWORDS: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else", "enum",
    "extern", "float", "for", "goto", "if", "inline", "int", "long", "register", "restrict",
    "return", "short", "signed", "sizeof", "static", "struct", "switch", "typedef", "union",
    "unsigned", "void", "volatile", "while", "_Bool", "_Complex", "_Static_assert", "bool",
];

const TYPE_WORDS: &[&str] = &[
    "auto", "char", "const", "double", "enum", "extern", "float", "inline", "int", "long",
    "register", "restrict", "short", "signed", "static", "struct", "typedef", "union", "unsigned",
    "void", "volatile", "_Bool", "_Complex", "bool",
];

pub(crate) fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

pub(crate) const ASSIGN_OPS: &[&str] = &["=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>="];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatementKind {
    Assignment,
    Call,
    Return,
    Condition,
    Declaration,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub id: u32,
    pub line_start: usize,
    pub line_end: usize,
    /// Indices into [`SourceUnit::tokens`].
    pub tokens: Range<usize>,
    pub kind: StatementKind,
    /// The statement introduces a variable (`int a = b;`), so deleting it
    /// wholesale would leave later uses dangling.
    pub declares: bool,
    pub function: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    pub statements: Range<u32>,
}

#[derive(Debug, Clone)]
pub struct SourceUnit {
    pub path: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub statements: Vec<Statement>,
    pub functions: Vec<Function>,
}

impl SourceUnit {
    pub fn statement(&self, id: u32) -> Option<&Statement> {
        self.statements.get(id as usize)
    }

    pub fn tok(&self, idx: usize) -> &str {
        self.tokens[idx].text(&self.text)
    }

    pub fn statement_text(&self, stmt: &Statement) -> &str {
        let first = &self.tokens[stmt.tokens.start];
        let last = &self.tokens[stmt.tokens.end - 1];
        &self.text[first.start..last.end]
    }

    pub fn function_name(&self, stmt: &Statement) -> Option<&str> {
        stmt.function.map(|f| self.functions[f].name.as_str())
    }

    /// Statement whose line span contains `line`, preferring the first one
    /// starting on it.
    pub fn statement_at_line(&self, line: usize) -> Option<&Statement> {
        self.statements
            .iter()
            .find(|s| s.line_start == line)
            .or_else(|| self.statements.iter().find(|s| s.line_start <= line && line <= s.line_end))
    }
}

pub fn parse_unit(text: &str, path: &str) -> Result<SourceUnit> {
    let tokens = tokenize(text, path)?;
    let mut parser = Parser {
        src: text,
        path,
        toks: &tokens,
        statements: Vec::new(),
        functions: Vec::new(),
    };
    parser.file_scope()?;
    let Parser {
        statements, functions, ..
    } = parser;
    Ok(SourceUnit {
        path: path.to_string(),
        text: text.to_string(),
        tokens,
        statements,
        functions,
    })
}

struct Parser<'a> {
    src: &'a str,
    path: &'a str,
    toks: &'a [Token],
    statements: Vec<Statement>,
    functions: Vec<Function>,
}

impl<'a> Parser<'a> {
    fn text(&self, i: usize) -> &'a str {
        self.toks[i].text(self.src)
    }

    fn err(&self, i: usize, message: impl Into<String>) -> Error {
        let line = self.toks.get(i).or(self.toks.last()).map_or(1, |t| t.line);
        Error::Parse {
            file: self.path.to_string(),
            line,
            message: message.into(),
        }
    }

    /// Index of the token closing the group opened at `open`.
    fn matching(&self, open: usize) -> Result<usize> {
        let (o, c) = match self.text(open) {
            "(" => ("(", ")"),
            "[" => ("[", "]"),
            "{" => ("{", "}"),
            other => return Err(self.err(open, format!("`{other}` does not open a group"))),
        };
        let mut depth = 0usize;
        for i in open..self.toks.len() {
            if self.toks[i].kind != TokenKind::Punct {
                continue;
            }
            let t = self.text(i);
            if t == o {
                depth += 1;
            } else if t == c {
                depth -= 1;
                if depth == 0 {
                    return Ok(i);
                }
            }
        }
        Err(self.err(open, format!("unbalanced `{o}`")))
    }

    fn file_scope(&mut self) -> Result<()> {
        let mut i = 0;
        while i < self.toks.len() {
            if self.text(i) == ";" {
                i += 1;
                continue;
            }
            let start = i;
            let mut j = i;
            loop {
                if j >= self.toks.len() {
                    return Err(self.err(start, "declaration is missing `;`"));
                }
                match self.text(j) {
                    "(" | "[" => j = self.matching(j)? + 1,
                    "{" => {
                        if j > start && self.text(j - 1) == ")" {
                            self.function(start, j)?;
                            j = self.matching(j)? + 1;
                            break;
                        }
                        j = self.matching(j)? + 1;
                    }
                    ";" => {
                        self.push_simple(start, j + 1, None);
                        j += 1;
                        break;
                    }
                    _ => j += 1,
                }
            }
            i = j;
        }
        Ok(())
    }

    fn function(&mut self, header_start: usize, body_open: usize) -> Result<()> {
        // The name is the identifier right before the parameter list.
        let mut depth = 0usize;
        let mut k = body_open - 1;
        loop {
            match self.text(k) {
                ")" => depth += 1,
                "(" => {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                _ => {}
            }
            if k == header_start {
                return Err(self.err(k, "malformed function header"));
            }
            k -= 1;
        }
        if k == header_start || self.toks[k - 1].kind != TokenKind::Ident {
            return Err(self.err(k, "function definition without a name"));
        }
        let name = self.text(k - 1).to_string();
        let close = self.matching(body_open)?;
        let index = self.functions.len();
        let first = self.statements.len() as u32;
        self.functions.push(Function {
            name,
            statements: first..first,
        });
        self.block(body_open + 1, close, index)?;
        self.functions[index].statements.end = self.statements.len() as u32;
        Ok(())
    }

    fn block(&mut self, mut i: usize, end: usize, func: usize) -> Result<()> {
        while i < end {
            let t = self.text(i);
            let kind = self.toks[i].kind;
            match t {
                "{" | "}" | ";" | "else" | "do" => i += 1,
                "if" | "while" | "for" | "switch" if kind == TokenKind::Ident => {
                    if i + 1 >= end || self.text(i + 1) != "(" {
                        return Err(self.err(i, format!("expected `(` after `{t}`")));
                    }
                    let close = self.matching(i + 1)?;
                    let mut stop = close + 1;
                    // `do ... while (c);` keeps its semicolon.
                    if t == "while" && stop < end && self.text(stop) == ";" {
                        stop += 1;
                    }
                    self.push(i, stop, StatementKind::Condition, false, Some(func));
                    i = stop;
                }
                "case" => {
                    while i < end && self.text(i) != ":" {
                        i += 1;
                    }
                    i += 1;
                }
                "default" if i + 1 < end && self.text(i + 1) == ":" => i += 2,
                _ if kind == TokenKind::Ident
                    && !is_keyword(t)
                    && i + 1 < end
                    && self.text(i + 1) == ":"
                    && (i == 0 || matches!(self.text(i - 1), ";" | "{" | "}" | ":" | ")")) =>
                {
                    i += 2
                }
                _ => {
                    let start = i;
                    let mut j = i;
                    while j < end {
                        match self.text(j) {
                            "(" | "[" | "{" => j = self.matching(j)? + 1,
                            ";" => {
                                j += 1;
                                break;
                            }
                            "}" => break,
                            _ => j += 1,
                        }
                    }
                    if j > end {
                        return Err(self.err(start, "statement crosses its block"));
                    }
                    self.push_simple(start, j, Some(func));
                    i = j;
                }
            }
        }
        Ok(())
    }

    fn push_simple(&mut self, start: usize, end: usize, func: Option<usize>) {
        let (kind, declares) = self.classify(start, end);
        self.push(start, end, kind, declares, func);
    }

    fn push(&mut self, start: usize, end: usize, kind: StatementKind, declares: bool, func: Option<usize>) {
        let id = self.statements.len() as u32;
        self.statements.push(Statement {
            id,
            line_start: self.toks[start].line,
            line_end: self.toks[end - 1].line,
            tokens: start..end,
            kind,
            declares,
            function: func,
        });
    }

    fn classify(&self, start: usize, end: usize) -> (StatementKind, bool) {
        let first = self.text(start);
        if first == "return" {
            return (StatementKind::Return, false);
        }
        if matches!(first, "break" | "continue" | "goto") {
            return (StatementKind::Other, false);
        }
        let has_assign = top_level(self, start, end).any(|i| ASSIGN_OPS.contains(&self.text(i)));
        if self.looks_like_declaration(start, end) {
            return if has_assign {
                (StatementKind::Assignment, true)
            } else {
                (StatementKind::Declaration, false)
            };
        }
        let last = if self.text(end - 1) == ";" { end - 1 } else { end };
        let incdec = |i: usize| matches!(self.text(i), "++" | "--");
        if has_assign || incdec(start) || (last > start && incdec(last - 1)) {
            return (StatementKind::Assignment, false);
        }
        if self.toks[start].kind == TokenKind::Ident
            && start + 1 < last
            && self.text(start + 1) == "("
            && self.matching(start + 1).ok() == Some(last - 1)
        {
            return (StatementKind::Call, false);
        }
        (StatementKind::Other, false)
    }

    fn looks_like_declaration(&self, start: usize, end: usize) -> bool {
        if TYPE_WORDS.contains(&self.text(start)) {
            return true;
        }
        if self.toks[start].kind != TokenKind::Ident || is_keyword(self.text(start)) || start + 1 >= end {
            return false;
        }
        // `T x`, `T *x`: a typedef name followed by a declarator.
        let mut j = start + 1;
        while j < end && self.text(j) == "*" {
            j += 1;
        }
        j < end
            && self.toks[j].kind == TokenKind::Ident
            && !is_keyword(self.text(j))
            && (j + 1 >= end || matches!(self.text(j + 1), "=" | ";" | "," | "["))
    }
}

/// Token indices in `[start, end)` not nested in any group.
fn top_level<'p>(p: &'p Parser<'_>, start: usize, end: usize) -> impl Iterator<Item = usize> + 'p {
    let mut depth = 0i32;
    (start..end).filter(move |&i| match p.text(i) {
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
