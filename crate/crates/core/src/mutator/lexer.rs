//! Tokenizer for preprocessed C-like source.
//!
//! Comments and preprocessor directives are skipped. Every token keeps its
//! byte span so mutants can be rendered by splicing the original text.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Int,
    Float,
    Str,
    Char,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub start: usize,
    pub end: usize,
    /// 1-based line of the first byte.
    pub line: usize,
}

impl Token {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.start..self.end]
    }
}

// Longest first so that maximal munch works with a linear scan.
const PUNCTUATORS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=",
    "-=", "*=", "/=", "%=", "&=", "|=", "^=", "##", "+", "-", "*", "/", "%", "<", ">", "=", "!",
    "~", "&", "|", "^", "?", ":", ";", ",", ".", "(", ")", "[", "]", "{", "}", "#",
];

pub fn tokenize(src: &str, path: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut at_line_start = true;

    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            line += 1;
            i += 1;
            at_line_start = true;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'#' && at_line_start {
            // Directive: skip to the end of the logical line.
            while i < bytes.len() && bytes[i] != b'\n' {
                if bytes[i] == b'\\' && i + 1 < bytes.len() && bytes[i + 1] == b'\n' {
                    line += 1;
                    i += 2;
                    continue;
                }
                i += 1;
            }
            continue;
        }
        at_line_start = false;

        if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            let open_line = line;
            i += 2;
            loop {
                if i + 1 >= bytes.len() {
                    return Err(Error::Parse {
                        file: path.to_string(),
                        line: open_line,
                        message: "unterminated comment".into(),
                    });
                }
                if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                    i += 2;
                    break;
                }
                if bytes[i] == b'\n' {
                    line += 1;
                }
                i += 1;
            }
            continue;
        }

        let start = i;
        let kind = if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            TokenKind::Ident
        } else if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            lex_number(bytes, &mut i)
        } else if c == b'"' || c == b'\'' {
            let quote = c;
            i += 1;
            loop {
                match bytes.get(i) {
                    None | Some(b'\n') => {
                        return Err(Error::Parse {
                            file: path.to_string(),
                            line,
                            message: "unterminated literal".into(),
                        })
                    }
                    Some(b'\\') => i += 2,
                    Some(&b) if b == quote => {
                        i += 1;
                        break;
                    }
                    Some(_) => i += 1,
                }
            }
            if quote == b'"' {
                TokenKind::Str
            } else {
                TokenKind::Char
            }
        } else {
            let rest = &src[i..];
            match PUNCTUATORS.iter().find(|p| rest.starts_with(**p)) {
                Some(p) => {
                    i += p.len();
                    TokenKind::Punct
                }
                None => {
                    return Err(Error::Parse {
                        file: path.to_string(),
                        line,
                        message: format!("unexpected character `{}`", rest.chars().next().unwrap_or('?')),
                    })
                }
            }
        };
        tokens.push(Token { kind, start, end: i, line });
    }
    Ok(tokens)
}

fn lex_number(bytes: &[u8], i: &mut usize) -> TokenKind {
    let mut float = false;
    if bytes[*i] == b'0' && matches!(bytes.get(*i + 1), Some(b'x' | b'X')) {
        *i += 2;
        while *i < bytes.len() && (bytes[*i].is_ascii_hexdigit()) {
            *i += 1;
        }
    } else {
        while *i < bytes.len() {
            let b = bytes[*i];
            if b.is_ascii_digit() {
                *i += 1;
            } else if b == b'.' {
                float = true;
                *i += 1;
            } else if (b == b'e' || b == b'E')
                && bytes
                    .get(*i + 1)
                    .is_some_and(|n| n.is_ascii_digit() || *n == b'+' || *n == b'-')
            {
                float = true;
                *i += 2;
            } else {
                break;
            }
        }
    }
    // Suffixes: u, l, f in any case and combination.
    while *i < bytes.len() && matches!(bytes[*i], b'u' | b'U' | b'l' | b'L' | b'f' | b'F') {
        if matches!(bytes[*i], b'f' | b'F') {
            float = true;
        }
        *i += 1;
    }
    if float {
        TokenKind::Float
    } else {
        TokenKind::Int
    }
}
