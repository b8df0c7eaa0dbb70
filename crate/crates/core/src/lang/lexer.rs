use super::ast::Span;
use super::LangError;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Attr(String),
    Kw(&'static str),
    Sym(&'static str),
    Eof,
}

const KEYWORDS: &[&str] = &[
    "method", "returns", "requires", "ensures", "invariant", "decreases", "assert", "assume", "if",
    "else", "while", "for", "to", "var", "true", "false", "null", "new", "int", "bool", "array",
    "forall", "exists", "break",
];

// Longest first so that greedy matching works.
const SYMBOLS: &[&str] = &[
    "<==>", "==>", "::", ":=", "==", "!=", "<=", ">=", "&&", "||", "(", ")", "{", "}", "[", "]", "<",
    ">", "+", "-", "*", "/", "%", "!", ":", ",", ";", ".",
];

pub const PATCH_MARKER: &str = "// pr {:trusted}";
pub const TRUST_COMMENT: &str = "// {:trusted}";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineMarker {
    Trusted,
    Patched,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub struct Lexed {
    pub tokens: Vec<Token>,
    /// Trailing trust comments keyed by 1-based line.
    pub markers: BTreeMap<u32, LineMarker>,
}

pub fn lex(src: &str) -> Result<Lexed, LangError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut markers = BTreeMap::new();
    let mut pos = 0;
    let mut line = 1u32;
    let mut line_start = 0usize;

    while pos < bytes.len() {
        let c = bytes[pos];
        if c == b'\n' {
            pos += 1;
            line += 1;
            line_start = pos;
            continue;
        }
        if c.is_ascii_whitespace() {
            pos += 1;
            continue;
        }
        let col = (pos - line_start) as u32 + 1;
        if src[pos..].starts_with("//") {
            let end = src[pos..].find('\n').map(|i| pos + i).unwrap_or(src.len());
            let comment = src[pos..end].trim_end();
            if comment == PATCH_MARKER {
                markers.insert(line, LineMarker::Patched);
            } else if comment == TRUST_COMMENT {
                markers.entry(line).or_insert(LineMarker::Trusted);
            }
            pos = end;
            continue;
        }
        if src[pos..].starts_with("/*") {
            let Some(rel) = src[pos + 2..].find("*/") else {
                return Err(LangError::Syntax {
                    span: Span::new(pos, src.len(), line, col),
                    message: "unterminated block comment".into(),
                });
            };
            let end = pos + 2 + rel + 2;
            for b in &bytes[pos..end] {
                if *b == b'\n' {
                    line += 1;
                }
            }
            if let Some(nl) = src[pos..end].rfind('\n') {
                line_start = pos + nl + 1;
            }
            pos = end;
            continue;
        }
        if src[pos..].starts_with("{:") {
            let Some(rel) = src[pos..].find('}') else {
                return Err(LangError::Syntax {
                    span: Span::new(pos, src.len(), line, col),
                    message: "unterminated attribute".into(),
                });
            };
            let name = src[pos + 2..pos + rel].trim().to_string();
            let end = pos + rel + 1;
            tokens.push(Token { tok: Tok::Attr(name), span: Span::new(pos, end, line, col) });
            pos = end;
            continue;
        }
        if c.is_ascii_digit() {
            let start = pos;
            while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                pos += 1;
            }
            let text = &src[start..pos];
            let value: i64 = text.parse().map_err(|_| LangError::Syntax {
                span: Span::new(start, pos, line, col),
                message: format!("integer literal out of range: {text}"),
            })?;
            tokens.push(Token { tok: Tok::Int(value), span: Span::new(start, pos, line, col) });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = pos;
            while pos < bytes.len() && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_') {
                pos += 1;
            }
            let word = &src[start..pos];
            let tok = match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(word.to_string()),
            };
            tokens.push(Token { tok, span: Span::new(start, pos, line, col) });
            continue;
        }
        match SYMBOLS.iter().find(|s| src[pos..].starts_with(**s)) {
            Some(s) => {
                tokens.push(Token {
                    tok: Tok::Sym(s),
                    span: Span::new(pos, pos + s.len(), line, col),
                });
                pos += s.len();
            }
            None => {
                let ch = src[pos..].chars().next().unwrap_or('?');
                return Err(LangError::Syntax {
                    span: Span::new(pos, pos + ch.len_utf8(), line, col),
                    message: format!("unexpected character '{ch}'"),
                });
            }
        }
    }
    let col = (pos - line_start) as u32 + 1;
    tokens.push(Token { tok: Tok::Eof, span: Span::new(pos, pos, line, col) });
    Ok(Lexed { tokens, markers })
}
