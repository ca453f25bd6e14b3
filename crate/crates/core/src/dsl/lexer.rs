use super::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Var(String),
    Wild(String),
    Int(i64),
    Kw(&'static str),
    Punct(&'static str),
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Var(s) | Tok::Wild(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Kw(k) | Tok::Punct(k) => format!("`{k}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

const KEYWORDS: [&str; 5] = ["ALWAYS", "EVENTUALLY", "NEVER", "DIV", "IN"];

// longest first so maximal munch falls out of a linear scan
const PUNCT: [&str; 29] = [
    "::::", ":::", "|||", "::", ":-", ":<", "||", "\\=", "<=", ">=", "≤", "≥", "≠", ":", "|",
    "<", ">", "=", "(", ")", ",", ".", ";", "{", "}", "+", "*", "@", "-",
];

pub(crate) fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut col = 1;
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if c == '\n' {
            line += 1;
            col = 1;
            rest = &rest[1..];
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            rest = &rest[c.len_utf8()..];
            continue;
        }
        if c == '#' {
            let end = rest.find('\n').unwrap_or(rest.len());
            col += rest[..end].chars().count();
            rest = &rest[end..];
            continue;
        }
        let start_col = col;
        let (tok, len) = if c.is_ascii_alphabetic() || c == '_' {
            let len = rest
                .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                .unwrap_or(rest.len());
            let word = &rest[..len];
            let tok = if c == '_' {
                Tok::Wild(word.to_string())
            } else if c.is_ascii_uppercase() {
                match KEYWORDS.iter().find(|k| **k == word) {
                    Some(k) => Tok::Kw(k),
                    None => Tok::Var(word.to_string()),
                }
            } else {
                Tok::Ident(word.to_string())
            };
            (tok, len)
        } else if c.is_ascii_digit() {
            let len = rest.find(|ch: char| !ch.is_ascii_digit()).unwrap_or(rest.len());
            let v = rest[..len].parse::<i64>().map_err(|_| ParseError {
                line,
                column: col,
                expected: "integer that fits in 64 bits".into(),
                found: format!("`{}`", &rest[..len]),
            })?;
            (Tok::Int(v), len)
        } else if let Some(p) = PUNCT.iter().find(|p| rest.starts_with(**p)) {
            (Tok::Punct(p), p.len())
        } else {
            return Err(ParseError {
                line,
                column: col,
                expected: "a term, operator or punctuation".into(),
                found: format!("`{c}`"),
            });
        };
        col += rest[..len].chars().count();
        rest = &rest[len..];
        out.push(Token { tok, line, column: start_col });
    }
    out.push(Token { tok: Tok::Eof, line, column: col });
    Ok(out)
}
