//! Tokenizer for the C subset. Tracks line, column, and byte spans so the
//! parser can report positions and slice node text out of the source.

use super::FrontendError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokKind {
    Ident,
    Number,
    CharLit,
    StrLit,
    Sym,
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub kind: TokKind,
    pub text: String,
    pub line: u32,
    pub col: u32,
    pub start: usize,
    pub end: usize,
}

/// Multi-character symbols, longest first so maximal munch works.
const SYMBOLS: &[&str] = &[
    "<<=", ">>=", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=",
    "*=", "/=", "%=", "&=", "|=", "^=", "(", ")", "{", "}", "[", "]", ";", ",", "=", "<", ">",
    "+", "-", "*", "/", "%", "!", "&", "|", "^", "~", "?", ":", ".",
];

pub fn lex(source: &str) -> Result<Vec<Token>, FrontendError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut line: u32 = 1;
    let mut col: u32 = 1;

    let advance = |i: &mut usize, line: &mut u32, col: &mut u32, by: usize, bytes: &[u8]| {
        for _ in 0..by {
            if bytes[*i] == b'\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };

    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1, bytes);
            continue;
        }
        // line comment
        if c == '/' && i + 1 < bytes.len() && bytes[i + 1] == b'/' {
            while i < bytes.len() && bytes[i] != b'\n' {
                advance(&mut i, &mut line, &mut col, 1, bytes);
            }
            continue;
        }
        // block comment
        if c == '/' && i + 1 < bytes.len() && bytes[i + 1] == b'*' {
            let (start_line, start_col) = (line, col);
            advance(&mut i, &mut line, &mut col, 2, bytes);
            let mut closed = false;
            while i + 1 < bytes.len() {
                if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                    advance(&mut i, &mut line, &mut col, 2, bytes);
                    closed = true;
                    break;
                }
                advance(&mut i, &mut line, &mut col, 1, bytes);
            }
            if !closed {
                return Err(FrontendError::Syntax {
                    line: start_line,
                    col: start_col,
                    message: "unterminated block comment".to_string(),
                });
            }
            continue;
        }
        if c == '#' {
            // preprocessor directives are skipped to end of line
            while i < bytes.len() && bytes[i] != b'\n' {
                advance(&mut i, &mut line, &mut col, 1, bytes);
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            let (tl, tc) = (line, col);
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                advance(&mut i, &mut line, &mut col, 1, bytes);
            }
            tokens.push(Token {
                kind: TokKind::Ident,
                text: source[start..i].to_string(),
                line: tl,
                col: tc,
                start,
                end: i,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            let (tl, tc) = (line, col);
            while i < bytes.len()
                && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'.' || bytes[i] == b'_')
            {
                advance(&mut i, &mut line, &mut col, 1, bytes);
            }
            tokens.push(Token {
                kind: TokKind::Number,
                text: source[start..i].to_string(),
                line: tl,
                col: tc,
                start,
                end: i,
            });
            continue;
        }
        if c == '\'' || c == '"' {
            let quote = bytes[i];
            let start = i;
            let (tl, tc) = (line, col);
            advance(&mut i, &mut line, &mut col, 1, bytes);
            while i < bytes.len() && bytes[i] != quote {
                let step = if bytes[i] == b'\\' && i + 1 < bytes.len() {
                    2
                } else {
                    1
                };
                advance(&mut i, &mut line, &mut col, step, bytes);
            }
            if i >= bytes.len() {
                return Err(FrontendError::Syntax {
                    line: tl,
                    col: tc,
                    message: "unterminated literal".to_string(),
                });
            }
            advance(&mut i, &mut line, &mut col, 1, bytes);
            tokens.push(Token {
                kind: if quote == b'\'' {
                    TokKind::CharLit
                } else {
                    TokKind::StrLit
                },
                text: source[start..i].to_string(),
                line: tl,
                col: tc,
                start,
                end: i,
            });
            continue;
        }
        let rest = &source[i..];
        let mut matched = None;
        for sym in SYMBOLS {
            if rest.starts_with(sym) {
                matched = Some(*sym);
                break;
            }
        }
        match matched {
            Some(sym) => {
                let (tl, tc) = (line, col);
                let start = i;
                advance(&mut i, &mut line, &mut col, sym.len(), bytes);
                tokens.push(Token {
                    kind: TokKind::Sym,
                    text: sym.to_string(),
                    line: tl,
                    col: tc,
                    start,
                    end: i,
                });
            }
            None => {
                return Err(FrontendError::Syntax {
                    line,
                    col,
                    message: format!("unexpected character {c:?}"),
                });
            }
        }
    }
    tokens.push(Token {
        kind: TokKind::Eof,
        text: String::new(),
        line,
        col,
        start: bytes.len(),
        end: bytes.len(),
    });
    Ok(tokens)
}
