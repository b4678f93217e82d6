//! Tokenizer for the `.mpp` DSL.

use crate::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i64),
    Arrow,    // ->
    FatArrow, // =>
    Colon,
    Lt,
    LtEq,
    Gt,
    Dot,
    DotDot,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
    Star,
    Or, // \/
    Comma,
    At,
    Caret,
    Hash,
    Amp,
    Bang,
    Eq,
    Minus,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::Arrow => "->",
            Tok::FatArrow => "=>",
            Tok::Colon => ":",
            Tok::Lt => "<",
            Tok::LtEq => "<=",
            Tok::Gt => ">",
            Tok::Dot => ".",
            Tok::DotDot => "..",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Semi => ";",
            Tok::Star => "*",
            Tok::Or => "\\/",
            Tok::Comma => ",",
            Tok::At => "@",
            Tok::Caret => "^",
            Tok::Hash => "#",
            Tok::Amp => "&",
            Tok::Bang => "!",
            Tok::Eq => "=",
            Tok::Minus => "-",
            _ => "?",
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

/// Splits the input into tokens; `//` starts a comment running to the end
/// of the line.
pub(crate) fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (sl, sc) = (line, col);
        let mut push = |tok: Tok, width: usize, i: &mut usize, col: &mut usize| {
            out.push(Spanned { tok, line: sl, col: sc });
            *i += width;
            *col += width;
        };
        let next = chars.get(i + 1).copied();
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '/' if next == Some('/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                col += i - start;
                out.push(Spanned { tok: Tok::Ident(s), line: sl, col: sc });
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                col += i - start;
                let n = s.parse::<i64>().map_err(|_| ParseError::Syntax {
                    line: sl,
                    col: sc,
                    msg: format!("integer literal `{s}` out of range"),
                })?;
                out.push(Spanned { tok: Tok::Int(n), line: sl, col: sc });
            }
            '-' if next == Some('>') => push(Tok::Arrow, 2, &mut i, &mut col),
            '=' if next == Some('>') => push(Tok::FatArrow, 2, &mut i, &mut col),
            '<' if next == Some('=') => push(Tok::LtEq, 2, &mut i, &mut col),
            '.' if next == Some('.') => push(Tok::DotDot, 2, &mut i, &mut col),
            '\\' if next == Some('/') => push(Tok::Or, 2, &mut i, &mut col),
            '-' => push(Tok::Minus, 1, &mut i, &mut col),
            '=' => push(Tok::Eq, 1, &mut i, &mut col),
            '<' => push(Tok::Lt, 1, &mut i, &mut col),
            '>' => push(Tok::Gt, 1, &mut i, &mut col),
            '.' => push(Tok::Dot, 1, &mut i, &mut col),
            ':' => push(Tok::Colon, 1, &mut i, &mut col),
            '{' => push(Tok::LBrace, 1, &mut i, &mut col),
            '}' => push(Tok::RBrace, 1, &mut i, &mut col),
            '(' => push(Tok::LParen, 1, &mut i, &mut col),
            ')' => push(Tok::RParen, 1, &mut i, &mut col),
            ';' => push(Tok::Semi, 1, &mut i, &mut col),
            '*' => push(Tok::Star, 1, &mut i, &mut col),
            ',' => push(Tok::Comma, 1, &mut i, &mut col),
            '@' => push(Tok::At, 1, &mut i, &mut col),
            '^' => push(Tok::Caret, 1, &mut i, &mut col),
            '#' => push(Tok::Hash, 1, &mut i, &mut col),
            '&' => push(Tok::Amp, 1, &mut i, &mut col),
            '!' => push(Tok::Bang, 1, &mut i, &mut col),
            other => {
                return Err(ParseError::Syntax {
                    line: sl,
                    col: sc,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}
