use std::fmt;

use crate::diagnostic::{Category, Diagnostic, Location};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// `def`, `postulate`, `check`, `eval`, `fun`, `Sig`, `in`, `Type`.
    Keyword(&'static str),
    Underscore,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Colon,
    ColonEq,
    Comma,
    Arrow,
    FatArrow,
    Eq,
    At,
    Dot1,
    Dot2,
}

pub const RESERVED: [&str; 8] = ["def", "postulate", "check", "eval", "fun", "Sig", "in", "Type"];

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Keyword(k) => write!(f, "`{k}`"),
            Tok::Underscore => f.write_str("`_`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::ColonEq => f.write_str("`:=`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::FatArrow => f.write_str("`=>`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::At => f.write_str("`@`"),
            Tok::Dot1 => f.write_str("`.1`"),
            Tok::Dot2 => f.write_str("`.2`"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub loc: Location,
}

fn ident_start(c: char) -> bool {
    c.is_alphabetic()
}

fn ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\'' || c == '*'
}

pub fn tokenize(file: &str, text: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let loc = |line, col| Location::new(file, line, col);

    while i < chars.len() {
        let c = chars[i];
        let peek = chars.get(i + 1).copied();
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '-' && peek == Some('-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = loc(line, col);
        let (tok, len) = match c {
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '{' => (Tok::LBrace, 1),
            '}' => (Tok::RBrace, 1),
            ',' => (Tok::Comma, 1),
            '@' => (Tok::At, 1),
            ':' if peek == Some('=') => (Tok::ColonEq, 2),
            ':' => (Tok::Colon, 1),
            '-' if peek == Some('>') => (Tok::Arrow, 2),
            '=' if peek == Some('>') => (Tok::FatArrow, 2),
            '=' => (Tok::Eq, 1),
            '.' if peek == Some('1') => (Tok::Dot1, 2),
            '.' if peek == Some('2') => (Tok::Dot2, 2),
            '_' if !peek.is_some_and(ident_continue) => (Tok::Underscore, 1),
            c if ident_start(c) => {
                let mut j = i + 1;
                while j < chars.len() {
                    let d = chars[j];
                    // `-` joins words (`S1-rec`) but never starts `->` or `--`.
                    let joins = d == '-' && chars.get(j + 1).is_some_and(|n| n.is_alphanumeric());
                    if ident_continue(d) || joins {
                        j += 1;
                    } else {
                        break;
                    }
                }
                let word: String = chars[i..j].iter().collect();
                let tok = match RESERVED.iter().find(|k| **k == word) {
                    Some(k) => Tok::Keyword(k),
                    None => Tok::Ident(word),
                };
                (tok, j - i)
            }
            other => {
                return Err(Diagnostic::new(
                    Category::Lex,
                    format!("illegal character {other:?}"),
                )
                .at(start))
            }
        };
        out.push(Token { tok, loc: start });
        i += len;
        col += len as u32;
    }
    Ok(out)
}
