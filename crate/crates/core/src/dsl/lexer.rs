use crate::pattern::Span;

use super::Diagnostic;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    TermVar(String),
    WrapVar(String),
    Int(u64),
    Num(f64),
    LParen,
    RParen,
    Bar,
    Star,
    Arrow,
    DoubleArrow,
    At,
    Colon,
    Plus,
    Minus,
    Slash,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::TermVar(s) => format!("`${s}`"),
            Tok::WrapVar(s) => format!("`~{s}`"),
            Tok::Int(v) => format!("number `{v}`"),
            Tok::Num(v) => format!("number `{v}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Star => "`*`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::DoubleArrow => "`=>`".into(),
            Tok::At => "`@`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: Span,
}

fn ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

pub(crate) fn lex(src: &str) -> Result<Vec<Token>, Vec<Diagnostic>> {
    let chars: Vec<char> = src.chars().collect();
    let mut tokens = Vec::new();
    let mut errors = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);

    while i < chars.len() {
        let c = chars[i];
        let span = Span::new(line, col);
        let start = i;
        let push = |tok: Tok, tokens: &mut Vec<Token>| tokens.push(Token { tok, span });

        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            c if c.is_whitespace() => i += 1,
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' => {
                push(Tok::LParen, &mut tokens);
                i += 1;
            }
            ')' => {
                push(Tok::RParen, &mut tokens);
                i += 1;
            }
            '|' => {
                push(Tok::Bar, &mut tokens);
                i += 1;
            }
            '*' => {
                push(Tok::Star, &mut tokens);
                i += 1;
            }
            '@' => {
                push(Tok::At, &mut tokens);
                i += 1;
            }
            ':' => {
                push(Tok::Colon, &mut tokens);
                i += 1;
            }
            '+' => {
                push(Tok::Plus, &mut tokens);
                i += 1;
            }
            '/' => {
                push(Tok::Slash, &mut tokens);
                i += 1;
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                push(Tok::Arrow, &mut tokens);
                i += 2;
            }
            '-' => {
                push(Tok::Minus, &mut tokens);
                i += 1;
            }
            '=' if chars.get(i + 1) == Some(&'>') => {
                push(Tok::DoubleArrow, &mut tokens);
                i += 2;
            }
            '$' | '~' => {
                i += 1;
                let name_start = i;
                while i < chars.len() && ident_char(chars[i]) {
                    i += 1;
                }
                let name: String = chars[name_start..i].iter().collect();
                if name.is_empty() || !name.chars().next().unwrap().is_ascii_alphabetic() {
                    errors.push(Diagnostic::syntax(
                        span,
                        format!("expected a variable name after `{c}`"),
                    ));
                } else if c == '$' {
                    push(Tok::TermVar(name), &mut tokens);
                } else {
                    push(Tok::WrapVar(name), &mut tokens);
                }
            }
            c if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) => {
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                if let Some(v) = text.parse::<u64>().ok().filter(|_| text.bytes().all(|b| b.is_ascii_digit())) {
                    push(Tok::Int(v), &mut tokens);
                } else {
                    match text.parse::<f64>() {
                        Ok(v) => push(Tok::Num(v), &mut tokens),
                        Err(_) => errors.push(Diagnostic::syntax(span, format!("malformed number `{text}`"))),
                    }
                }
            }
            c if c.is_ascii_alphabetic() => {
                while i < chars.len() && ident_char(chars[i]) {
                    i += 1;
                }
                let mut text: String = chars[start..i].iter().collect();
                // `on-wrap` is the only keyword containing a dash.
                if text == "on" && chars[i..].starts_with(&['-', 'w', 'r', 'a', 'p']) {
                    let after = chars.get(i + 5).copied();
                    if !after.is_some_and(ident_char) {
                        i += 5;
                        text = "on-wrap".into();
                    }
                }
                push(Tok::Ident(text), &mut tokens);
            }
            other => {
                errors.push(Diagnostic::syntax(span, format!("unexpected character `{other}`")));
                i += 1;
            }
        }
        col += (i - start) as u32;
    }
    tokens.push(Token {
        tok: Tok::Eof,
        span: Span::new(line, col),
    });
    if errors.is_empty() {
        Ok(tokens)
    } else {
        Err(errors)
    }
}
