//! Tokenizer. Newlines end statements except inside brackets.

use super::ast::Span;
use super::DslError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Number(f64),
    Imag(f64),
    Sym(&'static str),
    Newline,
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

const SYMBOLS: &[&str] = &[
    "->", "=>", "=", "@", ",", "(", ")", "{", "}", "[", "]", "+", "-", "*", "/", "~", "&", "|", ";",
];

/// Characters after which a trailing `+` or `-` belongs to an identifier.
fn ends_signed_ident(next: Option<char>) -> bool {
    match next {
        None => true,
        Some(c) => {
            c.is_whitespace()
                || matches!(c, ')' | ',' | '@' | '}' | ']' | ';' | '*' | '&' | '|' | '#')
        }
    }
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let mut depth = 0usize;
    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        if c == '\n' {
            if depth == 0
                && !matches!(
                    tokens.last(),
                    Some(Token {
                        tok: Tok::Newline,
                        ..
                    }) | None
                )
            {
                tokens.push(Token {
                    tok: Tok::Newline,
                    span,
                });
            }
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
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let value: f64 = s
                .parse()
                .map_err(|_| DslError::syntax(span, format!("malformed number `{s}`")))?;
            let tok = if i < chars.len()
                && chars[i] == 'i'
                && !chars
                    .get(i + 1)
                    .is_some_and(|c| c.is_alphanumeric() || *c == '_')
            {
                i += 1;
                Tok::Imag(value)
            } else {
                Tok::Number(value)
            };
            col += i - start;
            tokens.push(Token { tok, span });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || matches!(chars[i], '_' | '.')) {
                i += 1;
            }
            while i < chars.len()
                && matches!(chars[i], '+' | '-')
                && ends_signed_ident(chars.get(i + 1).copied())
            {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            tokens.push(Token {
                tok: Tok::Ident(s),
                span,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) else {
            return Err(DslError::syntax(
                span,
                format!("unexpected character `{c}`"),
            ));
        };
        match *sym {
            "(" | "{" | "[" => depth += 1,
            ")" | "}" | "]" => depth = depth.saturating_sub(1),
            _ => {}
        }
        i += sym.len();
        col += sym.len();
        tokens.push(Token {
            tok: Tok::Sym(sym),
            span,
        });
    }
    if !matches!(
        tokens.last(),
        Some(Token {
            tok: Tok::Newline,
            ..
        }) | None
    ) {
        tokens.push(Token {
            tok: Tok::Newline,
            span: Span { line, col },
        });
    }
    tokens.push(Token {
        tok: Tok::Eof,
        span: Span { line, col },
    });
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    fn id(s: &str) -> Tok {
        Tok::Ident(s.into())
    }

    #[test]
    fn signed_identifiers() {
        assert_eq!(
            toks("X+ @ t2"),
            vec![id("X+"), Tok::Sym("@"), id("t2"), Tok::Newline, Tok::Eof]
        );
        assert_eq!(
            toks("(X-)"),
            vec![
                Tok::Sym("("),
                id("X-"),
                Tok::Sym(")"),
                Tok::Newline,
                Tok::Eof
            ]
        );
        assert_eq!(
            toks("a+b"),
            vec![id("a"), Tok::Sym("+"), id("b"), Tok::Newline, Tok::Eof]
        );
        assert_eq!(
            toks("X+*Z+"),
            vec![id("X+"), Tok::Sym("*"), id("Z+"), Tok::Newline, Tok::Eof]
        );
        assert_eq!(
            toks("v->w"),
            vec![id("v"), Tok::Sym("->"), id("w"), Tok::Newline, Tok::Eof]
        );
    }

    #[test]
    fn numbers_and_times() {
        assert_eq!(
            toks("t1.5=0.5"),
            vec![
                id("t1.5"),
                Tok::Sym("="),
                Tok::Number(0.5),
                Tok::Newline,
                Tok::Eof
            ]
        );
        assert_eq!(
            toks("2i 1e-3 .5"),
            vec![
                Tok::Imag(2.0),
                Tok::Number(1e-3),
                Tok::Number(0.5),
                Tok::Newline,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn newlines_inside_brackets_are_ignored() {
        let t = toks("family F = {\n a\n b\n}\n# note\n\nx");
        assert_eq!(t.iter().filter(|t| **t == Tok::Newline).count(), 2);
        assert!(tokenize("a ? b").is_err());
    }

    #[test]
    fn crlf_is_accepted() {
        assert_eq!(
            toks("a\r\nb"),
            vec![id("a"), Tok::Newline, id("b"), Tok::Newline, Tok::Eof]
        );
    }
}
