use super::ast::Span;
use super::diag::{DiagCode, Diagnostic};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(u64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Colon,
    Semi,
    Comma,
    Arrow,
    Underscore,
    Op(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Arrow => "`=>`".into(),
            Tok::Underscore => "`_`".into(),
            Tok::Op(op) => format!("`{op}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

/// Operators from other languages that users (and models) tend to write.
fn unknown_operator_hint(op: &str) -> &'static str {
    match op {
        "&&" => "use `and`",
        "||" => "use `or`",
        "!" => "use `not`",
        "=" => "use `==` for comparison",
        "/" | "%" => "division is not supported",
        "<<" | ">>" | "&" | "|" | "^" | "~" => "bitwise operators are not supported; declare narrower fields instead",
        _ => "not a PFS operator",
    }
}

pub fn lex(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);

    macro_rules! span_from {
        ($l:expr, $c:expr) => {
            Span::new($l, $c, line, col)
        };
    }

    while i < chars.len() {
        let c = chars[i];
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
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
                col += 1;
            }
            continue;
        }
        let (sl, sc) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
                col += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let tok = if word == "_" { Tok::Underscore } else { Tok::Ident(word) };
            toks.push(Token { tok, span: span_from!(sl, sc) });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
                col += 1;
            }
            let text: String = chars[start..i].iter().filter(|c| **c != '_').collect();
            let parsed = if let Some(hex) = text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
                u64::from_str_radix(hex, 16)
            } else if let Some(bin) = text.strip_prefix("0b").or_else(|| text.strip_prefix("0B")) {
                u64::from_str_radix(bin, 2)
            } else {
                text.parse::<u64>()
            };
            match parsed {
                Ok(v) => toks.push(Token { tok: Tok::Int(v), span: span_from!(sl, sc) }),
                Err(_) => {
                    return Err(Diagnostic::error(
                        DiagCode::LexError,
                        Some(span_from!(sl, sc)),
                        format!("invalid integer literal `{text}`"),
                    ))
                }
            }
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (tok, len): (Option<Tok>, usize) = match (c, next) {
            ('=', Some('=')) => (Some(Tok::Op("==")), 2),
            ('=', Some('>')) => (Some(Tok::Arrow), 2),
            ('!', Some('=')) => (Some(Tok::Op("!=")), 2),
            ('<', Some('=')) => (Some(Tok::Op("<=")), 2),
            ('>', Some('=')) => (Some(Tok::Op(">=")), 2),
            ('<', Some('<')) | ('>', Some('>')) | ('&', Some('&')) | ('|', Some('|')) => (None, 2),
            ('<', _) => (Some(Tok::Op("<")), 1),
            ('>', _) => (Some(Tok::Op(">")), 1),
            ('+', _) => (Some(Tok::Op("+")), 1),
            ('-', _) => (Some(Tok::Op("-")), 1),
            ('*', _) => (Some(Tok::Op("*")), 1),
            ('{', _) => (Some(Tok::LBrace), 1),
            ('}', _) => (Some(Tok::RBrace), 1),
            ('(', _) => (Some(Tok::LParen), 1),
            (')', _) => (Some(Tok::RParen), 1),
            ('[', _) => (Some(Tok::LBracket), 1),
            (']', _) => (Some(Tok::RBracket), 1),
            (':', _) => (Some(Tok::Colon), 1),
            (';', _) => (Some(Tok::Semi), 1),
            (',', _) => (Some(Tok::Comma), 1),
            ('=' | '!' | '/' | '%' | '&' | '|' | '^' | '~', _) => (None, 1),
            _ => {
                return Err(Diagnostic::error(
                    DiagCode::LexError,
                    Some(Span::new(sl, sc, sl, sc + 1)),
                    format!("unexpected character {c:?}"),
                ))
            }
        };
        i += len;
        col += len as u32;
        match tok {
            Some(tok) => toks.push(Token { tok, span: span_from!(sl, sc) }),
            None => {
                let op: String = chars[i - len..i].iter().collect();
                return Err(Diagnostic::error(
                    DiagCode::UnknownOperator,
                    Some(span_from!(sl, sc)),
                    format!("unknown operator `{op}` ({})", unknown_operator_hint(&op)),
                ));
            }
        }
    }
    toks.push(Token { tok: Tok::Eof, span: Span::new(line, col, line, col) });
    Ok(toks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        lex(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn lexes_literals_in_all_radices() {
        assert_eq!(kinds("0x1F 0b101 1_000"), vec![Tok::Int(31), Tok::Int(5), Tok::Int(1000), Tok::Eof]);
    }

    #[test]
    fn skips_comments() {
        assert_eq!(kinds("a # trailing\n# whole line\nb"), vec![Tok::Ident("a".into()), Tok::Ident("b".into()), Tok::Eof]);
    }

    #[test]
    fn rejects_c_style_operators() {
        for src in ["a && b", "a = 1", "a / 2", "a << 1", "!a"] {
            let err = lex(src).unwrap_err();
            assert_eq!(err.code, DiagCode::UnknownOperator, "{src}");
        }
    }

    #[test]
    fn rejects_stray_characters_with_location() {
        let err = lex("format x {\n  a: u8 $\n}").unwrap_err();
        assert_eq!(err.code, DiagCode::LexError);
        let span = err.location.unwrap();
        assert_eq!((span.start_line, span.start_col), (2, 9));
    }

    #[test]
    fn oversized_literal_is_lexical() {
        assert_eq!(lex("99999999999999999999999").unwrap_err().code, DiagCode::LexError);
    }
}
