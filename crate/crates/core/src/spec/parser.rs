//! Recursive-descent parser for PFS source text.
//!
//! The grammar is documented in `docs/pfs-grammar.md`. Parsing stops at the
//! first syntax error; semantic checks happen afterwards in `validate`.

use super::ast::*;
use super::diag::{DiagCode, Diagnostic};
use super::lexer::{lex, Tok, Token};

const KEYWORDS: &[&str] = &["format", "where", "if", "switch", "bytes", "and", "or", "not", "total_len"];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word) || parse_uint_type(word).is_some()
}

/// `u<N>` type names; returns N without range-checking it.
fn parse_uint_type(word: &str) -> Option<u32> {
    let digits = word.strip_prefix('u')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some(digits.parse().unwrap_or(u32::MAX))
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(Diagnostic::error(DiagCode::SyntaxError, Some(self.span()), msg))
    }

    fn expect(&mut self, want: Tok, context: &str) -> PResult<Span> {
        if *self.peek() == want {
            Ok(self.bump().span)
        } else {
            self.error(format!("expected {} {context}, found {}", want.describe(), self.peek().describe()))
        }
    }

    fn at_word(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == word)
    }

    fn expect_word(&mut self, word: &str) -> PResult<Span> {
        if self.at_word(word) {
            Ok(self.bump().span)
        } else {
            self.error(format!("expected `{word}`, found {}", self.peek().describe()))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(name) if !is_keyword(&name) => {
                let span = self.bump().span;
                Ok((name, span))
            }
            Tok::Ident(name) => self.error(format!("`{name}` is reserved and cannot be used as {what}")),
            other => self.error(format!("expected {what}, found {}", other.describe())),
        }
    }

    fn spec(&mut self) -> PResult<FormatSpec> {
        let start = self.expect_word("format")?;
        let (name, _) = self.ident("a format name")?;
        let open = self.expect(Tok::LBrace, "to open the format body")?;
        let mut globals = Vec::new();
        let sections = self.block(Some(&mut globals))?;
        let close = self.expect(Tok::RBrace, "to close the format body")?;
        if *self.peek() != Tok::Eof {
            return self.error(format!("unexpected {} after the format body", self.peek().describe()));
        }
        let _ = open;
        Ok(FormatSpec { name, sections, constraints: globals, origin: start.to(close).into() })
    }

    /// Items up to (not including) the closing brace. Global `where` items are
    /// only accepted when `globals` is provided (the root block).
    fn block(&mut self, mut globals: Option<&mut Vec<Constraint>>) -> PResult<Vec<Section>> {
        let mut sections: Vec<Section> = Vec::new();
        let mut pending: Vec<FieldDef> = Vec::new();
        let flush = |sections: &mut Vec<Section>, pending: &mut Vec<FieldDef>| {
            if !pending.is_empty() {
                let first = pending[0].origin.0;
                let last = pending[pending.len() - 1].origin.0;
                let origin = match (first, last) {
                    (Some(a), Some(b)) => Origin(Some(a.to(b))),
                    _ => Origin::default(),
                };
                sections.push(Section::Record(Record { fields: std::mem::take(pending), origin }));
            }
        };
        loop {
            match self.peek().clone() {
                Tok::RBrace | Tok::Eof => break,
                Tok::Ident(w) if w == "if" => {
                    flush(&mut sections, &mut pending);
                    sections.push(self.conditional()?);
                }
                Tok::Ident(w) if w == "switch" => {
                    flush(&mut sections, &mut pending);
                    sections.push(self.variant()?);
                }
                Tok::Ident(w) if w == "where" => {
                    let start = self.bump().span;
                    let expr = self.expr()?;
                    let end = self.expect(Tok::Semi, "after a global constraint")?;
                    match globals.as_deref_mut() {
                        Some(g) => g.push(Constraint::new(expr).with_origin(start.to(end))),
                        None => {
                            return Err(Diagnostic::error(
                                DiagCode::SyntaxError,
                                Some(start),
                                "global `where` constraints are only allowed at the top level of a format",
                            ))
                        }
                    }
                }
                _ => pending.push(self.field()?),
            }
        }
        flush(&mut sections, &mut pending);
        Ok(sections)
    }

    fn field(&mut self) -> PResult<FieldDef> {
        let (name, start) = self.ident("a field name")?;
        self.expect(Tok::Colon, "after the field name")?;
        let ty = self.field_type()?;
        let mut constraints = Vec::new();
        while self.at_word("where") {
            let s = self.bump().span;
            let expr = self.expr()?;
            constraints.push(Constraint::new(expr).with_origin(s.to(self.prev_span())));
        }
        let end = self.expect(Tok::Semi, "to end the field declaration")?;
        Ok(FieldDef { name, ty, constraints, origin: start.to(end).into() })
    }

    fn field_type(&mut self) -> PResult<FieldType> {
        match self.peek().clone() {
            Tok::Ident(w) if w == "bytes" => {
                self.bump();
                self.expect(Tok::LBracket, "after `bytes`")?;
                let len = self.expr()?;
                self.expect(Tok::RBracket, "to close the byte-array length")?;
                Ok(FieldType::Bytes { len })
            }
            Tok::Ident(w) => match parse_uint_type(&w) {
                Some(bits) => {
                    self.bump();
                    Ok(FieldType::UInt { bits })
                }
                None => self.error(format!("expected a field type (`uN` or `bytes[...]`), found `{w}`")),
            },
            other => self.error(format!("expected a field type, found {}", other.describe())),
        }
    }

    fn conditional(&mut self) -> PResult<Section> {
        let start = self.expect_word("if")?;
        let g_start = self.span();
        let guard = self.expr()?;
        let guard = Constraint::new(guard).with_origin(g_start.to(self.prev_span()));
        self.expect(Tok::LBrace, "to open the conditional body")?;
        let body = self.block(None)?;
        let end = self.expect(Tok::RBrace, "to close the conditional body")?;
        Ok(Section::Conditional(Conditional { guard, body, origin: start.to(end).into() }))
    }

    fn variant(&mut self) -> PResult<Section> {
        let start = self.expect_word("switch")?;
        let (discriminator, _) = self.ident("a discriminator field")?;
        self.expect(Tok::LBrace, "to open the switch")?;
        let mut arms = Vec::new();
        let mut default: Option<Vec<Section>> = None;
        loop {
            let arm_start = self.span();
            match self.peek().clone() {
                Tok::RBrace => break,
                Tok::Int(tag) => {
                    self.bump();
                    self.expect(Tok::Arrow, "after the arm tag")?;
                    let body = self.arm_body()?;
                    arms.push(Arm { tag, body, origin: arm_start.to(self.prev_span()).into() });
                }
                Tok::Underscore => {
                    self.bump();
                    self.expect(Tok::Arrow, "after `_`")?;
                    if default.is_some() {
                        return Err(Diagnostic::error(DiagCode::SyntaxError, Some(arm_start), "a switch may have only one default arm"));
                    }
                    default = Some(self.arm_body()?);
                }
                other => return self.error(format!("expected an arm tag or `_`, found {}", other.describe())),
            }
            if *self.peek() == Tok::Comma {
                self.bump();
            }
        }
        if arms.is_empty() && default.is_none() {
            return self.error("a switch needs at least one arm");
        }
        let end = self.expect(Tok::RBrace, "to close the switch")?;
        Ok(Section::Variant(Variant { discriminator, arms, default, origin: start.to(end).into() }))
    }

    fn arm_body(&mut self) -> PResult<Vec<Section>> {
        self.expect(Tok::LBrace, "to open the arm body")?;
        let body = self.block(None)?;
        self.expect(Tok::RBrace, "to close the arm body")?;
        Ok(body)
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        while self.at_word("or") {
            self.bump();
            let rhs = self.and_expr()?;
            lhs = Expr::bin(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.not_expr()?;
        while self.at_word("and") {
            self.bump();
            let rhs = self.not_expr()?;
            lhs = Expr::bin(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> PResult<Expr> {
        if self.at_word("not") {
            self.bump();
            return Ok(Expr::not(self.not_expr()?));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let lhs = self.sum()?;
        let op = match self.peek() {
            Tok::Op("==") => BinOp::Eq,
            Tok::Op("!=") => BinOp::Ne,
            Tok::Op("<") => BinOp::Lt,
            Tok::Op("<=") => BinOp::Le,
            Tok::Op(">") => BinOp::Gt,
            Tok::Op(">=") => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.sum()?;
        if matches!(self.peek(), Tok::Op("==" | "!=" | "<" | "<=" | ">" | ">=")) {
            return self.error("comparisons do not chain; combine them with `and`");
        }
        Ok(Expr::bin(op, lhs, rhs))
    }

    fn sum(&mut self) -> PResult<Expr> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Op("+") => BinOp::Add,
                Tok::Op("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.product()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn product(&mut self) -> PResult<Expr> {
        let mut lhs = self.atom()?;
        while *self.peek() == Tok::Op("*") {
            self.bump();
            let rhs = self.atom()?;
            lhs = Expr::bin(BinOp::Mul, lhs, rhs);
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Lit(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "to close the parenthesis")?;
                Ok(e)
            }
            Tok::Ident(w) if w == "total_len" => {
                self.bump();
                Ok(Expr::TotalLen)
            }
            Tok::Ident(w) if !is_keyword(&w) => {
                self.bump();
                Ok(Expr::Field(w))
            }
            other => self.error(format!("expected an operand, found {}", other.describe())),
        }
    }
}

/// Syntax-only parse. Name resolution and layout checks are `validate`'s job.
pub fn parse_syntax(src: &str) -> Result<FormatSpec, Diagnostic> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    p.spec()
}

/// Parses a standalone expression (used for canonical JSON constraint text).
pub fn parse_expr(src: &str) -> Result<Expr, Diagnostic> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return p.error(format!("unexpected {} after expression", p.peek().describe()));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_spec() {
        let s = parse_syntax("format v { vers: u3 where vers == 1; diag: u5; }").unwrap();
        assert_eq!(s.name, "v");
        let fields = s.all_fields();
        assert_eq!(fields.len(), 2);
        assert_eq!(s.all_constraints().len(), 1);
        assert_eq!(fields[0].ty, FieldType::UInt { bits: 3 });
    }

    #[test]
    fn consecutive_fields_form_one_record() {
        let s = parse_syntax("format v { a: u8; b: u8; if a == 1 { c: u8; } d: u8; }").unwrap();
        assert_eq!(s.sections.len(), 3);
        assert!(matches!(&s.sections[0], Section::Record(r) if r.fields.len() == 2));
    }

    #[test]
    fn switch_with_default_and_commas() {
        let s = parse_syntax("format v { t: u8; switch t { 1 => { a: u8; }, 2 => { b: u16; }, _ => { c: u8; } } }").unwrap();
        match &s.sections[1] {
            Section::Variant(v) => {
                assert_eq!(v.arms.len(), 2);
                assert!(v.default.is_some());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_expr("a + b * 2 - 1 >= 3 and not c == 0 or d < 1").unwrap();
        assert_eq!(e.to_string(), "a + b * 2 - 1 >= 3 and not c == 0 or d < 1");
        let grouped = parse_expr("a - (b - 1)").unwrap();
        assert_eq!(grouped.to_string(), "a - (b - 1)");
    }

    #[test]
    fn chained_comparison_is_rejected() {
        assert_eq!(parse_expr("1 < a < 3").unwrap_err().code, DiagCode::SyntaxError);
    }

    #[test]
    fn global_where_only_at_top_level() {
        assert!(parse_syntax("format v { a: u8; where total_len >= 1; }").unwrap().constraints.len() == 1);
        let err = parse_syntax("format v { a: u8; if a == 1 { where a == 1; } }").unwrap_err();
        assert_eq!(err.code, DiagCode::SyntaxError);
    }

    #[test]
    fn keywords_are_not_field_names() {
        assert!(parse_syntax("format v { where: u8; }").is_err());
        assert!(parse_syntax("format v { u8: u8; }").is_err());
    }

    #[test]
    fn missing_semicolon_points_at_next_token() {
        let err = parse_syntax("format v {\n a: u8\n b: u8;\n}").unwrap_err();
        assert_eq!(err.location.unwrap().start_line, 3);
    }
}
