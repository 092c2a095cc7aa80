//! Semantic well-formedness: scoping, typing, variant rules and alignment.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::ast::*;
use super::diag::{DiagCode, Diagnostic};
use super::eval::{type_of, Ty};
use super::parser::is_keyword;

pub const MAX_DISCRIMINATOR_BITS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    UInt(u32),
    Bytes,
}

#[derive(Debug, Clone)]
struct Scope {
    /// Fields decoded on every path reaching this point.
    definite: BTreeMap<String, Kind>,
    /// Fields decoded on some but not all paths.
    maybe: BTreeSet<String>,
    /// Possible bit offsets modulo 8.
    residues: BTreeSet<u64>,
}

impl Scope {
    fn root() -> Scope {
        Scope { definite: BTreeMap::new(), maybe: BTreeSet::new(), residues: BTreeSet::from([0]) }
    }

    /// Join of alternative paths.
    fn join(branches: Vec<Scope>) -> Scope {
        let mut it = branches.into_iter();
        let mut acc = it.next().expect("at least one branch");
        for b in it {
            let (keep, drop): (BTreeMap<_, _>, BTreeMap<_, _>) =
                std::mem::take(&mut acc.definite).into_iter().partition(|(k, _)| b.definite.contains_key(k));
            acc.maybe.extend(drop.into_keys());
            acc.maybe.extend(b.definite.keys().filter(|k| !keep.contains_key(*k)).cloned());
            acc.maybe.extend(b.maybe);
            acc.definite = keep;
            acc.residues.extend(b.residues);
        }
        acc
    }
}

struct Validator<'a> {
    diags: Vec<Diagnostic>,
    /// Every name declared anywhere in the format spec.
    all_names: HashSet<&'a str>,
    /// Names declared so far in stream order, on any path.
    seen: HashSet<String>,
}

fn loc(o: &Origin) -> Option<Span> {
    o.0
}

impl<'a> Validator<'a> {
    fn err(&mut self, code: DiagCode, origin: &Origin, msg: String) {
        self.diags.push(Diagnostic::error(code, loc(origin), msg));
    }

    fn check_refs(&mut self, expr: &Expr, scope: &Scope, origin: &Origin, ctx: &str) {
        for name in expr.field_refs() {
            match scope.definite.get(name) {
                Some(Kind::UInt(_)) => {}
                Some(Kind::Bytes) => self.err(
                    DiagCode::BytesReference,
                    origin,
                    format!("{ctx} references byte-array field `{name}`; only integer fields have values"),
                ),
                None if scope.maybe.contains(name) || self.seen.contains(name) => self.err(
                    DiagCode::ConditionalReference,
                    origin,
                    format!("{ctx} references `{name}`, which is not decoded on every path reaching this point"),
                ),
                None if self.all_names.contains(name) => self.err(
                    DiagCode::ForwardReference,
                    origin,
                    format!("{ctx} references `{name}` before it is declared"),
                ),
                None => self.err(DiagCode::UndefinedField, origin, format!("{ctx} references undefined field `{name}`")),
            }
        }
    }

    fn check_type(&mut self, expr: &Expr, want: Ty, origin: &Origin, ctx: &str) {
        match type_of(expr) {
            Ok(t) if t == want => {}
            Ok(_) => {
                let what = if want == Ty::Bool { "a boolean" } else { "an integer" };
                self.err(DiagCode::TypeError, origin, format!("{ctx} `{expr}` must be {what} expression"));
            }
            Err(msg) => self.err(DiagCode::TypeError, origin, format!("{ctx}: {msg}")),
        }
    }

    fn check_constraint(&mut self, c: &Constraint, scope: &Scope, ctx: &str) {
        if c.id != ConstraintId::of(&c.expr) {
            self.err(DiagCode::IdMismatch, &c.origin, format!("constraint id `{}` does not match its expression `{}`", c.id, c.expr));
        }
        self.check_type(&c.expr, Ty::Bool, &c.origin, ctx);
        self.check_refs(&c.expr, scope, &c.origin, ctx);
    }

    fn check_duplicates(&mut self, constraints: &[Constraint], ctx: &str) {
        let mut ids = HashSet::new();
        for c in constraints {
            if !ids.insert(&c.id) {
                self.diags.push(Diagnostic::warning(
                    DiagCode::DuplicateConstraint,
                    loc(&c.origin),
                    format!("constraint `{}` on {ctx} is stated more than once", c.expr),
                ));
            }
        }
    }

    fn field(&mut self, f: &FieldDef, scope: &mut Scope) {
        if !is_identifier(&f.name) {
            self.err(DiagCode::SyntaxError, &f.origin, format!("`{}` is not a valid field name", f.name));
        }
        if scope.definite.contains_key(&f.name) || scope.maybe.contains(&f.name) {
            self.err(DiagCode::DuplicateField, &f.origin, format!("field `{}` is declared more than once on the same path", f.name));
        }
        let kind = match &f.ty {
            FieldType::UInt { bits } => {
                if !(1..=64).contains(bits) {
                    self.err(DiagCode::BadWidth, &f.origin, format!("field `{}` has width {bits}; widths must be 1..=64 bits", f.name));
                }
                let bits = (*bits).clamp(1, 64);
                scope.residues = scope.residues.iter().map(|r| (r + u64::from(bits)) % 8).collect();
                Kind::UInt(bits)
            }
            FieldType::Bytes { len } => {
                let ctx = format!("length of `{}`", f.name);
                self.check_type(len, Ty::Int, &f.origin, &ctx);
                self.check_refs(len, scope, &f.origin, &ctx);
                if scope.residues != BTreeSet::from([0]) {
                    self.err(DiagCode::UnalignedBytes, &f.origin, format!("byte-array field `{}` may start off a byte boundary", f.name));
                }
                Kind::Bytes
            }
        };
        scope.maybe.remove(&f.name);
        scope.definite.insert(f.name.clone(), kind);
        self.seen.insert(f.name.clone());
        let ctx = format!("constraint on `{}`", f.name);
        for c in &f.constraints {
            self.check_constraint(c, scope, &ctx);
        }
        self.check_duplicates(&f.constraints, &format!("`{}`", f.name));
    }

    fn block(&mut self, sections: &[Section], scope: &mut Scope, origin: &Origin, what: &str) {
        if sections.is_empty() {
            self.err(DiagCode::EmptyRecord, origin, format!("empty record: {what} declares no fields"));
            return;
        }
        let mut prev_record = false;
        for s in sections {
            match s {
                Section::Record(r) => {
                    if prev_record {
                        self.err(DiagCode::AdjacentRecords, &r.origin, "adjacent records must be merged into one".into());
                    }
                    if r.fields.is_empty() {
                        self.err(DiagCode::EmptyRecord, &r.origin, "empty record".into());
                    }
                    for f in &r.fields {
                        self.field(f, scope);
                    }
                }
                Section::Conditional(c) => {
                    self.check_constraint(&c.guard, scope, "conditional guard");
                    let mut inner = scope.clone();
                    self.block(&c.body, &mut inner, &c.origin, "conditional body");
                    *scope = Scope::join(vec![scope.clone(), inner]);
                }
                Section::Variant(v) => self.variant(v, scope),
            }
            prev_record = matches!(s, Section::Record(_));
        }
    }

    fn variant(&mut self, v: &Variant, scope: &mut Scope) {
        match scope.definite.get(&v.discriminator) {
            Some(Kind::UInt(bits)) => {
                let bits = *bits;
                if bits > MAX_DISCRIMINATOR_BITS {
                    self.err(
                        DiagCode::DiscriminatorTooWide,
                        &v.origin,
                        format!("discriminator too wide: `{}` is {bits} bits, at most {MAX_DISCRIMINATOR_BITS} allowed", v.discriminator),
                    );
                }
                for arm in &v.arms {
                    if bits < 64 && arm.tag >> bits != 0 {
                        self.err(
                            DiagCode::ArmTagOutOfRange,
                            &arm.origin,
                            format!("arm tag {} does not fit in the {bits}-bit discriminator `{}`", arm.tag, v.discriminator),
                        );
                    }
                }
            }
            Some(Kind::Bytes) => self.err(
                DiagCode::DiscriminatorNotInteger,
                &v.origin,
                format!("discriminator `{}` is a byte array, not an integer field", v.discriminator),
            ),
            None => self.check_refs(&Expr::field(v.discriminator.clone()), scope, &v.origin, "switch"),
        }
        let mut tags = HashSet::new();
        for arm in &v.arms {
            if !tags.insert(arm.tag) {
                self.err(DiagCode::DuplicateArmTag, &arm.origin, format!("arm tag {} appears more than once", arm.tag));
            }
        }
        let mut branches = Vec::new();
        for arm in &v.arms {
            let mut inner = scope.clone();
            self.block(&arm.body, &mut inner, &arm.origin, &format!("arm {}", arm.tag));
            branches.push(inner);
        }
        if let Some(d) = &v.default {
            let mut inner = scope.clone();
            self.block(d, &mut inner, &v.origin, "default arm");
            branches.push(inner);
        }
        if !branches.is_empty() {
            *scope = Scope::join(branches);
        }
    }
}

pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && name != "_"
        && !is_keyword(name)
}

/// All invariant violations of `spec`, in source order within each check.
/// Warnings do not make a spec invalid.
pub fn validate_spec(spec: &FormatSpec) -> Vec<Diagnostic> {
    let mut v = Validator { diags: Vec::new(), all_names: HashSet::new(), seen: HashSet::new() };
    walk_fields(&spec.sections, &mut |f| {
        v.all_names.insert(f.name.as_str());
    });
    if !is_identifier(&spec.name) {
        v.err(DiagCode::SyntaxError, &spec.origin, format!("`{}` is not a valid format name", spec.name));
    }
    let mut scope = Scope::root();
    v.block(&spec.sections, &mut scope, &spec.origin, &format!("format `{}`", spec.name));
    if !spec.sections.is_empty() && scope.residues != BTreeSet::from([0]) {
        v.err(DiagCode::UnalignedLength, &spec.origin, "the format's total width may not be a whole number of bytes".into());
    }
    for c in &spec.constraints {
        v.check_constraint(c, &scope, "global constraint");
    }
    v.check_duplicates(&spec.constraints, "the format");
    v.diags
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::parser::parse_syntax;

    fn codes(src: &str) -> Vec<DiagCode> {
        validate_spec(&parse_syntax(src).unwrap()).into_iter().map(|d| d.code).collect()
    }

    #[test]
    fn clean_spec_has_no_diagnostics() {
        assert!(codes("format v { vers: u3 where vers == 1; diag: u5; }").is_empty());
    }

    #[test]
    fn empty_format_is_an_empty_record() {
        assert_eq!(codes("format empty {}"), vec![DiagCode::EmptyRecord]);
        assert_eq!(codes("format e { a: u8; if a == 1 {} }"), vec![DiagCode::EmptyRecord]);
    }

    #[test]
    fn forward_reference_in_length() {
        assert_eq!(codes("format f { data: bytes[n]; n: u8; }"), vec![DiagCode::ForwardReference]);
    }

    #[test]
    fn self_reference_in_length_is_forward() {
        assert_eq!(codes("format f { n: u8; data: bytes[data]; }"), vec![DiagCode::ForwardReference]);
    }

    #[test]
    fn undefined_reference() {
        assert_eq!(codes("format f { a: u8 where b == 1; }"), vec![DiagCode::UndefinedField]);
    }

    #[test]
    fn duplicate_field_on_same_path() {
        assert_eq!(codes("format f { a: u8; a: u8; }"), vec![DiagCode::DuplicateField]);
        assert_eq!(codes("format f { a: u8; if a == 1 { b: u8; } b: u8; }"), vec![DiagCode::DuplicateField]);
    }

    #[test]
    fn arms_may_reuse_names() {
        assert!(codes("format f { t: u8; switch t { 1 => { k: u8; } 2 => { k: u16; } } }").is_empty());
    }

    #[test]
    fn conditional_field_is_not_visible_afterwards() {
        assert_eq!(codes("format f { a: u8; if a == 1 { b: u8; } c: u8 where b == 0; }"), vec![DiagCode::ConditionalReference]);
    }

    #[test]
    fn field_in_every_arm_is_visible_afterwards() {
        assert!(codes("format f { t: u8; switch t { 1 => { k: u8; } _ => { k: u8; } } c: u8 where c == k; }").is_empty());
    }

    #[test]
    fn discriminator_rules() {
        assert_eq!(codes("format f { t: u32; switch t { 1 => { a: u8; } } }"), vec![DiagCode::DiscriminatorTooWide]);
        assert_eq!(codes("format f { t: u8; switch t { 1 => { a: u8; } 1 => { b: u8; } } }"), vec![DiagCode::DuplicateArmTag]);
        assert_eq!(codes("format f { t: u2; switch t { 4 => { a: u8; } } x: u6; }"), vec![DiagCode::ArmTagOutOfRange]);
        assert_eq!(codes("format f { n: u8; t: bytes[n]; switch t { 1 => { a: u8; } } }"), vec![DiagCode::DiscriminatorNotInteger]);
    }

    #[test]
    fn alignment() {
        assert_eq!(codes("format f { a: u3; }"), vec![DiagCode::UnalignedLength]);
        assert_eq!(codes("format f { a: u4; b: bytes[1]; c: u4; }"), vec![DiagCode::UnalignedBytes]);
        assert_eq!(codes("format f { a: u8; if a == 1 { b: u4; } c: u4; }"), vec![DiagCode::UnalignedLength]);
    }

    #[test]
    fn typing_errors() {
        assert_eq!(codes("format f { a: u8 where a + 1; }"), vec![DiagCode::TypeError]);
        assert_eq!(codes("format f { a: u8; b: bytes[a == 1]; }"), vec![DiagCode::TypeError]);
    }

    #[test]
    fn bytes_have_no_value() {
        assert_eq!(codes("format f { n: u8; d: bytes[n] where d == 0; }"), vec![DiagCode::BytesReference]);
    }

    #[test]
    fn bad_width() {
        assert_eq!(codes("format f { a: u0; b: u8; }"), vec![DiagCode::BadWidth, DiagCode::UnalignedLength]);
        assert_eq!(codes("format f { a: u65; }").first(), Some(&DiagCode::BadWidth));
    }

    #[test]
    fn globals_see_only_definite_fields() {
        assert!(codes("format f { len: u8; where len == total_len; }").is_empty());
        assert_eq!(codes("format f { a: u8; if a == 1 { b: u8; } where b == 1; }"), vec![DiagCode::ConditionalReference]);
    }

    #[test]
    fn duplicate_constraint_is_a_warning() {
        let d = validate_spec(&parse_syntax("format f { a: u8 where a == 1 where a == 1; }").unwrap());
        assert_eq!(d.len(), 1);
        assert!(!d[0].is_error());
    }

    #[test]
    fn programmatic_adjacent_records() {
        let spec = FormatSpec::new("f", vec![Section::record(vec![FieldDef::uint("a", 8)]), Section::record(vec![FieldDef::uint("b", 8)])]);
        let d = validate_spec(&spec);
        assert_eq!(d.iter().map(|d| d.code).collect::<Vec<_>>(), vec![DiagCode::AdjacentRecords]);
        assert!(d[0].location.is_none());
    }

    #[test]
    fn diagnostics_carry_locations_for_parsed_input() {
        let d = validate_spec(&parse_syntax("format f {\n  a: u8;\n  b: u8 where c == 1;\n}").unwrap());
        let span = d[0].location.unwrap();
        assert_eq!(span.start_line, 3);
    }
}
