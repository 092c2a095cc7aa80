use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Source position range, 1-based lines and columns, end exclusive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl Span {
    pub fn new(start_line: u32, start_col: u32, end_line: u32, end_col: u32) -> Self {
        Span { start_line, start_col, end_line, end_col }
    }

    pub fn to(self, end: Span) -> Span {
        Span { end_line: end.end_line, end_col: end.end_col, ..self }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start_line, self.start_col)
    }
}

/// Where a node came from. Source positions never participate in equality,
/// so a parsed spec and a programmatically built one compare structurally.
#[derive(Debug, Clone, Copy, Default)]
pub struct Origin(pub Option<Span>);

impl PartialEq for Origin {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Origin {}

impl From<Span> for Origin {
    fn from(span: Span) -> Self {
        Origin(Some(span))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul => 6,
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge)
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul)
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }

    /// The comparison that holds exactly when `self` does not.
    pub fn negated_comparison(self) -> Option<BinOp> {
        Some(match self {
            BinOp::Eq => BinOp::Ne,
            BinOp::Ne => BinOp::Eq,
            BinOp::Lt => BinOp::Ge,
            BinOp::Le => BinOp::Gt,
            BinOp::Gt => BinOp::Le,
            BinOp::Ge => BinOp::Lt,
            _ => return None,
        })
    }

    /// `a op b` == `b op' a`.
    pub fn mirrored_comparison(self) -> Option<BinOp> {
        Some(match self {
            BinOp::Eq => BinOp::Eq,
            BinOp::Ne => BinOp::Ne,
            BinOp::Lt => BinOp::Gt,
            BinOp::Le => BinOp::Ge,
            BinOp::Gt => BinOp::Lt,
            BinOp::Ge => BinOp::Le,
            _ => return None,
        })
    }
}

/// Expression over field values, integer literals and the packet's total
/// byte length.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Lit(u64),
    Field(String),
    TotalLen,
    Not(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn field(name: impl Into<String>) -> Expr {
        Expr::Field(name.into())
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn not(inner: Expr) -> Expr {
        Expr::Not(Box::new(inner))
    }

    /// Field names referenced, in first-occurrence order, without duplicates.
    pub fn field_refs(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit_refs(&mut |name| {
            if !out.contains(&name) {
                out.push(name);
            }
        });
        out
    }

    fn visit_refs<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            Expr::Field(name) => f(name),
            Expr::Lit(_) | Expr::TotalLen => {}
            Expr::Not(inner) => inner.visit_refs(f),
            Expr::Binary(_, l, r) => {
                l.visit_refs(f);
                r.visit_refs(f);
            }
        }
    }

    pub fn uses_total_len(&self) -> bool {
        match self {
            Expr::TotalLen => true,
            Expr::Lit(_) | Expr::Field(_) => false,
            Expr::Not(inner) => inner.uses_total_len(),
            Expr::Binary(_, l, r) => l.uses_total_len() || r.uses_total_len(),
        }
    }

    /// Rewrites every field reference through `f`.
    pub fn map_fields(&self, f: &impl Fn(&str) -> String) -> Expr {
        match self {
            Expr::Field(name) => Expr::Field(f(name)),
            Expr::Lit(v) => Expr::Lit(*v),
            Expr::TotalLen => Expr::TotalLen,
            Expr::Not(inner) => Expr::not(inner.map_fields(f)),
            Expr::Binary(op, l, r) => Expr::bin(*op, l.map_fields(f), r.map_fields(f)),
        }
    }

    /// Top-level conjuncts of an `and` chain.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        match self {
            Expr::Binary(BinOp::And, l, r) => {
                let mut out = l.conjuncts();
                out.extend(r.conjuncts());
                out
            }
            other => vec![other],
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, _, _) => op.precedence(),
            Expr::Not(_) => 3,
            _ => 10,
        }
    }

    fn write_operand(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

/// Minimal-parenthesis rendering with decimal literals. This text is the
/// normalized form that constraint ids hash.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(v) => write!(f, "{v}"),
            Expr::Field(name) => f.write_str(name),
            Expr::TotalLen => f.write_str("total_len"),
            Expr::Not(inner) => {
                f.write_str("not ")?;
                inner.write_operand(f, 3)
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                if op.is_comparison() {
                    // comparisons do not chain
                    l.write_operand(f, p + 1)?;
                    write!(f, " {} ", op.symbol())?;
                    r.write_operand(f, p + 1)
                } else {
                    l.write_operand(f, p)?;
                    write!(f, " {} ", op.symbol())?;
                    r.write_operand(f, p + 1)
                }
            }
        }
    }
}

/// Content hash of a normalized constraint expression.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConstraintId(pub String);

impl ConstraintId {
    pub fn of(expr: &Expr) -> ConstraintId {
        let digest = Sha256::digest(expr.to_string().as_bytes());
        ConstraintId(format!("c{}", &hex::encode(digest)[..12]))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub id: ConstraintId,
    pub expr: Expr,
    pub origin: Origin,
}

impl Constraint {
    pub fn new(expr: Expr) -> Constraint {
        Constraint { id: ConstraintId::of(&expr), expr, origin: Origin::default() }
    }

    pub fn with_origin(mut self, origin: impl Into<Origin>) -> Constraint {
        self.origin = origin.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldType {
    /// Unsigned big-endian integer of 1..=64 bits.
    UInt { bits: u32 },
    /// Opaque byte array whose length in bytes is given by an expression.
    Bytes { len: Expr },
}

impl FieldType {
    pub fn static_bits(&self) -> Option<u64> {
        match self {
            FieldType::UInt { bits } => Some(u64::from(*bits)),
            FieldType::Bytes { .. } => None,
        }
    }

    pub fn is_uint(&self) -> bool {
        matches!(self, FieldType::UInt { .. })
    }
}

impl fmt::Display for FieldType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldType::UInt { bits } => write!(f, "u{bits}"),
            FieldType::Bytes { len } => write!(f, "bytes[{len}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDef {
    pub name: String,
    pub ty: FieldType,
    pub constraints: Vec<Constraint>,
    pub origin: Origin,
}

impl FieldDef {
    pub fn uint(name: impl Into<String>, bits: u32) -> FieldDef {
        FieldDef {
            name: name.into(),
            ty: FieldType::UInt { bits },
            constraints: Vec::new(),
            origin: Origin::default(),
        }
    }

    pub fn bytes(name: impl Into<String>, len: Expr) -> FieldDef {
        FieldDef {
            name: name.into(),
            ty: FieldType::Bytes { len },
            constraints: Vec::new(),
            origin: Origin::default(),
        }
    }

    pub fn with_constraint(mut self, expr: Expr) -> FieldDef {
        self.constraints.push(Constraint::new(expr));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub fields: Vec<FieldDef>,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conditional {
    pub guard: Constraint,
    pub body: Vec<Section>,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arm {
    pub tag: u64,
    pub body: Vec<Section>,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variant {
    pub discriminator: String,
    pub arms: Vec<Arm>,
    pub default: Option<Vec<Section>>,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Section {
    Record(Record),
    Conditional(Conditional),
    Variant(Variant),
}

impl Section {
    pub fn record(fields: Vec<FieldDef>) -> Section {
        Section::Record(Record { fields, origin: Origin::default() })
    }

    pub fn conditional(guard: Expr, body: Vec<Section>) -> Section {
        Section::Conditional(Conditional {
            guard: Constraint::new(guard),
            body,
            origin: Origin::default(),
        })
    }

    pub fn variant(discriminator: impl Into<String>, arms: Vec<(u64, Vec<Section>)>, default: Option<Vec<Section>>) -> Section {
        Section::Variant(Variant {
            discriminator: discriminator.into(),
            arms: arms
                .into_iter()
                .map(|(tag, body)| Arm { tag, body, origin: Origin::default() })
                .collect(),
            default,
            origin: Origin::default(),
        })
    }
}

/// A packet format: an ordered block of sections plus spec-global constraints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatSpec {
    pub name: String,
    pub sections: Vec<Section>,
    pub constraints: Vec<Constraint>,
    pub origin: Origin,
}

impl FormatSpec {
    pub fn new(name: impl Into<String>, sections: Vec<Section>) -> FormatSpec {
        FormatSpec {
            name: name.into(),
            sections,
            constraints: Vec::new(),
            origin: Origin::default(),
        }
    }

    pub fn with_global(mut self, expr: Expr) -> FormatSpec {
        self.constraints.push(Constraint::new(expr));
        self
    }

    /// Every field declaration in declaration order, across all arms.
    pub fn all_fields(&self) -> Vec<&FieldDef> {
        let mut out = Vec::new();
        walk_fields(&self.sections, &mut |f| out.push(f));
        out
    }

    /// Every constraint site in declaration order: field constraints in
    /// stream order, then globals. Guards are not constraints.
    pub fn all_constraints(&self) -> Vec<&Constraint> {
        let mut out = Vec::new();
        walk_fields(&self.sections, &mut |f| out.extend(f.constraints.iter()));
        out.extend(self.constraints.iter());
        out
    }

    pub fn find_constraint(&self, id: &ConstraintId) -> Option<&Constraint> {
        self.all_constraints().into_iter().find(|c| &c.id == id)
    }

    /// Recomputes every constraint id from its expression.
    pub fn refresh_ids(&mut self) {
        fn block(sections: &mut [Section]) {
            for s in sections {
                match s {
                    Section::Record(r) => {
                        for f in &mut r.fields {
                            for c in &mut f.constraints {
                                c.id = ConstraintId::of(&c.expr);
                            }
                        }
                    }
                    Section::Conditional(c) => {
                        c.guard.id = ConstraintId::of(&c.guard.expr);
                        block(&mut c.body);
                    }
                    Section::Variant(v) => {
                        for arm in &mut v.arms {
                            block(&mut arm.body);
                        }
                        if let Some(d) = &mut v.default {
                            block(d);
                        }
                    }
                }
            }
        }
        block(&mut self.sections);
        for c in &mut self.constraints {
            c.id = ConstraintId::of(&c.expr);
        }
    }

    /// Applies `rename` to every field name and reference.
    pub fn rename_fields(&self, rename: &impl Fn(&str) -> String) -> FormatSpec {
        fn constraint(c: &Constraint, rename: &impl Fn(&str) -> String) -> Constraint {
            Constraint::new(c.expr.map_fields(rename)).with_origin(c.origin)
        }
        fn block(sections: &[Section], rename: &impl Fn(&str) -> String) -> Vec<Section> {
            sections
                .iter()
                .map(|s| match s {
                    Section::Record(r) => Section::Record(Record {
                        fields: r
                            .fields
                            .iter()
                            .map(|f| FieldDef {
                                name: rename(&f.name),
                                ty: match &f.ty {
                                    FieldType::UInt { bits } => FieldType::UInt { bits: *bits },
                                    FieldType::Bytes { len } => FieldType::Bytes { len: len.map_fields(rename) },
                                },
                                constraints: f.constraints.iter().map(|c| constraint(c, rename)).collect(),
                                origin: f.origin,
                            })
                            .collect(),
                        origin: r.origin,
                    }),
                    Section::Conditional(c) => Section::Conditional(Conditional {
                        guard: constraint(&c.guard, rename),
                        body: block(&c.body, rename),
                        origin: c.origin,
                    }),
                    Section::Variant(v) => Section::Variant(Variant {
                        discriminator: rename(&v.discriminator),
                        arms: v
                            .arms
                            .iter()
                            .map(|a| Arm { tag: a.tag, body: block(&a.body, rename), origin: a.origin })
                            .collect(),
                        default: v.default.as_ref().map(|d| block(d, rename)),
                        origin: v.origin,
                    }),
                })
                .collect()
        }
        FormatSpec {
            name: self.name.clone(),
            sections: block(&self.sections, rename),
            constraints: self.constraints.iter().map(|c| constraint(c, rename)).collect(),
            origin: self.origin,
        }
    }
}

pub(crate) fn walk_fields<'a>(sections: &'a [Section], f: &mut impl FnMut(&'a FieldDef)) {
    for s in sections {
        match s {
            Section::Record(r) => r.fields.iter().for_each(&mut *f),
            Section::Conditional(c) => walk_fields(&c.body, f),
            Section::Variant(v) => {
                for arm in &v.arms {
                    walk_fields(&arm.body, f);
                }
                if let Some(d) = &v.default {
                    walk_fields(d, f);
                }
            }
        }
    }
}
