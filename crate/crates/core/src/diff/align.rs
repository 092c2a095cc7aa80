//! Name-free flattening and field alignment.
//!
//! Every field gets a location built only from structure: the chain of
//! conditionals and variant arms enclosing it (with guards and
//! discriminators written positionally), the anchor of the segment it sits in
//! (segments restart after anything of data-dependent width), and its bit
//! offset inside that segment. Fields are aligned by location, never by name.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::gen::check::site_indices;
use crate::spec::ast::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Uint,
    Bytes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatField {
    pub name: String,
    /// Path elements such as `if(@13:1 == 1)` or `switch(@192:8)=2`.
    pub path: Vec<String>,
    /// Empty for the static prefix of a path, otherwise a positional
    /// description of the last data-dependent boundary.
    pub anchor: String,
    pub offset: u64,
    /// Static width in bits; `None` for a byte array of computed length.
    pub bits: Option<u64>,
    /// Positional length expression for byte arrays.
    pub len: Option<String>,
    pub encoding: Encoding,
    /// Positional reference token, e.g. `@16:8`.
    pub token: String,
    pub location: String,
    /// Source form, e.g. `detect_mult: u8`.
    pub definition: String,
}

impl FlatField {
    pub fn end(&self) -> u64 {
        self.bits.map_or(u64::MAX, |b| self.offset + b)
    }

    pub fn path_key(&self) -> String {
        path_key(&self.path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatConstraint {
    /// Declaration-order index among `FormatSpec::all_constraints`.
    pub site: usize,
    pub id: ConstraintId,
    pub expr: Expr,
    /// Expression over positional tokens.
    pub positional: Expr,
    pub path: Vec<String>,
    /// Indices into the flattened field list of everything referenced.
    pub refs: Vec<usize>,
    pub uses_total_len: bool,
    pub location: String,
    /// Field names in `expr` resolved to flattened field indices.
    pub bindings: Vec<(String, usize)>,
    /// Guards and arm selections on the enclosing path.
    pub conditions: Vec<Condition>,
}

/// A path condition: a guard, or `discriminator == tag`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condition {
    pub expr: Expr,
    pub bindings: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatSpec {
    pub fields: Vec<FlatField>,
    pub constraints: Vec<FlatConstraint>,
}

pub fn path_key(path: &[String]) -> String {
    path.iter().map(|p| format!("/{p}")).collect()
}

fn position(anchor: &str, offset: u64) -> String {
    if anchor.is_empty() {
        format!("@{offset}")
    } else {
        format!("@{anchor}+{offset}")
    }
}

#[derive(Clone)]
struct Ctx {
    path: Vec<String>,
    anchor: String,
    offset: u64,
    /// name -> index into fields
    scope: HashMap<String, usize>,
    conds: Vec<Condition>,
}

struct Flattener<'s> {
    fields: Vec<FlatField>,
    constraints: Vec<FlatConstraint>,
    sites: HashMap<*const Constraint, usize>,
    _spec: &'s FormatSpec,
}

impl Flattener<'_> {
    fn positional(&self, e: &Expr, ctx: &Ctx) -> Expr {
        e.map_fields(&|name| match ctx.scope.get(name) {
            Some(i) => self.fields[*i].token.clone(),
            None => format!("?{name}"),
        })
    }

    fn bind(e: &Expr, ctx: &Ctx) -> Vec<(String, usize)> {
        let mut names: Vec<&str> = e.field_refs();
        names.sort_unstable();
        names.dedup();
        names.into_iter().filter_map(|n| ctx.scope.get(n).map(|i| (n.to_string(), *i))).collect()
    }

    fn constraint(&mut self, c: &Constraint, ctx: &Ctx) {
        let positional = self.positional(&c.expr, ctx);
        let refs = c.expr.field_refs().iter().filter_map(|n| ctx.scope.get(*n).copied()).collect();
        let location = format!("{}/{{{positional}}}", path_key(&ctx.path));
        self.constraints.push(FlatConstraint {
            site: self.sites.get(&(c as *const Constraint)).copied().unwrap_or(usize::MAX),
            id: c.id.clone(),
            expr: c.expr.clone(),
            positional,
            path: ctx.path.clone(),
            refs,
            uses_total_len: c.expr.uses_total_len(),
            location,
            bindings: Self::bind(&c.expr, ctx),
            conditions: ctx.conds.clone(),
        });
    }

    /// Walks a block; returns its width in bits when that is constant.
    fn block(&mut self, sections: &[Section], ctx: &mut Ctx) -> Option<u64> {
        let start = (ctx.anchor.clone(), ctx.offset);
        let mut constant = true;
        for s in sections {
            match s {
                Section::Record(r) => {
                    for f in &r.fields {
                        let pos = position(&ctx.anchor, ctx.offset);
                        let (bits, len, encoding) = match &f.ty {
                            FieldType::UInt { bits } => (Some(u64::from(*bits)), None, Encoding::Uint),
                            FieldType::Bytes { len } => match len {
                                Expr::Lit(n) => (Some(n * 8), None, Encoding::Bytes),
                                other => (None, Some(self.positional(other, ctx).to_string()), Encoding::Bytes),
                            },
                        };
                        let token = match (&bits, &len) {
                            (Some(b), _) => format!("{pos}:{b}"),
                            (None, Some(l)) => format!("{pos}:[{l}]"),
                            _ => unreachable!(),
                        };
                        let idx = self.fields.len();
                        self.fields.push(FlatField {
                            name: f.name.clone(),
                            path: ctx.path.clone(),
                            anchor: ctx.anchor.clone(),
                            offset: ctx.offset,
                            bits,
                            len: len.clone(),
                            encoding,
                            location: format!("{}/{pos}", path_key(&ctx.path)),
                            token,
                            definition: format!("{}: {}", f.name, f.ty),
                        });
                        ctx.scope.insert(f.name.clone(), idx);
                        match bits {
                            Some(b) => ctx.offset += b,
                            None => {
                                ctx.anchor = format!("({}:[{}])", pos.trim_start_matches('@'), len.unwrap_or_default());
                                ctx.offset = 0;
                                constant = false;
                            }
                        }
                        for c in &f.constraints {
                            self.constraint(c, ctx);
                        }
                    }
                }
                Section::Conditional(c) => {
                    let guard = self.positional(&c.guard.expr, ctx);
                    let element = format!("if({guard})");
                    let mut inner = ctx.clone();
                    inner.path.push(element.clone());
                    inner.conds.push(Condition { expr: c.guard.expr.clone(), bindings: Self::bind(&c.guard.expr, ctx) });
                    if self.block(&c.body, &mut inner) != Some(0) {
                        let here = position(&ctx.anchor, ctx.offset);
                        ctx.anchor = format!("({}:{element})", here.trim_start_matches('@'));
                        ctx.offset = 0;
                        constant = false;
                    }
                }
                Section::Variant(v) => {
                    let disc = ctx.scope.get(&v.discriminator).map(|i| self.fields[*i].token.clone()).unwrap_or_default();
                    let mut widths = Vec::new();
                    let mut first_scope: Option<HashMap<String, usize>> = None;
                    let disc_expr = Expr::field(v.discriminator.clone());
                    let mut branches: Vec<(String, Expr, &Vec<Section>)> = v
                        .arms
                        .iter()
                        .map(|a| (a.tag.to_string(), Expr::bin(BinOp::Eq, disc_expr.clone(), Expr::Lit(a.tag)), &a.body))
                        .collect();
                    if let Some(d) = &v.default {
                        let none = v
                            .arms
                            .iter()
                            .map(|a| Expr::bin(BinOp::Ne, disc_expr.clone(), Expr::Lit(a.tag)))
                            .reduce(|l, r| Expr::bin(BinOp::And, l, r))
                            .unwrap_or(Expr::bin(BinOp::Eq, Expr::Lit(0), Expr::Lit(0)));
                        branches.push(("_".to_string(), none, d));
                    }
                    for (tag, cond, body) in branches {
                        let mut inner = ctx.clone();
                        inner.path.push(format!("switch({disc})={tag}"));
                        inner.conds.push(Condition { bindings: Self::bind(&cond, ctx), expr: cond });
                        widths.push(self.block(body, &mut inner));
                        // fields decoded in every arm stay visible
                        first_scope = Some(match first_scope {
                            None => inner.scope,
                            Some(prev) => prev.into_iter().filter(|(k, _)| inner.scope.contains_key(k)).collect(),
                        });
                    }
                    let same = widths.first().copied().flatten().filter(|w| widths.iter().all(|x| *x == Some(*w)));
                    if let Some(scope) = first_scope {
                        ctx.scope = scope;
                    }
                    match same {
                        Some(w) => ctx.offset += w,
                        None => {
                            let here = position(&ctx.anchor, ctx.offset);
                            ctx.anchor = format!("({}:switch({disc}))", here.trim_start_matches('@'));
                            ctx.offset = 0;
                            constant = false;
                        }
                    }
                }
            }
        }
        if constant && ctx.anchor == start.0 {
            Some(ctx.offset - start.1)
        } else {
            None
        }
    }
}

pub fn flatten(spec: &FormatSpec) -> FlatSpec {
    let mut f = Flattener { fields: Vec::new(), constraints: Vec::new(), sites: site_indices(spec), _spec: spec };
    let mut ctx = Ctx { path: Vec::new(), anchor: String::new(), offset: 0, scope: HashMap::new(), conds: Vec::new() };
    f.block(&spec.sections, &mut ctx);
    for c in &spec.constraints {
        f.constraint(c, &ctx);
    }
    FlatSpec { fields: f.fields, constraints: f.constraints }
}

/// Fields of both specs whose bit ranges overlap, transitively, within the
/// same path and segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentGroup {
    pub path: String,
    pub anchor: String,
    /// Indices into the first spec's flattened fields.
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl AlignmentGroup {
    pub fn is_aligned(&self) -> bool {
        !self.a.is_empty() && !self.b.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub a: FlatSpec,
    pub b: FlatSpec,
    pub groups: Vec<AlignmentGroup>,
}

impl Alignment {
    /// Groups present on both sides.
    pub fn pairs(&self) -> impl Iterator<Item = &AlignmentGroup> {
        self.groups.iter().filter(|g| g.is_aligned())
    }

    pub fn unmatched_in_a(&self) -> Vec<&FlatField> {
        self.groups.iter().filter(|g| g.b.is_empty()).flat_map(|g| g.a.iter().map(|i| &self.a.fields[*i])).collect()
    }

    pub fn unmatched_in_b(&self) -> Vec<&FlatField> {
        self.groups.iter().filter(|g| g.a.is_empty()).flat_map(|g| g.b.iter().map(|i| &self.b.fields[*i])).collect()
    }

    /// Group index per field, for each side.
    pub fn group_of(&self) -> (Vec<usize>, Vec<usize>) {
        let mut ga = vec![usize::MAX; self.a.fields.len()];
        let mut gb = vec![usize::MAX; self.b.fields.len()];
        for (gi, g) in self.groups.iter().enumerate() {
            for i in &g.a {
                ga[*i] = gi;
            }
            for i in &g.b {
                gb[*i] = gi;
            }
        }
        (ga, gb)
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

pub fn align_fields(a: &FormatSpec, b: &FormatSpec) -> Alignment {
    align_flat(flatten(a), flatten(b))
}

pub fn align_flat(fa: FlatSpec, fb: FlatSpec) -> Alignment {
    // (side, index) nodes bucketed by (path, anchor)
    let mut buckets: BTreeMap<(String, String), Vec<(u8, usize)>> = BTreeMap::new();
    for (i, f) in fa.fields.iter().enumerate() {
        buckets.entry((f.path_key(), f.anchor.clone())).or_default().push((0, i));
    }
    for (i, f) in fb.fields.iter().enumerate() {
        buckets.entry((f.path_key(), f.anchor.clone())).or_default().push((1, i));
    }
    let mut groups = Vec::new();
    for ((path, anchor), nodes) in buckets {
        let field = |n: &(u8, usize)| if n.0 == 0 { &fa.fields[n.1] } else { &fb.fields[n.1] };
        let mut parent: Vec<usize> = (0..nodes.len()).collect();
        for i in 0..nodes.len() {
            for j in i + 1..nodes.len() {
                let (x, y) = (field(&nodes[i]), field(&nodes[j]));
                if x.offset < y.end() && y.offset < x.end() {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri.max(rj)] = ri.min(rj);
                    }
                }
            }
        }
        let mut by_root: BTreeMap<usize, AlignmentGroup> = BTreeMap::new();
        for (k, n) in nodes.iter().enumerate() {
            let r = find(&mut parent, k);
            let g = by_root.entry(r).or_insert_with(|| AlignmentGroup { path: path.clone(), anchor: anchor.clone(), a: Vec::new(), b: Vec::new() });
            if n.0 == 0 {
                g.a.push(n.1);
            } else {
                g.b.push(n.1);
            }
        }
        let mut gs: Vec<AlignmentGroup> = by_root.into_values().collect();
        let start = |g: &AlignmentGroup| {
            g.a.iter().map(|i| fa.fields[*i].offset).chain(g.b.iter().map(|i| fb.fields[*i].offset)).min().unwrap_or(0)
        };
        gs.sort_by_key(start);
        groups.extend(gs);
    }
    Alignment { a: fa, b: fb, groups }
}
