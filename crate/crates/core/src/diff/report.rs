//! Differential comparison of a code-derived and a document-derived spec.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::align::{align_fields, Alignment, Encoding, FlatConstraint, FlatField, FlatSpec};
use super::equiv::{explore, literal_probes, text_seed, Method, Var, TOTAL_LEN_BITS};
use crate::gen::check::check_packet;
use crate::gen::corpus::hex_bytes;
use crate::gen::generate::{packet_seed, Generator};
use crate::spec::ast::{Expr, FormatSpec};
use crate::spec::canonical::canonical_digest;
use crate::spec::eval::eval_bool;

pub const SCHEMA_VERSION: u32 = 1;
/// Negatives tried per constraint discrepancy when looking for a witness.
pub const WITNESS_NEGATIVES: u64 = 64;
/// Positives of the other side screened per constraint discrepancy.
pub const WITNESS_POSITIVES: usize = 256;
const WITNESS_POSITIVE_SEED: u64 = 0x5eed_0f_d1ff;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Kind {
    TypeMismatch,
    MissingFieldInCode,
    MissingFieldInDoc,
    ConstraintMissingInCode,
    ConstraintMissingInDoc,
    ConstraintConflict,
}

impl Kind {
    pub const ALL: [Kind; 6] = [
        Kind::TypeMismatch,
        Kind::MissingFieldInCode,
        Kind::MissingFieldInDoc,
        Kind::ConstraintMissingInCode,
        Kind::ConstraintMissingInDoc,
        Kind::ConstraintConflict,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::TypeMismatch => "TYPE_MISMATCH",
            Kind::MissingFieldInCode => "MISSING_FIELD_IN_CODE",
            Kind::MissingFieldInDoc => "MISSING_FIELD_IN_DOC",
            Kind::ConstraintMissingInCode => "CONSTRAINT_MISSING_IN_CODE",
            Kind::ConstraintMissingInDoc => "CONSTRAINT_MISSING_IN_DOC",
            Kind::ConstraintConflict => "CONSTRAINT_CONFLICT",
        }
    }

    /// The same finding seen with the roles of the two specs exchanged.
    pub fn swapped(self) -> Kind {
        match self {
            Kind::MissingFieldInCode => Kind::MissingFieldInDoc,
            Kind::MissingFieldInDoc => Kind::MissingFieldInCode,
            Kind::ConstraintMissingInCode => Kind::ConstraintMissingInDoc,
            Kind::ConstraintMissingInDoc => Kind::ConstraintMissingInCode,
            k => k,
        }
    }

    pub fn is_constraint(self) -> bool {
        matches!(self, Kind::ConstraintMissingInCode | Kind::ConstraintMissingInDoc | Kind::ConstraintConflict)
    }

    fn missing_field_in(side: Side) -> Kind {
        match side {
            Side::Code => Kind::MissingFieldInCode,
            Side::Doc => Kind::MissingFieldInDoc,
        }
    }

    fn constraint_missing_in(side: Side) -> Kind {
        match side {
            Side::Code => Kind::ConstraintMissingInCode,
            Side::Doc => Kind::ConstraintMissingInDoc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Code,
    Doc,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Code => Side::Doc,
            Side::Doc => Side::Code,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Code => "code",
            Side::Doc => "doc",
        }
    }
}

/// Each side's definition at the location, or `None` where it has none.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Details {
    pub code: Option<String>,
    pub doc: Option<String>,
}

impl Details {
    fn set(&mut self, side: Side, text: Option<String>) {
        match side {
            Side::Code => self.code = text,
            Side::Doc => self.doc = text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    #[serde(with = "hex_bytes")]
    pub bytes: Vec<u8>,
    pub accepted_by: Side,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub kind: Kind,
    pub location: String,
    pub details: Details,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decided_by: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecRef {
    pub name: String,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub schema_version: u32,
    pub code_spec: SpecRef,
    pub doc_spec: SpecRef,
    pub discrepancies: Vec<Discrepancy>,
    /// Count per kind, every kind present, plus `total`.
    pub summary: BTreeMap<String, usize>,
}

pub fn summarize(discrepancies: &[Discrepancy]) -> BTreeMap<String, usize> {
    let mut m: BTreeMap<String, usize> = Kind::ALL.iter().map(|k| (k.as_str().to_string(), 0)).collect();
    for d in discrepancies {
        *m.get_mut(d.kind.as_str()).expect("every kind is listed") += 1;
    }
    m.insert("total".into(), discrepancies.len());
    m
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.discrepancies.is_empty()
    }

    pub fn count(&self, kind: Kind) -> usize {
        self.discrepancies.iter().filter(|d| d.kind == kind).count()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<ValidationReport, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone)]
struct GroupInfo {
    /// Present on both sides.
    aligned: bool,
    /// Aligned with equal coverage, encodings and dynamic lengths.
    matches: bool,
    /// Usable as a single integer variable.
    comparable: bool,
    start: u64,
    width: u32,
}

fn coverage(fields: &[&FlatField]) -> (u64, u64) {
    let lo = fields.iter().map(|f| f.offset).min().unwrap_or(0);
    let hi = fields.iter().map(|f| f.end()).max().unwrap_or(0);
    (lo, hi)
}

/// Maximal runs of one encoding, so a coarse integer matches a run of fine
/// integers but not a mix of integers and bytes.
fn runs(fields: &[&FlatField]) -> Vec<(u64, u64, Encoding)> {
    let mut sorted: Vec<&FlatField> = fields.to_vec();
    sorted.sort_by_key(|f| (f.offset, f.end()));
    let mut out: Vec<(u64, u64, Encoding)> = Vec::new();
    for f in sorted {
        match out.last_mut() {
            Some(last) if last.2 == f.encoding && last.1 >= f.offset => last.1 = last.1.max(f.end()),
            _ => out.push((f.offset, f.end(), f.encoding)),
        }
    }
    out
}

fn dynamic(fields: &[&FlatField]) -> Vec<(u64, String)> {
    fields.iter().filter_map(|f| f.len.clone().map(|l| (f.offset, l))).collect()
}

fn describe(fields: &[&FlatField]) -> String {
    fields.iter().map(|f| f.definition.as_str()).collect::<Vec<_>>().join("; ")
}

struct Ctx<'s> {
    specs: [&'s FormatSpec; 2],
    al: Alignment,
    group_of: [Vec<usize>; 2],
    info: Vec<GroupInfo>,
}

fn side_index(s: Side) -> usize {
    match s {
        Side::Code => 0,
        Side::Doc => 1,
    }
}

impl<'s> Ctx<'s> {
    fn flat(&self, s: Side) -> &FlatSpec {
        match s {
            Side::Code => &self.al.a,
            Side::Doc => &self.al.b,
        }
    }

    fn group(&self, s: Side, field: usize) -> usize {
        self.group_of[side_index(s)][field]
    }

    fn groups_of(&self, s: Side, bindings: &[(String, usize)]) -> BTreeSet<usize> {
        bindings.iter().map(|(_, f)| self.group(s, *f)).collect()
    }

    /// Value of a field inside its group variable (most significant bit
    /// first, as on the wire).
    fn field_value(&self, s: Side, field: usize, group_value: u128) -> u64 {
        let f = &self.flat(s).fields[field];
        let g = &self.info[self.group(s, field)];
        let w = f.bits.expect("comparable fields have static width") as u32;
        let shift = g.width - (f.offset - g.start) as u32 - w;
        let mask = if w >= 128 { u128::MAX } else { (1u128 << w) - 1 };
        ((group_value >> shift) & mask) as u64
    }

    fn probes_for_group(&self, g: usize, field_probes: &[u128]) -> Vec<u128> {
        let info = &self.info[g];
        let all = if info.width >= 128 { u128::MAX } else { (1u128 << info.width) - 1 };
        let grp = &self.al.groups[g];
        let mut out = Vec::new();
        let members = grp.a.iter().map(|i| &self.al.a.fields[*i]).chain(grp.b.iter().map(|i| &self.al.b.fields[*i]));
        for f in members {
            let Some(w) = f.bits else { continue };
            let w = w as u32;
            let shift = info.width - (f.offset - info.start) as u32 - w;
            let fmax = if w >= 128 { u128::MAX } else { (1u128 << w) - 1 };
            let mut vals = vec![0, 1, fmax.saturating_sub(1), fmax];
            vals.extend(field_probes.iter().copied());
            for v in vals.into_iter().filter(|v| *v <= fmax) {
                let placed = v << shift;
                out.push(placed);
                out.push((all & !(fmax << shift)) | placed);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// A constraint or path condition ready for evaluation.
struct Bound<'e> {
    side: Side,
    expr: &'e Expr,
    bindings: &'e [(String, usize)],
}

struct Question<'e> {
    vars: Vec<Var>,
    var_of_group: HashMap<usize, usize>,
    total_len: Option<usize>,
    assumptions: Vec<Bound<'e>>,
    goal: Bound<'e>,
}

impl Question<'_> {
    fn holds(&self, ctx: &Ctx, b: &Bound, values: &[u128]) -> bool {
        let lookup = |name: &str| {
            let (_, field) = b.bindings.iter().find(|(n, _)| n == name)?;
            let var = self.var_of_group.get(&ctx.group(b.side, *field))?;
            Some(ctx.field_value(b.side, *field, values[*var]))
        };
        let tl = self.total_len.map_or(0, |i| values[i] as u64);
        eval_bool(b.expr, &lookup, tl).unwrap_or(false)
    }
}

enum Outcome {
    Implied,
    Conflict(Method),
    Missing(Method),
}

fn decide(ctx: &Ctx, q: &Question, seed: u64) -> Outcome {
    let mut counter = false;
    let mut consistent = false;
    let method = explore(&q.vars, seed, |values| {
        if q.assumptions.iter().all(|a| q.holds(ctx, a, values)) {
            if q.holds(ctx, &q.goal, values) {
                consistent = true;
            } else {
                counter = true;
            }
        }
        counter && consistent
    });
    match (counter, consistent) {
        (false, _) => Outcome::Implied,
        (true, false) => Outcome::Conflict(method),
        (true, true) => Outcome::Missing(method),
    }
}

fn is_ancestor_or_self(anc: &[String], path: &[String]) -> bool {
    anc.len() <= path.len() && anc.iter().zip(path).all(|(a, b)| a == b)
}

struct Finding {
    kind: Kind,
    location: String,
    details: Details,
    decided_by: String,
    /// Side owning the constraint and its site, for the witness search.
    owner: Option<(Side, usize)>,
}

fn compare_constraint(ctx: &Ctx, owner: Side, c: &FlatConstraint) -> Option<Finding> {
    let other = owner.other();
    let mut details = Details::default();
    details.set(owner, Some(c.expr.to_string()));
    let groups = ctx.groups_of(owner, &c.bindings);
    if groups.iter().any(|g| !ctx.info[*g].aligned) {
        return Some(Finding {
            kind: Kind::constraint_missing_in(other),
            location: c.location.clone(),
            details,
            decided_by: "unmatched-field".into(),
            owner: Some((owner, c.site)),
        });
    }
    if groups.iter().any(|g| !ctx.info[*g].comparable) {
        return None;
    }
    let premise: Vec<&FlatConstraint> = ctx
        .flat(other)
        .constraints
        .iter()
        .filter(|p| is_ancestor_or_self(&p.path, &c.path))
        .filter(|p| {
            let pg = ctx.groups_of(other, &p.bindings);
            if pg.is_empty() {
                p.uses_total_len && c.uses_total_len
            } else {
                pg.is_subset(&groups)
            }
        })
        .collect();
    if premise.iter().any(|p| p.positional == c.positional) {
        return None;
    }
    let conditions: Vec<Bound> = c
        .conditions
        .iter()
        .filter(|k| ctx.groups_of(owner, &k.bindings).iter().all(|g| ctx.info[*g].comparable))
        .map(|k| Bound { side: owner, expr: &k.expr, bindings: &k.bindings })
        .collect();
    let mut used: BTreeSet<usize> = groups.clone();
    for k in &conditions {
        used.extend(ctx.groups_of(owner, k.bindings));
    }
    let mut lits = Vec::new();
    literal_probes(&c.expr, &mut lits);
    for p in &premise {
        literal_probes(&p.expr, &mut lits);
    }
    for k in &conditions {
        literal_probes(k.expr, &mut lits);
    }
    let mut vars = Vec::new();
    let mut var_of_group = HashMap::new();
    for g in &used {
        var_of_group.insert(*g, vars.len());
        vars.push(Var { bits: ctx.info[*g].width, probes: ctx.probes_for_group(*g, &lits) });
    }
    let needs_total = c.uses_total_len || premise.iter().any(|p| p.uses_total_len) || conditions.iter().any(|k| k.expr.uses_total_len());
    let total_len = needs_total.then(|| {
        vars.push(Var { bits: TOTAL_LEN_BITS, probes: lits.clone() });
        vars.len() - 1
    });
    let mut assumptions = conditions;
    assumptions.extend(premise.iter().map(|p| Bound { side: other, expr: &p.expr, bindings: &p.bindings }));
    let q = Question { vars, var_of_group, total_len, assumptions, goal: Bound { side: owner, expr: &c.expr, bindings: &c.bindings } };
    let premise_text: Vec<String> = premise.iter().map(|p| p.positional.to_string()).collect();
    let seed = text_seed(std::iter::once(c.location.as_str()).chain(premise_text.iter().map(String::as_str)));
    let (kind, method) = match decide(ctx, &q, seed) {
        Outcome::Implied => return None,
        Outcome::Conflict(m) => (Kind::ConstraintConflict, m),
        Outcome::Missing(m) => (Kind::constraint_missing_in(other), m),
    };
    if !premise.is_empty() {
        details.set(other, Some(premise.iter().map(|p| p.expr.to_string()).collect::<Vec<_>>().join(" and ")));
    }
    let decided_by = if premise.is_empty() { "empty-premise".to_string() } else { method.as_str().to_string() };
    Some(Finding { kind, location: c.location.clone(), details, decided_by, owner: Some((owner, c.site)) })
}

fn field_findings(ctx: &Ctx) -> Vec<Finding> {
    let mut out = Vec::new();
    for (gi, g) in ctx.al.groups.iter().enumerate() {
        let a: Vec<&FlatField> = g.a.iter().map(|i| &ctx.al.a.fields[*i]).collect();
        let b: Vec<&FlatField> = g.b.iter().map(|i| &ctx.al.b.fields[*i]).collect();
        if g.is_aligned() {
            if !ctx.info[gi].matches {
                let pos = if g.anchor.is_empty() { format!("@{}", ctx.info[gi].start) } else { format!("@{}+{}", g.anchor, ctx.info[gi].start) };
                out.push(Finding {
                    kind: Kind::TypeMismatch,
                    location: format!("{}/{pos}", g.path),
                    details: Details { code: Some(describe(&a)), doc: Some(describe(&b)) },
                    decided_by: "layout".into(),
                    owner: None,
                });
            }
            continue;
        }
        let (present, missing_in, fields) = if b.is_empty() { (Side::Code, Side::Doc, a) } else { (Side::Doc, Side::Code, b) };
        for f in fields {
            let mut details = Details::default();
            details.set(present, Some(f.definition.clone()));
            out.push(Finding {
                kind: Kind::missing_field_in(missing_in),
                location: f.location.clone(),
                details,
                decided_by: "layout".into(),
                owner: None,
            });
        }
    }
    out
}

fn group_info(al: &Alignment) -> Vec<GroupInfo> {
    al.groups
        .iter()
        .map(|g| {
            let a: Vec<&FlatField> = g.a.iter().map(|i| &al.a.fields[*i]).collect();
            let b: Vec<&FlatField> = g.b.iter().map(|i| &al.b.fields[*i]).collect();
            let all: Vec<&FlatField> = a.iter().chain(&b).copied().collect();
            let (start, end) = coverage(&all);
            let aligned = g.is_aligned();
            let matches = aligned && coverage(&a) == coverage(&b) && runs(&a) == runs(&b) && dynamic(&a) == dynamic(&b);
            let width = end.saturating_sub(start);
            let comparable = matches && all.iter().all(|f| f.encoding == Encoding::Uint && f.bits.is_some()) && width <= 128;
            GroupInfo { aligned, matches, comparable, start, width: width.min(128) as u32 }
        })
        .collect()
}

struct WitnessSearch<'s> {
    gens: [Option<Generator<'s>>; 2],
    positives: [Option<Vec<Vec<u8>>>; 2],
}

impl<'s> WitnessSearch<'s> {
    fn positives(&mut self, s: Side) -> &[Vec<u8>] {
        let i = side_index(s);
        if self.positives[i].is_none() {
            let ps = match &mut self.gens[i] {
                Some(g) => g.positives(WITNESS_POSITIVE_SEED, WITNESS_POSITIVES).map(|v| v.into_iter().map(|p| p.bytes).collect()).unwrap_or_default(),
                None => Vec::new(),
            };
            self.positives[i] = Some(ps);
        }
        self.positives[i].as_deref().unwrap_or_default()
    }

    /// A packet the other side accepts and the owner rejects at `site`.
    fn find(&mut self, specs: [&FormatSpec; 2], owner: Side, site: usize, location: &str) -> Option<Witness> {
        let other = owner.other();
        let (own_spec, other_spec) = (specs[side_index(owner)], specs[side_index(other)]);
        let base = text_seed([location]);
        if let Some(g) = &mut self.gens[side_index(owner)] {
            for k in 0..WITNESS_NEGATIVES {
                let Ok(bytes) = g.negative_for_site(site, packet_seed(base, k)) else { break };
                if check_packet(other_spec, &bytes).accepted() && !check_packet(own_spec, &bytes).accepted() {
                    return Some(Witness { bytes, accepted_by: other });
                }
            }
        }
        let found = self.positives(other).iter().find(|p| {
            let r = check_packet(own_spec, p);
            !r.accepted() && r.failed_site == Some(site)
        });
        found.filter(|p| check_packet(other_spec, p).accepted()).map(|p| Witness { bytes: p.clone(), accepted_by: other })
    }
}

/// Compares `code` against `doc`. Fields are aligned by position, never by
/// name; constraints are compared per aligned group against the other
/// side's constraints on the same bits.
pub fn diff_specs(code: &FormatSpec, doc: &FormatSpec) -> ValidationReport {
    let al = align_fields(code, doc);
    let (ga, gb) = al.group_of();
    let info = group_info(&al);
    let ctx = Ctx { specs: [code, doc], al, group_of: [ga, gb], info };

    let mut findings = field_findings(&ctx);
    for side in [Side::Code, Side::Doc] {
        for c in &ctx.flat(side).constraints {
            findings.extend(compare_constraint(&ctx, side, c));
        }
    }
    let mut seen = BTreeSet::new();
    findings.retain(|f| seen.insert((f.kind, f.location.clone())));
    findings.sort_by(|x, y| (&x.location, x.kind).cmp(&(&y.location, y.kind)));

    let mut search = WitnessSearch { gens: [Generator::new(code).ok(), Generator::new(doc).ok()], positives: [None, None] };
    let discrepancies = findings
        .into_iter()
        .map(|f| {
            let witness = f.owner.and_then(|(s, site)| search.find(ctx.specs, s, site, &f.location));
            Discrepancy { kind: f.kind, location: f.location, details: f.details, witness, decided_by: Some(f.decided_by) }
        })
        .collect::<Vec<_>>();
    ValidationReport {
        schema_version: SCHEMA_VERSION,
        code_spec: SpecRef { name: code.name.clone(), digest: canonical_digest(code) },
        doc_spec: SpecRef { name: doc.name.clone(), digest: canonical_digest(doc) },
        summary: summarize(&discrepancies),
        discrepancies,
    }
}

/// Groups discrepancies under caller-supplied labels, e.g. catalog entries.
/// `label` returns `None` for discrepancies that belong to no group.
pub fn render_text(report: &ValidationReport, label: &dyn Fn(&Discrepancy) -> Option<String>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "code spec: {} ({})", report.code_spec.name, &report.code_spec.digest[..12.min(report.code_spec.digest.len())]);
    let _ = writeln!(out, "doc spec:  {} ({})", report.doc_spec.name, &report.doc_spec.digest[..12.min(report.doc_spec.digest.len())]);
    if report.discrepancies.is_empty() {
        out.push_str("no discrepancies\n");
        return out;
    }
    let mut grouped: BTreeMap<Option<String>, Vec<&Discrepancy>> = BTreeMap::new();
    for d in &report.discrepancies {
        grouped.entry(label(d)).or_default().push(d);
    }
    // labelled groups first, then the rest
    let (mut ungrouped, mut labelled): (Vec<_>, Vec<_>) = grouped.into_iter().partition(|(k, _)| k.is_none());
    labelled.append(&mut ungrouped);
    for (name, ds) in labelled {
        let _ = writeln!(out, "\n[{}]", name.as_deref().unwrap_or("other"));
        for d in ds {
            let _ = writeln!(out, "  {} {}", d.kind.as_str(), d.location);
            if let Some(c) = &d.details.code {
                let _ = writeln!(out, "      code: {c}");
            }
            if let Some(c) = &d.details.doc {
                let _ = writeln!(out, "      doc:  {c}");
            }
            if let Some(w) = &d.witness {
                let _ = writeln!(out, "      witness ({} accepts): {}", w.accepted_by.as_str(), hex::encode(&w.bytes));
            }
        }
    }
    out.push_str("\nsummary:\n");
    for (k, n) in &report.summary {
        if *n > 0 && k != "total" {
            let _ = writeln!(out, "  {k}: {n}");
        }
    }
    let _ = writeln!(out, "  total: {}", report.summary.get("total").copied().unwrap_or(0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::parse_spec;

    fn spec(s: &str) -> FormatSpec {
        parse_spec(s).unwrap()
    }

    #[test]
    fn self_diff_is_empty() {
        let s = spec("format f { a: u8 where a != 0; n: u8; if a == 1 { d: bytes[n]; } z: u8 where z < 9; }");
        assert!(diff_specs(&s, &s).is_clean());
    }

    #[test]
    fn equivalent_rewrites_are_not_reported() {
        let a = spec("format c { x: u8 where x != 0; }");
        let b = spec("format d { y: u8 where y >= 1; }");
        assert!(diff_specs(&a, &b).is_clean());
    }

    #[test]
    fn weaker_code_constraint_is_missing_in_code_with_witness() {
        let code = spec("format c { x: u8 where x >= 1; }");
        let doc = spec("format d { x: u8 where x >= 5; }");
        let r = diff_specs(&code, &doc);
        assert_eq!(r.discrepancies.len(), 1);
        let d = &r.discrepancies[0];
        assert_eq!(d.kind, Kind::ConstraintMissingInCode);
        assert_eq!(d.location, "/{@0:8 >= 5}");
        assert_eq!(d.details.code.as_deref(), Some("x >= 1"));
        let w = d.witness.as_ref().unwrap();
        assert_eq!(w.accepted_by, Side::Code);
        assert!(check_packet(&code, &w.bytes).accepted());
        assert!(!check_packet(&doc, &w.bytes).accepted());
    }

    #[test]
    fn contradictory_constraints_conflict() {
        let code = spec("format c { x: u8 where x < 4; }");
        let doc = spec("format d { x: u8 where x > 10; }");
        let r = diff_specs(&code, &doc);
        assert_eq!(r.count(Kind::ConstraintConflict), 2);
        assert_eq!(r.summary["total"], 2);
    }

    #[test]
    fn width_disagreement_is_a_type_mismatch() {
        let code = spec("format c { x: u8; y: u8; }");
        let doc = spec("format d { x: u4; y: u12; }");
        let r = diff_specs(&code, &doc);
        assert_eq!(r.count(Kind::TypeMismatch), 0, "same bits overall");
        let doc = spec("format d { x: u16; y: bytes[1]; }");
        let code = spec("format c { x: u8; y: bytes[2]; z: u8; }");
        let r = diff_specs(&code, &doc);
        assert_eq!(r.count(Kind::TypeMismatch), 1);
        assert_eq!(r.discrepancies[0].location, "/@0");
        assert_eq!(r.discrepancies[1].kind, Kind::MissingFieldInDoc);
        assert_eq!(r.discrepancies[1].location, "/@24");
    }

    #[test]
    fn summary_lists_every_kind() {
        let s = spec("format f { a: u8; }");
        let r = diff_specs(&s, &s);
        assert_eq!(r.summary.len(), 7);
        assert_eq!(ValidationReport::from_json(&r.to_json()).unwrap(), r);
    }
}
