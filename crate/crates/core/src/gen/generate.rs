//! Constraint-directed packet generation.
//!
//! Each path through the format spec is compiled into per-field value domains
//! (intervals with excluded points, from single-field comparisons) plus
//! equalities that can be solved directly (`f == expr`); whatever remains is
//! checked after sampling. Every emitted packet is confirmed with
//! [`check_packet`](super::check_packet) before it is returned.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bits::{patch_bits, BitWriter};
use super::check::{check_with_sites, site_indices, Verdict};
use super::plan::{enumerate_plans, negate, nnf, Plan, Req};
use crate::spec::ast::*;
use crate::spec::diag::{render_diagnostics, Diagnostic};
use crate::spec::eval::{eval_bool, eval_int};
use crate::spec::validate::{has_errors, validate_spec};

pub const RETRY_BUDGET: usize = 10_000;
pub const DEFAULT_POSITIVES: usize = 64;

/// Structural mutations applied to a valid packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mutation {
    Truncate,
    Extend,
    CorruptLength,
}

impl Mutation {
    pub const ALL: [Mutation; 3] = [Mutation::Truncate, Mutation::Extend, Mutation::CorruptLength];

    pub fn as_str(self) -> &'static str {
        match self {
            Mutation::Truncate => "truncate",
            Mutation::Extend => "extend",
            Mutation::CorruptLength => "corrupt-length",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    Accept,
    Reject,
}

impl Expectation {
    pub fn verdict(self) -> Verdict {
        match self {
            Expectation::Accept => Verdict::Accept,
            Expectation::Reject => Verdict::Reject,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestPacket {
    pub id: u64,
    #[serde(with = "super::corpus::hex_bytes")]
    pub bytes: Vec<u8>,
    pub expectation: Expectation,
    pub target_constraint: Option<ConstraintId>,
    pub mutation: Option<Mutation>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NegativeTarget {
    Constraint { id: ConstraintId, site: usize, expr: String },
    Mutation { mutation: Mutation },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub target: NegativeTarget,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegativeBatch {
    pub packets: Vec<TestPacket>,
    pub skipped: Vec<Skipped>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("the format spec does not validate:\n{}", render_diagnostics(.0))]
    InvalidSpec(Vec<Diagnostic>),
    #[error("at least one packet must be requested")]
    EmptyRequest,
    #[error("no conforming packet found within {RETRY_BUDGET} attempts per path; blocking constraints: {}", .blocking.join("; "))]
    Unsatisfiable { blocking: Vec<String> },
}

/// Per-packet seed derived from the batch seed and packet index.
pub fn packet_seed(seed: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(seed ^ mix(index))
}

const NEGATIVE_SALT: u64 = 0x6e65_6761_7469_7665;

#[derive(Debug, Clone)]
struct Domain {
    lo: u64,
    hi: u64,
    excluded: BTreeSet<u64>,
}

impl Domain {
    fn full(bits: u32) -> Domain {
        let hi = if bits >= 64 { u64::MAX } else { (1u64 << bits) - 1 };
        Domain { lo: 0, hi, excluded: BTreeSet::new() }
    }

    fn contains(&self, v: u64) -> bool {
        v >= self.lo && v <= self.hi && !self.excluded.contains(&v)
    }

    fn is_empty(&self) -> bool {
        if self.lo > self.hi {
            return true;
        }
        let size = u128::from(self.hi - self.lo) + 1;
        let ex = self.excluded.range(self.lo..=self.hi).count() as u128;
        ex >= size
    }

    fn restrict(&mut self, op: BinOp, v: u64) {
        match op {
            BinOp::Eq => {
                self.lo = self.lo.max(v);
                self.hi = self.hi.min(v);
            }
            BinOp::Ne => {
                self.excluded.insert(v);
            }
            BinOp::Lt => {
                if v == 0 {
                    self.lo = 1;
                    self.hi = 0;
                } else {
                    self.hi = self.hi.min(v - 1);
                }
            }
            BinOp::Le => self.hi = self.hi.min(v),
            BinOp::Gt => {
                if v == u64::MAX {
                    self.lo = 1;
                    self.hi = 0;
                } else {
                    self.lo = self.lo.max(v + 1);
                }
            }
            BinOp::Ge => self.lo = self.lo.max(v),
            _ => {}
        }
    }

    fn nearest_allowed(&self, v: u64) -> u64 {
        let mut c = v.clamp(self.lo, self.hi);
        while self.excluded.contains(&c) {
            c = if c == self.hi { self.lo } else { c + 1 };
        }
        c
    }
}

/// `field op literal` in either orientation.
fn single_field_comparison(e: &Expr) -> Option<(&str, BinOp, u64)> {
    match e {
        Expr::Binary(op, l, r) if op.is_comparison() => match (&**l, &**r) {
            (Expr::Field(f), Expr::Lit(v)) => Some((f, *op, *v)),
            (Expr::Lit(v), Expr::Field(f)) => Some((f, op.mirrored_comparison()?, *v)),
            _ => None,
        },
        _ => None,
    }
}

fn literals(e: &Expr, out: &mut Vec<u64>) {
    match e {
        Expr::Lit(v) => out.push(*v),
        Expr::Not(i) => literals(i, out),
        Expr::Binary(_, l, r) => {
            literals(l, out);
            literals(r, out);
        }
        _ => {}
    }
}

/// A path ready for sampling.
#[derive(Debug, Clone)]
struct Compiled<'a> {
    fields: Vec<&'a FieldDef>,
    reqs: Vec<Req>,
    domains: BTreeMap<String, Domain>,
    solved: Vec<(String, Expr, String)>,
    drivers: BTreeSet<String>,
    hints: BTreeMap<String, Vec<u64>>,
    /// Negative lengths encode as empty arrays. Only used for negatives whose
    /// target is checked before the array is reached.
    lenient: bool,
}

fn compile<'a>(fields: &[&'a FieldDef], reqs: Vec<Req>) -> Result<Compiled<'a>, Vec<String>> {
    let mut domains = BTreeMap::new();
    let mut drivers = BTreeSet::new();
    for f in fields {
        match &f.ty {
            FieldType::UInt { bits } => {
                domains.insert(f.name.clone(), Domain::full(*bits));
            }
            FieldType::Bytes { len } => drivers.extend(len.field_refs().into_iter().map(str::to_string)),
        }
    }
    let order: HashMap<&str, usize> = fields.iter().enumerate().map(|(i, f)| (f.name.as_str(), i)).collect();
    let mut touching: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut solved: Vec<(String, Expr, String)> = Vec::new();
    let mut hints: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for r in &reqs {
        let normal = nnf(&r.expr);
        for c in normal.conjuncts() {
            if let Some((f, op, v)) = single_field_comparison(c) {
                if let Some(d) = domains.get_mut(f) {
                    d.restrict(op, v);
                    touching.entry(f.to_string()).or_default().push(r.label.clone());
                    continue;
                }
            }
            if let Expr::Binary(BinOp::Eq, l, rhs) = c {
                let pick = match (&**l, &**rhs) {
                    // solve for whichever side is decoded later
                    (Expr::Field(a), Expr::Field(b)) if order.get(a.as_str()) > order.get(b.as_str()) => Some((a.clone(), (**rhs).clone())),
                    (Expr::Field(a), Expr::Field(b)) => Some((b.clone(), Expr::Field(a.clone()))),
                    (Expr::Field(a), other) | (other, Expr::Field(a)) => Some((a.clone(), other.clone())),
                    _ => None,
                };
                if let Some((name, other)) = pick {
                    if domains.contains_key(&name) && !solved.iter().any(|(n, _, _)| *n == name) && !other.field_refs().contains(&name.as_str()) {
                        solved.push((name, other, r.label.clone()));
                        continue;
                    }
                }
            }
            let mut lits = Vec::new();
            literals(c, &mut lits);
            for f in c.field_refs() {
                hints.entry(f.to_string()).or_default().extend(lits.iter().copied());
            }
        }
    }
    let empty: Vec<String> = domains
        .iter()
        .filter(|(_, d)| d.is_empty())
        .flat_map(|(f, _)| touching.get(f).cloned().unwrap_or_default())
        .collect();
    if !empty.is_empty() {
        let mut uniq = Vec::new();
        for l in empty {
            if !uniq.contains(&l) {
                uniq.push(l);
            }
        }
        return Err(uniq);
    }
    Ok(Compiled { fields: fields.to_vec(), reqs, domains, solved, drivers, hints, lenient: false })
}

/// A sampled packet with the bit position of each integer field.
struct Sample {
    bytes: Vec<u8>,
    positions: Vec<(String, u64, u32, u64)>,
}

impl Compiled<'_> {
    fn pick(&self, name: &str, rng: &mut ChaCha8Rng) -> u64 {
        let d = &self.domains[name];
        let span = d.hi - d.lo;
        let small = |rng: &mut ChaCha8Rng, cap: u64| d.lo + rng.random_range(0..=span.min(cap));
        let v = if self.drivers.contains(name) {
            if rng.random_range(0..8) == 0 {
                d.lo
            } else {
                small(rng, 24)
            }
        } else {
            match rng.random_range(0..100) {
                0..=14 => {
                    let b = [d.lo, d.lo.saturating_add(1), d.hi.saturating_sub(1), d.hi];
                    b[rng.random_range(0..4)]
                }
                15..=29 => match self.hints.get(name).filter(|h| !h.is_empty()) {
                    Some(h) => {
                        let base = h[rng.random_range(0..h.len())];
                        match rng.random_range(0..3) {
                            0 => base.saturating_sub(1),
                            1 => base,
                            _ => base.saturating_add(1),
                        }
                    }
                    None => small(rng, 16),
                },
                30..=49 => small(rng, 16),
                _ => rng.random_range(d.lo..=d.hi),
            }
        };
        if d.contains(v) {
            return v;
        }
        for _ in 0..8 {
            let u = rng.random_range(d.lo..=d.hi);
            if d.contains(u) {
                return u;
            }
        }
        d.nearest_allowed(v)
    }

    /// One sampling attempt. On failure returns the label of the
    /// requirement that could not be met.
    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<Sample, String> {
        let mut values: BTreeMap<String, u64> = BTreeMap::new();
        for f in &self.fields {
            if f.ty.is_uint() {
                let v = self.pick(&f.name, rng);
                values.insert(f.name.clone(), v);
            }
        }
        let mut chosen: HashMap<&str, u64> = HashMap::new();
        for f in &self.fields {
            if let FieldType::Bytes { len } = &f.ty {
                if len.uses_total_len() {
                    chosen.insert(f.name.as_str(), rng.random_range(0..=16));
                }
            }
        }
        let layout_bytes = |values: &BTreeMap<String, u64>| -> Result<u64, String> {
            let mut bits: u64 = 0;
            for f in &self.fields {
                bits += match &f.ty {
                    FieldType::UInt { bits } => u64::from(*bits),
                    FieldType::Bytes { len } => match chosen.get(f.name.as_str()) {
                        Some(n) => n * 8,
                        None => {
                            let n = eval_int(len, values, 0).map_err(|e| e.to_string())?;
                            let n = match u64::try_from(n) {
                                Ok(n) => n,
                                Err(_) if self.lenient => 0,
                                Err(_) => return Err(format!("length of `{}` is negative", f.name)),
                            };
                            if n > 1 << 20 {
                                return Err(format!("length of `{}` is too large to generate", f.name));
                            }
                            n * 8
                        }
                    },
                };
            }
            if bits % 8 != 0 {
                return Err("path is not a whole number of bytes".into());
            }
            Ok(bits / 8)
        };
        let mut total = layout_bytes(&values)?;
        for _ in 0..4 {
            let mut changed = false;
            for (name, e, label) in &self.solved {
                let v = eval_int(e, &values, total).map_err(|_| label.clone())?;
                let v = u64::try_from(v).map_err(|_| label.clone())?;
                if !self.domains[name].contains(v) {
                    return Err(label.clone());
                }
                if values[name] != v {
                    values.insert(name.clone(), v);
                    changed = true;
                }
            }
            let t = layout_bytes(&values)?;
            if !changed && t == total {
                break;
            }
            total = t;
        }
        for f in &self.fields {
            if let (FieldType::Bytes { len }, Some(n)) = (&f.ty, chosen.get(f.name.as_str())) {
                let v = eval_int(len, &values, total).map_err(|e| e.to_string())?;
                if v != (*n).into() {
                    return Err(format!("length of `{}`", f.name));
                }
            }
        }
        for r in &self.reqs {
            if !eval_bool(&r.expr, &values, total).unwrap_or(false) {
                return Err(r.label.clone());
            }
        }
        let mut w = BitWriter::new();
        let mut positions = Vec::new();
        for f in &self.fields {
            match &f.ty {
                FieldType::UInt { bits } => {
                    positions.push((f.name.clone(), w.bit_pos(), *bits, values[&f.name]));
                    w.write(values[&f.name], *bits);
                }
                FieldType::Bytes { len } => {
                    let n = match chosen.get(f.name.as_str()) {
                        Some(n) => *n,
                        None => match u64::try_from(eval_int(len, &values, total).map_err(|e| e.to_string())?) {
                            Ok(n) => n,
                            Err(_) if self.lenient => 0,
                            Err(_) => return Err(f.name.clone()),
                        },
                    };
                    let mut data = vec![0u8; n as usize];
                    rng.fill_bytes(&mut data);
                    w.write_bytes(&data);
                }
            }
        }
        let bytes = w.into_bytes();
        if bytes.len() as u64 != total {
            return Err("layout changed while solving".into());
        }
        Ok(Sample { bytes, positions })
    }

    /// Uint fields whose value feeds a byte-array length or is compared
    /// against `total_len`.
    fn length_fields(&self) -> Vec<&str> {
        let mut wanted: BTreeSet<&str> = self.drivers.iter().map(String::as_str).collect();
        for r in &self.reqs {
            if r.expr.uses_total_len() {
                wanted.extend(r.expr.field_refs());
            }
        }
        // declaration order, so the choice does not depend on field names
        self.fields.iter().map(|f| f.name.as_str()).filter(|f| wanted.contains(f) && self.domains.contains_key(*f)).collect()
    }
}

#[derive(Debug, Clone)]
enum PlanState<'a> {
    Unknown(Compiled<'a>),
    Reachable(Compiled<'a>),
    Unreachable(Vec<String>),
}

/// Reusable generator for one spec. Caches path reachability so repeated
/// batches do not re-discover dead paths.
pub struct Generator<'a> {
    spec: &'a FormatSpec,
    sites: HashMap<*const Constraint, usize>,
    plans: Vec<Plan<'a>>,
    states: Vec<PlanState<'a>>,
    /// Per site: whether the relaxed pass is needed, or why none works.
    negatable: HashMap<usize, Result<bool, String>>,
}

fn most_frequent(failures: &HashMap<String, usize>) -> Vec<String> {
    let mut v: Vec<(&String, &usize)> = failures.iter().collect();
    v.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    v.into_iter().take(3).map(|(l, _)| l.clone()).collect()
}

impl<'a> Generator<'a> {
    pub fn new(spec: &'a FormatSpec) -> Result<Generator<'a>, GenError> {
        let diags = validate_spec(spec);
        if has_errors(&diags) {
            return Err(GenError::InvalidSpec(diags));
        }
        let sites = site_indices(spec);
        let (plans, _) = enumerate_plans(spec, &sites);
        let states = plans
            .iter()
            .map(|p| match compile(&p.fields, p.reqs.clone()) {
                Ok(c) => PlanState::Unknown(c),
                Err(blocking) => PlanState::Unreachable(blocking),
            })
            .collect();
        Ok(Generator { spec, sites, plans, states, negatable: HashMap::new() })
    }

    pub fn spec(&self) -> &FormatSpec {
        self.spec
    }

    /// Path labels in enumeration order.
    pub fn path_labels(&self) -> Vec<&str> {
        self.plans.iter().map(|p| p.label.as_str()).collect()
    }

    fn accepts(&self, bytes: &[u8]) -> bool {
        check_with_sites(self.spec, bytes, &self.sites).verdict == Verdict::Accept
    }

    fn blocking(&self) -> Vec<String> {
        let mut out = Vec::new();
        for s in &self.states {
            if let PlanState::Unreachable(b) = s {
                for l in b {
                    if !out.contains(l) {
                        out.push(l.clone());
                    }
                }
            }
        }
        out
    }

    /// Next positive sample starting the path search at `cursor`; returns
    /// the path index used.
    fn positive_from(&mut self, cursor: usize, rng: &mut ChaCha8Rng) -> Result<(usize, Sample), GenError> {
        let k = self.plans.len();
        for step in 0..k {
            let p = (cursor + step) % k;
            let compiled = match &self.states[p] {
                PlanState::Unreachable(_) => continue,
                PlanState::Unknown(c) | PlanState::Reachable(c) => c.clone(),
            };
            let mut failures: HashMap<String, usize> = HashMap::new();
            for _ in 0..RETRY_BUDGET {
                match compiled.sample(rng) {
                    Ok(s) if self.accepts(&s.bytes) => {
                        if let PlanState::Unknown(_) = self.states[p] {
                            self.states[p] = PlanState::Reachable(compiled);
                        }
                        return Ok((p, s));
                    }
                    Ok(_) => *failures.entry("decoded path differs from the planned path".into()).or_default() += 1,
                    Err(label) => *failures.entry(label).or_default() += 1,
                }
            }
            self.states[p] = PlanState::Unreachable(most_frequent(&failures));
        }
        Err(GenError::Unsatisfiable { blocking: self.blocking() })
    }

    /// `n` accepted packets, cycling through reachable paths in order.
    pub fn positives(&mut self, seed: u64, n: usize) -> Result<Vec<TestPacket>, GenError> {
        if n == 0 {
            return Err(GenError::EmptyRequest);
        }
        let mut out = Vec::with_capacity(n);
        let mut cursor = 0;
        for i in 0..n as u64 {
            let pseed = packet_seed(seed, i);
            let mut rng = ChaCha8Rng::seed_from_u64(pseed);
            let (p, sample) = self.positive_from(cursor, &mut rng)?;
            cursor = p + 1;
            out.push(TestPacket {
                id: i,
                bytes: sample.bytes,
                expectation: Expectation::Accept,
                target_constraint: None,
                mutation: None,
                seed: pseed,
            });
        }
        Ok(out)
    }

    /// A packet rejected with the constraint at `site` as its first
    /// failure. Other constraints on the path are kept satisfied when
    /// possible.
    pub fn negative_for_site(&mut self, site: usize, seed: u64) -> Result<Vec<u8>, String> {
        let passes: &[bool] = match self.negatable.get(&site) {
            Some(Err(reason)) => return Err(reason.clone()),
            Some(Ok(true)) => &[true],
            _ => &[false, true],
        };
        let target = *self.spec.all_constraints().get(site).ok_or_else(|| format!("no constraint site {site}"))?;
        let target_expr = nnf(&target.expr);
        let conj: Vec<Expr> = target_expr.conjuncts().into_iter().cloned().collect();
        let alternatives: Vec<Vec<Expr>> = if conj.len() > 1 {
            (0..conj.len())
                .map(|j| conj.iter().enumerate().map(|(i, c)| if i == j { negate(c) } else { c.clone() }).collect())
                .collect()
        } else {
            vec![vec![negate(&target_expr)]]
        };
        let mut blocking: Vec<String> = Vec::new();
        let mut failures: HashMap<String, usize> = HashMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // First insist every other constraint on the path holds; failing
        // that, only those checked before the target.
        for &relaxed in passes {
            let mut combos: Vec<Compiled<'a>> = Vec::new();
            for plan in &self.plans {
                if !plan.contains_site(site) {
                    continue;
                }
                let twin = plan.reqs.iter().any(|r| r.site != Some(site) && r.site.is_some() && r.expr == target.expr);
                if twin && !relaxed {
                    blocking.push(format!("`{}` is stated twice on path {}", target.expr, plan.label));
                    continue;
                }
                for alt in &alternatives {
                    let keep = |r: &&Req| match r.site {
                        Some(s) if s == site => false,
                        Some(s) if relaxed => s < site,
                        _ => true,
                    };
                    let mut reqs: Vec<Req> = plan.reqs.iter().filter(keep).cloned().collect();
                    reqs.extend(alt.iter().map(|e| Req { expr: e.clone(), site: None, label: format!("not ({})", target.expr) }));
                    match compile(&plan.fields, reqs) {
                        Ok(mut c) => {
                            c.lenient = relaxed;
                            combos.push(c);
                        }
                        Err(b) => blocking.extend(b),
                    }
                }
            }
            if combos.is_empty() {
                continue;
            }
            for attempt in 0..RETRY_BUDGET {
                let c = &combos[attempt % combos.len()];
                match c.sample(&mut rng) {
                    Ok(s) => {
                        let r = check_with_sites(self.spec, &s.bytes, &self.sites);
                        if r.verdict == Verdict::Reject && r.failed_site == Some(site) {
                            self.negatable.insert(site, Ok(relaxed));
                            return Ok(s.bytes);
                        }
                        *failures.entry("first failure is not the target".into()).or_default() += 1;
                    }
                    Err(label) => *failures.entry(label).or_default() += 1,
                }
            }
        }
        blocking.extend(most_frequent(&failures));
        let mut uniq: Vec<String> = Vec::new();
        for b in blocking {
            if !uniq.contains(&b) {
                uniq.push(b);
            }
        }
        let reason = format!("`{}` is not individually negatable (blocked by: {})", target.expr, uniq.join("; "));
        self.negatable.insert(site, Err(reason.clone()));
        Err(reason)
    }

    fn mutated(&mut self, m: Mutation, seed: u64) -> Result<Vec<u8>, String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = self.plans.len();
        for attempt in 0..64usize {
            let start = (rng.random_range(0..k as u64) as usize + attempt) % k;
            let (p, sample) = self.positive_from(start, &mut rng).map_err(|e| e.to_string())?;
            let mut bytes = sample.bytes;
            match m {
                Mutation::Truncate => {
                    if bytes.pop().is_none() {
                        return Err("the only conforming packet is empty".into());
                    }
                }
                Mutation::Extend => bytes.push(rng.random()),
                Mutation::CorruptLength => {
                    let compiled = match &self.states[p] {
                        PlanState::Reachable(c) | PlanState::Unknown(c) => c,
                        PlanState::Unreachable(_) => continue,
                    };
                    let candidates = compiled.length_fields();
                    if candidates.is_empty() {
                        if self.states.iter().all(|s| match s {
                            PlanState::Reachable(c) | PlanState::Unknown(c) => c.length_fields().is_empty(),
                            PlanState::Unreachable(_) => true,
                        }) {
                            return Err("no field determines a length".into());
                        }
                        continue;
                    }
                    let name = candidates[rng.random_range(0..candidates.len())];
                    let (_, off, width, v) = sample.positions.iter().find(|(n, ..)| n == name).expect("uint field was encoded").clone();
                    let mask = if width >= 64 { u64::MAX } else { (1u64 << width) - 1 };
                    patch_bits(&mut bytes, off, width, v.wrapping_add(1) & mask);
                }
            }
            if !self.accepts(&bytes) {
                return Ok(bytes);
            }
        }
        Err(format!("every {} mutation tried was still accepted", m.as_str()))
    }

    /// `n` rejected packets. Constraint sites are targeted in declaration
    /// order, then the structural mutations, round-robin; targets that
    /// cannot be produced are skipped and reported.
    pub fn negatives(&mut self, seed: u64, n: usize) -> Result<NegativeBatch, GenError> {
        if n == 0 {
            return Err(GenError::EmptyRequest);
        }
        let constraints: Vec<(ConstraintId, String)> =
            self.spec.all_constraints().iter().map(|c| (c.id.clone(), c.expr.to_string())).collect();
        let mut targets: Vec<NegativeTarget> = constraints
            .iter()
            .enumerate()
            .map(|(site, (id, expr))| NegativeTarget::Constraint { id: id.clone(), site, expr: expr.clone() })
            .collect();
        targets.extend(Mutation::ALL.iter().map(|m| NegativeTarget::Mutation { mutation: *m }));
        let mut dead = vec![false; targets.len()];
        let mut skipped = Vec::new();
        let mut packets = Vec::new();
        let mut cursor = 0;
        let salt = packet_seed(seed, NEGATIVE_SALT);
        for i in 0..n as u64 {
            let pseed = packet_seed(salt, i);
            let mut made = None;
            for step in 0..targets.len() {
                let t = (cursor + step) % targets.len();
                if dead[t] {
                    continue;
                }
                let result = match &targets[t] {
                    NegativeTarget::Constraint { site, .. } => self.negative_for_site(*site, pseed),
                    NegativeTarget::Mutation { mutation } => self.mutated(*mutation, pseed),
                };
                match result {
                    Ok(bytes) => {
                        made = Some((t, bytes));
                        break;
                    }
                    Err(reason) => {
                        dead[t] = true;
                        skipped.push(Skipped { target: targets[t].clone(), reason });
                    }
                }
            }
            let Some((t, bytes)) = made else { break };
            cursor = t + 1;
            let (target_constraint, mutation) = match &targets[t] {
                NegativeTarget::Constraint { id, .. } => (Some(id.clone()), None),
                NegativeTarget::Mutation { mutation } => (None, Some(*mutation)),
            };
            packets.push(TestPacket { id: i, bytes, expectation: Expectation::Reject, target_constraint, mutation, seed: pseed });
        }
        Ok(NegativeBatch { packets, skipped })
    }
}

pub fn generate_positive(spec: &FormatSpec, seed: u64, n: usize) -> Result<Vec<TestPacket>, GenError> {
    Generator::new(spec)?.positives(seed, n)
}

pub fn generate_negative(spec: &FormatSpec, seed: u64, n: usize) -> Result<NegativeBatch, GenError> {
    Generator::new(spec)?.negatives(seed, n)
}

/// Negatives needed to target every constraint once plus each structural
/// mutation once.
pub fn default_negative_count(spec: &FormatSpec) -> usize {
    spec.all_constraints().len() + Mutation::ALL.len()
}
