//! Small-domain decision procedure for boolean constraints over bounded
//! unsigned variables.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::spec::ast::Expr;
use crate::spec::eval::eval_bool;

/// Joint domains of at most this many bits are enumerated exhaustively.
pub const EXHAUSTIVE_BITS: u32 = 20;
/// Uniform random assignments tried above the exhaustive cutoff.
pub const SAMPLES: usize = 1 << 16;
/// Cap on the cross product of boundary values.
pub const BOUNDARY_CAP: usize = 1 << 16;
/// Bit width assumed for `total_len` (a byte count).
pub const TOTAL_LEN_BITS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Syntactic,
    Exhaustive,
    Sampled,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Syntactic => "syntactic",
            Method::Exhaustive => "exhaustive",
            Method::Sampled => "sampled",
        }
    }
}

/// A bounded variable and the values it should be probed at when sampling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Var {
    pub bits: u32,
    pub probes: Vec<u128>,
}

fn max_of(bits: u32) -> u128 {
    if bits >= 128 {
        u128::MAX
    } else {
        (1u128 << bits) - 1
    }
}

impl Var {
    pub fn new(bits: u32) -> Var {
        Var { bits, probes: Vec::new() }
    }

    pub fn max(&self) -> u128 {
        max_of(self.bits)
    }

    /// Boundary values plus the extra probes, deduplicated and in range.
    fn boundary(&self) -> Vec<u128> {
        let m = self.max();
        let mut v = vec![0, 1.min(m), m.saturating_sub(1), m];
        v.extend(self.probes.iter().copied().filter(|p| *p <= m));
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Seed derived from text so sampling is reproducible per question.
pub fn text_seed<'t>(parts: impl IntoIterator<Item = &'t str>) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0]);
    }
    let d = h.finalize();
    u64::from_be_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Visits assignments until `visit` returns true. Exhaustive when the joint
/// width is at most [`EXHAUSTIVE_BITS`]; otherwise the boundary cross
/// product followed by [`SAMPLES`] uniform draws.
pub fn explore(vars: &[Var], seed: u64, mut visit: impl FnMut(&[u128]) -> bool) -> Method {
    let total: u32 = vars.iter().map(|v| v.bits).sum();
    let mut cur = vec![0u128; vars.len()];
    if total <= EXHAUSTIVE_BITS {
        loop {
            if visit(&cur) {
                return Method::Exhaustive;
            }
            let mut i = 0;
            loop {
                if i == vars.len() {
                    return Method::Exhaustive;
                }
                if cur[i] < vars[i].max() {
                    cur[i] += 1;
                    break;
                }
                cur[i] = 0;
                i += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bounds: Vec<Vec<u128>> = vars.iter().map(Var::boundary).collect();
    let product = bounds.iter().try_fold(1usize, |acc, b| acc.checked_mul(b.len()));
    match product {
        Some(p) if p <= BOUNDARY_CAP => {
            let mut idx = vec![0usize; vars.len()];
            'outer: loop {
                for (k, i) in idx.iter().enumerate() {
                    cur[k] = bounds[k][*i];
                }
                if visit(&cur) {
                    return Method::Sampled;
                }
                let mut k = 0;
                loop {
                    if k == idx.len() {
                        break 'outer;
                    }
                    idx[k] += 1;
                    if idx[k] < bounds[k].len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
            }
        }
        _ => {
            for _ in 0..BOUNDARY_CAP {
                for (k, b) in bounds.iter().enumerate() {
                    cur[k] = b[rng.random_range(0..b.len())];
                }
                if visit(&cur) {
                    return Method::Sampled;
                }
            }
        }
    }
    for _ in 0..SAMPLES {
        for (k, v) in vars.iter().enumerate() {
            cur[k] = rng.random::<u128>() & v.max();
        }
        if visit(&cur) {
            return Method::Sampled;
        }
    }
    Method::Sampled
}

/// Literals in `e`, each with its neighbours, for use as probes.
pub fn literal_probes(e: &Expr, out: &mut Vec<u128>) {
    match e {
        Expr::Lit(n) => {
            let n = u128::from(*n);
            out.extend([n.saturating_sub(1), n, n + 1]);
        }
        Expr::Field(_) | Expr::TotalLen => {}
        Expr::Not(inner) => literal_probes(inner, out),
        Expr::Binary(_, l, r) => {
            literal_probes(l, out);
            literal_probes(r, out);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Equivalent,
    C1ImpliesC2,
    C2ImpliesC1,
    Incomparable,
}

/// Assignment of field values (and `total_len` when used).
pub type Assignment = BTreeMap<String, u64>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Equivalence {
    pub relation: Relation,
    pub method: Method,
    /// Satisfies `c1` but not `c2`.
    pub c1_not_c2: Option<Assignment>,
    /// Satisfies `c2` but not `c1`.
    pub c2_not_c1: Option<Assignment>,
}

fn holds(e: &Expr, names: &[String], values: &[u128], total_len: Option<usize>) -> bool {
    let lookup = |n: &str| names.iter().position(|x| x == n).map(|i| values[i] as u64);
    let tl = total_len.map_or(0, |i| values[i] as u64);
    eval_bool(e, &lookup, tl).unwrap_or(false)
}

/// Compares two constraints over fields of the given widths. Evaluation
/// errors count as the constraint failing, as they do in the checker.
pub fn constraints_equivalent(c1: &Expr, c2: &Expr, widths: &BTreeMap<String, u32>) -> Equivalence {
    if c1 == c2 {
        return Equivalence { relation: Relation::Equivalent, method: Method::Syntactic, c1_not_c2: None, c2_not_c1: None };
    }
    let mut names: Vec<String> = c1.field_refs().into_iter().chain(c2.field_refs()).map(str::to_string).collect();
    names.sort();
    names.dedup();
    let mut probes = Vec::new();
    literal_probes(c1, &mut probes);
    literal_probes(c2, &mut probes);
    let mut vars: Vec<Var> = names
        .iter()
        .map(|n| Var { bits: widths.get(n).copied().unwrap_or(64).min(64), probes: probes.clone() })
        .collect();
    let total_len = if c1.uses_total_len() || c2.uses_total_len() {
        vars.push(Var { bits: TOTAL_LEN_BITS, probes: probes.clone() });
        Some(vars.len() - 1)
    } else {
        None
    };
    let (t1, t2) = (c1.to_string(), c2.to_string());
    let mut one_not_two = None;
    let mut two_not_one = None;
    let to_assignment = |values: &[u128]| -> Assignment {
        let mut a: Assignment = names.iter().zip(values).map(|(n, v)| (n.clone(), *v as u64)).collect();
        if let Some(i) = total_len {
            a.insert("total_len".into(), values[i] as u64);
        }
        a
    };
    let method = explore(&vars, text_seed([t1.as_str(), t2.as_str()]), |values| {
        let a = holds(c1, &names, values, total_len);
        let b = holds(c2, &names, values, total_len);
        if a && !b && one_not_two.is_none() {
            one_not_two = Some(to_assignment(values));
        }
        if b && !a && two_not_one.is_none() {
            two_not_one = Some(to_assignment(values));
        }
        one_not_two.is_some() && two_not_one.is_some()
    });
    let relation = match (&one_not_two, &two_not_one) {
        (None, None) => Relation::Equivalent,
        (None, Some(_)) => Relation::C1ImpliesC2,
        (Some(_), None) => Relation::C2ImpliesC1,
        (Some(_), Some(_)) => Relation::Incomparable,
    };
    Equivalence { relation, method, c1_not_c2: one_not_two, c2_not_c1: two_not_one }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::parse_expr;

    fn w(pairs: &[(&str, u32)]) -> BTreeMap<String, u32> {
        pairs.iter().map(|(n, b)| (n.to_string(), *b)).collect()
    }

    #[test]
    fn nonzero_forms_are_equivalent() {
        let r = constraints_equivalent(&parse_expr("x != 0").unwrap(), &parse_expr("x >= 1").unwrap(), &w(&[("x", 8)]));
        assert_eq!(r.relation, Relation::Equivalent);
        assert_eq!(r.method, Method::Exhaustive);
    }

    #[test]
    fn strict_bound_implies_loose_bound() {
        let r = constraints_equivalent(&parse_expr("length > 24").unwrap(), &parse_expr("length >= 24").unwrap(), &w(&[("length", 8)]));
        assert_eq!(r.relation, Relation::C1ImpliesC2);
        assert_eq!(r.c2_not_c1.unwrap()["length"], 24);
    }

    #[test]
    fn identical_text_short_circuits() {
        let e = parse_expr("x == 1").unwrap();
        let r = constraints_equivalent(&e, &e, &w(&[("x", 8)]));
        assert_eq!((r.relation, r.method), (Relation::Equivalent, Method::Syntactic));
    }

    #[test]
    fn wide_domains_fall_back_to_sampling_with_both_counterexamples() {
        let r = constraints_equivalent(&parse_expr("a < 100").unwrap(), &parse_expr("b == 7").unwrap(), &w(&[("a", 32), ("b", 32)]));
        assert_eq!(r.method, Method::Sampled);
        assert_eq!(r.relation, Relation::Incomparable);
        let x = r.c1_not_c2.unwrap();
        assert!(x["a"] < 100 && x["b"] != 7);
        let y = r.c2_not_c1.unwrap();
        assert!(y["a"] >= 100 && y["b"] == 7);
    }

    #[test]
    fn total_len_is_a_variable() {
        let r = constraints_equivalent(
            &parse_expr("length == total_len and length >= 24").unwrap(),
            &parse_expr("total_len >= 24").unwrap(),
            &w(&[("length", 8)]),
        );
        assert_eq!(r.relation, Relation::C1ImpliesC2);
        assert_eq!(r.method, Method::Sampled);
    }

    #[test]
    fn exhaustive_enumeration_visits_every_point_once() {
        let vars = [Var::new(3), Var::new(2)];
        let mut seen = std::collections::HashSet::new();
        assert_eq!(explore(&vars, 0, |v| !seen.insert(v.to_vec())), Method::Exhaustive);
        assert_eq!(seen.len(), 32);
    }
}
