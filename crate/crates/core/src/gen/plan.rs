//! Path enumeration: every way through the conditionals and variants of a
//! spec, flattened into the fields decoded and the requirements that select
//! that path.

use std::collections::HashMap;

use crate::spec::ast::*;

pub const MAX_PLANS: usize = 1024;

/// A boolean requirement on a path: a constraint site, a guard outcome or a
/// discriminator choice.
#[derive(Debug, Clone)]
pub(crate) struct Req {
    pub expr: Expr,
    pub site: Option<usize>,
    pub label: String,
}

#[derive(Debug, Clone)]
pub(crate) struct Plan<'a> {
    pub label: String,
    pub fields: Vec<&'a FieldDef>,
    pub reqs: Vec<Req>,
}

impl<'a> Plan<'a> {
    fn empty() -> Self {
        Plan { label: String::new(), fields: Vec::new(), reqs: Vec::new() }
    }

    fn branch(&self, marker: String, reqs: Vec<Req>) -> Self {
        let mut p = self.clone();
        if !p.label.is_empty() {
            p.label.push('/');
        }
        p.label.push_str(&marker);
        p.reqs.extend(reqs);
        p
    }

    fn then(&self, other: &Plan<'a>) -> Self {
        let mut p = self.clone();
        if !other.label.is_empty() {
            if !p.label.is_empty() {
                p.label.push('/');
            }
            p.label.push_str(&other.label);
        }
        p.fields.extend(other.fields.iter().copied());
        p.reqs.extend(other.reqs.iter().cloned());
        p
    }

    pub fn sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.reqs.iter().filter_map(|r| r.site)
    }

    pub fn contains_site(&self, site: usize) -> bool {
        self.sites().any(|s| s == site)
    }
}

/// Pushes negation inward so comparisons stay visible to interval
/// propagation.
pub fn negate(e: &Expr) -> Expr {
    match e {
        Expr::Binary(op, l, r) if op.is_comparison() => {
            Expr::bin(op.negated_comparison().expect("comparison"), (**l).clone(), (**r).clone())
        }
        Expr::Binary(BinOp::And, l, r) => Expr::bin(BinOp::Or, negate(l), negate(r)),
        Expr::Binary(BinOp::Or, l, r) => Expr::bin(BinOp::And, negate(l), negate(r)),
        Expr::Not(inner) => nnf(inner),
        other => Expr::not(other.clone()),
    }
}

/// Negation normal form.
pub fn nnf(e: &Expr) -> Expr {
    match e {
        Expr::Not(inner) => negate(inner),
        Expr::Binary(op @ (BinOp::And | BinOp::Or), l, r) => Expr::bin(*op, nnf(l), nnf(r)),
        other => other.clone(),
    }
}

struct Enumerator<'s> {
    sites: &'s HashMap<*const Constraint, usize>,
    truncated: bool,
}

impl<'s> Enumerator<'s> {
    fn cap<'a>(&mut self, mut plans: Vec<Plan<'a>>) -> Vec<Plan<'a>> {
        if plans.len() > MAX_PLANS {
            plans.truncate(MAX_PLANS);
            self.truncated = true;
        }
        plans
    }

    fn site_req(&self, c: &Constraint) -> Req {
        Req { expr: c.expr.clone(), site: self.sites.get(&(c as *const Constraint)).copied(), label: c.expr.to_string() }
    }

    fn block<'a>(&mut self, sections: &'a [Section]) -> Vec<Plan<'a>> {
        let mut plans = vec![Plan::empty()];
        for s in sections {
            plans = match s {
                Section::Record(r) => {
                    for p in &mut plans {
                        for f in &r.fields {
                            p.fields.push(f);
                            for c in &f.constraints {
                                p.reqs.push(self.site_req(c));
                            }
                        }
                    }
                    plans
                }
                Section::Conditional(c) => {
                    let bodies = self.block(&c.body);
                    let g = &c.guard.expr;
                    let taken = Req { expr: g.clone(), site: None, label: format!("if {g}") };
                    let skipped = Req { expr: negate(g), site: None, label: format!("if not ({g})") };
                    let mut next = Vec::new();
                    for p in &plans {
                        for b in &bodies {
                            next.push(p.branch(format!("if({g})"), vec![taken.clone()]).then(b));
                        }
                        next.push(p.branch(format!("not({g})"), vec![skipped.clone()]));
                    }
                    self.cap(next)
                }
                Section::Variant(v) => {
                    let disc = Expr::field(v.discriminator.clone());
                    let mut arms: Vec<(String, Vec<Req>, Vec<Plan<'a>>)> = Vec::new();
                    for arm in &v.arms {
                        let e = Expr::bin(BinOp::Eq, disc.clone(), Expr::Lit(arm.tag));
                        let label = format!("{} == {}", v.discriminator, arm.tag);
                        arms.push((
                            format!("{}={}", v.discriminator, arm.tag),
                            vec![Req { expr: e, site: None, label }],
                            self.block(&arm.body),
                        ));
                    }
                    if let Some(d) = &v.default {
                        let reqs = v
                            .arms
                            .iter()
                            .map(|a| Req {
                                expr: Expr::bin(BinOp::Ne, disc.clone(), Expr::Lit(a.tag)),
                                site: None,
                                label: format!("{} != {}", v.discriminator, a.tag),
                            })
                            .collect();
                        arms.push((format!("{}=_", v.discriminator), reqs, self.block(d)));
                    }
                    let mut next = Vec::new();
                    for p in &plans {
                        for (marker, reqs, bodies) in &arms {
                            for b in bodies {
                                next.push(p.branch(marker.clone(), reqs.clone()).then(b));
                            }
                        }
                    }
                    self.cap(next)
                }
            };
        }
        plans
    }
}

/// All paths through `spec` (at most [`MAX_PLANS`]), each with global
/// constraints appended. The flag reports whether enumeration was cut short.
pub(crate) fn enumerate_plans<'a>(spec: &'a FormatSpec, sites: &HashMap<*const Constraint, usize>) -> (Vec<Plan<'a>>, bool) {
    let mut en = Enumerator { sites, truncated: false };
    let mut plans = en.block(&spec.sections);
    for p in &mut plans {
        for c in &spec.constraints {
            p.reqs.push(en.site_req(c));
        }
    }
    (plans, en.truncated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::check::site_indices;
    use crate::spec::{parse_expr, parse_spec};

    #[test]
    fn negation_pushes_inward() {
        let e = parse_expr("not (a == 1 and b < 2) or c >= 3").unwrap();
        assert_eq!(nnf(&e).to_string(), "a != 1 or b >= 2 or c >= 3");
        assert_eq!(negate(&parse_expr("x >= 1 and x <= 9").unwrap()).to_string(), "x < 1 or x > 9");
    }

    #[test]
    fn conditional_yields_two_paths_and_variant_one_per_arm() {
        let s = parse_spec("format f { a: u8; if a == 1 { t: u8; switch t { 1 => { x: u8; } 2 => { y: u8; } _ => { z: u8; } } } }").unwrap();
        let sites = site_indices(&s);
        let (plans, truncated) = enumerate_plans(&s, &sites);
        assert!(!truncated);
        let labels: Vec<_> = plans.iter().map(|p| p.label.as_str()).collect();
        assert_eq!(labels, vec!["if(a == 1)/t=1", "if(a == 1)/t=2", "if(a == 1)/t=_", "not(a == 1)"]);
        assert_eq!(plans[2].reqs.iter().filter(|r| r.site.is_none()).count(), 3);
    }

    #[test]
    fn enumeration_is_capped() {
        let mut src = String::from("format f { ");
        for i in 0..12 {
            src.push_str(&format!("a{i}: u8; if a{i} == 1 {{ b{i}: u8; }} "));
        }
        src.push('}');
        let s = parse_spec(&src).unwrap();
        let sites = site_indices(&s);
        let (plans, truncated) = enumerate_plans(&s, &sites);
        assert_eq!(plans.len(), MAX_PLANS);
        assert!(truncated);
    }
}
