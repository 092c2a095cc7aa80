use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use thiserror::Error;

use super::ast::{BinOp, Constraint, Expr};

/// Field value lookup for evaluation.
pub trait Bindings {
    fn lookup(&self, name: &str) -> Option<u64>;
}

impl Bindings for BTreeMap<String, u64> {
    fn lookup(&self, name: &str) -> Option<u64> {
        self.get(name).copied()
    }
}

impl Bindings for HashMap<String, u64> {
    fn lookup(&self, name: &str) -> Option<u64> {
        self.get(name).copied()
    }
}

impl<F: Fn(&str) -> Option<u64>> Bindings for F {
    fn lookup(&self, name: &str) -> Option<u64> {
        self(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("field `{0}` is not bound")]
    Unbound(String),
    #[error("expression is ill-typed: {0}")]
    IllTyped(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ty {
    Int,
    Bool,
}

/// Static type of an expression, or a description of the first type error.
pub fn type_of(expr: &Expr) -> Result<Ty, String> {
    match expr {
        Expr::Lit(_) | Expr::Field(_) | Expr::TotalLen => Ok(Ty::Int),
        Expr::Not(inner) => match type_of(inner)? {
            Ty::Bool => Ok(Ty::Bool),
            Ty::Int => Err(format!("`not` expects a boolean operand, found integer `{inner}`")),
        },
        Expr::Binary(op, l, r) => {
            let (lt, rt) = (type_of(l)?, type_of(r)?);
            if op.is_logical() {
                for (t, e) in [(lt, l), (rt, r)] {
                    if t != Ty::Bool {
                        return Err(format!("`{}` expects boolean operands, found integer `{e}`", op.symbol()));
                    }
                }
                Ok(Ty::Bool)
            } else {
                for (t, e) in [(lt, l), (rt, r)] {
                    if t != Ty::Int {
                        return Err(format!("`{}` expects integer operands, found boolean `{e}`", op.symbol()));
                    }
                }
                Ok(if op.is_comparison() { Ty::Bool } else { Ty::Int })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Val<T> {
    Int(T),
    Bool(bool),
}

/// Evaluates an integer expression exactly.
pub fn eval_int(expr: &Expr, env: &dyn Bindings, total_len: u64) -> Result<BigInt, EvalError> {
    match eval_fast(expr, env, total_len)? {
        Some(Val::Int(v)) => Ok(BigInt::from(v)),
        Some(Val::Bool(_)) => Err(EvalError::IllTyped(format!("`{expr}` is boolean"))),
        None => match eval_big(expr, env, total_len)? {
            Val::Int(v) => Ok(v),
            Val::Bool(_) => Err(EvalError::IllTyped(format!("`{expr}` is boolean"))),
        },
    }
}

/// Integer value as i128 when it fits, for callers (layout) that need a
/// machine integer.
pub fn eval_i128(expr: &Expr, env: &dyn Bindings, total_len: u64) -> Result<Option<i128>, EvalError> {
    let v = eval_int(expr, env, total_len)?;
    Ok(i128::try_from(v).ok())
}

pub fn eval_bool(expr: &Expr, env: &dyn Bindings, total_len: u64) -> Result<bool, EvalError> {
    match eval_fast(expr, env, total_len)? {
        Some(Val::Bool(b)) => Ok(b),
        Some(Val::Int(_)) => Err(EvalError::IllTyped(format!("`{expr}` is not boolean"))),
        None => match eval_big(expr, env, total_len)? {
            Val::Bool(b) => Ok(b),
            Val::Int(_) => Err(EvalError::IllTyped(format!("`{expr}` is not boolean"))),
        },
    }
}

/// Evaluates a constraint. All field references must be bound.
pub fn evaluate_constraint(c: &Constraint, env: &dyn Bindings, total_len: u64) -> Result<bool, EvalError> {
    eval_bool(&c.expr, env, total_len)
}

/// i128 evaluation; `Ok(None)` signals overflow somewhere in the tree.
fn eval_fast(expr: &Expr, env: &dyn Bindings, total_len: u64) -> Result<Option<Val<i128>>, EvalError> {
    Ok(Some(match expr {
        Expr::Lit(v) => Val::Int(i128::from(*v)),
        Expr::TotalLen => Val::Int(i128::from(total_len)),
        Expr::Field(name) => Val::Int(i128::from(env.lookup(name).ok_or_else(|| EvalError::Unbound(name.clone()))?)),
        Expr::Not(inner) => match eval_fast(inner, env, total_len)? {
            Some(Val::Bool(b)) => Val::Bool(!b),
            Some(Val::Int(_)) => return Err(EvalError::IllTyped(format!("`not` applied to integer `{inner}`"))),
            None => return Ok(None),
        },
        Expr::Binary(op, l, r) => {
            let (lv, rv) = match (eval_fast(l, env, total_len)?, eval_fast(r, env, total_len)?) {
                (Some(a), Some(b)) => (a, b),
                _ => return Ok(None),
            };
            match (op, lv, rv) {
                (BinOp::And, Val::Bool(a), Val::Bool(b)) => Val::Bool(a && b),
                (BinOp::Or, Val::Bool(a), Val::Bool(b)) => Val::Bool(a || b),
                (op, Val::Int(a), Val::Int(b)) => match op {
                    BinOp::Add => match a.checked_add(b) {
                        Some(v) => Val::Int(v),
                        None => return Ok(None),
                    },
                    BinOp::Sub => match a.checked_sub(b) {
                        Some(v) => Val::Int(v),
                        None => return Ok(None),
                    },
                    BinOp::Mul => match a.checked_mul(b) {
                        Some(v) => Val::Int(v),
                        None => return Ok(None),
                    },
                    BinOp::Eq => Val::Bool(a == b),
                    BinOp::Ne => Val::Bool(a != b),
                    BinOp::Lt => Val::Bool(a < b),
                    BinOp::Le => Val::Bool(a <= b),
                    BinOp::Gt => Val::Bool(a > b),
                    BinOp::Ge => Val::Bool(a >= b),
                    BinOp::And | BinOp::Or => return Err(EvalError::IllTyped(format!("`{}` applied to integers", op.symbol()))),
                },
                (op, _, _) => return Err(EvalError::IllTyped(format!("operands of `{}` have the wrong type", op.symbol()))),
            }
        }
    }))
}

fn eval_big(expr: &Expr, env: &dyn Bindings, total_len: u64) -> Result<Val<BigInt>, EvalError> {
    Ok(match expr {
        Expr::Lit(v) => Val::Int(BigInt::from(*v)),
        Expr::TotalLen => Val::Int(BigInt::from(total_len)),
        Expr::Field(name) => Val::Int(BigInt::from(env.lookup(name).ok_or_else(|| EvalError::Unbound(name.clone()))?)),
        Expr::Not(inner) => match eval_big(inner, env, total_len)? {
            Val::Bool(b) => Val::Bool(!b),
            Val::Int(_) => return Err(EvalError::IllTyped(format!("`not` applied to integer `{inner}`"))),
        },
        Expr::Binary(op, l, r) => match (op, eval_big(l, env, total_len)?, eval_big(r, env, total_len)?) {
            (BinOp::And, Val::Bool(a), Val::Bool(b)) => Val::Bool(a && b),
            (BinOp::Or, Val::Bool(a), Val::Bool(b)) => Val::Bool(a || b),
            (op, Val::Int(a), Val::Int(b)) => match op {
                BinOp::Add => Val::Int(a + b),
                BinOp::Sub => Val::Int(a - b),
                BinOp::Mul => Val::Int(a * b),
                BinOp::Eq => Val::Bool(a == b),
                BinOp::Ne => Val::Bool(a != b),
                BinOp::Lt => Val::Bool(a < b),
                BinOp::Le => Val::Bool(a <= b),
                BinOp::Gt => Val::Bool(a > b),
                BinOp::Ge => Val::Bool(a >= b),
                BinOp::And | BinOp::Or => return Err(EvalError::IllTyped(format!("`{}` applied to integers", op.symbol()))),
            },
            (op, _, _) => return Err(EvalError::IllTyped(format!("operands of `{}` have the wrong type", op.symbol()))),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::parser::parse_expr;

    fn env(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn holds(src: &str, pairs: &[(&str, u64)], total: u64) -> bool {
        eval_bool(&parse_expr(src).unwrap(), &env(pairs), total).unwrap()
    }

    #[test]
    fn version_check() {
        assert!(holds("vers == 1", &[("vers", 1)], 0));
    }

    #[test]
    fn minimum_length() {
        assert!(!holds("length >= 24", &[("length", 23)], 999));
    }

    #[test]
    fn detect_mult_nonzero() {
        assert!(!holds("detect_mult != 0", &[("detect_mult", 0)], 24));
    }

    #[test]
    fn total_len_builtin() {
        assert!(holds("length == total_len", &[("length", 24)], 24));
        assert!(!holds("length == total_len", &[("length", 24)], 25));
    }

    #[test]
    fn subtraction_goes_negative_without_wrapping() {
        assert!(holds("a - 5 < 0", &[("a", 3)], 0));
    }

    #[test]
    fn arithmetic_is_exact_beyond_128_bits() {
        let max = u64::MAX;
        // (2^64-1)^3 overflows i128; the big-integer path must take over.
        assert!(holds("a * a * a > a * a", &[("a", max)], 0));
        let v = eval_int(&parse_expr("a * a * a").unwrap(), &env(&[("a", max)]), 0).unwrap();
        assert_eq!(v, BigInt::from(max) * BigInt::from(max) * BigInt::from(max));
    }

    #[test]
    fn unbound_reference_names_the_field() {
        let err = eval_bool(&parse_expr("x == 1 and missing > 0").unwrap(), &env(&[("x", 1)]), 0).unwrap_err();
        assert_eq!(err, EvalError::Unbound("missing".into()));
    }

    #[test]
    fn typing() {
        assert_eq!(type_of(&parse_expr("a + 1").unwrap()), Ok(Ty::Int));
        assert_eq!(type_of(&parse_expr("a == 1 or not b < 2").unwrap()), Ok(Ty::Bool));
        assert!(type_of(&parse_expr("a and b").unwrap()).is_err());
        assert!(type_of(&parse_expr("(a == 1) + 2").unwrap()).is_err());
    }
}
