use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::*;
use super::eval::{eval_bool, eval_i128, EvalError};

/// Fixes the path through a spec: field values (for discriminators and
/// length expressions), explicit guard outcomes, and optionally the packet
/// length.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LayoutEnv {
    pub values: BTreeMap<String, u64>,
    pub guards: BTreeMap<ConstraintId, bool>,
    pub total_len: Option<u64>,
}

impl LayoutEnv {
    pub fn new() -> LayoutEnv {
        LayoutEnv::default()
    }

    pub fn value(mut self, name: impl Into<String>, v: u64) -> LayoutEnv {
        self.values.insert(name.into(), v);
        self
    }

    pub fn guard(mut self, guard: &Expr, taken: bool) -> LayoutEnv {
        self.guards.insert(ConstraintId::of(guard), taken);
        self
    }

    pub fn total_len(mut self, bytes: u64) -> LayoutEnv {
        self.total_len = Some(bytes);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub name: String,
    pub bit_offset: u64,
    pub bit_width: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("variant on `{0}` is unresolved: the environment gives no value for the discriminator")]
    UnresolvedVariant(String),
    #[error("discriminator `{discriminator}` = {value} matches no arm and there is no default")]
    NoMatchingArm { discriminator: String, value: u64 },
    #[error("conditional `{0}` is unresolved")]
    UnresolvedGuard(String),
    #[error("length of `{field}` is unresolved: {reason}")]
    UnresolvedLength { field: String, reason: String },
    #[error("resolved width is {0} bits, not a whole number of bytes")]
    Unaligned(u64),
}

struct Resolver<'a> {
    env: &'a LayoutEnv,
    offset: u64,
    out: Vec<LayoutEntry>,
}

impl Resolver<'_> {
    fn block(&mut self, sections: &[Section]) -> Result<(), LayoutError> {
        for s in sections {
            match s {
                Section::Record(r) => {
                    for f in &r.fields {
                        let width = match &f.ty {
                            FieldType::UInt { bits } => u64::from(*bits),
                            FieldType::Bytes { len } => self.bytes_width(&f.name, len)?,
                        };
                        self.out.push(LayoutEntry { name: f.name.clone(), bit_offset: self.offset, bit_width: width });
                        self.offset += width;
                    }
                }
                Section::Conditional(c) => {
                    let taken = match self.env.guards.get(&c.guard.id) {
                        Some(t) => *t,
                        None => eval_bool(&c.guard.expr, &self.env.values, self.env.total_len.unwrap_or(0))
                            .ok()
                            .filter(|_| self.env.total_len.is_some() || !c.guard.expr.uses_total_len())
                            .ok_or_else(|| LayoutError::UnresolvedGuard(c.guard.expr.to_string()))?,
                    };
                    if taken {
                        self.block(&c.body)?;
                    }
                }
                Section::Variant(v) => {
                    let value = *self
                        .env
                        .values
                        .get(&v.discriminator)
                        .ok_or_else(|| LayoutError::UnresolvedVariant(v.discriminator.clone()))?;
                    let body = match v.arms.iter().find(|a| a.tag == value) {
                        Some(arm) => &arm.body,
                        None => v.default.as_ref().ok_or_else(|| LayoutError::NoMatchingArm {
                            discriminator: v.discriminator.clone(),
                            value,
                        })?,
                    };
                    self.block(body)?;
                }
            }
        }
        Ok(())
    }

    fn bytes_width(&self, field: &str, len: &Expr) -> Result<u64, LayoutError> {
        let unresolved = |reason: String| LayoutError::UnresolvedLength { field: field.to_string(), reason };
        if len.uses_total_len() && self.env.total_len.is_none() {
            return Err(unresolved("it depends on total_len, which is not given".into()));
        }
        let v = eval_i128(len, &self.env.values, self.env.total_len.unwrap_or(0)).map_err(|e| match e {
            EvalError::Unbound(name) => unresolved(format!("`{name}` has no value")),
            other => unresolved(other.to_string()),
        })?;
        match v {
            Some(n) if n >= 0 && n <= i128::from(u64::MAX / 8) => Ok(n as u64 * 8),
            _ => Err(unresolved(format!("`{len}` evaluates outside the valid byte-count range"))),
        }
    }
}

/// Resolves the path selected by `env` to a gap-free list of field positions.
pub fn resolve_layout(spec: &FormatSpec, env: &LayoutEnv) -> Result<Vec<LayoutEntry>, LayoutError> {
    let mut r = Resolver { env, offset: 0, out: Vec::new() };
    r.block(&spec.sections)?;
    if r.offset % 8 != 0 {
        return Err(LayoutError::Unaligned(r.offset));
    }
    Ok(r.out)
}
