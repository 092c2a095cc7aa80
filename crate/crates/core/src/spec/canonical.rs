//! Deterministic JSON form of a [`FormatSpec`].
//!
//! Keys are emitted in sorted order (serde_json's default map is ordered),
//! expressions are stored as their normalized text, and integer literals are
//! decimal. Two structurally equal specs always produce identical bytes.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::ast::*;
use super::diag::{DiagCode, Diagnostic};
use super::parser::parse_expr;

pub const SCHEMA_VERSION: u64 = 1;

fn constraint_json(c: &Constraint) -> Value {
    json!({ "id": c.id.as_str(), "expr": c.expr.to_string() })
}

fn block_json(sections: &[Section]) -> Value {
    Value::Array(
        sections
            .iter()
            .map(|s| match s {
                Section::Record(r) => json!({
                    "kind": "record",
                    "fields": r.fields.iter().map(|f| json!({
                        "name": f.name,
                        "type": match &f.ty {
                            FieldType::UInt { bits } => json!({ "kind": "uint", "bits": bits }),
                            FieldType::Bytes { len } => json!({ "kind": "bytes", "len": len.to_string() }),
                        },
                        "constraints": f.constraints.iter().map(constraint_json).collect::<Vec<_>>(),
                    })).collect::<Vec<_>>(),
                }),
                Section::Conditional(c) => json!({
                    "kind": "conditional",
                    "guard": constraint_json(&c.guard),
                    "body": block_json(&c.body),
                }),
                Section::Variant(v) => json!({
                    "kind": "variant",
                    "discriminator": v.discriminator,
                    "arms": v.arms.iter().map(|a| json!({ "tag": a.tag, "body": block_json(&a.body) })).collect::<Vec<_>>(),
                    "default": v.default.as_ref().map(|d| block_json(d)),
                }),
            })
            .collect(),
    )
}

pub fn to_canonical_value(spec: &FormatSpec) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "name": spec.name,
        "sections": block_json(&spec.sections),
        "constraints": spec.constraints.iter().map(constraint_json).collect::<Vec<_>>(),
    })
}

/// Pretty-printed canonical JSON with a trailing newline.
pub fn serialize_canonical(spec: &FormatSpec) -> String {
    let mut out = serde_json::to_string_pretty(&to_canonical_value(spec)).expect("json values always serialize");
    out.push('\n');
    out
}

/// Hex sha256 of the canonical text.
pub fn canonical_digest(spec: &FormatSpec) -> String {
    hex::encode(Sha256::digest(serialize_canonical(spec).as_bytes()))
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct JsonSpec {
    schema_version: u64,
    name: String,
    sections: Vec<JsonSection>,
    constraints: Vec<JsonConstraint>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct JsonConstraint {
    id: String,
    expr: String,
}

#[derive(Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum JsonSection {
    Record { fields: Vec<JsonField> },
    Conditional { guard: JsonConstraint, body: Vec<JsonSection> },
    Variant { discriminator: String, arms: Vec<JsonArm>, default: Option<Vec<JsonSection>> },
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct JsonField {
    name: String,
    #[serde(rename = "type")]
    ty: JsonType,
    constraints: Vec<JsonConstraint>,
}

#[derive(Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum JsonType {
    Uint { bits: u32 },
    Bytes { len: String },
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct JsonArm {
    tag: u64,
    body: Vec<JsonSection>,
}

fn json_err(msg: impl Into<String>) -> Diagnostic {
    Diagnostic::error(DiagCode::InvalidJson, None, msg)
}

fn expr_from(text: &str) -> Result<Expr, Diagnostic> {
    parse_expr(text).map_err(|d| json_err(format!("bad expression `{text}`: {}", d.message)))
}

/// Keeps the stored id so a stale or tampered id surfaces as `id-mismatch`
/// during validation instead of being silently recomputed.
fn constraint_from(c: JsonConstraint) -> Result<Constraint, Diagnostic> {
    Ok(Constraint { id: ConstraintId(c.id), expr: expr_from(&c.expr)?, origin: Origin::default() })
}

fn block_from(sections: Vec<JsonSection>) -> Result<Vec<Section>, Diagnostic> {
    sections
        .into_iter()
        .map(|s| {
            Ok(match s {
                JsonSection::Record { fields } => Section::Record(Record {
                    fields: fields
                        .into_iter()
                        .map(|f| {
                            Ok(FieldDef {
                                name: f.name,
                                ty: match f.ty {
                                    JsonType::Uint { bits } => FieldType::UInt { bits },
                                    JsonType::Bytes { len } => FieldType::Bytes { len: expr_from(&len)? },
                                },
                                constraints: f.constraints.into_iter().map(constraint_from).collect::<Result<_, _>>()?,
                                origin: Origin::default(),
                            })
                        })
                        .collect::<Result<_, Diagnostic>>()?,
                    origin: Origin::default(),
                }),
                JsonSection::Conditional { guard, body } => Section::Conditional(Conditional {
                    guard: constraint_from(guard)?,
                    body: block_from(body)?,
                    origin: Origin::default(),
                }),
                JsonSection::Variant { discriminator, arms, default } => Section::Variant(Variant {
                    discriminator,
                    arms: arms
                        .into_iter()
                        .map(|a| Ok(Arm { tag: a.tag, body: block_from(a.body)?, origin: Origin::default() }))
                        .collect::<Result<_, Diagnostic>>()?,
                    default: default.map(block_from).transpose()?,
                    origin: Origin::default(),
                }),
            })
        })
        .collect()
}

/// Parses canonical JSON without validating it.
pub fn parse_canonical(text: &str) -> Result<FormatSpec, Diagnostic> {
    let raw: JsonSpec = serde_json::from_str(text).map_err(|e| {
        Diagnostic::error(
            DiagCode::InvalidJson,
            Some(Span::new(e.line() as u32, e.column() as u32, e.line() as u32, e.column() as u32 + 1)),
            e.to_string(),
        )
    })?;
    if raw.schema_version != SCHEMA_VERSION {
        return Err(json_err(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", raw.schema_version)));
    }
    Ok(FormatSpec {
        name: raw.name,
        sections: block_from(raw.sections)?,
        constraints: raw.constraints.into_iter().map(constraint_from).collect::<Result<_, _>>()?,
        origin: Origin::default(),
    })
}
