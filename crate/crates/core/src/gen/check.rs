//! Reference decoder: the ground truth for whether a byte string conforms to
//! a spec.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::bits::BitReader;
use crate::spec::ast::*;
use crate::spec::eval::{eval_bool, eval_i128};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StructuralFailure {
    /// Input ended while `field` still needed bits.
    Underrun { field: String, needed_bits: u64, available_bits: u64 },
    /// Bytes left over after the last field.
    Overrun { trailing_bytes: u64 },
    /// Discriminator value with no arm and no default.
    UnmatchedArm { discriminator: String, value: u64 },
    /// Byte-array length evaluated negative or unrepresentable.
    BadLength { field: String },
    /// Byte-array field that does not start on a byte boundary.
    Unaligned { field: String },
    /// The format spec itself could not be evaluated (unbound or ill-typed reference).
    Unevaluable { detail: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodedValue {
    Int(u64),
    #[serde(with = "super::corpus::hex_bytes")]
    Bytes(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub verdict: Verdict,
    pub failed_constraint: Option<ConstraintId>,
    /// Declaration-order index of the failed constraint among
    /// [`FormatSpec::all_constraints`].
    pub failed_site: Option<usize>,
    pub structural: Option<StructuralFailure>,
    /// Fields decoded before the verdict was reached, on the resolved path.
    pub decoded: BTreeMap<String, DecodedValue>,
}

impl CheckResult {
    pub fn accepted(&self) -> bool {
        self.verdict == Verdict::Accept
    }
}

/// Maps each constraint site to its declaration-order index.
pub(crate) fn site_indices(spec: &FormatSpec) -> HashMap<*const Constraint, usize> {
    spec.all_constraints().into_iter().enumerate().map(|(i, c)| (c as *const Constraint, i)).collect()
}

enum Stop {
    Constraint(ConstraintId, usize),
    Structural(StructuralFailure),
}

struct Decoder<'a, 'b> {
    reader: BitReader<'b>,
    total_len: u64,
    values: BTreeMap<String, u64>,
    decoded: BTreeMap<String, DecodedValue>,
    sites: &'a HashMap<*const Constraint, usize>,
}

impl<'a, 'b> Decoder<'a, 'b> {
    fn holds(&self, c: &'a Constraint) -> Result<(), Stop> {
        match eval_bool(&c.expr, &self.values, self.total_len) {
            Ok(true) => Ok(()),
            Ok(false) => Err(Stop::Constraint(c.id.clone(), self.sites.get(&(c as *const Constraint)).copied().unwrap_or(usize::MAX))),
            Err(e) => Err(Stop::Structural(StructuralFailure::Unevaluable { detail: e.to_string() })),
        }
    }

    fn block(&mut self, sections: &'a [Section]) -> Result<(), Stop> {
        for s in sections {
            match s {
                Section::Record(r) => {
                    for f in &r.fields {
                        self.field(f)?;
                    }
                }
                Section::Conditional(c) => {
                    let taken = eval_bool(&c.guard.expr, &self.values, self.total_len)
                        .map_err(|e| Stop::Structural(StructuralFailure::Unevaluable { detail: e.to_string() }))?;
                    if taken {
                        self.block(&c.body)?;
                    }
                }
                Section::Variant(v) => {
                    let value = *self.values.get(&v.discriminator).ok_or_else(|| {
                        Stop::Structural(StructuralFailure::Unevaluable {
                            detail: format!("discriminator `{}` has no integer value", v.discriminator),
                        })
                    })?;
                    match v.arms.iter().find(|a| a.tag == value) {
                        Some(arm) => self.block(&arm.body)?,
                        None => match &v.default {
                            Some(d) => self.block(d)?,
                            None => {
                                return Err(Stop::Structural(StructuralFailure::UnmatchedArm {
                                    discriminator: v.discriminator.clone(),
                                    value,
                                }))
                            }
                        },
                    }
                }
            }
        }
        Ok(())
    }

    fn field(&mut self, f: &'a FieldDef) -> Result<(), Stop> {
        match &f.ty {
            FieldType::UInt { bits } => {
                let available = self.reader.remaining_bits();
                let v = self.reader.read(*bits).ok_or_else(|| {
                    Stop::Structural(StructuralFailure::Underrun {
                        field: f.name.clone(),
                        needed_bits: u64::from(*bits),
                        available_bits: available,
                    })
                })?;
                self.values.insert(f.name.clone(), v);
                self.decoded.insert(f.name.clone(), DecodedValue::Int(v));
            }
            FieldType::Bytes { len } => {
                if self.reader.bit_pos() % 8 != 0 {
                    return Err(Stop::Structural(StructuralFailure::Unaligned { field: f.name.clone() }));
                }
                let n = match eval_i128(len, &self.values, self.total_len) {
                    Ok(Some(n)) if n >= 0 && n <= i128::from(u64::MAX / 8) => n as u64,
                    Ok(_) => return Err(Stop::Structural(StructuralFailure::BadLength { field: f.name.clone() })),
                    Err(e) => return Err(Stop::Structural(StructuralFailure::Unevaluable { detail: e.to_string() })),
                };
                let available = self.reader.remaining_bits();
                let data = self.reader.read_bytes(n).ok_or_else(|| {
                    Stop::Structural(StructuralFailure::Underrun { field: f.name.clone(), needed_bits: n * 8, available_bits: available })
                })?;
                self.decoded.insert(f.name.clone(), DecodedValue::Bytes(data.to_vec()));
            }
        }
        for c in &f.constraints {
            self.holds(c)?;
        }
        Ok(())
    }
}

/// Decodes `bytes` against `spec` in stream order, evaluating each field's
/// constraints as soon as the field is decoded, then checks exact
/// consumption and the global constraints. Never fails: malformed input and
/// malformed specs both yield a reject.
pub fn check_packet(spec: &FormatSpec, bytes: &[u8]) -> CheckResult {
    let sites = site_indices(spec);
    check_with_sites(spec, bytes, &sites)
}

pub(crate) fn check_with_sites(spec: &FormatSpec, bytes: &[u8], sites: &HashMap<*const Constraint, usize>) -> CheckResult {
    let mut d = Decoder {
        reader: BitReader::new(bytes),
        total_len: bytes.len() as u64,
        values: BTreeMap::new(),
        decoded: BTreeMap::new(),
        sites,
    };
    let mut outcome = d.block(&spec.sections);
    if outcome.is_ok() {
        let rest = d.reader.remaining_bits();
        if rest > 0 {
            outcome = Err(Stop::Structural(StructuralFailure::Overrun { trailing_bytes: rest.div_ceil(8) }));
        }
    }
    if outcome.is_ok() {
        outcome = spec.constraints.iter().try_for_each(|c| d.holds(c));
    }
    let decoded = d.decoded;
    match outcome {
        Ok(()) => CheckResult { verdict: Verdict::Accept, failed_constraint: None, failed_site: None, structural: None, decoded },
        Err(Stop::Constraint(id, site)) => CheckResult {
            verdict: Verdict::Reject,
            failed_constraint: Some(id),
            failed_site: Some(site),
            structural: None,
            decoded,
        },
        Err(Stop::Structural(s)) => CheckResult { verdict: Verdict::Reject, failed_constraint: None, failed_site: None, structural: Some(s), decoded },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::parse_spec;

    #[test]
    fn empty_input_underruns() {
        let s = parse_spec("format f { x: u8; }").unwrap();
        let r = check_packet(&s, &[]);
        assert_eq!(r.verdict, Verdict::Reject);
        assert!(matches!(r.structural, Some(StructuralFailure::Underrun { .. })));
        assert_eq!(r.failed_constraint, None);
    }

    #[test]
    fn trailing_bytes_overrun() {
        let s = parse_spec("format f { x: u8; }").unwrap();
        assert_eq!(check_packet(&s, &[1, 2]).structural, Some(StructuralFailure::Overrun { trailing_bytes: 1 }));
    }

    #[test]
    fn first_failure_in_declaration_order() {
        let s = parse_spec("format f { a: u8 where a == 1; b: u8 where b == 1; where a + b == 2; }").unwrap();
        let r = check_packet(&s, &[0, 0]);
        assert_eq!(r.failed_site, Some(0));
        let r = check_packet(&s, &[1, 0]);
        assert_eq!(r.failed_site, Some(1));
        assert!(check_packet(&s, &[1, 1]).accepted());
    }

    #[test]
    fn globals_run_after_consumption() {
        let s = parse_spec("format f { a: u8; where a == 7; }").unwrap();
        let r = check_packet(&s, &[7, 0]);
        assert!(matches!(r.structural, Some(StructuralFailure::Overrun { .. })));
    }

    #[test]
    fn length_prefixed_bytes() {
        let s = parse_spec("format f { n: u8; d: bytes[n]; }").unwrap();
        let r = check_packet(&s, &[2, 0xaa, 0xbb]);
        assert!(r.accepted());
        assert_eq!(r.decoded["d"], DecodedValue::Bytes(vec![0xaa, 0xbb]));
        assert!(matches!(check_packet(&s, &[3, 0xaa]).structural, Some(StructuralFailure::Underrun { .. })));
    }

    #[test]
    fn negative_length_is_structural() {
        let s = parse_spec("format f { n: u8; d: bytes[n - 2]; }").unwrap();
        assert_eq!(check_packet(&s, &[1]).structural, Some(StructuralFailure::BadLength { field: "d".into() }));
    }

    #[test]
    fn unmatched_arm_without_default() {
        let s = parse_spec("format f { t: u8; switch t { 1 => { a: u8; } } }").unwrap();
        assert!(check_packet(&s, &[1, 9]).accepted());
        assert_eq!(
            check_packet(&s, &[2, 9]).structural,
            Some(StructuralFailure::UnmatchedArm { discriminator: "t".into(), value: 2 })
        );
    }

    #[test]
    fn conditional_section() {
        let s = parse_spec("format f { a: u8; if a == 1 { b: u8 where b != 0; } }").unwrap();
        assert!(check_packet(&s, &[0]).accepted());
        assert!(check_packet(&s, &[1, 5]).accepted());
        assert_eq!(check_packet(&s, &[1, 0]).failed_site, Some(0));
    }
}
