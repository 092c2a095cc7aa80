//! The BFD control packet worked example: fixture specs, a hand-written
//! reference checker mirroring the receive path of the mini repository, and
//! the catalog of known discrepancies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diff::{Discrepancy, Kind, ValidationReport};
use crate::gen::{CheckResult, DecodedValue, StructuralFailure, Verdict};
use crate::spec::{parse_spec, FormatSpec};

pub const CODE_SPEC_PFS: &str = include_str!("../../../fixtures/specs/bfd_code.pfs");
pub const DOC_SPEC_PFS: &str = include_str!("../../../fixtures/specs/bfd_doc.pfs");

/// Mandatory section length in bytes.
pub const BFD_PKT_LEN: usize = 24;
pub const BFD_VERSION: u8 = 1;

/// A well-formed 24-byte control packet.
pub const VALID_PACKET_HEX: &str = "20c001180000000100000000000000640000006400000000";

pub fn code_spec() -> FormatSpec {
    parse_spec(CODE_SPEC_PFS).expect("code fixture parses")
}

pub fn doc_spec() -> FormatSpec {
    parse_spec(DOC_SPEC_PFS).expect("doc fixture parses")
}

pub fn valid_packet() -> Vec<u8> {
    hex::decode(VALID_PACKET_HEX).expect("valid hex")
}

fn reject_at(site: usize, decoded: BTreeMap<String, DecodedValue>) -> CheckResult {
    let spec = code_spec();
    let c = spec.all_constraints()[site].id.clone();
    CheckResult { verdict: Verdict::Reject, failed_constraint: Some(c), failed_site: Some(site), structural: None, decoded }
}

/// The receive-path checks in the order the mini repository performs them:
/// minimum length, version, detect multiplier, then the length field
/// against the received size. Nothing past the mandatory section is looked
/// at.
///
/// Sites refer to the code fixture: 0 `vers == 1`, 1 `detect_mult != 0`,
/// 2 `length >= 24`, 3 `length == total_len`.
pub fn reference_bfd_check(bytes: &[u8]) -> CheckResult {
    let mut decoded = BTreeMap::new();
    if bytes.len() < BFD_PKT_LEN {
        return CheckResult {
            verdict: Verdict::Reject,
            failed_constraint: None,
            failed_site: None,
            structural: Some(StructuralFailure::Underrun {
                field: String::new(),
                needed_bits: (BFD_PKT_LEN * 8) as u64,
                available_bits: (bytes.len() * 8) as u64,
            }),
            decoded,
        };
    }
    let be32 = |i: usize| u64::from(u32::from_be_bytes(bytes[i..i + 4].try_into().expect("4 bytes")));
    let fields: [(&str, u64); 11] = [
        ("vers", u64::from(bytes[0] >> 5)),
        ("diag", u64::from(bytes[0] & 0x1f)),
        ("sta", u64::from(bytes[1] >> 6)),
        ("flags", u64::from(bytes[1] & 0x3f)),
        ("detect_mult", u64::from(bytes[2])),
        ("length", u64::from(bytes[3])),
        ("my_disc", be32(4)),
        ("your_disc", be32(8)),
        ("desired_min_tx", be32(12)),
        ("required_min_rx", be32(16)),
        ("required_min_echo_rx", be32(20)),
    ];
    for (n, v) in fields {
        decoded.insert(n.to_string(), DecodedValue::Int(v));
    }
    if bytes[0] >> 5 != BFD_VERSION {
        return reject_at(0, decoded);
    }
    if bytes[2] == 0 {
        return reject_at(1, decoded);
    }
    let len = usize::from(bytes[3]);
    if len < BFD_PKT_LEN {
        return reject_at(2, decoded);
    }
    if len != bytes.len() {
        return reject_at(3, decoded);
    }
    CheckResult { verdict: Verdict::Accept, failed_constraint: None, failed_site: None, structural: None, decoded }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    /// Already reported elsewhere.
    Known,
    New,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Implementation,
    Standard,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugCatalogEntry {
    pub id: String,
    pub description: String,
    pub kind: Kind,
    /// Discrepancy location pattern, see [`location_matches`].
    pub location: String,
    pub status: Status,
    pub source: Source,
}

impl BugCatalogEntry {
    pub fn matches(&self, d: &Discrepancy) -> bool {
        d.kind == self.kind && location_matches(&self.location, &d.location)
    }
}

/// A trailing `/` matches everything below that path; a trailing `*`
/// matches any continuation.
pub fn location_matches(pattern: &str, location: &str) -> bool {
    if let Some(prefix) = pattern.strip_suffix('*') {
        location.starts_with(prefix)
    } else if pattern.ends_with('/') {
        location.starts_with(pattern)
    } else {
        pattern == location
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    pub entries: Vec<BugCatalogEntry>,
}

impl Catalog {
    pub fn from_json(text: &str) -> Result<Catalog, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("catalog serializes");
        s.push('\n');
        s
    }

    /// First entry that claims `d`.
    pub fn label(&self, d: &Discrepancy) -> Option<&BugCatalogEntry> {
        self.entries.iter().find(|e| e.matches(d))
    }

    pub fn coverage<'c>(&'c self, report: &ValidationReport) -> Coverage<'c> {
        let mut covered = Vec::new();
        let mut missing = Vec::new();
        for e in &self.entries {
            let n = report.discrepancies.iter().filter(|d| e.matches(d)).count();
            if n > 0 {
                covered.push((e, n));
            } else {
                missing.push(e);
            }
        }
        Coverage { covered, missing }
    }
}

#[derive(Debug, Clone)]
pub struct Coverage<'c> {
    /// Entries with the number of discrepancies each claims.
    pub covered: Vec<(&'c BugCatalogEntry, usize)>,
    pub missing: Vec<&'c BugCatalogEntry>,
}

impl Coverage<'_> {
    pub fn complete(&self) -> bool {
        self.missing.is_empty()
    }
}

pub const CATALOG_JSON: &str = include_str!("../../../fixtures/catalog.json");

pub fn catalog() -> Catalog {
    Catalog::from_json(CATALOG_JSON).expect("catalog parses")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::check_packet;

    #[test]
    fn valid_packet_is_accepted_by_both_checkers() {
        let p = valid_packet();
        assert_eq!(p.len(), 24);
        assert!(reference_bfd_check(&p).accepted());
        assert!(check_packet(&code_spec(), &p).accepted());
    }

    #[test]
    fn version_zero_is_rejected() {
        let mut p = valid_packet();
        p[0] &= 0x1f;
        let r = reference_bfd_check(&p);
        assert_eq!(r.failed_site, Some(0));
    }

    #[test]
    fn m_flag_set_is_accepted() {
        let mut p = valid_packet();
        p[1] |= 0x01;
        assert!(reference_bfd_check(&p).accepted());
        assert!(!check_packet(&doc_spec(), &p).accepted());
    }

    #[test]
    fn prefix_patterns_end_in_a_slash() {
        assert!(location_matches("/a/", "/a/b"));
        assert!(!location_matches("/a", "/a/b"));
        assert!(location_matches("/a", "/a"));
        assert!(location_matches("/a/@*", "/a/@200"));
        assert!(!location_matches("/a/@*", "/a/b/@200"));
    }
}
