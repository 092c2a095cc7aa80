use std::path::Path;

use serde::{Deserialize, Serialize};
use speclift_core::gen::{check_packet, generate_negative, generate_positive, Expectation, TestPacket};
use speclift_core::spec::ast::{ConstraintId, FormatSpec};

use crate::run::{run_module_with, HarnessVerdict, ModuleVerdict, RunOptions};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub packet_id: u64,
    #[serde(with = "hex_string")]
    pub bytes: Vec<u8>,
    pub expected: Expectation,
    pub verdict: ModuleVerdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_constraint: Option<ConstraintId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

mod hex_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(b))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MismatchReport {
    pub positives: usize,
    pub negatives: usize,
    /// Positives the module did not accept.
    pub false_rejects: Vec<Mismatch>,
    /// Negatives the module did not reject.
    pub false_accepts: Vec<Mismatch>,
    pub positive_verdicts: Vec<HarnessVerdict>,
    pub negative_verdicts: Vec<HarnessVerdict>,
}

impl MismatchReport {
    pub fn is_clean(&self) -> bool {
        self.false_rejects.is_empty() && self.false_accepts.is_empty()
    }

    pub fn mismatch_count(&self) -> usize {
        self.false_rejects.len() + self.false_accepts.len()
    }

    /// Short listing for agent feedback.
    pub fn render(&self, limit: usize) -> String {
        let mut out = format!(
            "{} of {} positives rejected, {} of {} negatives accepted\n",
            self.false_rejects.len(),
            self.positives,
            self.false_accepts.len(),
            self.negatives
        );
        for (label, list) in [("false reject", &self.false_rejects), ("false accept", &self.false_accepts)] {
            for m in list.iter().take(limit) {
                out.push_str(&format!("{label} {} verdict={}", hex::encode(&m.bytes), m.verdict.as_str()));
                if let Some(c) = &m.target_constraint {
                    out.push_str(&format!(" target={c}"));
                }
                out.push('\n');
            }
        }
        out
    }
}

fn mismatches(packets: &[TestPacket], verdicts: &[HarnessVerdict], want: ModuleVerdict) -> Vec<Mismatch> {
    packets
        .iter()
        .zip(verdicts)
        .filter(|(_, v)| v.verdict != want)
        .map(|(p, v)| Mismatch {
            packet_id: p.id,
            bytes: p.bytes.clone(),
            expected: p.expectation,
            verdict: v.verdict,
            target_constraint: p.target_constraint.clone(),
            detail: v.detail.clone(),
        })
        .collect()
}

pub fn compare(positives: &[TestPacket], negatives: &[TestPacket], exe: &Path, opts: &RunOptions) -> Result<MismatchReport, HarnessError> {
    let pv = run_module_with(exe, positives, opts)?;
    let nv = run_module_with(exe, negatives, opts)?;
    Ok(MismatchReport {
        positives: positives.len(),
        negatives: negatives.len(),
        false_rejects: mismatches(positives, &pv, ModuleVerdict::Accept),
        false_accepts: mismatches(negatives, &nv, ModuleVerdict::Reject),
        positive_verdicts: pv,
        negative_verdicts: nv,
    })
}

/// `n` positives and `n` negatives from `seed` through the module.
/// Negatives cycle through the constraints, then the structural
/// mutations, so `n` at least the format spec's default negative count targets
/// each once.
pub fn semantic_check(spec: &FormatSpec, exe: &Path, seed: u64, n: usize) -> Result<MismatchReport, HarnessError> {
    semantic_check_with(spec, exe, seed, n, &RunOptions::default())
}

pub fn semantic_check_with(spec: &FormatSpec, exe: &Path, seed: u64, n: usize, opts: &RunOptions) -> Result<MismatchReport, HarnessError> {
    let positives = generate_positive(spec, seed, n)?;
    let negatives = generate_negative(spec, seed, n)?.packets;
    compare(&positives, &negatives, exe, opts)
}

/// Every byte string of at most `max_len` bytes, shortest first.
pub fn all_inputs(max_len: usize) -> impl Iterator<Item = Vec<u8>> {
    (0..=max_len).flat_map(|len| {
        let count = 1u64 << (8 * len as u32);
        (0..count).map(move |i| (0..len).map(|k| (i >> (8 * (len - 1 - k))) as u8).collect())
    })
}

/// The whole domain of inputs up to `max_len` bytes, split by what
/// `check_packet` says, through the module.
pub fn semantic_check_exhaustive(spec: &FormatSpec, exe: &Path, max_len: usize, opts: &RunOptions) -> Result<MismatchReport, HarnessError> {
    assert!(max_len <= 3, "exhaustive domain too large");
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for (id, bytes) in all_inputs(max_len).enumerate() {
        let accepted = check_packet(spec, &bytes).accepted();
        let p = TestPacket {
            id: id as u64,
            bytes,
            expectation: if accepted { Expectation::Accept } else { Expectation::Reject },
            target_constraint: None,
            mutation: None,
            seed: 0,
        };
        if accepted {
            positives.push(p);
        } else {
            negatives.push(p);
        }
    }
    compare(&positives, &negatives, exe, opts)
}
