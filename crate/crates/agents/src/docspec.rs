//! Spec extraction from a standards document: section chunking, one
//! session per chunk, and a merge session that writes the format spec.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use speclift_core::spec::{DiagCode, Diagnostic, FormatSpec};

use crate::backend::Role;
use crate::codespec::syntax_loop;
use crate::prompts::{self, render};
use crate::session::{AgentSession, Recorder};
use crate::AgentError;

pub const CHUNK_MAX_CHARS: usize = 4000;
pub const CHUNK_OVERLAP_CHARS: usize = 200;

/// Heading text used for material before the first numbered heading.
pub const PREAMBLE: &str = "(preamble)";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub index: usize,
    pub heading: String,
    pub text: String,
}

static HEADING: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\d+(\.\d+)*\.?\s+\S").expect("valid regex"));

fn push_windows(out: &mut Vec<Chunk>, heading: &str, lines: &[&str]) {
    let body = lines.join("\n");
    if body.trim().is_empty() {
        return;
    }
    let mut emit = |text: String| out.push(Chunk { index: out.len(), heading: heading.to_string(), text });
    if body.chars().count() <= CHUNK_MAX_CHARS {
        emit(body);
        return;
    }
    // Overlong lines are cut into pieces first so every window fits.
    let mut pieces: Vec<String> = Vec::new();
    for line in lines {
        let chars: Vec<char> = line.chars().collect();
        if chars.len() < CHUNK_MAX_CHARS {
            pieces.push(line.to_string());
        } else {
            pieces.extend(chars.chunks(CHUNK_MAX_CHARS - CHUNK_OVERLAP_CHARS - 1).map(|c| c.iter().collect()));
        }
    }
    let len = |p: &String| p.chars().count() + 1;
    let mut start = 0;
    while start < pieces.len() {
        let mut end = start;
        let mut size = 0;
        while end < pieces.len() && size + len(&pieces[end]) <= CHUNK_MAX_CHARS {
            size += len(&pieces[end]);
            end += 1;
        }
        emit(pieces[start..end].join("\n"));
        if end == pieces.len() {
            break;
        }
        let mut back = end;
        let mut overlap = 0;
        while back > start + 1 && overlap + len(&pieces[back - 1]) <= CHUNK_OVERLAP_CHARS {
            back -= 1;
            overlap += len(&pieces[back]);
        }
        start = back;
    }
}

/// Splits at numbered headings (`4.`, `4.1.`, `6.8.6` at column 0). A
/// section longer than [`CHUNK_MAX_CHARS`] becomes several windows at line
/// boundaries, each starting with up to [`CHUNK_OVERLAP_CHARS`] of the
/// previous one.
pub fn chunk_document(text: &str) -> Vec<Chunk> {
    let mut out = Vec::new();
    let mut heading = PREAMBLE.to_string();
    let mut lines: Vec<&str> = Vec::new();
    for line in text.lines() {
        if HEADING.is_match(line) {
            push_windows(&mut out, &heading, &lines);
            heading = line.trim().to_string();
            lines.clear();
        }
        lines.push(line);
    }
    push_windows(&mut out, &heading, &lines);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocSpecOptions {
    pub syntax_budget: usize,
    /// Format name asked of the merge session.
    pub name: String,
}

impl Default for DocSpecOptions {
    fn default() -> DocSpecOptions {
        DocSpecOptions { syntax_budget: 6, name: "doc_spec".into() }
    }
}

#[derive(Debug, Clone)]
pub struct DocSpecOutput {
    pub spec: FormatSpec,
    pub pfs: String,
    pub chunks: Vec<Chunk>,
    /// Indices of chunks that produced notes.
    pub relevant: Vec<usize>,
}

fn is_none_reply(reply: &str) -> bool {
    reply.trim().trim_matches('`').trim().eq_ignore_ascii_case("none")
}

pub fn extract_docspec(rec: &mut Recorder, document: &str, opts: &DocSpecOptions) -> Result<DocSpecOutput, AgentError> {
    if opts.syntax_budget == 0 {
        return Err(AgentError::ZeroBudget("syntax"));
    }
    if document.trim().is_empty() {
        return Err(AgentError::EmptyDocument);
    }
    let chunks = chunk_document(document);
    let system = render(prompts::DOC_CHUNK, &[])?;
    let count = chunks.len().to_string();
    let mut notes = Vec::new();
    let mut relevant = Vec::new();
    for c in &chunks {
        let mut session = AgentSession::new(format!("docspec/chunk-{}", c.index), Role::Spec, system.clone(), Vec::new());
        let index = (c.index + 1).to_string();
        let msg = render(prompts::DOC_CHUNK_ITEM, &[("index", &index), ("count", &count), ("heading", &c.heading), ("text", c.text.trim_end())])?;
        let reply = session.turn(rec, msg, &mut |name, _| Err(format!("unknown tool `{name}`")))?;
        if !is_none_reply(&reply) {
            notes.push(format!("### {} (excerpt {index})\n\n{}", c.heading, reply.trim()));
            relevant.push(c.index);
        }
    }
    if notes.is_empty() {
        return Err(AgentError::EmptySpec(Diagnostic::error(
            DiagCode::EmptySpec,
            None,
            format!("none of the {} excerpts describes a packet format", chunks.len()),
        )));
    }
    let system = render(prompts::DOC_MERGE, &[("name", &opts.name), ("pfs_guide", prompts::PFS_GUIDE.trim_end())])?;
    let mut session = AgentSession::new("docspec/merge", Role::Spec, system, Vec::new());
    let msg = render(prompts::DOC_MERGE_START, &[("notes", &notes.join("\n\n"))])?;
    let (spec, pfs) = syntax_loop(rec, &mut session, msg, opts.syntax_budget, "docspec")?;
    Ok(DocSpecOutput { spec, pfs, chunks, relevant })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headings_split_and_preamble_is_kept() {
        let doc = "Title\n\n1.  Intro\n   text\n4.1.  Format\n   more\n   4.2 indented is not a heading\n";
        let c = chunk_document(doc);
        let heads: Vec<&str> = c.iter().map(|c| c.heading.as_str()).collect();
        assert_eq!(heads, [PREAMBLE, "1.  Intro", "4.1.  Format"]);
        assert!(c[2].text.contains("indented"));
    }

    #[test]
    fn long_sections_become_overlapping_windows() {
        let body: String = (0..400).map(|i| format!("   line {i:04} of the section\n")).collect();
        let doc = format!("2.  Long\n{body}");
        let c = chunk_document(&doc);
        assert!(c.len() > 1);
        for w in &c {
            assert!(w.text.chars().count() <= CHUNK_MAX_CHARS);
            assert_eq!(w.heading, "2.  Long");
        }
        for pair in c.windows(2) {
            let last_line = pair[0].text.lines().last().unwrap();
            assert!(pair[1].text.contains(last_line));
        }
    }

    #[test]
    fn a_single_huge_line_is_cut() {
        let doc = format!("1. X\n{}", "a".repeat(10_000));
        assert!(chunk_document(&doc).iter().all(|w| w.text.chars().count() <= CHUNK_MAX_CHARS));
    }

    #[test]
    fn none_replies_are_recognized() {
        assert!(is_none_reply(" NONE\n"));
        assert!(is_none_reply("`none`"));
        assert!(!is_none_reply("Fields: vers u3"));
    }
}
