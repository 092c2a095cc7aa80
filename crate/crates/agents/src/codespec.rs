//! Spec extraction from an isolated module, with a syntax loop against the
//! spec parser and a semantic loop against the harness.

use std::fmt::Write;

use speclift_core::gen::{check_packet, DecodedValue};
use speclift_core::spec::{parse_spec_with_diagnostics, render_diagnostics, Diagnostic, FormatSpec};
use speclift_harness::{run_module_with, semantic_check_with, Executable, Mismatch, MismatchReport, RunOptions, SourceFile};

use crate::backend::Role;
use crate::prompts::{self, extract_fenced, render};
use crate::session::{AgentSession, AuditEvent, Recorder};
use crate::AgentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeSpecOptions {
    pub syntax_budget: usize,
    pub semantic_budget: usize,
    pub seed: u64,
    /// Positives and negatives per semantic round.
    pub tests: usize,
}

impl Default for CodeSpecOptions {
    fn default() -> CodeSpecOptions {
        CodeSpecOptions { syntax_budget: 6, semantic_budget: 6, seed: 0, tests: 256 }
    }
}

#[derive(Debug, Clone)]
pub struct CodeSpecOutput {
    pub spec: FormatSpec,
    /// The accepted reply, as written by the model.
    pub pfs: String,
    /// The clean report of the final round.
    pub report: MismatchReport,
    pub rounds: usize,
}

/// Mismatches explained per packet in feedback.
const DETAIL_LIMIT: usize = 3;

/// Asks until the reply parses and validates, feeding diagnostics back.
pub(crate) fn syntax_loop(
    rec: &mut Recorder,
    session: &mut AgentSession,
    first: String,
    budget: usize,
    stage: &str,
) -> Result<(FormatSpec, String), AgentError> {
    let mut msg = first;
    let mut last: Vec<Diagnostic> = Vec::new();
    for attempt in 1..=budget {
        let reply = session.turn(rec, msg, &mut |name, _| Err(format!("unknown tool `{name}`")))?;
        let text = extract_fenced(&reply, "pfs");
        match parse_spec_with_diagnostics(&text) {
            Ok((spec, _warnings)) => {
                rec.audit.push(AuditEvent::Check { stage: format!("{stage}-syntax"), iteration: attempt, passed: true, summary: String::new() });
                return Ok((spec, text));
            }
            Err(diags) => {
                let rendered = render_diagnostics(&diags);
                rec.audit.push(AuditEvent::Check { stage: format!("{stage}-syntax"), iteration: attempt, passed: false, summary: rendered.clone() });
                msg = render(prompts::SYNTAX_RETRY, &[("diagnostics", rendered.trim_end())])?;
                last = diags;
            }
        }
    }
    Err(AgentError::SyntaxBudget { attempts: budget, diagnostics: last })
}

fn render_sources(sources: &[SourceFile]) -> String {
    let mut out = String::new();
    for s in sources {
        let _ = write!(out, "`{}`:\n\n```c\n{}\n```\n\n", s.name, s.text.trim_end());
    }
    out.trim_end().to_string()
}

fn decoded_summary(spec: &FormatSpec, bytes: &[u8]) -> String {
    check_packet(spec, bytes)
        .decoded
        .iter()
        .map(|(k, v)| match v {
            DecodedValue::Int(n) => format!("{k}={n}"),
            DecodedValue::Bytes(b) => format!("{k}={}", hex::encode(b)),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Traces for false rejects, the violated constraint for false accepts.
fn mismatch_details(spec: &FormatSpec, exe: &Executable, report: &MismatchReport, run: &RunOptions) -> Result<String, AgentError> {
    let mut out = String::new();
    let rejects: Vec<&Mismatch> = report.false_rejects.iter().take(DETAIL_LIMIT).collect();
    if !rejects.is_empty() {
        let packets: Vec<_> = rejects
            .iter()
            .map(|m| speclift_core::gen::TestPacket {
                id: m.packet_id,
                bytes: m.bytes.clone(),
                expectation: m.expected,
                target_constraint: None,
                mutation: None,
                seed: 0,
            })
            .collect();
        let traced = run_module_with(&exe.path, &packets, &RunOptions { tracing: true, ..run.clone() })?;
        out.push_str("Packets your spec accepts but the module rejects, with the checks the module ran:\n\n");
        for (m, v) in rejects.iter().zip(&traced) {
            let steps = v
                .trace
                .as_deref()
                .unwrap_or_default()
                .iter()
                .map(|s| format!("{}={}", s.check, u8::from(s.passed)))
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(out, "- {}\n  fields: {}\n  module checks: {}", hex::encode(&m.bytes), decoded_summary(spec, &m.bytes), steps);
        }
        out.push('\n');
    }
    let accepts: Vec<&Mismatch> = report.false_accepts.iter().take(DETAIL_LIMIT).collect();
    if !accepts.is_empty() {
        out.push_str("Packets built to violate your spec that the module accepts:\n\n");
        for m in accepts {
            let target = match &m.target_constraint {
                Some(id) => spec.find_constraint(id).map_or_else(|| id.to_string(), |c| format!("`{}`", c.expr)),
                None => "a length mutation".to_string(),
            };
            let _ = writeln!(out, "- {}\n  violates: {}\n  fields: {}", hex::encode(&m.bytes), target, decoded_summary(spec, &m.bytes));
        }
    }
    Ok(out.trim_end().to_string())
}

pub fn extract_codespec(
    rec: &mut Recorder,
    sources: &[SourceFile],
    exe: &Executable,
    opts: &CodeSpecOptions,
    run: &RunOptions,
) -> Result<CodeSpecOutput, AgentError> {
    if opts.syntax_budget == 0 {
        return Err(AgentError::ZeroBudget("syntax"));
    }
    if opts.semantic_budget == 0 {
        return Err(AgentError::ZeroBudget("semantic"));
    }
    let system = render(prompts::CODESPEC, &[("pfs_guide", prompts::PFS_GUIDE.trim_end())])?;
    let mut session = AgentSession::new("codespec", Role::Spec, system, Vec::new());
    let mut msg = render(prompts::CODESPEC_START, &[("sources", &render_sources(sources))])?;
    let mut last = None;
    for round in 1..=opts.semantic_budget {
        let (spec, pfs) = syntax_loop(rec, &mut session, msg, opts.syntax_budget, "codespec")?;
        let report = semantic_check_with(&spec, &exe.path, opts.seed, opts.tests, run)?;
        let summary = report.render(0);
        rec.audit.push(AuditEvent::Check { stage: "codespec-semantic".into(), iteration: round, passed: report.is_clean(), summary: summary.trim_end().to_string() });
        if report.is_clean() {
            return Ok(CodeSpecOutput { spec, pfs, report, rounds: round });
        }
        let details = mismatch_details(&spec, exe, &report, run)?;
        msg = render(prompts::CODESPEC_MISMATCH, &[("summary", summary.trim_end()), ("details", &details)])?;
        last = Some(report);
    }
    Err(AgentError::SemanticBudget { rounds: opts.semantic_budget, report: Box::new(last.expect("at least one round")) })
}
