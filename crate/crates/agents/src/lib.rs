//! Model-driven stages: module isolation, spec extraction from code and
//! from documents. Every model turn is recorded so a run can be replayed
//! without a live model.

pub mod backend;
pub mod codespec;
pub mod docspec;
pub mod isolation;
pub mod prompts;
pub mod session;

pub use backend::{
    transcript_from_jsonl, transcript_path, transcript_to_jsonl, HttpBackend, Message, ModelBackend, ModelRequest, ModelResponse,
    ReplayBackend, Role, ScriptedBackend, ToolSchema, Turn,
};
pub use codespec::{extract_codespec, CodeSpecOptions, CodeSpecOutput};
pub use docspec::{chunk_document, extract_docspec, Chunk, DocSpecOptions, DocSpecOutput, CHUNK_MAX_CHARS, CHUNK_OVERLAP_CHARS};
pub use isolation::{run_isolation, IsolationOutput};
pub use session::{audit_to_jsonl, AgentSession, AuditEvent, Recorder, MAX_TOOL_CALLS_PER_TURN};

use serde::{Deserialize, Serialize};
use speclift_core::spec::diag::Diagnostic;
use speclift_harness::MismatchReport;

/// Iteration limits per loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budgets {
    pub isolation: usize,
    pub syntax: usize,
    pub semantic: usize,
}

impl Default for Budgets {
    fn default() -> Budgets {
        Budgets { isolation: 8, syntax: 6, semantic: 6 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("model backend: {0}")]
    Backend(String),
    #[error("transcript: {0}")]
    Transcript(String),
    #[error("transcript ended at turn {turn} (session {session})")]
    TranscriptExhausted { turn: usize, session: String },
    #[error("replay drift at turn {turn}: recorded {expected}, got {actual}")]
    Drift { turn: usize, expected: String, actual: String },
    #[error("session {session} made more than {limit} tool calls in one turn")]
    ToolLimit { session: String, limit: usize },
    #[error("{0} budget must be at least 1")]
    ZeroBudget(&'static str),
    #[error("template: {0}")]
    Template(String),
    #[error("isolation failed after {iterations} iterations: {last}")]
    IsolationFailed { iterations: usize, last: String },
    #[error("spec still invalid after {attempts} attempts:\n{}", speclift_core::spec::render_diagnostics(diagnostics))]
    SyntaxBudget { attempts: usize, diagnostics: Vec<Diagnostic> },
    #[error("spec still disagrees with the module after {rounds} rounds: {}", report.render(0).trim_end())]
    SemanticBudget { rounds: usize, report: Box<MismatchReport> },
    #[error("document is empty")]
    EmptyDocument,
    #[error("no packet format found: {}", .0.message)]
    EmptySpec(Diagnostic),
    #[error(transparent)]
    Retrieval(#[from] speclift_retrieval::RetrievalError),
    #[error(transparent)]
    Harness(#[from] speclift_harness::HarnessError),
}
