//! Pipeline wiring for the `speclift` command.

pub mod artifacts;
pub mod config;
pub mod pipeline;

pub use artifacts::{ArtifactEntry, ArtifactTree, Manifest, RunStatus};
pub use config::{BackendConfig, PipelineConfig, StageBackend};
pub use pipeline::{render_report, run_goal, run_pipeline, Goal, PipelineFailure, PipelineRun, Products, Stage};

/// Exit status for a clean run.
pub const EXIT_CLEAN: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
/// The run finished and found discrepancies or mismatches.
pub const EXIT_FINDINGS: u8 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Spec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Agent(#[from] speclift_agents::AgentError),
    #[error(transparent)]
    Harness(#[from] speclift_harness::HarnessError),
    #[error(transparent)]
    Retrieval(#[from] speclift_retrieval::RetrievalError),
    #[error(transparent)]
    Gen(#[from] speclift_core::gen::GenError),
}

/// Reads a spec in PFS or canonical JSON.
pub fn read_spec(path: &std::path::Path) -> Result<speclift_core::FormatSpec, CliError> {
    let text = std::fs::read_to_string(path)?;
    speclift_core::parse_spec(&text)
        .map_err(|d| CliError::Spec(format!("{}:\n{}", path.display(), speclift_core::spec::render_diagnostics(&d).trim_end())))
}
