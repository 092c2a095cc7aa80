//! Scratch-directory builds of isolated parsing modules, the harness wire
//! protocol, and the semantic check of a module against a spec.

use std::path::PathBuf;

pub mod codegen;
pub mod run;
pub mod semantic;
pub mod workspace;

pub use codegen::emit_c_module;
pub use run::{encode_frame, run_module, run_module_with, HarnessVerdict, ModuleVerdict, RunOptions, TraceStep, MAX_FRAME_LEN};
pub use semantic::{all_inputs, compare, semantic_check, semantic_check_exhaustive, semantic_check_with, Mismatch, MismatchReport};
pub use workspace::{build_module, BuildCommand, BuildDiagnostics, Executable, HarnessConfig, SourceFile, Workspace};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("no sources to build")]
    NoSources,
    #[error("no build command configured")]
    NoBuildCommand,
    #[error("source path `{0}` leaves the workspace")]
    PathEscape(String),
    #[error("source name `{0}` is reserved for the driver")]
    ReservedName(String),
    #[error("{0}: workspace directory is not empty")]
    WorkspaceNotEmpty(PathBuf),
    #[error("build did not finish within {ms} ms")]
    BuildTimeout { ms: u64, output: String },
    #[error("cannot run compiler `{program}`: {source}")]
    BuildSpawn { program: String, source: std::io::Error },
    #[error("{0}: executable not found")]
    MissingExecutable(PathBuf),
    #[error("cannot start {path}: {source}")]
    Spawn { path: PathBuf, source: std::io::Error },
    #[error("packet {packet_id} is {len} bytes, over the frame limit")]
    FrameTooLarge { packet_id: u64, len: usize },
    #[error("code generation: {0}")]
    Codegen(String),
    #[error(transparent)]
    Gen(#[from] speclift_core::gen::GenError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessConfig {
    pub fn run_options(&self, tracing: bool) -> RunOptions {
        RunOptions { tracing, timeout: std::time::Duration::from_millis(self.run_timeout_ms), workers: self.workers }
    }
}

/// Builds the generated reference module for `spec`.
pub fn build_reference(ws: &Workspace, spec: &speclift_core::FormatSpec) -> Result<Result<Executable, BuildDiagnostics>, HarnessError> {
    let src = emit_c_module(spec)?;
    build_module(ws, &[SourceFile::new(format!("{}.c", spec.name), src)])
}
