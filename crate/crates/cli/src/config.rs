use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use speclift_agents::{transcript_path, AgentError, Budgets, HttpBackend, ModelBackend, ModelRequest, ModelResponse, ReplayBackend};
use speclift_harness::HarnessConfig;

use crate::CliError;

pub const DEFAULT_KEY_ENV: &str = "SPECLIFT_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendConfig {
    /// Directory holding `isolation.jsonl`, `codespec.jsonl` and `docspec.jsonl`.
    Replay { transcripts: PathBuf },
    Live {
        endpoint: String,
        model: String,
        #[serde(default = "default_key_env")]
        key_env: String,
    },
}

fn default_key_env() -> String {
    DEFAULT_KEY_ENV.into()
}

fn default_doc_name() -> String {
    "doc_spec".into()
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_tests() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub repo: PathBuf,
    pub entry: String,
    pub document: PathBuf,
    /// Format name the document spec is written under.
    #[serde(default = "default_doc_name")]
    pub doc_name: String,
    #[serde(default)]
    pub catalog: Option<PathBuf>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Positives and negatives per semantic round.
    #[serde(default = "default_tests")]
    pub tests: usize,
    pub backend: BackendConfig,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub harness: HarnessConfig,
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    /// Parses TOML; relative paths are taken relative to `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<PipelineConfig, CliError> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        rebase(base, &mut cfg.repo);
        rebase(base, &mut cfg.document);
        rebase(base, &mut cfg.out);
        if let Some(c) = cfg.catalog.as_mut() {
            rebase(base, c);
        }
        if let BackendConfig::Replay { transcripts } = &mut cfg.backend {
            rebase(base, transcripts);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        PipelineConfig::from_toml(&text, base)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !self.repo.is_dir() {
            return bad(format!("repo {} is not a directory", self.repo.display()));
        }
        if !self.document.is_file() {
            return bad(format!("document {} is not a file", self.document.display()));
        }
        if let Some(c) = &self.catalog {
            if !c.is_file() {
                return bad(format!("catalog {} is not a file", c.display()));
            }
        }
        if self.entry.is_empty() {
            return bad("entry function is empty".into());
        }
        match &self.backend {
            BackendConfig::Replay { transcripts } => {
                for stage in STAGES_WITH_MODELS {
                    let p = transcript_path(transcripts, stage);
                    if !p.is_file() {
                        return bad(format!("replay mode needs {}", p.display()));
                    }
                }
            }
            BackendConfig::Live { key_env, .. } => {
                if std::env::var_os(key_env).is_none() {
                    return bad(format!("live mode needs the API key in ${key_env}"));
                }
            }
        }
        Ok(())
    }

    pub fn backend_for(&self, stage: &str) -> Result<StageBackend, CliError> {
        Ok(match &self.backend {
            BackendConfig::Replay { transcripts } => StageBackend::Replay(ReplayBackend::load(&transcript_path(transcripts, stage))?),
            BackendConfig::Live { endpoint, model, key_env } => StageBackend::Live(HttpBackend::from_env(endpoint, model, key_env)?),
        })
    }
}

pub const STAGES_WITH_MODELS: [&str; 3] = ["isolation", "codespec", "docspec"];

pub enum StageBackend {
    Replay(ReplayBackend),
    Live(HttpBackend),
}

impl StageBackend {
    /// Recorded turns the run never asked for. A replay that ends early has
    /// drifted just as much as one that asks different questions.
    pub fn finish(&self, stage: &str) -> Result<(), AgentError> {
        match self {
            StageBackend::Replay(r) if r.remaining() > 0 => {
                Err(AgentError::Transcript(format!("{stage}: {} recorded turns were not replayed", r.remaining())))
            }
            _ => Ok(()),
        }
    }
}

impl ModelBackend for StageBackend {
    fn respond(&mut self, request: &ModelRequest, digest: &str) -> Result<ModelResponse, AgentError> {
        match self {
            StageBackend::Replay(r) => r.respond(request, digest),
            StageBackend::Live(h) => h.respond(request, digest),
        }
    }
}
