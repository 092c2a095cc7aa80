//! The output directory: every file written is recorded with its digest in
//! `manifest.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const SCHEMA_VERSION: u32 = 1;
/// Scratch builds, removed when the tree is finished.
pub const WORK_DIR: &str = ".work";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub status: RunStatus,
    pub stages_completed: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub artifacts: Vec<ArtifactEntry>,
}

pub struct ArtifactTree {
    root: PathBuf,
    command: String,
    entries: BTreeMap<String, ArtifactEntry>,
    stages: Vec<String>,
}

fn check_rel(rel: &str) -> Result<(), CliError> {
    let ok = !rel.is_empty() && Path::new(rel).components().all(|c| matches!(c, Component::Normal(_)));
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!("artifact path `{rel}` leaves the output directory")))
    }
}

impl ArtifactTree {
    /// Opens `root` for writing. A directory left by an earlier run is
    /// cleared of the files its manifest lists; any other non-empty
    /// directory is refused.
    pub fn open(root: &Path, command: &str) -> Result<ArtifactTree, CliError> {
        if root.exists() {
            let manifest = root.join(MANIFEST);
            if manifest.is_file() {
                let old: Manifest = serde_json::from_str(&fs::read_to_string(&manifest)?)
                    .map_err(|e| CliError::Config(format!("{}: {e}", manifest.display())))?;
                for a in &old.artifacts {
                    check_rel(&a.path)?;
                    let p = root.join(&a.path);
                    if p.is_file() {
                        fs::remove_file(&p)?;
                    }
                }
                fs::remove_file(&manifest)?;
                prune_empty_dirs(root)?;
            }
            let work = root.join(WORK_DIR);
            if work.is_dir() {
                fs::remove_dir_all(&work)?;
            }
            if fs::read_dir(root)?.next().is_some() {
                return Err(CliError::Config(format!("{}: output directory holds files from something other than a previous run", root.display())));
            }
        }
        fs::create_dir_all(root)?;
        Ok(ArtifactTree { root: root.to_path_buf(), command: command.to_string(), entries: BTreeMap::new(), stages: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn work_dir(&self) -> PathBuf {
        self.root.join(WORK_DIR)
    }

    pub fn write(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
        check_rel(rel)?;
        let bytes = bytes.as_ref();
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.entries.insert(rel.to_string(), ArtifactEntry { path: rel.to_string(), bytes: bytes.len(), sha256: hex::encode(Sha256::digest(bytes)) });
        Ok(())
    }

    pub fn stage_done(&mut self, stage: &str) {
        self.stages.push(stage.to_string());
    }

    pub fn stages(&self) -> &[String] {
        &self.stages
    }

    /// Writes the manifest and removes the scratch directory.
    pub fn finish(self, failure: Option<(&str, String)>) -> Result<Manifest, CliError> {
        let work = self.work_dir();
        if work.is_dir() {
            fs::remove_dir_all(&work)?;
        }
        let (status, failed_stage, error) = match failure {
            None => (RunStatus::Complete, None, None),
            Some((stage, e)) => (RunStatus::Failed, Some(stage.to_string()), Some(e)),
        };
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            command: self.command,
            status,
            stages_completed: self.stages,
            failed_stage,
            error,
            artifacts: self.entries.into_values().collect(),
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(self.root.join(MANIFEST), text)?;
        Ok(manifest)
    }
}

fn prune_empty_dirs(dir: &Path) -> Result<(), CliError> {
    for e in fs::read_dir(dir)? {
        let p = e?.path();
        if p.is_dir() {
            prune_empty_dirs(&p)?;
            if fs::read_dir(&p)?.next().is_none() {
                fs::remove_dir(&p)?;
            }
        }
    }
    Ok(())
}
