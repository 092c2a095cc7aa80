use std::fs;
use std::io::Read;
use std::path::{Component, Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::HarnessError;

pub const DRIVER_HEADER: &str = include_str!("../c/speclift_harness.h");
pub const DRIVER_SOURCE: &str = include_str!("../c/harness_main.c");

/// Compiler invocation. `{out}` becomes the executable path, `{include}`
/// the driver header directory, and `{sources}` expands to every source
/// file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildCommand {
    pub program: String,
    pub args: Vec<String>,
}

impl Default for BuildCommand {
    fn default() -> Self {
        BuildCommand {
            program: "cc".into(),
            args: ["-std=c11", "-O2", "-I{include}", "-o", "{out}", "{sources}"].map(String::from).to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub build: BuildCommand,
    pub build_timeout_ms: u64,
    pub run_timeout_ms: u64,
    /// Module processes used for large batches.
    pub workers: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig { build: BuildCommand::default(), build_timeout_ms: 60_000, run_timeout_ms: 2_000, workers: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    /// Relative path inside the build directory.
    pub name: String,
    pub text: String,
}

impl SourceFile {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> SourceFile {
        SourceFile { name: name.into(), text: text.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildDiagnostics {
    pub command: Vec<String>,
    pub status: Option<i32>,
    /// Compiler output, verbatim.
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Executable {
    pub path: PathBuf,
    /// Digest of the module sources, excluding the driver.
    pub digest: String,
}

/// Scratch directory for builds. Dropping a workspace created with
/// [`Workspace::new`] deletes it.
#[derive(Debug)]
pub struct Workspace {
    root: PathBuf,
    pub config: HarnessConfig,
    builds: Mutex<u64>,
    _owned: Option<tempfile::TempDir>,
}

impl Workspace {
    pub fn new(config: HarnessConfig) -> Result<Workspace, HarnessError> {
        let dir = tempfile::Builder::new().prefix("speclift-ws-").tempdir()?;
        Ok(Workspace { root: dir.path().to_path_buf(), config, builds: Mutex::new(0), _owned: Some(dir) })
    }

    /// Uses `root`, which must not exist yet or be an empty directory.
    pub fn at(root: &Path, config: HarnessConfig) -> Result<Workspace, HarnessError> {
        if root.exists() && fs::read_dir(root)?.next().is_some() {
            return Err(HarnessError::WorkspaceNotEmpty(root.to_path_buf()));
        }
        fs::create_dir_all(root)?;
        Ok(Workspace { root: root.to_path_buf(), config, builds: Mutex::new(0), _owned: None })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

fn check_name(name: &str) -> Result<(), HarnessError> {
    let p = Path::new(name);
    let ok = !name.is_empty() && p.components().all(|c| matches!(c, Component::Normal(_)));
    if ok {
        Ok(())
    } else {
        Err(HarnessError::PathEscape(name.to_string()))
    }
}

pub fn sources_digest(sources: &[SourceFile]) -> String {
    let mut h = Sha256::new();
    for s in sources {
        h.update(s.name.as_bytes());
        h.update([0]);
        h.update(s.text.as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

/// Compiles `sources` with the harness driver. A failed compile is
/// `Ok(Err(diagnostics))`; errors are reserved for the harness itself.
pub fn build_module(ws: &Workspace, sources: &[SourceFile]) -> Result<Result<Executable, BuildDiagnostics>, HarnessError> {
    if sources.is_empty() {
        return Err(HarnessError::NoSources);
    }
    if ws.config.build.program.is_empty() {
        return Err(HarnessError::NoBuildCommand);
    }
    for s in sources {
        check_name(&s.name)?;
        if s.name == "harness_main.c" || s.name == "speclift_harness.h" {
            return Err(HarnessError::ReservedName(s.name.clone()));
        }
    }
    let mut n = ws.builds.lock().expect("build lock");
    *n += 1;
    let dir = ws.root.join(format!("build-{:03}", *n));
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("speclift_harness.h"), DRIVER_HEADER)?;
    fs::write(dir.join("harness_main.c"), DRIVER_SOURCE)?;
    let mut compiled = vec![dir.join("harness_main.c")];
    for s in sources {
        let p = dir.join(&s.name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&p, &s.text)?;
        if p.extension().is_some_and(|e| e == "c") {
            compiled.push(p);
        }
    }
    let out = dir.join("module");
    let mut args: Vec<String> = Vec::new();
    for a in &ws.config.build.args {
        match a.as_str() {
            "{sources}" => args.extend(compiled.iter().map(|p| p.display().to_string())),
            _ => args.push(a.replace("{out}", &out.display().to_string()).replace("{include}", &dir.display().to_string())),
        }
    }
    let mut command = vec![ws.config.build.program.clone()];
    command.extend(args.iter().cloned());
    let mut child = Command::new(&ws.config.build.program)
        .args(&args)
        .current_dir(&dir)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| HarnessError::BuildSpawn { program: ws.config.build.program.clone(), source: e })?;
    let mut so = child.stdout.take().expect("piped");
    let mut se = child.stderr.take().expect("piped");
    let out_reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = so.read_to_string(&mut s);
        s
    });
    let err_reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = se.read_to_string(&mut s);
        s
    });
    let deadline = Instant::now() + Duration::from_millis(ws.config.build_timeout_ms);
    let status = loop {
        if let Some(st) = child.try_wait()? {
            break Some(st);
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            let _ = child.wait();
            break None;
        }
        thread::sleep(Duration::from_millis(5));
    };
    let mut output = out_reader.join().unwrap_or_default();
    output.push_str(&err_reader.join().unwrap_or_default());
    match status {
        Some(st) if st.success() && out.is_file() => Ok(Ok(Executable { path: out, digest: sources_digest(sources) })),
        Some(st) => Ok(Err(BuildDiagnostics { command, status: st.code(), output })),
        None => Err(HarnessError::BuildTimeout { ms: ws.config.build_timeout_ms, output }),
    }
}
