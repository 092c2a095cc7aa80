//! Module isolation: a program-analysis agent retrieves definitions, an
//! isolation agent writes a standalone module, and the harness builds and
//! smoke-tests it. Failures go back to both agents.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde_json::{json, Value};
use speclift_core::gen::{Expectation, TestPacket};
use speclift_harness::workspace::sources_digest;
use speclift_harness::{build_module, run_module_with, Executable, ModuleVerdict, SourceFile, Workspace};
use speclift_retrieval::{bundle_from_names, closure_from_entry, index_repo, symbol_dependencies, ContextBundle, SourceIndex};

use crate::backend::{Role, ToolSchema};
use crate::prompts::{self, render};
use crate::session::{string_arg, AgentSession, AuditEvent, Recorder, ToolResult};
use crate::AgentError;

#[derive(Debug, Clone)]
pub struct IsolationOutput {
    pub sources: Vec<SourceFile>,
    pub executable: Executable,
    /// Definitions the analysis agent settled on.
    pub bundle: ContextBundle,
    pub iterations: usize,
}

const RESERVED: &[&str] = &["harness_main.c", "speclift_harness.h"];

/// Inputs every module must survive without breaking the wire protocol.
fn smoke_packets() -> Vec<TestPacket> {
    [vec![], vec![0u8; 24], vec![0xff; 64]]
        .into_iter()
        .enumerate()
        .map(|(i, bytes)| TestPacket { id: i as u64, bytes, expectation: Expectation::Reject, target_constraint: None, mutation: None, seed: 0 })
        .collect()
}

fn analysis_tools() -> Vec<ToolSchema> {
    vec![
        ToolSchema {
            name: "lookup_definition".into(),
            description: "Source text and location of every definition of a symbol.".into(),
            parameters: json!({"type": "object", "properties": {"name": {"type": "string"}}, "required": ["name"]}),
        },
        ToolSchema {
            name: "expand_dependencies".into(),
            description: "Identifiers used by a symbol's definitions, or by a code snippet.".into(),
            parameters: json!({"type": "object", "properties": {"symbol": {"type": "string"}, "snippet": {"type": "string"}}}),
        },
    ]
}

fn isolation_tools() -> Vec<ToolSchema> {
    vec![ToolSchema {
        name: "write_file".into(),
        description: "Create or replace a source file of the isolated module.".into(),
        parameters: json!({
            "type": "object",
            "properties": {"name": {"type": "string"}, "content": {"type": "string"}},
            "required": ["name", "content"],
        }),
    }]
}

fn lookup(index: &SourceIndex, args: &Value, retrieved: &mut Vec<String>) -> ToolResult {
    let name = string_arg(args, "name")?;
    let defs = index.lookup(name);
    if defs.is_empty() {
        return Err(format!("no definition of `{name}` in the repository"));
    }
    if !retrieved.iter().any(|n| n == name) {
        retrieved.push(name.to_string());
    }
    let out: Vec<Value> = defs
        .iter()
        .map(|d| json!({"kind": d.kind.as_str(), "file": d.file, "line": d.line, "text": d.text}))
        .collect();
    Ok(serde_json::to_string_pretty(&out).expect("json"))
}

fn expand(index: &SourceIndex, args: &Value) -> ToolResult {
    let names: BTreeSet<String> = if let Some(sym) = args.get("symbol").and_then(Value::as_str) {
        symbol_dependencies(index, sym).ok_or_else(|| format!("no definition of `{sym}` in the repository"))?
    } else if let Some(snippet) = args.get("snippet").and_then(Value::as_str) {
        speclift_retrieval::expand_dependencies(index, snippet).map_err(|e| e.to_string())?
    } else {
        return Err("give either `symbol` or `snippet`".into());
    };
    let listed: Vec<String> = names
        .into_iter()
        .map(|n| if index.lookup(&n).is_empty() { format!("{n} (no definition)") } else { n })
        .collect();
    Ok(listed.join("\n"))
}

fn write_file(files: &mut BTreeMap<String, String>, args: &Value) -> ToolResult {
    let name = string_arg(args, "name")?;
    let content = string_arg(args, "content")?;
    let plain = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c)) && !name.starts_with('.');
    if !plain || !(name.ends_with(".c") || name.ends_with(".h")) {
        return Err(format!("`{name}` must be a plain .c or .h file name"));
    }
    if RESERVED.contains(&name) {
        return Err(format!("`{name}` is provided by the harness"));
    }
    files.insert(name.to_string(), content.to_string());
    Ok(format!("wrote {name} ({} bytes)", content.len()))
}

/// Symbols named one per line in an analysis reply.
fn listed_symbols(reply: &str) -> Vec<String> {
    static IDENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[A-Za-z_][A-Za-z0-9_]*$").expect("valid regex"));
    let mut out: Vec<String> = Vec::new();
    for line in reply.lines() {
        let w = line.trim().trim_start_matches(['-', '*']).trim().trim_matches('`');
        if IDENT.is_match(w) && !out.iter().any(|n| n == w) {
            out.push(w.to_string());
        }
    }
    out
}

/// Compiler output with scratch paths removed, so that feedback (and so the
/// request digests) do not depend on where the workspace lives.
fn normalize_output(ws: &Workspace, output: &str) -> String {
    static BUILD_DIR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"build-\d+/").expect("valid regex"));
    let root = format!("{}/", ws.root().display());
    BUILD_DIR.replace_all(&output.replace(&root, ""), "").trim_end().to_string()
}

pub fn run_isolation(rec: &mut Recorder, repo: &Path, entry: &str, ws: &Workspace, budget: usize) -> Result<IsolationOutput, AgentError> {
    if budget == 0 {
        return Err(AgentError::ZeroBudget("isolation"));
    }
    let index = index_repo(repo)?;
    let start = closure_from_entry(&index, entry, 1)?.entries.remove(0);
    let location = format!("{}:{}", start.file, start.line);

    let mut analysis = AgentSession::new("isolation/analysis", Role::ProgramAnalysis, render(prompts::PROGRAM_ANALYSIS, &[])?, analysis_tools());
    let mut isolator = AgentSession::new("isolation/module", Role::ModuleIsolation, render(prompts::MODULE_ISOLATION, &[])?, isolation_tools());
    let mut retrieved: Vec<String> = Vec::new();
    let mut files: BTreeMap<String, String> = BTreeMap::new();
    let mut feedback: Option<String> = None;
    let mut last = String::from("no module written");

    for iteration in 1..=budget {
        let msg = match &feedback {
            None => render(prompts::PROGRAM_ANALYSIS_START, &[("entry", entry), ("location", &location), ("source", &start.text)])?,
            Some(f) => render(prompts::PROGRAM_ANALYSIS_RETRY, &[("entry", entry), ("feedback", f)])?,
        };
        let reply = analysis.turn(rec, msg, &mut |name, args| match name {
            "lookup_definition" => lookup(&index, args, &mut retrieved),
            _ => expand(&index, args),
        })?;
        let mut names = listed_symbols(&reply);
        if names.is_empty() {
            names = retrieved.clone();
        }
        let bundle = bundle_from_names(&index, entry, &names)?;
        let context = bundle.render();

        let msg = match &feedback {
            None => render(prompts::MODULE_ISOLATION_START, &[("entry", entry), ("context", context.trim_end())])?,
            Some(f) => render(prompts::MODULE_ISOLATION_RETRY, &[("feedback", f), ("context", context.trim_end())])?,
        };
        let summary = isolator.turn(rec, msg, &mut |_, args| write_file(&mut files, args))?;

        if files.is_empty() {
            last = "no source files were written".into();
            feedback = Some(format!("{last}. Write the module with `write_file`."));
            continue;
        }
        let sources: Vec<SourceFile> = files.iter().map(|(n, t)| SourceFile::new(n.clone(), t.clone())).collect();
        let digest = sources_digest(&sources);
        let exe = match build_module(ws, &sources)? {
            Ok(exe) => {
                rec.audit.push(AuditEvent::Build { stage: "isolation".into(), iteration, sources_digest: digest, success: true, output: String::new() });
                exe
            }
            Err(diag) => {
                let output = normalize_output(ws, &diag.output);
                rec.audit.push(AuditEvent::Build { stage: "isolation".into(), iteration, sources_digest: digest, success: false, output: output.clone() });
                last = format!("build failed:\n{output}");
                feedback = Some(format!("The build failed:\n\n```\n{output}\n```\n\nThe isolation agent reported:\n\n{}", summary.trim_end()));
                continue;
            }
        };
        let verdicts = run_module_with(&exe.path, &smoke_packets(), &ws.config.run_options(false))?;
        let broken: Vec<String> = verdicts
            .iter()
            .zip(smoke_packets())
            .filter(|(v, _)| !matches!(v.verdict, ModuleVerdict::Accept | ModuleVerdict::Reject))
            .map(|(v, p)| format!("{}-byte input {}: {}{}", p.bytes.len(), hex::encode(&p.bytes), v.verdict.as_str(), v.detail.as_deref().map(|d| format!(" ({d})")).unwrap_or_default()))
            .collect();
        rec.audit.push(AuditEvent::Check { stage: "isolation-smoke".into(), iteration, passed: broken.is_empty(), summary: broken.join("\n") });
        if broken.is_empty() {
            return Ok(IsolationOutput { sources, executable: exe, bundle, iterations: iteration });
        }
        last = format!("smoke test failed:\n{}", broken.join("\n"));
        feedback = Some(format!("The module built but misbehaved under the harness:\n\n{}\n\nThe isolation agent reported:\n\n{}", broken.join("\n"), summary.trim_end()));
    }
    Err(AgentError::IsolationFailed { iterations: budget, last })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbol_lists_tolerate_bullets_and_backticks() {
        assert_eq!(listed_symbols("Needed:\n- `bfd_pkt`\n* BFD_VERSION\nbfd_pkt\n"), ["bfd_pkt", "BFD_VERSION"]);
    }

    #[test]
    fn file_names_stay_inside_the_module() {
        let mut files = BTreeMap::new();
        for bad in ["../x.c", "a/b.c", "x.py", "harness_main.c", ".c"] {
            assert!(write_file(&mut files, &json!({"name": bad, "content": ""})).is_err(), "{bad}");
        }
        assert!(write_file(&mut files, &json!({"name": "m.c", "content": "x"})).is_ok());
    }
}
