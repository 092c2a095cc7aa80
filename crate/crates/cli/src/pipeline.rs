//! The end-to-end run: isolate, extract the code spec, extract the
//! document spec, diff. Every intermediate lands in the artifact tree.

use std::fs;

use serde_json::json;
use speclift_agents::{
    audit_to_jsonl, extract_codespec, extract_docspec, run_isolation, transcript_to_jsonl, CodeSpecOptions, DocSpecOptions, IsolationOutput, Recorder,
};
use speclift_core::bfd::Catalog;
use speclift_core::diff::{diff_specs, render_text, ValidationReport};
use speclift_core::gen::{default_negative_count, generate_negative, generate_positive, to_jsonl};
use speclift_core::spec::{serialize_canonical, to_pfs, FormatSpec};
use speclift_harness::Workspace;

use crate::artifacts::{ArtifactTree, Manifest};
use crate::config::PipelineConfig;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Config,
    Isolation,
    CodeSpec,
    DocSpec,
    Diff,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Isolation => "isolation",
            Stage::CodeSpec => "codespec",
            Stage::DocSpec => "docspec",
            Stage::Diff => "diff",
        }
    }
}

/// How far a run goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Goal {
    Isolate,
    CodeSpec,
    DocSpec,
    Validate,
}

impl Goal {
    pub fn command(self) -> &'static str {
        match self {
            Goal::Isolate => "isolate",
            Goal::CodeSpec => "spec-from-code",
            Goal::DocSpec => "spec-from-doc",
            Goal::Validate => "validate",
        }
    }
}

#[derive(Debug, Default)]
pub struct Products {
    pub code_spec: Option<FormatSpec>,
    pub doc_spec: Option<FormatSpec>,
    pub report: Option<ValidationReport>,
}

#[derive(Debug)]
pub struct PipelineRun {
    pub products: Products,
    pub manifest: Manifest,
}

#[derive(Debug, thiserror::Error)]
#[error("{} stage failed: {error}", stage.as_str())]
pub struct PipelineFailure {
    pub stage: Stage,
    pub error: CliError,
    /// Present when the output directory could be written.
    pub manifest: Option<Manifest>,
}

pub fn load_catalog(cfg: &PipelineConfig) -> Result<Option<Catalog>, CliError> {
    match &cfg.catalog {
        None => Ok(None),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            Catalog::from_json(&text).map(Some).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
    }
}

pub fn render_report(report: &ValidationReport, catalog: Option<&Catalog>) -> String {
    let label = |d: &speclift_core::diff::Discrepancy| catalog.and_then(|c| c.label(d)).map(|e| format!("{}: {}", e.id, e.description));
    let mut out = render_text(report, &label);
    if let Some(c) = catalog {
        let cov = c.coverage(report);
        out.push_str(&format!("\ncatalog coverage: {}/{}\n", cov.covered.len(), c.entries.len()));
        for e in &cov.missing {
            out.push_str(&format!("  not found: {} {}\n", e.id, e.description));
        }
    }
    out
}

pub fn coverage_json(report: &ValidationReport, catalog: &Catalog) -> String {
    let cov = catalog.coverage(report);
    let v = json!({
        "schema_version": crate::artifacts::SCHEMA_VERSION,
        "covered": cov.covered.iter().map(|(e, n)| json!({"id": e.id, "discrepancies": n})).collect::<Vec<_>>(),
        "missing": cov.missing.iter().map(|e| e.id.clone()).collect::<Vec<_>>(),
    });
    serde_json::to_string_pretty(&v).expect("json") + "\n"
}

fn write_spec(tree: &mut ArtifactTree, stem: &str, spec: &FormatSpec) -> Result<(), CliError> {
    tree.write(&format!("specs/{stem}.pfs"), to_pfs(spec))?;
    tree.write(&format!("specs/{stem}.json"), serialize_canonical(spec))
}

fn isolate(cfg: &PipelineConfig, tree: &mut ArtifactTree, ws: &Workspace) -> Result<IsolationOutput, CliError> {
    let mut backend = cfg.backend_for("isolation")?;
    let (res, turns, audit) = {
        let mut rec = Recorder::new(&mut backend);
        let res = run_isolation(&mut rec, &cfg.repo, &cfg.entry, ws, cfg.budgets.isolation);
        (res, rec.turns, rec.audit)
    };
    tree.write("transcripts/isolation.jsonl", transcript_to_jsonl(&turns))?;
    tree.write("audit/isolation.jsonl", audit_to_jsonl(&audit))?;
    let out = res?;
    backend.finish("isolation")?;
    for s in &out.sources {
        tree.write(&format!("module/{}", s.name), &s.text)?;
    }
    tree.write("module/bundle.json", out.bundle.to_json())?;
    Ok(out)
}

fn codespec(cfg: &PipelineConfig, tree: &mut ArtifactTree, iso: &IsolationOutput) -> Result<FormatSpec, CliError> {
    let mut backend = cfg.backend_for("codespec")?;
    let opts = CodeSpecOptions { syntax_budget: cfg.budgets.syntax, semantic_budget: cfg.budgets.semantic, seed: cfg.seed, tests: cfg.tests };
    let (res, turns, audit) = {
        let mut rec = Recorder::new(&mut backend);
        let res = extract_codespec(&mut rec, &iso.sources, &iso.executable, &opts, &cfg.harness.run_options(false));
        (res, rec.turns, rec.audit)
    };
    tree.write("transcripts/codespec.jsonl", transcript_to_jsonl(&turns))?;
    tree.write("audit/codespec.jsonl", audit_to_jsonl(&audit))?;
    let out = res?;
    backend.finish("codespec")?;
    write_spec(tree, "code", &out.spec)?;
    let positives = generate_positive(&out.spec, cfg.seed, cfg.tests)?;
    let negatives = generate_negative(&out.spec, cfg.seed, default_negative_count(&out.spec))?;
    tree.write("corpus/positives.jsonl", to_jsonl(&positives))?;
    tree.write("corpus/negatives.jsonl", to_jsonl(&negatives.packets))?;
    Ok(out.spec)
}

fn docspec(cfg: &PipelineConfig, tree: &mut ArtifactTree) -> Result<FormatSpec, CliError> {
    let document = fs::read_to_string(&cfg.document)?;
    let mut backend = cfg.backend_for("docspec")?;
    let opts = DocSpecOptions { syntax_budget: cfg.budgets.syntax, name: cfg.doc_name.clone() };
    let (res, turns, audit) = {
        let mut rec = Recorder::new(&mut backend);
        let res = extract_docspec(&mut rec, &document, &opts);
        (res, rec.turns, rec.audit)
    };
    tree.write("transcripts/docspec.jsonl", transcript_to_jsonl(&turns))?;
    tree.write("audit/docspec.jsonl", audit_to_jsonl(&audit))?;
    let out = res?;
    backend.finish("docspec")?;
    write_spec(tree, "doc", &out.spec)?;
    let chunks: Vec<_> = out
        .chunks
        .iter()
        .map(|c| json!({"index": c.index, "heading": c.heading, "chars": c.text.chars().count(), "relevant": out.relevant.contains(&c.index)}))
        .collect();
    tree.write("doc/chunks.json", serde_json::to_string_pretty(&chunks).expect("json") + "\n")?;
    Ok(out.spec)
}

fn execute(cfg: &PipelineConfig, goal: Goal, tree: &mut ArtifactTree) -> Result<Products, (Stage, CliError)> {
    let mut products = Products::default();
    let at = |stage: Stage| move |e: CliError| (stage, e);
    if goal != Goal::DocSpec {
        let ws = Workspace::at(&tree.work_dir(), cfg.harness.clone()).map_err(|e| (Stage::Isolation, e.into()))?;
        let iso = isolate(cfg, tree, &ws).map_err(at(Stage::Isolation))?;
        tree.stage_done(Stage::Isolation.as_str());
        if goal == Goal::Isolate {
            return Ok(products);
        }
        products.code_spec = Some(codespec(cfg, tree, &iso).map_err(at(Stage::CodeSpec))?);
        tree.stage_done(Stage::CodeSpec.as_str());
        if goal == Goal::CodeSpec {
            return Ok(products);
        }
    }
    products.doc_spec = Some(docspec(cfg, tree).map_err(at(Stage::DocSpec))?);
    tree.stage_done(Stage::DocSpec.as_str());
    if goal == Goal::DocSpec {
        return Ok(products);
    }
    let (code, doc) = (products.code_spec.as_ref().expect("code spec"), products.doc_spec.as_ref().expect("doc spec"));
    let report = diff_specs(code, doc);
    let catalog = load_catalog(cfg).map_err(at(Stage::Diff))?;
    let diff = |tree: &mut ArtifactTree| -> Result<(), CliError> {
        tree.write("report.json", report.to_json())?;
        tree.write("report.txt", render_report(&report, catalog.as_ref()))?;
        if let Some(c) = &catalog {
            tree.write("catalog_coverage.json", coverage_json(&report, c))?;
        }
        Ok(())
    };
    diff(tree).map_err(at(Stage::Diff))?;
    tree.stage_done(Stage::Diff.as_str());
    products.report = Some(report);
    Ok(products)
}

pub fn run_goal(cfg: &PipelineConfig, goal: Goal) -> Result<PipelineRun, PipelineFailure> {
    let early = |error: CliError| PipelineFailure { stage: Stage::Config, error, manifest: None };
    cfg.validate().map_err(early)?;
    let mut tree = ArtifactTree::open(&cfg.out, goal.command()).map_err(early)?;
    match execute(cfg, goal, &mut tree) {
        Ok(products) => {
            let manifest = tree.finish(None).map_err(early)?;
            Ok(PipelineRun { products, manifest })
        }
        Err((stage, error)) => {
            let manifest = tree.finish(Some((stage.as_str(), error.to_string()))).ok();
            Err(PipelineFailure { stage, error, manifest })
        }
    }
}

/// All four stages.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineRun, PipelineFailure> {
    run_goal(cfg, Goal::Validate)
}
