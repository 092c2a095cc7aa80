use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use speclift_cli::pipeline::{coverage_json, load_catalog};
use speclift_cli::*;
use speclift_core::bfd::Catalog;
use speclift_core::diff::{diff_specs, ValidationReport};
use speclift_core::gen::{default_negative_count, generate_negative, generate_positive, read_jsonl, to_jsonl, Expectation};
use speclift_harness::{build_module, run_module_with, HarnessConfig, ModuleVerdict, SourceFile, Workspace};
use speclift_retrieval::{closure_from_entry, index_repo, DEFAULT_BUDGET};

#[derive(Parser)]
#[command(name = "speclift", version, about = "Check a protocol parser against its standard by diffing two packet format specs")]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replay recorded transcripts from this directory instead of calling a model.
    #[arg(long, global = true)]
    replay: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// List the definitions in a repository, or the closure of an entry function.
    Index {
        #[arg(long)]
        repo: Option<PathBuf>,
        #[arg(long)]
        entry: Option<String>,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Stage 1: isolate the validation logic of the entry function.
    Isolate,
    /// Stages 1 and 2: isolated module, then its spec.
    SpecFromCode,
    /// Stage 3: the format spec stated by the document.
    SpecFromDoc,
    /// Test packets for a spec.
    GenTests {
        spec: PathBuf,
        #[arg(long, default_value_t = 256)]
        count: usize,
    },
    /// Build a module and run a packet corpus through it.
    RunHarness {
        #[arg(long = "module", required = true)]
        modules: Vec<PathBuf>,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        trace: bool,
    },
    /// Compare a code spec with a document spec.
    Diff {
        code: PathBuf,
        doc: PathBuf,
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// All stages, end to end.
    Validate,
    /// Render a saved report.
    Report {
        report: PathBuf,
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
}

type Outcome = Result<u8, CliError>;

fn print(text: &str) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn json_text(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json") + "\n"
}

fn pipeline_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let path = cli.config.as_deref().ok_or_else(|| CliError::Config("this command needs --config".into()))?;
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(dir) = &cli.replay {
        cfg.backend = BackendConfig::Replay { transcripts: dir.clone() };
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn read_catalog(path: Option<&Path>) -> Result<Option<Catalog>, CliError> {
    path.map(|p| {
        let text = fs::read_to_string(p)?;
        Catalog::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
    })
    .transpose()
}

fn report_exit(report: &ValidationReport) -> u8 {
    if report.is_clean() {
        EXIT_CLEAN
    } else {
        EXIT_FINDINGS
    }
}

fn run_stages(cli: &Cli, goal: Goal) -> Outcome {
    let cfg = pipeline_config(cli)?;
    match run_goal(&cfg, goal) {
        Ok(run) => {
            match cli.format {
                Format::Json => match &run.products.report {
                    Some(r) => print(&r.to_json())?,
                    None => print(&json_text(&serde_json::to_value(&run.manifest).expect("json")))?,
                },
                Format::Text => {
                    if let Some(r) = &run.products.report {
                        print(&render_report(r, load_catalog(&cfg)?.as_ref()))?;
                    }
                    print(&format!(
                        "{}: {} ({} artifacts in {})",
                        goal.command(),
                        run.manifest.stages_completed.join(", "),
                        run.manifest.artifacts.len(),
                        cfg.out.display()
                    ))?;
                }
            }
            Ok(run.products.report.as_ref().map_or(EXIT_CLEAN, report_exit))
        }
        Err(f) => {
            eprintln!("error: {f}");
            if f.manifest.is_some() {
                eprintln!("partial artifacts listed in {}", cfg.out.join(artifacts::MANIFEST).display());
            }
            Ok(EXIT_ERROR)
        }
    }
}

fn index(cli: &Cli, repo: Option<&Path>, entry: Option<&str>, budget: usize) -> Outcome {
    let cfg = match repo {
        Some(_) => None,
        None => Some(pipeline_config(cli)?),
    };
    let repo = repo.map(Path::to_path_buf).or_else(|| cfg.as_ref().map(|c| c.repo.clone())).expect("repo from flag or config");
    let index = index_repo(&repo)?;
    for w in &index.warnings {
        eprintln!("warning: {w}");
    }
    match entry {
        Some(entry) => {
            let bundle = closure_from_entry(&index, entry, budget)?;
            match cli.format {
                Format::Json => print(&bundle.to_json())?,
                Format::Text => print(&bundle.render())?,
            }
        }
        None => {
            let defs: Vec<_> = index
                .definitions()
                .map(|d| json!({"name": d.name, "kind": d.kind.as_str(), "file": d.file, "line": d.line}))
                .collect();
            match cli.format {
                Format::Json => print(&json_text(&json!(defs)))?,
                Format::Text => {
                    for d in index.definitions() {
                        print(&format!("{:<8} {:<32} {}:{}", d.kind.as_str(), d.name, d.file, d.line))?;
                    }
                }
            }
        }
    }
    Ok(EXIT_CLEAN)
}

fn gen_tests(cli: &Cli, spec: &Path, count: usize) -> Outcome {
    let spec = read_spec(spec)?;
    let seed = cli.seed.unwrap_or(0);
    let positives = generate_positive(&spec, seed, count)?;
    let negatives = generate_negative(&spec, seed, default_negative_count(&spec))?;
    for s in &negatives.skipped {
        eprintln!("skipped negative: {}", s.reason);
    }
    match &cli.out {
        None => {
            print(&to_jsonl(&positives))?;
            print(&to_jsonl(&negatives.packets))?;
        }
        Some(out) => {
            let mut tree = ArtifactTree::open(out, "gen-tests")?;
            tree.write("positives.jsonl", to_jsonl(&positives))?;
            tree.write("negatives.jsonl", to_jsonl(&negatives.packets))?;
            let m = tree.finish(None)?;
            match cli.format {
                Format::Json => print(&json_text(&serde_json::to_value(&m).expect("json")))?,
                Format::Text => print(&format!("{} positives, {} negatives, {} skipped", positives.len(), negatives.packets.len(), negatives.skipped.len()))?,
            }
        }
    }
    Ok(EXIT_CLEAN)
}

fn run_harness(cli: &Cli, modules: &[PathBuf], corpus: &Path, trace: bool) -> Outcome {
    let packets = read_jsonl(BufReader::new(fs::File::open(corpus)?))?;
    let mut sources = Vec::new();
    for m in modules {
        let name = m.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        sources.push(SourceFile::new(name, fs::read_to_string(m)?));
    }
    let config = HarnessConfig::default();
    let mut tree = cli.out.as_deref().map(|o| ArtifactTree::open(o, "run-harness")).transpose()?;
    let ws = match &tree {
        Some(t) => Workspace::at(&t.work_dir(), config.clone())?,
        None => Workspace::new(config.clone())?,
    };
    let exe = match build_module(&ws, &sources)? {
        Ok(exe) => exe,
        Err(diag) => {
            eprintln!("build failed:\n{}", diag.output);
            if let Some(t) = tree {
                t.finish(Some(("build", "build failed".into())))?;
            }
            return Ok(EXIT_ERROR);
        }
    };
    let verdicts = run_module_with(&exe.path, &packets, &config.run_options(trace))?;
    let mut mismatches = 0;
    let mut lines = String::new();
    for (p, v) in packets.iter().zip(&verdicts) {
        let want = match p.expectation {
            Expectation::Accept => ModuleVerdict::Accept,
            Expectation::Reject => ModuleVerdict::Reject,
        };
        let ok = v.verdict == want;
        mismatches += usize::from(!ok);
        lines.push_str(&format!("{} {} {}{}\n", p.id, v.verdict.as_str(), if ok { "ok" } else { "MISMATCH" }, v.detail.as_deref().map(|d| format!(" ({d})")).unwrap_or_default()));
    }
    let verdict_json = serde_json::to_string_pretty(&verdicts).expect("json") + "\n";
    if let Some(t) = tree.as_mut() {
        t.write("verdicts.json", &verdict_json)?;
    }
    if let Some(t) = tree {
        t.finish(None)?;
    }
    match cli.format {
        Format::Json => print(&verdict_json)?,
        Format::Text => {
            print(&lines)?;
            print(&format!("{} packets, {mismatches} mismatches", packets.len()))?;
        }
    }
    Ok(if mismatches == 0 { EXIT_CLEAN } else { EXIT_FINDINGS })
}

fn diff(cli: &Cli, code: &Path, doc: &Path, catalog: Option<&Path>) -> Outcome {
    let (a, b) = (read_spec(code)?, read_spec(doc)?);
    let catalog = read_catalog(catalog)?;
    let report = diff_specs(&a, &b);
    if let Some(out) = &cli.out {
        let mut tree = ArtifactTree::open(out, "diff")?;
        tree.write("report.json", report.to_json())?;
        tree.write("report.txt", render_report(&report, catalog.as_ref()))?;
        if let Some(c) = &catalog {
            tree.write("catalog_coverage.json", coverage_json(&report, c))?;
        }
        tree.finish(None)?;
    }
    match cli.format {
        Format::Json => print(&report.to_json())?,
        Format::Text => print(&render_report(&report, catalog.as_ref()))?,
    }
    Ok(report_exit(&report))
}

fn report(cli: &Cli, path: &Path, catalog: Option<&Path>) -> Outcome {
    let text = fs::read_to_string(path)?;
    let report = ValidationReport::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let catalog = read_catalog(catalog)?;
    match cli.format {
        Format::Json => print(&report.to_json())?,
        Format::Text => print(&render_report(&report, catalog.as_ref()))?,
    }
    Ok(EXIT_CLEAN)
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Index { repo, entry, budget } => index(cli, repo.as_deref(), entry.as_deref(), *budget),
        Command::Isolate => run_stages(cli, Goal::Isolate),
        Command::SpecFromCode => run_stages(cli, Goal::CodeSpec),
        Command::SpecFromDoc => run_stages(cli, Goal::DocSpec),
        Command::Validate => run_stages(cli, Goal::Validate),
        Command::GenTests { spec, count } => gen_tests(cli, spec, *count),
        Command::RunHarness { modules, corpus, trace } => run_harness(cli, modules, corpus, *trace),
        Command::Diff { code, doc, catalog } => diff(cli, code, doc, catalog.as_deref()),
        Command::Report { report: path, catalog } => report(cli, path, catalog.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
