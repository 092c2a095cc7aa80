use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use speclift_core::diff::ValidationReport;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn config() -> PathBuf {
    fixtures().join("pipeline.toml")
}

fn speclift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_speclift")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files_under(root: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_string_lossy().into_owned());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn validate_in_replay_reproduces_the_golden_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = speclift(&["validate", "--config", s(&config()), "--out", s(&out), "--format", "json"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let printed = ValidationReport::from_json(&String::from_utf8(o.stdout).unwrap()).unwrap();
    let golden = ValidationReport::from_json(&fs::read_to_string(fixtures().join("golden/bfd_report.json")).unwrap()).unwrap();
    assert_eq!(printed, golden);
    assert_eq!(fs::read_to_string(out.join("report.json")).unwrap(), golden.to_json());

    let files = files_under(&out);
    for f in ["manifest.json", "module/bfd_isolated.c", "specs/code.pfs", "specs/doc.json", "corpus/positives.jsonl", "transcripts/docspec.jsonl", "report.txt"] {
        assert!(files.iter().any(|x| x == f), "{f} missing from {files:?}");
    }
    assert!(!out.join(".work").exists());
    let golden_module = fs::read_to_string(fixtures().join("golden/bfd_isolated.c")).unwrap();
    assert_eq!(fs::read_to_string(out.join("module/bfd_isolated.c")).unwrap(), golden_module);
    for stage in ["isolation", "codespec", "docspec"] {
        assert_eq!(
            fs::read(out.join(format!("transcripts/{stage}.jsonl"))).unwrap(),
            fs::read(fixtures().join(format!("transcripts/{stage}.jsonl"))).unwrap(),
            "{stage}"
        );
    }
}

#[test]
fn rerunning_into_the_same_directory_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let run = || {
        let o = speclift(&["validate", "--config", s(&config()), "--out", s(&out)]);
        assert_eq!(o.status.code(), Some(2));
        files_under(&out).into_iter().map(|f| (fs::read(out.join(&f)).unwrap(), f)).collect::<Vec<_>>()
    };
    let first = run();
    assert_eq!(first, run());
}

#[test]
fn a_missing_entry_function_fails_stage_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fs::read_to_string(config()).unwrap().replace("entry = \"bfd_recv_cb\"", "entry = \"no_such_function\"");
    let cfg_path = fixtures().join("pipeline.toml");
    let text = cfg.replace("repo = \"repo\"", &format!("repo = \"{}\"", s(&fixtures().join("repo"))))
        .replace("document = \"rfc/", &format!("document = \"{}/rfc/", s(&fixtures())))
        .replace("catalog = \"catalog.json\"", &format!("catalog = \"{}\"", s(&fixtures().join("catalog.json"))))
        .replace("transcripts = \"transcripts\"", &format!("transcripts = \"{}\"", s(&fixtures().join("transcripts"))));
    let _ = cfg_path;
    let local = dir.path().join("p.toml");
    fs::write(&local, text).unwrap();
    let out = dir.path().join("out");
    let o = speclift(&["validate", "--config", s(&local), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("isolation stage failed") && err.contains("no_such_function"), "{err}");
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "failed");
    assert_eq!(m["failed_stage"], "isolation");
}

#[test]
fn a_short_transcript_leaves_a_partial_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t");
    fs::create_dir(&t).unwrap();
    for stage in ["isolation", "docspec"] {
        fs::copy(fixtures().join(format!("transcripts/{stage}.jsonl")), t.join(format!("{stage}.jsonl"))).unwrap();
    }
    let code = fs::read_to_string(fixtures().join("transcripts/codespec.jsonl")).unwrap();
    fs::write(t.join("codespec.jsonl"), code.lines().next().unwrap().to_string() + "\n").unwrap();
    let out = dir.path().join("out");
    let o = speclift(&["validate", "--config", s(&config()), "--replay", s(&t), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["failed_stage"], "codespec");
    assert_eq!(m["stages_completed"], serde_json::json!(["isolation"]));
    assert!(out.join("module/bfd_isolated.c").is_file());
    assert!(out.join("transcripts/codespec.jsonl").is_file());
    assert!(!out.join("report.json").exists());
}

#[test]
fn diff_of_identical_specs_is_clean() {
    let spec = fixtures().join("specs/bfd_code.pfs");
    let o = speclift(&["diff", s(&spec), s(&spec), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let r = ValidationReport::from_json(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert!(r.is_clean());
}

#[test]
fn diff_of_the_fixtures_groups_by_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    let o = speclift(&[
        "diff",
        s(&fixtures().join("specs/bfd_code.pfs")),
        s(&fixtures().join("specs/bfd_doc.pfs")),
        "--catalog",
        s(&fixtures().join("catalog.json")),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("[R1: ") && text.contains("catalog coverage: 9/9"), "{text}");
    let again = speclift(&["report", s(&out.join("report.json")), "--catalog", s(&fixtures().join("catalog.json"))]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn generated_tests_agree_with_the_golden_module() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let o = speclift(&["gen-tests", s(&fixtures().join("specs/bfd_code.pfs")), "--count", "64", "--seed", "7", "--out", s(&corpus)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for file in ["positives.jsonl", "negatives.jsonl"] {
        let o = speclift(&["run-harness", "--module", s(&fixtures().join("golden/bfd_isolated.c")), "--corpus", s(&corpus.join(file))]);
        assert_eq!(o.status.code(), Some(0), "{file}: {}", String::from_utf8_lossy(&o.stdout));
    }
    let o = speclift(&["run-harness", "--module", s(&fixtures().join("modules/accept_all.c")), "--corpus", s(&corpus.join("negatives.jsonl"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn index_prints_the_closure_anchors() {
    let o = speclift(&["index", "--repo", s(&fixtures().join("repo")), "--entry", "bfd_recv_cb"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("(type bfd_pkt)") && text.contains("(macro BFD_GETVER)"), "{text}");
}

#[test]
fn the_document_stage_runs_alone() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = speclift(&["spec-from-doc", "--config", s(&config()), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = speclift_cli::read_spec(&out.join("specs/doc.pfs")).unwrap();
    assert_eq!(doc, speclift_core::bfd::doc_spec());
    assert!(!out.join("module").exists());
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(speclift(&["validate"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("keep.txt"), "mine").unwrap();
    let o = speclift(&["validate", "--config", s(&config()), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(fs::read_to_string(dir.path().join("keep.txt")).unwrap(), "mine");
    let bad = dir.path().join("bad.pfs");
    fs::write(&bad, "format x { a: u3 where a = 1; }").unwrap();
    let o = speclift(&["diff", s(&bad), s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("=="));
}
