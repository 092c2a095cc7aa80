use std::fs;
use std::path::{Path, PathBuf};

use speclift_retrieval::*;

fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/repo")
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/retrieval").join(name)
}

fn reread(root: &Path, file: &str, span: Span) -> String {
    let bytes = fs::read(root.join(file)).unwrap();
    String::from_utf8(bytes[span.start..span.end].to_vec()).unwrap()
}

#[test]
fn index_covers_the_receive_path_anchors() {
    let idx = index_repo(&repo()).unwrap();
    assert!(idx.warnings.is_empty(), "{:?}", idx.warnings);
    let kinds = |n: &str| lookup_definition(&idx, n).iter().map(|d| d.kind).collect::<Vec<_>>();
    assert_eq!(kinds("bfd_recv_cb"), vec![SymbolKind::Function]);
    assert_eq!(kinds("bfd_pkt"), vec![SymbolKind::Type]);
    assert_eq!(kinds("BFD_GETVER"), vec![SymbolKind::Macro]);
    assert_eq!(kinds("ifindex_t"), vec![SymbolKind::Type]);
    // The extern declaration and the definition.
    assert_eq!(kinds("bglobal"), vec![SymbolKind::Global, SymbolKind::Global]);
}

#[test]
fn lookup_returns_text_with_provenance() {
    let idx = index_repo(&repo()).unwrap();
    let m = lookup_definition(&idx, "BFD_GETVER");
    assert_eq!(m.len(), 1);
    assert_eq!(m[0].file, "bfdd/bfdctl.h");
    assert_eq!(m[0].text, "#define BFD_GETVER(diag) (((diag) >> 5) & 0x07)");
    let f = lookup_definition(&idx, "bfd_recv_ipv4");
    assert!(f[0].text.starts_with("ssize_t bfd_recv_ipv4(int sd"));
    assert!(f[0].text.ends_with("return mlen;\n}"));
    assert!(lookup_definition(&idx, "no_such_symbol").is_empty());
}

#[test]
fn every_indexed_span_rereads_to_its_text() {
    let idx = index_repo(&repo()).unwrap();
    for d in idx.definitions() {
        assert_eq!(reread(&idx.root, &d.file, d.span), d.text, "{}", d.name);
    }
}

#[test]
fn entry_body_dependencies() {
    let idx = index_repo(&repo()).unwrap();
    let body = &lookup_definition(&idx, "bfd_recv_cb")[0].text;
    let deps = expand_dependencies(&idx, body).unwrap();
    for n in ["bfd_recv_ipv4", "bfd_recv_ipv6", "bfd_pkt", "BFD_GETVER"] {
        assert!(deps.contains(n), "{n} missing from {deps:?}");
    }
    for local in ["cp", "mlen", "msgbuf", "t", "bfd_recv_cb", "diag", "len"] {
        assert!(!deps.contains(local), "{local}");
    }
}

#[test]
fn closure_contains_the_parsing_anchors() {
    let idx = index_repo(&repo()).unwrap();
    let b = closure_from_entry(&idx, "bfd_recv_cb", DEFAULT_BUDGET).unwrap();
    assert_eq!(b.entries[0].name, "bfd_recv_cb");
    assert!(b.get("bfd_pkt", SymbolKind::Type).is_some());
    assert!(b.get("BFD_GETVER", SymbolKind::Macro).is_some());
    assert!(b.get("bfd_recv_ipv4", SymbolKind::Function).is_some());
    // Reached through the struct, not the entry itself.
    assert!(b.get("bfd_discrs", SymbolKind::Type).is_some());
    assert!(b.frontier.is_empty());
    assert!(b.external.contains(&"cp_debug".to_string()));
    let bg = b.get("bglobal", SymbolKind::Global).unwrap();
    assert_eq!(bg.alternatives.len(), 1);
}

#[test]
fn closure_invariants_hold() {
    let idx = index_repo(&repo()).unwrap();
    let b = closure_from_entry(&idx, "bfd_recv_cb", DEFAULT_BUDGET).unwrap();
    let mut keys: Vec<_> = b.entries.iter().map(|e| (e.name.clone(), e.kind)).collect();
    let n = keys.len();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), n);
    for e in &b.entries {
        assert_eq!(reread(&idx.root, &e.file, e.span), e.text);
        assert!(!b.frontier.contains(&e.name));
    }
}

#[test]
fn closure_is_deterministic_and_serializes() {
    let a = closure_from_entry(&index_repo(&repo()).unwrap(), "bfd_recv_cb", DEFAULT_BUDGET).unwrap();
    let b = closure_from_entry(&index_repo(&repo()).unwrap(), "bfd_recv_cb", DEFAULT_BUDGET).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(ContextBundle::from_json(&a.to_json()).unwrap(), a);
    assert!(a.render().contains("/* bfdd/bfdctl.h:9 (macro BFD_GETVER) */\n#define BFD_GETVER"));
}

#[test]
fn budget_of_one_keeps_only_the_entry() {
    let idx = index_repo(&repo()).unwrap();
    let b = closure_from_entry(&idx, "bfd_recv_cb", 1).unwrap();
    assert_eq!(b.entries.len(), 1);
    assert!(!b.frontier.is_empty());
    assert!(b.frontier.windows(2).all(|w| w[0] < w[1]));
    assert!(matches!(closure_from_entry(&idx, "bfd_recv_cb", 0), Err(RetrievalError::ZeroBudget)));
}

#[test]
fn budgets_only_add_entries() {
    let idx = index_repo(&repo()).unwrap();
    let full = closure_from_entry(&idx, "bfd_recv_cb", DEFAULT_BUDGET).unwrap();
    let mut prev: Vec<BundleEntry> = Vec::new();
    for budget in 1..=full.entries.len() + 1 {
        let b = closure_from_entry(&idx, "bfd_recv_cb", budget).unwrap();
        assert_eq!(&b.entries[..prev.len()], &prev[..], "budget {budget}");
        prev = b.entries;
    }
    assert_eq!(prev, full.entries);
}

#[test]
fn unknown_and_non_function_entries_are_errors() {
    let idx = index_repo(&repo()).unwrap();
    assert!(matches!(closure_from_entry(&idx, "nope", 5), Err(RetrievalError::UnknownEntry(_))));
    assert!(matches!(closure_from_entry(&idx, "BFD_GETVER", 5), Err(RetrievalError::UnknownEntry(_))));
}

#[test]
fn duplicate_macro_definitions_are_both_kept() {
    let idx = index_repo(&fixture("dup_macro")).unwrap();
    let defs = lookup_definition(&idx, "LOAD16");
    assert_eq!(defs.len(), 2);
    assert_ne!(defs[0].text, defs[1].text);
    assert!(defs[0].line < defs[1].line);
    let b = closure_from_entry(&idx, "read_word", DEFAULT_BUDGET).unwrap();
    let e = b.get("LOAD16", SymbolKind::Macro).unwrap();
    assert_eq!(e.alternatives.len(), 1);
    assert_eq!(e.alternatives[0].line, defs[1].line);
}

#[test]
fn standard_routines_are_allowlisted() {
    let idx = index_repo(&fixture("stdonly")).unwrap();
    let body = &lookup_definition(&idx, "copy_header")[0].text;
    assert!(expand_dependencies(&idx, body).unwrap().is_empty());
    let b = closure_from_entry(&idx, "copy_header", DEFAULT_BUDGET).unwrap();
    assert_eq!(b.entries.len(), 1);
    assert!(b.external.is_empty());
}

#[test]
fn empty_body_gives_a_single_entry() {
    let idx = index_repo(&fixture("stdonly")).unwrap();
    let b = closure_from_entry(&idx, "empty_entry", DEFAULT_BUDGET).unwrap();
    assert_eq!(b.entries.len(), 1);
    assert!(b.frontier.is_empty() && b.external.is_empty());
}

#[test]
fn ambiguous_entry_lists_candidates() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.c"), "int parse(void) { return 0; }\n").unwrap();
    fs::write(dir.path().join("b.c"), "int parse(void) { return 1; }\n").unwrap();
    let idx = index_repo(dir.path()).unwrap();
    match closure_from_entry(&idx, "parse", 5) {
        Err(RetrievalError::AmbiguousEntry { candidates, .. }) => assert_eq!(candidates, vec!["a.c:1", "b.c:1"]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn empty_and_missing_directories_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("notes.txt"), "not source").unwrap();
    assert!(matches!(index_repo(dir.path()), Err(RetrievalError::EmptyRepo(_))));
    assert!(matches!(index_repo(&dir.path().join("absent")), Err(RetrievalError::NotFound(_))));
}

#[test]
fn unreadable_files_become_warnings() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ok.c"), "int f(void) { return 0; }\n").unwrap();
    fs::write(dir.path().join("bad.c"), [0xff, 0xfe, 0x00]).unwrap();
    let idx = index_repo(dir.path()).unwrap();
    assert_eq!(idx.files, vec!["ok.c"]);
    assert_eq!(idx.warnings.len(), 1);
    assert!(idx.warnings[0].starts_with("bad.c"));
}

#[test]
fn reindexing_is_idempotent() {
    let a = index_repo(&repo()).unwrap();
    let b = index_repo(&repo()).unwrap();
    assert_eq!(a.symbols, b.symbols);
    assert_eq!(a.files, b.files);
}

#[test]
fn named_bundles_keep_request_order_and_split_externals() {
    let index = index_repo(&repo()).unwrap();
    let names: Vec<String> = ["bfd_pkt", "BFD_VERSION", "bfd_session_lookup", "bfd_pkt"].iter().map(|s| s.to_string()).collect();
    let b = bundle_from_names(&index, "bfd_recv_cb", &names).unwrap();
    let order: Vec<&str> = b.entries.iter().map(|e| e.name.as_str()).collect();
    assert_eq!(order, ["bfd_recv_cb", "bfd_pkt", "BFD_VERSION"]);
    assert_eq!(b.external, ["bfd_session_lookup"]);
    assert!(b.frontier.is_empty());
}
