//! One line per acceptance criterion. Exits nonzero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use speclift_agents::{extract_codespec, CodeSpecOptions, Recorder, ReplayBackend};
use speclift_core::bfd::{self, Catalog, Source};
use speclift_core::diff::{constraints_equivalent, diff_specs, Relation, ValidationReport};
use speclift_core::gen::{check_packet, Expectation, Generator, TestPacket};
use speclift_core::spec::ast::{FieldType, Section};
use speclift_core::spec::{canonical_digest, parse_canonical, parse_expr, serialize_canonical, to_pfs};
use speclift_core::{parse_spec, FormatSpec};
use speclift_harness::*;
use speclift_retrieval::{closure_from_entry, index_repo, SymbolKind, DEFAULT_BUDGET};

/// Wall-clock bound for the replay `validate` run.
const VALIDATE_LIMIT: Duration = Duration::from_secs(120);
/// Wall-clock bound per exhaustive 16-bit domain.
const EXHAUSTIVE_LIMIT: Duration = Duration::from_secs(60);
const EXHAUSTIVE_MAX_BITS: u64 = 16;
const MIN_SELF_DIFF_SPECS: usize = 5;
const MIN_GENERATOR_SPECS: usize = 10;
const POSITIVES_PER_SPEC: usize = 256;
const MIN_EQUIVALENCE_PAIRS: usize = 20;
const EQUIVALENCE_WIDTH: u32 = 8;
const FUZZ_ROUNDS: usize = 16;

type Outcome = Result<String, String>;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn fixture_specs() -> Vec<(String, FormatSpec)> {
    let mut paths: Vec<PathBuf> = fs::read_dir(fixtures().join("specs")).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    paths
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "pfs"))
        .map(|p| {
            let spec = parse_spec(&fs::read_to_string(&p).unwrap()).unwrap_or_else(|d| panic!("{}: {d:?}", p.display()));
            (p.file_stem().unwrap().to_string_lossy().into_owned(), spec)
        })
        .collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn files_under(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn config_into(out: &Path) -> speclift_cli::PipelineConfig {
    let mut cfg = speclift_cli::PipelineConfig::load(&fixtures().join("pipeline.toml")).unwrap();
    cfg.out = out.to_path_buf();
    cfg
}

fn bug_catalog_coverage() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_into(&dir.path().join("out"));
    let started = Instant::now();
    let run = speclift_cli::run_pipeline(&cfg).map_err(|f| format!("{} stage failed: {}", f.stage.as_str(), f.error))?;
    let elapsed = started.elapsed();
    let report = run.products.report.ok_or("no report")?;
    let golden = ValidationReport::from_json(&fs::read_to_string(fixtures().join("golden/bfd_report.json")).unwrap()).unwrap();
    ensure(report == golden, || "report differs from the golden report".into())?;
    let catalog = Catalog::from_json(&fs::read_to_string(fixtures().join("catalog.json")).unwrap()).unwrap();
    let count = |s: Source| catalog.entries.iter().filter(|e| e.source == s).count();
    ensure(count(Source::Implementation) == 7 && count(Source::Standard) == 2, || "catalog is not 7 + 2 entries".into())?;
    let cov = catalog.coverage(&report);
    ensure(cov.complete(), || format!("uncovered: {:?}", cov.missing.iter().map(|e| &e.id).collect::<Vec<_>>()))?;
    ensure(elapsed < VALIDATE_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("{}/{} catalog entries, {} discrepancies, golden match, {:.2}s", cov.covered.len(), catalog.entries.len(), report.discrepancies.len(), elapsed.as_secs_f64()))
}

/// Names with their types, plus constraint texts.
fn spec_items(spec: &FormatSpec) -> (BTreeSet<String>, BTreeSet<(String, String)>, BTreeSet<String>) {
    let fields = spec.all_fields();
    let names = fields.iter().map(|f| f.name.clone()).collect();
    let types = fields.iter().map(|f| (f.name.clone(), f.ty.to_string())).collect();
    let constraints = spec.all_constraints().iter().map(|c| c.expr.to_string()).collect();
    (names, types, constraints)
}

fn precision_recall<T: Ord>(got: &BTreeSet<T>, truth: &BTreeSet<T>) -> (f64, f64) {
    let hit = got.intersection(truth).count() as f64;
    (hit / got.len().max(1) as f64, hit / truth.len().max(1) as f64)
}

fn codespec_extraction() -> Outcome {
    let ws = Workspace::new(HarnessConfig::default()).unwrap();
    let sources = [SourceFile::new("bfd_isolated.c", fs::read_to_string(fixtures().join("golden/bfd_isolated.c")).unwrap())];
    let exe = build_module(&ws, &sources).unwrap().map_err(|d| d.output)?;
    let mut backend = ReplayBackend::load(&fixtures().join("transcripts/codespec.jsonl")).map_err(|e| e.to_string())?;
    let mut rec = Recorder::new(&mut backend);
    let out = extract_codespec(&mut rec, &sources, &exe, &CodeSpecOptions::default(), &HarnessConfig::default().run_options(false))
        .map_err(|e| e.to_string())?;
    let truth = bfd::code_spec();
    let (gn, gt, gc) = spec_items(&out.spec);
    let (tn, tt, tc) = spec_items(&truth);
    ensure((gn.len(), gt.len(), gc.len()) == (11, 11, 4), || format!("{} names, {} types, {} constraints", gn.len(), gt.len(), gc.len()))?;
    for (what, (p, r)) in [("names", precision_recall(&gn, &tn)), ("types", precision_recall(&gt, &tt)), ("constraints", precision_recall(&gc, &tc))] {
        ensure(p == 1.0 && r == 1.0, || format!("{what}: precision {p:.3} recall {r:.3}"))?;
    }
    ensure(canonical_digest(&out.spec) == canonical_digest(&truth), || "canonical form differs from the fixture".into())?;
    Ok(format!("11 names, 11 types, 4 constraints at 100% precision and recall, canonical equal, {} semantic rounds", out.rounds))
}

fn false_positive_discipline() -> Outcome {
    let specs = fixture_specs();
    ensure(specs.len() >= MIN_SELF_DIFF_SPECS, || format!("only {} fixture specs", specs.len()))?;
    let key = |r: &ValidationReport| -> Vec<_> { r.discrepancies.iter().map(|d| (d.kind, d.location.clone(), d.witness.clone())).collect() };
    for (name, s) in &specs {
        let r = diff_specs(s, s);
        ensure(r.is_clean(), || format!("{name}: {} self-discrepancies", r.discrepancies.len()))?;
        let renamed = s.rename_fields(&|n| format!("renamed_{n}"));
        let r = diff_specs(s, &renamed);
        ensure(r.is_clean(), || format!("{name}: renaming produced {} discrepancies", r.discrepancies.len()))?;
    }
    let (code, doc) = (bfd::code_spec(), bfd::doc_spec());
    let base = diff_specs(&code, &doc);
    let renamed = diff_specs(&code.rename_fields(&|n| format!("c_{n}")), &doc.rename_fields(&|n| format!("{n}_doc")));
    ensure(key(&base) == key(&renamed), || "renaming changed the BFD discrepancies".into())?;
    Ok(format!("{} specs self-diff clean, rename invariant ({} BFD discrepancies unchanged)", specs.len(), base.discrepancies.len()))
}

fn generator_soundness() -> Outcome {
    let specs = fixture_specs();
    ensure(specs.len() >= MIN_GENERATOR_SPECS, || format!("only {} fixture specs", specs.len()))?;
    let (mut positives, mut negatives, mut unnegatable) = (0, 0, Vec::new());
    for (name, spec) in &specs {
        let mut g = Generator::new(spec).map_err(|e| format!("{name}: {e}"))?;
        for p in g.positives(42, POSITIVES_PER_SPEC).map_err(|e| format!("{name}: {e}"))? {
            let r = check_packet(spec, &p.bytes);
            ensure(r.accepted(), || format!("{name}: positive {} rejected", hex::encode(&p.bytes)))?;
            positives += 1;
        }
        for site in 0..spec.all_constraints().len() {
            match g.negative_for_site(site, 42) {
                Ok(bytes) => {
                    let r = check_packet(spec, &bytes);
                    ensure(r.failed_site == Some(site), || format!("{name} site {site}: first failure {:?}", r.failed_site))?;
                    negatives += 1;
                }
                // Implied by the layout: no byte string violates it alone.
                Err(reason) if name == "udp_datagram" && reason.contains("length == total_len") => unnegatable.push(format!("{name}#{site}")),
                Err(reason) => return Err(format!("{name} site {site}: {reason}")),
            }
        }
    }
    Ok(format!("{} specs, {positives} positives accepted, {negatives} negatives fail at their target, unnegatable: {unnegatable:?}", specs.len()))
}

fn max_bits(sections: &[Section]) -> Option<u64> {
    let mut total = 0;
    for s in sections {
        total += match s {
            Section::Record(r) => r
                .fields
                .iter()
                .map(|f| match f.ty {
                    FieldType::UInt { bits } => Some(u64::from(bits)),
                    FieldType::Bytes { .. } => None,
                })
                .sum::<Option<u64>>()?,
            Section::Conditional(c) => max_bits(&c.body)?,
            Section::Variant(v) => v.arms.iter().map(|a| &a.body).chain(v.default.iter()).map(|b| max_bits(b)).try_fold(0, |m, b| b.map(|b| m.max(b)))?,
        };
    }
    Some(total)
}

fn exhaustive_oracle_equivalence() -> Outcome {
    let small: Vec<_> = fixture_specs().into_iter().filter(|(_, s)| max_bits(&s.sections).is_some_and(|b| b <= EXHAUSTIVE_MAX_BITS)).collect();
    ensure(!small.is_empty(), || "no fixture of at most 16 bits".into())?;
    let ws = Workspace::new(HarnessConfig::default()).unwrap();
    let mut slowest = Duration::ZERO;
    for (name, spec) in &small {
        let exe = build_reference(&ws, spec).map_err(|e| format!("{name}: {e}"))?.map_err(|d| format!("{name}: {}", d.output))?;
        let started = Instant::now();
        let r = semantic_check_exhaustive(spec, &exe.path, 2, &RunOptions::default()).map_err(|e| format!("{name}: {e}"))?;
        let took = started.elapsed();
        slowest = slowest.max(took);
        ensure(r.positives + r.negatives == 1 + 256 + 65536, || format!("{name}: domain of {}", r.positives + r.negatives))?;
        ensure(r.is_clean(), || format!("{name}: {}", r.render(3)))?;
        ensure(took < EXHAUSTIVE_LIMIT, || format!("{name} took {took:?}"))?;
    }
    Ok(format!("{} fixtures ({}) agree over all inputs up to 2 bytes, slowest {:.2}s", small.len(), small.iter().map(|s| s.0.as_str()).collect::<Vec<_>>().join(", "), slowest.as_secs_f64()))
}

fn constraint_equivalence() -> Outcome {
    #[derive(serde::Deserialize)]
    struct Pair {
        c1: String,
        c2: String,
        relation: Relation,
    }
    let pairs: Vec<Pair> = serde_json::from_str(&fs::read_to_string(fixtures().join("equivalence_pairs.json")).unwrap()).unwrap();
    ensure(pairs.len() >= MIN_EQUIVALENCE_PAIRS, || format!("only {} pairs", pairs.len()))?;
    let anchors = [("x != 0", "x >= 1", Relation::Equivalent), ("x > 24", "x >= 24", Relation::C1ImpliesC2)];
    for (a, b, rel) in anchors {
        ensure(pairs.iter().any(|p| p.c1 == a && p.c2 == b && p.relation == rel), || format!("pair `{a}` / `{b}` missing"))?;
    }
    for p in &pairs {
        let (x, y) = (parse_expr(&p.c1).map_err(|e| format!("{e:?}"))?, parse_expr(&p.c2).map_err(|e| format!("{e:?}"))?);
        let widths: BTreeMap<String, u32> = x.field_refs().into_iter().chain(y.field_refs()).map(|f| (f.to_string(), EQUIVALENCE_WIDTH)).collect();
        let got = constraints_equivalent(&x, &y, &widths).relation;
        ensure(got == p.relation, || format!("`{}` vs `{}`: {got:?}, want {:?}", p.c1, p.c2, p.relation))?;
    }
    Ok(format!("{} pairs classified correctly", pairs.len()))
}

fn retrieval_closure() -> Outcome {
    let repo = fixtures().join("repo");
    let bundle = || -> Result<_, String> {
        let idx = index_repo(&repo).map_err(|e| e.to_string())?;
        closure_from_entry(&idx, "bfd_recv_cb", DEFAULT_BUDGET).map_err(|e| e.to_string())
    };
    let a = bundle()?;
    for (name, kind) in [("bfd_pkt", SymbolKind::Type), ("BFD_GETVER", SymbolKind::Macro)] {
        ensure(a.entries.iter().any(|e| e.name == name && e.kind == kind), || format!("{name} missing from the closure"))?;
    }
    for _ in 0..3 {
        ensure(bundle()? == a, || "closure differs between runs".into())?;
    }
    Ok(format!("{} definitions including bfd_pkt and BFD_GETVER, identical over 4 runs", a.entries.len()))
}

fn round_trip_and_determinism() -> Outcome {
    let specs = fixture_specs();
    for (name, s) in &specs {
        let json = serialize_canonical(s);
        ensure(parse_canonical(&json).map_err(|e| format!("{e:?}"))? == *s, || format!("{name}: canonical round trip"))?;
        ensure(parse_spec(&to_pfs(s)).map_err(|e| format!("{e:?}"))? == *s, || format!("{name}: PFS round trip"))?;
    }
    let dir = tempfile::tempdir().unwrap();
    let mut trees = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        speclift_cli::run_pipeline(&config_into(&out)).map_err(|f| format!("run {run}: {}", f.error))?;
        trees.push(files_under(&out));
    }
    ensure(trees[0] == trees[1], || {
        let diff: Vec<_> = trees[0].keys().chain(trees[1].keys()).filter(|k| trees[0].get(*k) != trees[1].get(*k)).collect();
        format!("trees differ at {diff:?}")
    })?;
    Ok(format!("{} specs round-trip through both forms, two pipeline runs identical over {} files", specs.len(), trees[0].len()))
}

fn batch(bytes: &[Vec<u8>]) -> Vec<TestPacket> {
    bytes
        .iter()
        .enumerate()
        .map(|(i, b)| TestPacket { id: i as u64, bytes: b.clone(), expectation: Expectation::Accept, target_constraint: None, mutation: None, seed: 0 })
        .collect()
}

fn protocol_conformance() -> Outcome {
    let ws = Workspace::new(HarnessConfig::default()).unwrap();
    let build = |rel: &str| -> Result<Executable, String> {
        let src = SourceFile::new(rel.rsplit('/').next().unwrap(), fs::read_to_string(fixtures().join(rel)).unwrap());
        build_module(&ws, &[src]).map_err(|e| e.to_string())?.map_err(|d| d.output)
    };
    let reference = build("golden/bfd_isolated.c")?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0009);
    let mut total = 0;
    for round in 0..FUZZ_ROUNDS {
        let n = rng.random_range(1..300);
        let mut packets: Vec<Vec<u8>> = (0..n)
            .map(|_| {
                let len = match rng.random_range(0..12) {
                    0 => 0,
                    1 => MAX_FRAME_LEN,
                    2 => 24,
                    _ => rng.random_range(0..80),
                };
                (0..len).map(|_| rng.random()).collect()
            })
            .collect();
        packets.push(Vec::new());
        packets.push(vec![0xff; MAX_FRAME_LEN]);
        let v = run_module(&reference.path, &batch(&packets), round % 2 == 1).map_err(|e| e.to_string())?;
        ensure(v.len() == packets.len(), || format!("round {round}: {} verdicts for {} packets", v.len(), packets.len()))?;
        for (b, x) in packets.iter().zip(&v) {
            ensure(matches!(x.verdict, ModuleVerdict::Accept | ModuleVerdict::Reject), || format!("round {round}: {x:?}"))?;
            ensure((x.verdict == ModuleVerdict::Accept) == bfd::reference_bfd_check(b).accepted(), || format!("round {round}: wrong verdict for {}", hex::encode(b)))?;
        }
        total += packets.len();
    }
    let fast = RunOptions { timeout: Duration::from_millis(300), ..RunOptions::default() };
    let stubs = [
        ("modules/garbage.c", vec![vec![1], vec![2, 3]], vec![ModuleVerdict::ProtocolError; 2]),
        ("modules/crash_on_ff.c", vec![vec![0xff], vec![1, 2], vec![0xff, 0]], vec![ModuleVerdict::Crash, ModuleVerdict::Accept, ModuleVerdict::Crash]),
        ("modules/early_exit.c", vec![vec![0]; 3], vec![ModuleVerdict::Accept, ModuleVerdict::Accept, ModuleVerdict::ProtocolError]),
    ];
    for (rel, packets, want) in stubs {
        let exe = build(rel)?;
        let got: Vec<ModuleVerdict> = run_module_with(&exe.path, &batch(&packets), &fast).map_err(|e| e.to_string())?.iter().map(|v| v.verdict).collect();
        ensure(got == want, || format!("{rel}: {got:?}, want {want:?}"))?;
    }
    Ok(format!("{total} fuzzed frames over {FUZZ_ROUNDS} batches, no protocol errors; broken stubs flagged"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("bug-catalog coverage", bug_catalog_coverage),
        ("code spec extraction", codespec_extraction),
        ("false-positive discipline", false_positive_discipline),
        ("generator soundness", generator_soundness),
        ("exhaustive oracle equivalence", exhaustive_oracle_equivalence),
        ("constraint equivalence", constraint_equivalence),
        ("retrieval closure", retrieval_closure),
        ("round trip and determinism", round_trip_and_determinism),
        ("harness protocol conformance", protocol_conformance),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
