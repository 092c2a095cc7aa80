mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use speclift_core::bfd;
use speclift_harness::*;

#[test]
fn reference_module_builds_and_answers() {
    let ws = Workspace::new(HarnessConfig::default()).unwrap();
    let exe = build(&ws, "golden/bfd_isolated.c");
    assert!(exe.path.starts_with(ws.root()));
    let valid = bfd::valid_packet();
    let mut zero_mult = valid.clone();
    zero_mult[2] = 0;
    let v = run_module(&exe.path, &packets(&[valid, zero_mult]), false).unwrap();
    assert_eq!(v[0].verdict, ModuleVerdict::Accept);
    assert_eq!(v[1].verdict, ModuleVerdict::Reject);
    assert!(v.iter().all(|x| x.trace.is_none()));
}

#[test]
fn tracing_reports_checks_in_order() {
    let ws = Workspace::new(HarnessConfig::default()).unwrap();
    let exe = build(&ws, "golden/bfd_isolated.c");
    let mut zero_mult = bfd::valid_packet();
    zero_mult[2] = 0;
    let v = run_module(&exe.path, &packets(&[zero_mult]), true).unwrap();
    let t = v[0].trace.as_ref().unwrap();
    let got: Vec<(&str, bool)> = t.iter().map(|s| (s.check.as_str(), s.passed)).collect();
    assert_eq!(got, vec![("min_size", true), ("version", true), ("detect_mult", false)]);
}

#[test]
fn syntax_errors_come_back_verbatim() {
    let ws = Workspace::new(HarnessConfig::default()).unwrap();
    let d = build_module(&ws, &[module_source("modules/broken.c")]).unwrap().unwrap_err();
    assert!(d.output.contains("broken.c"), "{}", d.output);
    assert!(d.output.contains("error"), "{}", d.output);
    assert_ne!(d.status, Some(0));
}

#[test]
fn build_preconditions() {
    let ws = Workspace::new(HarnessConfig::default()).unwrap();
    assert!(matches!(build_module(&ws, &[]), Err(HarnessError::NoSources)));
    let escape = SourceFile::new("../evil.c", "int x;");
    assert!(matches!(build_module(&ws, &[escape]), Err(HarnessError::PathEscape(_))));
    let abs = SourceFile::new("/tmp/evil.c", "int x;");
    assert!(matches!(build_module(&ws, &[abs]), Err(HarnessError::PathEscape(_))));
    let mut cfg = HarnessConfig::default();
    cfg.build.program.clear();
    let ws = Workspace::new(cfg).unwrap();
    assert!(matches!(build_module(&ws, &[module_source("modules/accept_all.c")]), Err(HarnessError::NoBuildCommand)));
}

#[test]
fn build_timeout_is_an_error() {
    let mut cfg = HarnessConfig::default();
    cfg.build = BuildCommand { program: "sleep".into(), args: vec!["5".into()] };
    cfg.build_timeout_ms = 100;
    let ws = Workspace::new(cfg).unwrap();
    assert!(matches!(build_module(&ws, &[module_source("modules/accept_all.c")]), Err(HarnessError::BuildTimeout { .. })));
}

#[test]
fn workspace_is_removed_on_drop() {
    let ws = Workspace::new(HarnessConfig::default()).unwrap();
    let root = ws.root().to_path_buf();
    build(&ws, "modules/accept_all.c");
    assert!(root.is_dir());
    drop(ws);
    assert!(!root.exists());
}

#[test]
fn explicit_workspace_must_start_empty() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("x"), "").unwrap();
    assert!(matches!(Workspace::at(dir.path(), HarnessConfig::default()), Err(HarnessError::WorkspaceNotEmpty(_))));
    assert!(Workspace::at(&dir.path().join("fresh"), HarnessConfig::default()).is_ok());
}

#[test]
fn missing_executable_is_an_error() {
    let r = run_module("/nonexistent/module".as_ref(), &packets(&[vec![]]), false);
    assert!(matches!(r, Err(HarnessError::MissingExecutable(_))));
}

#[test]
fn oversized_frames_are_refused() {
    let ws = Workspace::new(HarnessConfig::default()).unwrap();
    let exe = build(&ws, "modules/accept_all.c");
    let r = run_module(&exe.path, &packets(&[vec![0; MAX_FRAME_LEN + 1]]), false);
    assert!(matches!(r, Err(HarnessError::FrameTooLarge { .. })));
}

#[test]
fn garbage_output_is_a_protocol_error() {
    let ws = Workspace::new(HarnessConfig::default()).unwrap();
    let exe = build(&ws, "modules/garbage.c");
    let v = run_module_with(&exe.path, &packets(&[vec![1], vec![2, 3]]), &fast()).unwrap();
    assert_eq!(v.len(), 2);
    assert!(v.iter().all(|x| x.verdict == ModuleVerdict::ProtocolError));
    assert!(v[0].detail.as_ref().unwrap().contains("maybe 1"));
}

#[test]
fn crashes_are_isolated_to_their_packet() {
    let ws = Workspace::new(HarnessConfig::default()).unwrap();
    let exe = build(&ws, "modules/crash_on_ff.c");
    let v = run_module_with(&exe.path, &packets(&[vec![1, 2], vec![0xff], vec![3], vec![0xff, 0], vec![]]), &fast()).unwrap();
    let kinds: Vec<ModuleVerdict> = v.iter().map(|x| x.verdict).collect();
    use ModuleVerdict::*;
    assert_eq!(kinds, vec![Accept, Crash, Reject, Crash, Accept]);
    assert!(v[1].detail.as_ref().unwrap().contains("signal"));
    assert_eq!(v.iter().map(|x| x.packet_id).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
}

#[test]
fn hangs_time_out_and_the_run_continues() {
    let ws = Workspace::new(HarnessConfig::default()).unwrap();
    let exe = build(&ws, "modules/hang_on_empty.c");
    let v = run_module_with(&exe.path, &packets(&[vec![1], vec![], vec![2]]), &fast()).unwrap();
    use ModuleVerdict::*;
    assert_eq!(v.iter().map(|x| x.verdict).collect::<Vec<_>>(), vec![Reject, Timeout, Reject]);
    assert!(v[1].detail.is_some());
}

#[test]
fn exiting_without_an_answer_is_a_protocol_error() {
    let ws = Workspace::new(HarnessConfig::default()).unwrap();
    let exe = build(&ws, "modules/early_exit.c");
    let v = run_module_with(&exe.path, &packets(&vec![vec![0]; 5]), &fast()).unwrap();
    use ModuleVerdict::*;
    // The restarted process counts from zero again.
    assert_eq!(v.iter().map(|x| x.verdict).collect::<Vec<_>>(), vec![Accept, Accept, ProtocolError, Accept, Accept]);
}

#[test]
fn fuzzed_batches_never_break_the_protocol() {
    let ws = Workspace::new(HarnessConfig::default()).unwrap();
    let exe = build(&ws, "golden/bfd_isolated.c");
    let mut rng = ChaCha8Rng::seed_from_u64(0x0f_0220);
    for round in 0..8 {
        let n = rng.random_range(1..200);
        let mut batch: Vec<Vec<u8>> = (0..n)
            .map(|_| {
                let len = match rng.random_range(0..10) {
                    0 => 0,
                    1 => MAX_FRAME_LEN,
                    2 => 24,
                    _ => rng.random_range(0..64),
                };
                (0..len).map(|_| rng.random()).collect()
            })
            .collect();
        batch.push(Vec::new());
        batch.push(vec![0xab; MAX_FRAME_LEN]);
        let v = run_module(&exe.path, &packets(&batch), round % 2 == 0).unwrap();
        assert_eq!(v.len(), batch.len());
        for (b, x) in batch.iter().zip(&v) {
            assert!(matches!(x.verdict, ModuleVerdict::Accept | ModuleVerdict::Reject), "{x:?}");
            let want = bfd::reference_bfd_check(b).accepted();
            assert_eq!(x.verdict == ModuleVerdict::Accept, want);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn every_packet_gets_exactly_one_verdict(lens in proptest::collection::vec(0usize..40, 0..60), workers in 1usize..4) {
        let ws = Workspace::new(HarnessConfig::default()).unwrap();
        let exe = build(&ws, "modules/crash_on_ff.c");
        let batch: Vec<Vec<u8>> = lens.iter().map(|&l| (0..l).map(|i| (i * 37 + l) as u8).collect()).collect();
        let opts = RunOptions { workers, ..fast() };
        let v = run_module_with(&exe.path, &packets(&batch), &opts).unwrap();
        prop_assert_eq!(v.len(), batch.len());
        for (i, (b, x)) in batch.iter().zip(&v).enumerate() {
            prop_assert_eq!(x.packet_id, i as u64);
            let want = if b.first() == Some(&0xff) {
                ModuleVerdict::Crash
            } else if b.len() % 2 == 0 {
                ModuleVerdict::Accept
            } else {
                ModuleVerdict::Reject
            };
            prop_assert_eq!(x.verdict, want);
        }
    }
}
