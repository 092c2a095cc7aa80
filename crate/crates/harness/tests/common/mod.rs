#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;

use speclift_core::gen::{Expectation, TestPacket};
use speclift_harness::*;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn module_source(rel: &str) -> SourceFile {
    let p = fixtures().join(rel);
    let name = p.file_name().unwrap().to_string_lossy().into_owned();
    SourceFile::new(name, fs::read_to_string(&p).unwrap())
}

pub fn build(ws: &Workspace, rel: &str) -> Executable {
    match build_module(ws, &[module_source(rel)]).unwrap() {
        Ok(exe) => exe,
        Err(d) => panic!("{rel} failed to build:\n{}", d.output),
    }
}

pub fn packets(bytes: &[Vec<u8>]) -> Vec<TestPacket> {
    bytes
        .iter()
        .enumerate()
        .map(|(i, b)| TestPacket {
            id: i as u64,
            bytes: b.clone(),
            expectation: Expectation::Accept,
            target_constraint: None,
            mutation: None,
            seed: 0,
        })
        .collect()
}

pub fn fast() -> RunOptions {
    RunOptions { timeout: std::time::Duration::from_millis(300), ..RunOptions::default() }
}
