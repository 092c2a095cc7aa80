#![allow(dead_code)]

use std::path::PathBuf;

use speclift_core::spec::ast::FormatSpec;
use speclift_core::parse_spec;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Every `.pfs` fixture, sorted by file name.
pub fn fixtures() -> Vec<(String, FormatSpec)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(fixtures_dir().join("specs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "pfs"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).unwrap();
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let spec = parse_spec(&text).unwrap_or_else(|d| panic!("{name}: {d:?}"));
            (name, spec)
        })
        .collect()
}

/// Width in bits of the longest path, when every path has a static width.
pub fn max_static_bits(spec: &FormatSpec) -> Option<u64> {
    use speclift_core::spec::ast::{Expr, FieldType, Section};
    fn block(sections: &[Section]) -> Option<u64> {
        let mut total = 0;
        for s in sections {
            total += match s {
                Section::Record(r) => r
                    .fields
                    .iter()
                    .map(|f| match &f.ty {
                        FieldType::UInt { bits } => Some(u64::from(*bits)),
                        FieldType::Bytes { len: Expr::Lit(n) } => Some(n * 8),
                        FieldType::Bytes { .. } => None,
                    })
                    .sum::<Option<u64>>()?,
                Section::Conditional(c) => block(&c.body)?,
                Section::Variant(v) => {
                    let mut m = 0;
                    for a in &v.arms {
                        m = m.max(block(&a.body)?);
                    }
                    if let Some(d) = &v.default {
                        m = m.max(block(d)?);
                    }
                    m
                }
            };
        }
        Some(total)
    }
    block(&spec.sections)
}
