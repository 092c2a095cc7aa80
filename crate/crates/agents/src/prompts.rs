//! Prompt templates, embedded at build time from the workspace `prompts/`
//! directory.

use std::sync::LazyLock;

use regex::{Captures, Regex};

use crate::AgentError;

macro_rules! template {
    ($name:ident, $file:literal) => {
        pub const $name: &str = include_str!(concat!("../../../prompts/", $file));
    };
}

template!(PFS_GUIDE, "pfs_guide.md");
template!(PROGRAM_ANALYSIS, "program_analysis.md");
template!(PROGRAM_ANALYSIS_START, "program_analysis_start.md");
template!(PROGRAM_ANALYSIS_RETRY, "program_analysis_retry.md");
template!(MODULE_ISOLATION, "module_isolation.md");
template!(MODULE_ISOLATION_START, "module_isolation_start.md");
template!(MODULE_ISOLATION_RETRY, "module_isolation_retry.md");
template!(CODESPEC, "codespec.md");
template!(CODESPEC_START, "codespec_start.md");
template!(CODESPEC_MISMATCH, "codespec_mismatch.md");
template!(SYNTAX_RETRY, "syntax_retry.md");
template!(DOC_CHUNK, "doc_chunk.md");
template!(DOC_CHUNK_ITEM, "doc_chunk_item.md");
template!(DOC_MERGE, "doc_merge.md");
template!(DOC_MERGE_START, "doc_merge_start.md");

pub const ALL: &[(&str, &str)] = &[
    ("pfs_guide", PFS_GUIDE),
    ("program_analysis", PROGRAM_ANALYSIS),
    ("program_analysis_start", PROGRAM_ANALYSIS_START),
    ("program_analysis_retry", PROGRAM_ANALYSIS_RETRY),
    ("module_isolation", MODULE_ISOLATION),
    ("module_isolation_start", MODULE_ISOLATION_START),
    ("module_isolation_retry", MODULE_ISOLATION_RETRY),
    ("codespec", CODESPEC),
    ("codespec_start", CODESPEC_START),
    ("codespec_mismatch", CODESPEC_MISMATCH),
    ("syntax_retry", SYNTAX_RETRY),
    ("doc_chunk", DOC_CHUNK),
    ("doc_chunk_item", DOC_CHUNK_ITEM),
    ("doc_merge", DOC_MERGE),
    ("doc_merge_start", DOC_MERGE_START),
];

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{\{([a-z_]+)\}\}").expect("valid regex"));

/// `template-version` from the header comment.
pub fn version(template: &str) -> Option<u32> {
    let first = template.lines().next()?;
    let rest = first.strip_prefix("<!-- template-version:")?.strip_suffix("-->")?;
    rest.trim().parse().ok()
}

/// Fills `{{name}}` placeholders in one pass; substituted text is not
/// rescanned. The header comment is dropped.
pub fn render(template: &str, vars: &[(&str, &str)]) -> Result<String, AgentError> {
    let body = match template.split_once('\n') {
        Some((first, rest)) if first.starts_with("<!--") => rest,
        _ => template,
    };
    let mut missing = None;
    let out = PLACEHOLDER.replace_all(body, |c: &Captures| match vars.iter().find(|(k, _)| *k == &c[1]) {
        Some((_, v)) => v.to_string(),
        None => {
            missing.get_or_insert_with(|| c[1].to_string());
            String::new()
        }
    });
    match missing {
        Some(name) => Err(AgentError::Template(format!("no value for {{{{{name}}}}}"))),
        None => Ok(out.trim_end().to_string()),
    }
}

/// Body of the first ```pfs fence, else of the first bare fence, else the
/// whole reply.
pub fn extract_fenced(reply: &str, lang: &str) -> String {
    let mut fallback = None;
    let mut lines = reply.lines();
    while let Some(line) = lines.next() {
        let Some(tag) = line.trim_start().strip_prefix("```") else { continue };
        let tag = tag.trim();
        let body: Vec<&str> = lines.by_ref().take_while(|l| !l.trim_start().starts_with("```")).collect();
        let text = body.join("\n") + "\n";
        if tag == lang {
            return text;
        }
        if tag.is_empty() && fallback.is_none() {
            fallback = Some(text);
        }
    }
    fallback.unwrap_or_else(|| reply.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_template_is_versioned() {
        for (name, t) in ALL.iter().filter(|(n, _)| *n != "pfs_guide") {
            assert_eq!(version(t), Some(1), "{name}");
        }
    }

    #[test]
    fn guide_example_is_a_valid_spec() {
        let text = extract_fenced(PFS_GUIDE, "pfs");
        speclift_core::spec::parse_spec(&text).unwrap();
    }

    #[test]
    fn render_fills_once_and_reports_missing() {
        let t = "<!-- template-version: 1 -->\na {{x}} b {{y}}\n";
        assert_eq!(render(t, &[("x", "{{y}}"), ("y", "2")]).unwrap(), "a {{y}} b 2");
        assert!(matches!(render(t, &[("x", "1")]), Err(AgentError::Template(_))));
    }

    #[test]
    fn fences_prefer_the_requested_language() {
        let r = "text\n```\nbare\n```\n```pfs\nformat a {}\n```\n";
        assert_eq!(extract_fenced(r, "pfs"), "format a {}\n");
        assert_eq!(extract_fenced("```\nx\n```", "pfs"), "x\n");
        assert_eq!(extract_fenced("plain", "pfs"), "plain");
    }
}
