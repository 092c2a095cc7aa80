use std::collections::BTreeSet;

use tree_sitter::{Node, Parser};

use crate::index::{declarator_name, SourceIndex};
use crate::profile::LanguageProfile;
use crate::RetrievalError;

/// Identifiers `snippet` uses without defining, minus builtins.
pub fn expand_dependencies(index: &SourceIndex, snippet: &str) -> Result<BTreeSet<String>, RetrievalError> {
    expand_with(&index.profile, snippet)
}

pub fn expand_with(profile: &LanguageProfile, snippet: &str) -> Result<BTreeSet<String>, RetrievalError> {
    let tree = parse(profile, snippet)?;
    let root = tree.root_node();
    if root.has_error() {
        let at = first_error(root).map_or(0, |n| n.start_position().row + 1);
        return Err(RetrievalError::Unparseable { line: at });
    }
    Ok(free_names(profile, root, snippet))
}

/// Same as [`expand_with`] but tolerates syntax errors, for definitions
/// that came out of a partially parsed file.
pub(crate) fn expand_lenient(profile: &LanguageProfile, snippet: &str) -> BTreeSet<String> {
    match parse(profile, snippet) {
        Ok(t) => free_names(profile, t.root_node(), snippet),
        Err(_) => BTreeSet::new(),
    }
}

fn parse(profile: &LanguageProfile, snippet: &str) -> Result<tree_sitter::Tree, RetrievalError> {
    let mut p = Parser::new();
    p.set_language(&(profile.language)()).map_err(|e| RetrievalError::Language(e.to_string()))?;
    p.parse(snippet, None).ok_or(RetrievalError::Unparseable { line: 0 })
}

fn first_error(n: Node) -> Option<Node> {
    if n.is_error() || n.is_missing() {
        return Some(n);
    }
    let mut c = n.walk();
    let children: Vec<Node> = n.children(&mut c).collect();
    children.into_iter().find_map(first_error)
}

fn free_names(profile: &LanguageProfile, root: Node, src: &str) -> BTreeSet<String> {
    let mut used = BTreeSet::new();
    let mut defined = BTreeSet::new();
    walk(root, src, &mut used, &mut defined);
    used.into_iter().filter(|n| !defined.contains(n) && !profile.is_builtin(n) && !n.starts_with("__")).collect()
}

fn walk(n: Node, src: &str, used: &mut BTreeSet<String>, defined: &mut BTreeSet<String>) {
    match n.kind() {
        "identifier" | "type_identifier" => {
            used.insert(src[n.byte_range()].to_string());
            return;
        }
        "preproc_def" | "preproc_function_def" => {
            macro_names(n, src, used, defined);
            return;
        }
        "preproc_include" | "string_literal" | "char_literal" | "comment" => return,
        "declaration" | "parameter_declaration" | "function_definition" | "type_definition" => {
            let mut c = n.walk();
            for d in n.children_by_field_name("declarator", &mut c) {
                if let Some(name) = declarator_name(d, src) {
                    defined.insert(name);
                }
            }
        }
        "struct_specifier" | "union_specifier" | "enum_specifier" if n.child_by_field_name("body").is_some() => {
            if let Some(name) = n.child_by_field_name("name") {
                defined.insert(src[name.byte_range()].to_string());
            }
        }
        "enumerator" => {
            if let Some(name) = n.child_by_field_name("name") {
                defined.insert(src[name.byte_range()].to_string());
            }
        }
        _ => {}
    }
    let mut c = n.walk();
    let children: Vec<Node> = n.children(&mut c).collect();
    for child in children {
        walk(child, src, used, defined);
    }
}

/// Macro bodies are unparsed token runs; scan them by hand.
fn macro_names(n: Node, src: &str, used: &mut BTreeSet<String>, defined: &mut BTreeSet<String>) {
    if let Some(name) = n.child_by_field_name("name") {
        defined.insert(src[name.byte_range()].to_string());
    }
    let mut params = BTreeSet::new();
    if let Some(ps) = n.child_by_field_name("parameters") {
        let mut c = ps.walk();
        for p in ps.named_children(&mut c) {
            params.insert(src[p.byte_range()].to_string());
        }
    }
    if let Some(v) = n.child_by_field_name("value") {
        for id in body_identifiers(&src[v.byte_range()]) {
            if !params.contains(id) {
                used.insert(id.to_string());
            }
        }
    }
}

/// Identifiers in a macro body, skipping literals and member names.
fn body_identifiers(body: &str) -> Vec<&str> {
    let b = body.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut member = false;
    while i < b.len() {
        let c = b[i];
        if c == b'"' || c == b'\'' {
            i += 1;
            while i < b.len() && b[i] != c {
                i += if b[i] == b'\\' { 2 } else { 1 };
            }
            i += 1;
            member = false;
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let s = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            if !member {
                out.push(&body[s..i]);
            }
            member = false;
        } else if c.is_ascii_digit() {
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'.') {
                i += 1;
            }
            member = false;
        } else if c == b'.' || (c == b'-' && b.get(i + 1) == Some(&b'>')) {
            member = true;
            i += if c == b'.' { 1 } else { 2 };
        } else {
            if !c.is_ascii_whitespace() {
                member = false;
            }
            i += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deps(s: &str) -> Vec<String> {
        expand_with(&LanguageProfile::c(), s).unwrap().into_iter().collect()
    }

    #[test]
    fn locals_and_parameters_are_not_dependencies() {
        assert_eq!(deps("int f(int a) { int b = a + g(a); return b + K; }"), vec!["K", "g"]);
    }

    #[test]
    fn member_names_are_not_dependencies() {
        assert_eq!(deps("int f(struct s *p) { return p->len + p->h.x; }"), vec!["s"]);
    }

    #[test]
    fn macro_bodies_are_scanned() {
        assert_eq!(deps("#define GETV(x) (((x) >> SHIFT) & MASK)\n"), vec!["MASK", "SHIFT"]);
        assert_eq!(deps("#define F(p) ((p)->fd + q.a + \"lit BAR\")\n"), vec!["q"]);
    }

    #[test]
    fn typedef_names_count_as_types_used() {
        assert_eq!(deps("static len_t n;"), vec!["len_t"]);
    }

    #[test]
    fn syntax_errors_are_reported() {
        assert!(matches!(expand_with(&LanguageProfile::c(), "int f( {"), Err(RetrievalError::Unparseable { .. })));
    }

    #[test]
    fn body_scanner_skips_numbers_and_escaped_quotes() {
        assert_eq!(body_identifiers(r#"0x1fUL + 'a' + "\"x" + y"#), vec!["y"]);
    }
}
