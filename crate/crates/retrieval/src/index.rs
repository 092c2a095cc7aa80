use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tree_sitter::{Node, Parser, Tree};
use walkdir::WalkDir;

use crate::profile::LanguageProfile;
use crate::RetrievalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolKind {
    Function,
    Type,
    Macro,
    Global,
}

impl SymbolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SymbolKind::Function => "function",
            SymbolKind::Type => "type",
            SymbolKind::Macro => "macro",
            SymbolKind::Global => "global",
        }
    }
}

/// Half-open byte range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Definition {
    pub name: String,
    pub kind: SymbolKind,
    /// Relative to the repository root, `/` separated.
    pub file: String,
    pub span: Span,
    /// 1-based.
    pub line: usize,
    pub text: String,
}

#[derive(Debug)]
pub struct SourceIndex {
    pub root: PathBuf,
    pub profile: LanguageProfile,
    pub symbols: BTreeMap<String, Vec<Definition>>,
    pub files: Vec<String>,
    pub trees: BTreeMap<String, Tree>,
    pub warnings: Vec<String>,
}

impl SourceIndex {
    pub fn lookup(&self, name: &str) -> Vec<&Definition> {
        self.symbols.get(name).map(|v| v.iter().collect()).unwrap_or_default()
    }

    pub fn definitions(&self) -> impl Iterator<Item = &Definition> {
        self.symbols.values().flatten()
    }
}

pub fn index_repo(path: &Path) -> Result<SourceIndex, RetrievalError> {
    index_repo_with(path, LanguageProfile::c())
}

pub fn index_repo_with(path: &Path, profile: LanguageProfile) -> Result<SourceIndex, RetrievalError> {
    if !path.is_dir() {
        return Err(RetrievalError::NotFound(path.to_path_buf()));
    }
    let mut index = SourceIndex {
        root: path.to_path_buf(),
        profile,
        symbols: BTreeMap::new(),
        files: Vec::new(),
        trees: BTreeMap::new(),
        warnings: Vec::new(),
    };
    let mut parser = Parser::new();
    parser.set_language(&(index.profile.language)()).map_err(|e| RetrievalError::Language(e.to_string()))?;
    for entry in WalkDir::new(path).sort_by_file_name() {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                index.warnings.push(format!("skipped: {e}"));
                continue;
            }
        };
        if !entry.file_type().is_file() || !index.profile.handles(entry.path()) {
            continue;
        }
        let rel = relative(path, entry.path());
        let text = match fs::read(entry.path()).map(String::from_utf8) {
            Ok(Ok(t)) => t,
            Ok(Err(_)) => {
                index.warnings.push(format!("{rel}: not valid UTF-8, skipped"));
                continue;
            }
            Err(e) => {
                index.warnings.push(format!("{rel}: {e}, skipped"));
                continue;
            }
        };
        let Some(tree) = parser.parse(&text, None) else {
            index.warnings.push(format!("{rel}: parser gave up, skipped"));
            continue;
        };
        if tree.root_node().has_error() {
            index.warnings.push(format!("{rel}: contains syntax errors, indexed partially"));
        }
        let mut found = Vec::new();
        collect_top(tree.root_node(), &text, &rel, &mut found);
        for d in found {
            index.symbols.entry(d.name.clone()).or_default().push(d);
        }
        index.files.push(rel.clone());
        index.trees.insert(rel, tree);
    }
    if index.files.is_empty() {
        return Err(RetrievalError::EmptyRepo(path.to_path_buf()));
    }
    Ok(index)
}

fn relative(root: &Path, p: &Path) -> String {
    let r = p.strip_prefix(root).unwrap_or(p);
    r.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

fn text_of<'t>(n: Node, src: &'t str) -> &'t str {
    &src[n.byte_range()]
}

fn definition(name: &str, kind: SymbolKind, n: Node, src: &str, file: &str) -> Definition {
    // Macro nodes swallow the trailing newline.
    let raw = text_of(n, src);
    let trimmed = raw.trim_end();
    let span = Span { start: n.start_byte(), end: n.start_byte() + trimmed.len() };
    Definition {
        name: name.to_string(),
        kind,
        file: file.to_string(),
        span,
        line: n.start_position().row + 1,
        text: trimmed.to_string(),
    }
}

/// Walks file-scope items, descending into every preprocessor branch.
fn collect_top(n: Node, src: &str, file: &str, out: &mut Vec<Definition>) {
    let mut cursor = n.walk();
    for child in n.named_children(&mut cursor) {
        match child.kind() {
            "preproc_if" | "preproc_ifdef" | "preproc_else" | "preproc_elif" | "preproc_elifdef" | "linkage_specification"
            | "declaration_list" => collect_top(child, src, file, out),
            "preproc_def" | "preproc_function_def" => {
                if let Some(name) = child.child_by_field_name("name") {
                    out.push(definition(text_of(name, src), SymbolKind::Macro, child, src, file));
                }
            }
            "function_definition" => {
                if let Some(name) = child.child_by_field_name("declarator").and_then(|d| declarator_name(d, src)) {
                    out.push(definition(&name, SymbolKind::Function, child, src, file));
                }
            }
            "type_definition" => {
                if let Some(ty) = child.child_by_field_name("type") {
                    aggregate(ty, child, src, file, out);
                }
                let mut c = child.walk();
                for d in child.children_by_field_name("declarator", &mut c) {
                    if let Some(name) = declarator_name(d, src) {
                        out.push(definition(&name, SymbolKind::Type, child, src, file));
                    }
                }
            }
            "declaration" => {
                if let Some(ty) = child.child_by_field_name("type") {
                    aggregate(ty, child, src, file, out);
                }
                let mut c = child.walk();
                for d in child.children_by_field_name("declarator", &mut c) {
                    if is_function_declarator(d) {
                        continue;
                    }
                    if let Some(name) = declarator_name(d, src) {
                        out.push(definition(&name, SymbolKind::Global, child, src, file));
                    }
                }
            }
            "struct_specifier" | "union_specifier" | "enum_specifier" => aggregate(child, child, src, file, out),
            _ => {}
        }
    }
}

/// Records a struct, union or enum that has a body, plus enum constants.
fn aggregate(ty: Node, whole: Node, src: &str, file: &str, out: &mut Vec<Definition>) {
    if !matches!(ty.kind(), "struct_specifier" | "union_specifier" | "enum_specifier") {
        return;
    }
    let Some(body) = ty.child_by_field_name("body") else {
        return;
    };
    if let Some(name) = ty.child_by_field_name("name") {
        out.push(definition(text_of(name, src), SymbolKind::Type, whole, src, file));
    }
    if ty.kind() == "enum_specifier" {
        let mut c = body.walk();
        for e in body.named_children(&mut c) {
            if e.kind() == "enumerator" {
                if let Some(name) = e.child_by_field_name("name") {
                    out.push(definition(text_of(name, src), SymbolKind::Global, whole, src, file));
                }
            }
        }
    }
}

fn is_function_declarator(d: Node) -> bool {
    match d.kind() {
        // `int *f(void)` is a prototype; in `int (*fp)(void)` the name sits
        // in a parenthesized declarator and is a variable.
        "function_declarator" => d.child_by_field_name("declarator").is_none_or(|i| i.kind() != "parenthesized_declarator"),
        "pointer_declarator" | "attributed_declarator" => d.child_by_field_name("declarator").is_some_and(is_function_declarator),
        _ => false,
    }
}

/// The identifier a declarator introduces.
pub(crate) fn declarator_name(d: Node, src: &str) -> Option<String> {
    match d.kind() {
        "identifier" | "type_identifier" | "field_identifier" | "primitive_type" => Some(text_of(d, src).to_string()),
        "parenthesized_declarator" => {
            let mut c = d.walk();
            let inner = d.named_children(&mut c).next();
            inner.and_then(|i| declarator_name(i, src))
        }
        _ => d.child_by_field_name("declarator").and_then(|i| declarator_name(i, src)),
    }
}
