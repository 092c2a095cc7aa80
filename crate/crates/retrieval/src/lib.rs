//! Syntax-tree source indexing: definition lookup, dependency expansion and
//! the dependency closure of an entry function.

use std::path::PathBuf;

mod closure;
mod deps;
mod index;
mod profile;

pub use closure::{bundle_from_names, closure_from_entry, symbol_dependencies, BundleEntry, ContextBundle, Site, DEFAULT_BUDGET};
pub use deps::{expand_dependencies, expand_with};
pub use index::{index_repo, index_repo_with, Definition, SourceIndex, Span, SymbolKind};
pub use profile::LanguageProfile;

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("{0}: no such directory")]
    NotFound(PathBuf),
    #[error("{0}: no source files")]
    EmptyRepo(PathBuf),
    #[error("grammar: {0}")]
    Language(String),
    #[error("snippet does not parse (line {line})")]
    Unparseable { line: usize },
    #[error("no function named {0}")]
    UnknownEntry(String),
    #[error("{name} is defined more than once: {}", candidates.join(", "))]
    AmbiguousEntry { name: String, candidates: Vec<String> },
    #[error("budget must be at least 1")]
    ZeroBudget,
}

/// Every definition of `name`, in index order.
pub fn lookup_definition<'i>(index: &'i SourceIndex, name: &str) -> Vec<&'i Definition> {
    index.lookup(name)
}
