use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::deps::expand_lenient;
use crate::index::{Definition, SourceIndex, Span, SymbolKind};
use crate::RetrievalError;

pub const DEFAULT_BUDGET: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Site {
    pub file: String,
    pub span: Span,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleEntry {
    pub name: String,
    pub kind: SymbolKind,
    pub file: String,
    pub span: Span,
    pub line: usize,
    pub text: String,
    /// Further definitions of the same name and kind, e.g. under other
    /// preprocessor branches.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alternatives: Vec<Site>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextBundle {
    pub entry: String,
    pub budget: usize,
    pub entries: Vec<BundleEntry>,
    /// Names reached but left unresolved because the budget ran out.
    pub frontier: Vec<String>,
    /// Names with no definition anywhere in the repository.
    pub external: Vec<String>,
}

impl ContextBundle {
    pub fn get(&self, name: &str, kind: SymbolKind) -> Option<&BundleEntry> {
        self.entries.iter().find(|e| e.name == name && e.kind == kind)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|e| e.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<ContextBundle, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Source listing with provenance comments, for prompts.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(out, "/* {}:{} ({} {}) */", e.file, e.line, e.kind.as_str(), e.name);
            out.push_str(&e.text);
            out.push_str("\n\n");
        }
        if !self.frontier.is_empty() {
            let _ = writeln!(out, "/* not retrieved: {} */", self.frontier.join(", "));
        }
        out
    }
}

fn entries_for(defs: &[Definition]) -> Vec<BundleEntry> {
    let mut by_kind: BTreeMap<SymbolKind, Vec<&Definition>> = BTreeMap::new();
    for d in defs {
        by_kind.entry(d.kind).or_default().push(d);
    }
    by_kind
        .into_values()
        .map(|ds| {
            let first = ds[0];
            BundleEntry {
                name: first.name.clone(),
                kind: first.kind,
                file: first.file.clone(),
                span: first.span,
                line: first.line,
                text: first.text.clone(),
                alternatives: ds[1..].iter().map(|d| Site { file: d.file.clone(), span: d.span, line: d.line }).collect(),
            }
        })
        .collect()
}

/// Breadth-first closure over [`expand_dependencies`](crate::expand_dependencies)
/// starting at function `entry`. `budget` counts resolved names, the entry
/// included; names without a definition do not count.
pub fn closure_from_entry(index: &SourceIndex, entry: &str, budget: usize) -> Result<ContextBundle, RetrievalError> {
    if budget == 0 {
        return Err(RetrievalError::ZeroBudget);
    }
    let funcs: Vec<&Definition> = index.lookup(entry).into_iter().filter(|d| d.kind == SymbolKind::Function).collect();
    let start = match funcs.as_slice() {
        [] => return Err(RetrievalError::UnknownEntry(entry.to_string())),
        [one] => *one,
        many => {
            return Err(RetrievalError::AmbiguousEntry {
                name: entry.to_string(),
                candidates: many.iter().map(|d| format!("{}:{}", d.file, d.line)).collect(),
            })
        }
    };
    let mut bundle = ContextBundle {
        entry: entry.to_string(),
        budget,
        entries: entries_for(std::slice::from_ref(start)),
        frontier: Vec::new(),
        external: Vec::new(),
    };
    let mut seen: BTreeSet<String> = BTreeSet::from([entry.to_string()]);
    let mut round: BTreeSet<String> = expand_lenient(&index.profile, &start.text);
    round.retain(|n| seen.insert(n.clone()));
    let mut resolved = 1usize;
    while !round.is_empty() {
        let mut next = BTreeSet::new();
        let mut pending = round.into_iter();
        while let Some(name) = pending.next() {
            let defs: Vec<Definition> = index.lookup(&name).into_iter().cloned().collect();
            if defs.is_empty() {
                bundle.external.push(name);
                continue;
            }
            if resolved >= budget {
                bundle.frontier.push(name);
                bundle.frontier.extend(pending.by_ref());
                bundle.frontier.extend(next);
                bundle.frontier.sort();
                return Ok(bundle);
            }
            resolved += 1;
            for d in &defs {
                for dep in expand_lenient(&index.profile, &d.text) {
                    if seen.insert(dep.clone()) {
                        next.insert(dep);
                    }
                }
            }
            bundle.entries.extend(entries_for(&defs));
        }
        round = next;
    }
    Ok(bundle)
}

/// Bundle of the entry function plus the named definitions, in the order
/// given. Used when retrieval is driven by an agent rather than the
/// closure walk. Names with no definition are listed as external.
pub fn bundle_from_names(index: &SourceIndex, entry: &str, names: &[String]) -> Result<ContextBundle, RetrievalError> {
    let full = closure_from_entry(index, entry, 1)?;
    let mut bundle = ContextBundle { entry: entry.to_string(), budget: names.len() + 1, entries: full.entries, frontier: Vec::new(), external: Vec::new() };
    let mut seen: BTreeSet<&str> = BTreeSet::from([entry]);
    for name in names {
        if !seen.insert(name) {
            continue;
        }
        let defs: Vec<Definition> = index.lookup(name).into_iter().cloned().collect();
        if defs.is_empty() {
            bundle.external.push(name.clone());
        } else {
            bundle.entries.extend(entries_for(&defs));
        }
    }
    bundle.external.sort();
    Ok(bundle)
}

/// Union of the dependencies of every definition of `name`, or `None` if
/// nothing by that name is defined.
pub fn symbol_dependencies(index: &SourceIndex, name: &str) -> Option<BTreeSet<String>> {
    let defs = index.lookup(name);
    if defs.is_empty() {
        return None;
    }
    let mut out = BTreeSet::new();
    for d in defs {
        out.extend(expand_lenient(&index.profile, &d.text));
    }
    out.remove(name);
    Some(out)
}
