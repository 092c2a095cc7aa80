//! The PFS packet-format language: syntax, validation, canonical form,
//! evaluation and layout.

pub mod ast;
pub mod canonical;
pub mod diag;
pub mod eval;
pub mod layout;
pub mod lexer;
pub mod parser;
pub mod pfs;
pub mod validate;

pub use ast::*;
pub use canonical::{canonical_digest, parse_canonical, serialize_canonical, to_canonical_value};
pub use diag::{render_diagnostics, DiagCode, Diagnostic, Severity};
pub use eval::{eval_bool, eval_int, evaluate_constraint, Bindings, EvalError};
pub use layout::{resolve_layout, LayoutEntry, LayoutEnv, LayoutError};
pub use parser::{parse_expr, parse_syntax};
pub use pfs::to_pfs;
pub use validate::{has_errors, validate_spec};

/// Parses PFS source, or canonical JSON when the text starts with `{`, then
/// validates. Returns the format spec together with any warnings, or every
/// diagnostic when at least one is an error.
pub fn parse_spec_with_diagnostics(text: &str) -> Result<(FormatSpec, Vec<Diagnostic>), Vec<Diagnostic>> {
    let spec = if text.trim_start().starts_with('{') { parse_canonical(text) } else { parse_syntax(text) };
    let spec = spec.map_err(|d| vec![d])?;
    let diags = validate_spec(&spec);
    if has_errors(&diags) {
        Err(diags)
    } else {
        Ok((spec, diags))
    }
}

pub fn parse_spec(text: &str) -> Result<FormatSpec, Vec<Diagnostic>> {
    parse_spec_with_diagnostics(text).map(|(s, _)| s)
}
