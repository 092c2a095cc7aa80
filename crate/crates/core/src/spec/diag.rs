use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// Stable diagnostic codes. The string forms are part of the agent feedback
/// loop and must not change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagCode {
    LexError,
    UnknownOperator,
    SyntaxError,
    InvalidJson,
    EmptyRecord,
    EmptySpec,
    BadWidth,
    DuplicateField,
    UndefinedField,
    ForwardReference,
    ConditionalReference,
    TypeError,
    BytesReference,
    DiscriminatorTooWide,
    DiscriminatorNotInteger,
    DuplicateArmTag,
    ArmTagOutOfRange,
    UnalignedBytes,
    UnalignedLength,
    AdjacentRecords,
    DuplicateConstraint,
    IdMismatch,
}

impl DiagCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagCode::LexError => "lex-error",
            DiagCode::UnknownOperator => "unknown-operator",
            DiagCode::SyntaxError => "syntax-error",
            DiagCode::InvalidJson => "invalid-json",
            DiagCode::EmptyRecord => "empty-record",
            DiagCode::EmptySpec => "empty-spec",
            DiagCode::BadWidth => "bad-width",
            DiagCode::DuplicateField => "duplicate-field",
            DiagCode::UndefinedField => "undefined-field",
            DiagCode::ForwardReference => "forward-reference",
            DiagCode::ConditionalReference => "conditional-reference",
            DiagCode::TypeError => "type-error",
            DiagCode::BytesReference => "bytes-reference",
            DiagCode::DiscriminatorTooWide => "discriminator-too-wide",
            DiagCode::DiscriminatorNotInteger => "discriminator-not-integer",
            DiagCode::DuplicateArmTag => "duplicate-arm-tag",
            DiagCode::ArmTagOutOfRange => "arm-tag-out-of-range",
            DiagCode::UnalignedBytes => "unaligned-bytes",
            DiagCode::UnalignedLength => "unaligned-length",
            DiagCode::AdjacentRecords => "adjacent-records",
            DiagCode::DuplicateConstraint => "duplicate-constraint",
            DiagCode::IdMismatch => "id-mismatch",
        }
    }
}

impl fmt::Display for DiagCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: DiagCode,
    /// Absent for specs built in memory rather than parsed.
    pub location: Option<Span>,
    pub message: String,
}

impl Diagnostic {
    pub fn error(code: DiagCode, location: Option<Span>, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, code, location, message: message.into() }
    }

    pub fn warning(code: DiagCode, location: Option<Span>, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, code, location, message: message.into() }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match self.location {
            Some(span) => write!(f, "{sev}[{}] at {span}: {}", self.code, self.message),
            None => write!(f, "{sev}[{}]: {}", self.code, self.message),
        }
    }
}

/// Renders a diagnostic list one per line, in order.
pub fn render_diagnostics(diags: &[Diagnostic]) -> String {
    let mut out = String::new();
    for d in diags {
        out.push_str(&d.to_string());
        out.push('\n');
    }
    out
}
