//! Coded diagnostics shared by every compiler pass.

use std::fmt;

use serde::Serialize;

use crate::source::{SourceMap, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

macro_rules! codes {
    ($($variant:ident => $text:literal, $doc:literal;)*) => {
        /// Identifies one check. The first letter of the code text fixes
        /// the severity.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum Code {
            $(#[doc = $doc] $variant,)*
        }

        impl Code {
            pub const ALL: &'static [Code] = &[$(Code::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(Code::$variant => $text,)*
                }
            }
        }
    };
}

codes! {
    E0001 => "E0001", "invalid character";
    E0002 => "E0002", "malformed sized literal";
    E0101 => "E0101", "unexpected token";
    E0102 => "E0102", "`if_reset` outside `always_ff`";
    E0103 => "E0103", "unclosed delimiter";
    E0201 => "E0201", "duplicate identifier";
    E0202 => "E0202", "undefined identifier";
    E0203 => "E0203", "symbol kind mismatch";
    E0204 => "E0204", "generic arity mismatch";
    E0205 => "E0205", "generic argument is not a module";
    E0206 => "E0206", "recursive instantiation";
    E0301 => "E0301", "unevaluable constant expression";
    E0302 => "E0302", "multiple drivers";
    E0303 => "E0303", "uninitialized signal";
    W0304 => "W0304", "unused variable";
    W0305 => "W0305", "latch inferred";
    E0306 => "E0306", "direction mismatch";
    E0307 => "E0307", "unknown connection name";
    E0308 => "E0308", "missing port connection";
    E0309 => "E0309", "duplicate connection";
    E0310 => "E0310", "argument count mismatch";
    E0311 => "E0311", "literal exceeds its width";
    E0312 => "E0312", "ambiguous or missing clock/reset";
    E0313 => "E0313", "`if_reset` without a bound reset";
    E0314 => "E0314", "sensitivity entry is not a clock/reset";
    E0315 => "E0315", "clock/reset used as data";
    E0316 => "E0316", "unexpected clock domain crossing";
    W0501 => "W0501", "waveform block is not valid JSON";
    EIO01 => "EIO01", "output not writable";
}

impl Code {
    pub fn severity(self) -> Severity {
        if self.as_str().starts_with('W') { Severity::Warning } else { Severity::Error }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Code {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Related {
    pub span: Span,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub code: Code,
    pub message: String,
    pub span: Span,
    pub related: Vec<Related>,
}

impl Diagnostic {
    pub fn new(code: Code, span: Span, message: impl Into<String>) -> Self {
        Diagnostic { code, message: message.into(), span, related: Vec::new() }
    }

    pub fn with_related(mut self, span: Span, label: impl Into<String>) -> Self {
        self.related.push(Related { span, label: label.into() });
        self
    }

    pub fn severity(&self) -> Severity {
        self.code.severity()
    }

    pub fn is_error(&self) -> bool {
        self.severity() == Severity::Error
    }

    fn sort_key(&self) -> (u32, u32, Code, u32, &str) {
        (self.span.file.0, self.span.start, self.code, self.span.end, &self.message)
    }
}

/// Orders diagnostics by (file, byte offset, code) and drops exact
/// duplicates, which arise when a generic template is checked once per
/// instance.
pub fn sort_and_dedup(diags: &mut Vec<Diagnostic>) {
    diags.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    diags.dedup();
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

#[derive(Serialize)]
struct JsonRelated<'a> {
    file: &'a str,
    line: u32,
    column: u32,
    message: &'a str,
}

#[derive(Serialize)]
struct JsonDiagnostic<'a> {
    code: Code,
    severity: Severity,
    message: &'a str,
    file: &'a str,
    line: u32,
    column: u32,
    related: Vec<JsonRelated<'a>>,
}

/// Encodes a whole run as one JSON array, one object per finding.
pub fn to_json(diags: &[Diagnostic], sources: &SourceMap) -> String {
    let items: Vec<JsonDiagnostic<'_>> = diags
        .iter()
        .map(|d| JsonDiagnostic {
            code: d.code,
            severity: d.severity(),
            message: &d.message,
            file: &sources.get(d.span.file).name,
            line: d.span.line,
            column: d.span.column,
            related: d
                .related
                .iter()
                .map(|r| JsonRelated {
                    file: &sources.get(r.span.file).name,
                    line: r.span.line,
                    column: r.span.column,
                    message: &r.label,
                })
                .collect(),
        })
        .collect();
    serde_json::to_string_pretty(&items).expect("diagnostics serialize")
}
