//! Human-readable diagnostics with source excerpts.

use std::fmt::Write;

use vl_core::{Diagnostic, SourceMap, Span};

/// ```text
/// error[E0311]: literal `4'd16` does not fit in 4 bits
///   --> src/a.vl:3:16
///    |
///  3 |     assign a = 4'd16;
///    |                ^^^^^
/// ```
/// Related spans follow as `note:` blocks.
pub fn render_human(d: &Diagnostic, sources: &SourceMap) -> String {
    let mut out = format!("{}[{}]: {}\n", d.severity(), d.code.as_str(), d.message);
    excerpt(&mut out, d.span, sources);
    for r in &d.related {
        let _ = writeln!(out, "note: {}", r.label);
        excerpt(&mut out, r.span, sources);
    }
    out
}

fn excerpt(out: &mut String, span: Span, sources: &SourceMap) {
    let file = sources.get(span.file);
    let line = file.line_text(span.line);
    let gutter = " ".repeat(span.line.to_string().len());
    let _ = writeln!(out, "{gutter}--> {}:{}:{}", file.name, span.line, span.column);
    let _ = writeln!(out, "{gutter} |");
    let _ = writeln!(out, "{} | {line}", span.line);

    let col = (span.column as usize).saturating_sub(1).min(line.len());
    let lead: String = line[..col].chars().map(|c| if c == '\t' { '\t' } else { ' ' }).collect();
    let rest = &line[col..];
    let width = rest.get(..span.len().min(rest.len())).map_or(1, |s| s.chars().count()).max(1);
    let _ = writeln!(out, "{gutter} | {lead}{}", "^".repeat(width));
}
