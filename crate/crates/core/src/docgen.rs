//! Documentation pages for public modules, from `///` comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::diag::{Code, Diagnostic};
use crate::emitter::{lower_type, lower_unpacked};
use crate::lexer::DocComment;
use crate::source::Span;
use crate::syntax::ast::*;
use crate::syntax::format::{format_expr, format_type};

pub const DEFAULT_WAVEDROM_URL: &str = "wavedrom.min.js";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamRow {
    pub name: String,
    pub ty: String,
    pub default: String,
    pub doc: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortRow {
    pub name: String,
    pub direction: String,
    pub ty: String,
    pub doc: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WaveBlock {
    /// Text between the fences, verbatim.
    pub json: String,
    /// Byte offset in `body_doc` where the fence stood.
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocModel {
    pub name: String,
    pub is_pub: bool,
    pub body_doc: String,
    pub params: Vec<ParamRow>,
    pub ports: Vec<PortRow>,
    pub wave_blocks: Vec<WaveBlock>,
}

/// Doc text with the single space after `///` removed from each line.
fn doc_lines(doc: &DocComment) -> Vec<&str> {
    doc.text.lines().map(|l| l.strip_prefix(' ').unwrap_or(l)).collect()
}

fn row_doc(trivia: &Trivia) -> String {
    trivia
        .doc
        .iter()
        .chain(&trivia.trailing_doc)
        .flat_map(doc_lines)
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Splits `wavedrom` fences out of a module's doc body.
fn split_body(doc: &DocComment, diags: &mut Vec<Diagnostic>) -> (String, Vec<WaveBlock>) {
    let mut body = String::new();
    let mut waves = Vec::new();
    let mut fence: Option<(usize, Vec<&str>)> = None;
    for (idx, line) in doc_lines(doc).into_iter().enumerate() {
        match &mut fence {
            Some((start, lines)) => {
                if line.trim_end() == "```" {
                    let json = lines.join("\n");
                    if json5::from_str::<serde_json::Value>(&json).is_err() {
                        let span = Span { line: doc.span.line + *start as u32, ..doc.span };
                        diags.push(Diagnostic::new(Code::W0501, span, "wavedrom block is not valid JSON; kept verbatim"));
                    }
                    waves.push(WaveBlock { json, position: body.len() });
                    fence = None;
                } else {
                    lines.push(line);
                }
            }
            None if line.trim_end() == "```wavedrom" => fence = Some((idx, Vec::new())),
            None => {
                body.push_str(line);
                body.push('\n');
            }
        }
    }
    if let Some((_, lines)) = fence {
        // Unterminated fence: keep it as ordinary text.
        body.push_str("```wavedrom\n");
        for l in lines {
            body.push_str(l);
            body.push('\n');
        }
    }
    let trimmed = body.trim_end().len();
    body.truncate(trimmed);
    for w in &mut waves {
        w.position = w.position.min(body.len());
    }
    (body, waves)
}

fn port_type(ty: &TypeSpec) -> String {
    if ty.kind.is_clock() || ty.kind.is_reset() {
        ty.kind.as_str().to_string()
    } else {
        format!("{}{}", lower_type(ty), lower_unpacked(ty))
    }
}

/// Builds a model per `pub` module, in file then declaration order.
pub fn extract_docs(files: &[&SourceFile]) -> (Vec<DocModel>, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let mut models = Vec::new();
    for file in files {
        for item in &file.items {
            let Item::Module(m) = item else { continue };
            if !m.is_pub {
                continue;
            }
            let (body_doc, wave_blocks) = match m.doc() {
                Some(doc) => split_body(doc, &mut diags),
                None => (String::new(), Vec::new()),
            };
            models.push(DocModel {
                name: m.name.name.clone(),
                is_pub: m.is_pub,
                body_doc,
                params: m
                    .params
                    .iter()
                    .map(|p| ParamRow {
                        name: p.name.name.clone(),
                        ty: format_type(&p.ty),
                        default: format_expr(&p.default),
                        doc: row_doc(&p.trivia),
                    })
                    .collect(),
                ports: m
                    .ports
                    .iter()
                    .map(|p| PortRow {
                        name: p.name.name.clone(),
                        direction: p.direction.as_str().to_string(),
                        ty: port_type(&p.ty),
                        doc: row_doc(&p.trivia),
                    })
                    .collect(),
                wave_blocks,
            });
        }
    }
    (models, diags)
}

fn md_cell(s: &str) -> String {
    s.replace('|', "\\|")
}

fn md_table(out: &mut String, header: [&str; 4], rows: impl Iterator<Item = [String; 4]>) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}|", header.iter().map(|h| "-".repeat(h.len() + 2)).collect::<Vec<_>>().join("|"));
    for r in rows {
        let cells: Vec<String> = r.iter().map(|c| md_cell(c)).collect();
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
}

/// Body with wave fences put back at their positions.
fn body_with_waves(model: &DocModel) -> String {
    let mut out = String::new();
    let mut at = 0;
    for w in &model.wave_blocks {
        let chunk = &model.body_doc[at..w.position];
        out.push_str(chunk);
        if !out.is_empty() && !out.ends_with("\n\n") {
            out.push_str(if out.ends_with('\n') { "\n" } else { "\n\n" });
        }
        let _ = write!(out, "```wavedrom\n{}\n```\n", w.json);
        at = w.position;
    }
    let rest = &model.body_doc[at..];
    if !rest.trim().is_empty() && !out.is_empty() && !out.ends_with("\n\n") {
        out.push('\n');
    }
    out.push_str(rest.trim_start_matches('\n'));
    let trimmed = out.trim_end().len();
    out.truncate(trimmed);
    out
}

pub fn render_markdown(model: &DocModel) -> String {
    let mut out = format!("# {}\n\n", model.name);
    let body = body_with_waves(model);
    if !body.is_empty() {
        out.push_str(&body);
        out.push_str("\n\n");
    }
    out.push_str("## Parameters\n\n");
    md_table(
        &mut out,
        ["Name", "Type", "Default", "Description"],
        model.params.iter().map(|p| [p.name.clone(), p.ty.clone(), p.default.clone(), p.doc.clone()]),
    );
    out.push_str("\n## Ports\n\n");
    md_table(
        &mut out,
        ["Name", "Direction", "Type", "Description"],
        model.ports.iter().map(|p| [p.name.clone(), p.direction.clone(), p.ty.clone(), p.doc.clone()]),
    );
    out
}

pub fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// Inline CommonMark subset: code spans, strong, emphasis, links.
fn inline_html(text: &str) -> String {
    let mut out = String::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let find = |from: usize, pat: &[char]| -> Option<usize> {
        (from..chars.len().saturating_sub(pat.len() - 1)).find(|&j| chars[j..j + pat.len()] == *pat)
    };
    while i < chars.len() {
        let c = chars[i];
        if c == '`' {
            if let Some(end) = find(i + 1, &['`']) {
                let code: String = chars[i + 1..end].iter().collect();
                let _ = write!(out, "<code>{}</code>", escape_html(&code));
                i = end + 1;
                continue;
            }
        }
        if (c == '*' || c == '_') && chars.get(i + 1) == Some(&c) {
            if let Some(end) = find(i + 2, &[c, c]).filter(|e| *e > i + 2) {
                let inner: String = chars[i + 2..end].iter().collect();
                let _ = write!(out, "<strong>{}</strong>", inline_html(&inner));
                i = end + 2;
                continue;
            }
        }
        if c == '*' || c == '_' {
            if let Some(end) = find(i + 1, &[c]).filter(|e| *e > i + 1) {
                let inner: String = chars[i + 1..end].iter().collect();
                let _ = write!(out, "<em>{}</em>", inline_html(&inner));
                i = end + 1;
                continue;
            }
        }
        if c == '[' {
            if let Some(close) = find(i + 1, &[']']) {
                if chars.get(close + 1) == Some(&'(') {
                    if let Some(paren) = find(close + 2, &[')']) {
                        let label: String = chars[i + 1..close].iter().collect();
                        let url: String = chars[close + 2..paren].iter().collect();
                        let _ = write!(out, "<a href=\"{}\">{}</a>", escape_html(&url), inline_html(&label));
                        i = paren + 1;
                        continue;
                    }
                }
            }
        }
        out.push_str(&escape_html(&c.to_string()));
        i += 1;
    }
    out
}

fn list_item(line: &str) -> Option<(bool, &str)> {
    let t = line.trim_start();
    if let Some(rest) = t.strip_prefix("- ").or_else(|| t.strip_prefix("* ")).or_else(|| t.strip_prefix("+ ")) {
        return Some((false, rest));
    }
    let digits = t.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        if let Some(rest) = t[digits..].strip_prefix(". ").or_else(|| t[digits..].strip_prefix(") ")) {
            return Some((true, rest));
        }
    }
    None
}

/// Block-level CommonMark subset: ATX headings, fenced code, lists,
/// paragraphs.
pub fn markdown_to_html(md: &str) -> String {
    let mut out = String::new();
    let lines: Vec<&str> = md.lines().collect();
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        let trimmed = line.trim_start();
        if trimmed.is_empty() {
            i += 1;
            continue;
        }
        if let Some(info) = trimmed.strip_prefix("```") {
            let mut code = Vec::new();
            i += 1;
            while i < lines.len() && lines[i].trim_start() != "```" {
                code.push(lines[i]);
                i += 1;
            }
            i += 1;
            let class = info.trim();
            if class.is_empty() {
                out.push_str("<pre><code>");
            } else {
                let _ = write!(out, "<pre><code class=\"language-{}\">", escape_html(class));
            }
            out.push_str(&escape_html(&code.join("\n")));
            out.push_str("</code></pre>\n");
            continue;
        }
        let level = trimmed.chars().take_while(|c| *c == '#').count();
        if (1..=6).contains(&level) && trimmed[level..].starts_with(' ') {
            let _ = writeln!(out, "<h{level}>{}</h{level}>", inline_html(trimmed[level..].trim()));
            i += 1;
            continue;
        }
        if let Some((ordered, _)) = list_item(line) {
            let tag = if ordered { "ol" } else { "ul" };
            let _ = writeln!(out, "<{tag}>");
            while i < lines.len() {
                match list_item(lines[i]) {
                    Some((o, text)) if o == ordered => {
                        let _ = writeln!(out, "<li>{}</li>", inline_html(text.trim()));
                        i += 1;
                    }
                    _ => break,
                }
            }
            let _ = writeln!(out, "</{tag}>");
            continue;
        }
        let mut para = Vec::new();
        while i < lines.len() {
            let l = lines[i].trim();
            if l.is_empty() || l.starts_with("```") || l.starts_with('#') || list_item(lines[i]).is_some() {
                break;
            }
            para.push(l);
            i += 1;
        }
        let _ = writeln!(out, "<p>{}</p>", inline_html(&para.join("\n")));
    }
    out
}

fn html_table(out: &mut String, header: [&str; 4], rows: impl Iterator<Item = [String; 4]>) {
    out.push_str("<table>\n<thead>\n<tr>");
    for h in header {
        let _ = write!(out, "<th>{h}</th>");
    }
    out.push_str("</tr>\n</thead>\n<tbody>\n");
    for r in rows {
        out.push_str("<tr>");
        for c in r {
            let _ = write!(out, "<td>{}</td>", escape_html(&c));
        }
        out.push_str("</tr>\n");
    }
    out.push_str("</tbody>\n</table>\n");
}

fn html_page(title: &str, head_extra: &str, body_attr: &str, body: &str) -> String {
    format!(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n{head_extra}</head>\n<body{body_attr}>\n{body}</body>\n</html>\n",
        escape_html(title)
    )
}

/// Self-contained page. Wave blocks become `<script type="WaveDrom">`
/// elements rendered in the browser by the script at `wavedrom_url`.
pub fn render_html(model: &DocModel, wavedrom_url: &str) -> String {
    let mut body = format!("<h1>{}</h1>\n", escape_html(&model.name));
    let mut at = 0;
    for w in &model.wave_blocks {
        body.push_str(&markdown_to_html(&model.body_doc[at..w.position]));
        // `</` would end the script element early.
        let _ = writeln!(body, "<script type=\"WaveDrom\">\n{}\n</script>", w.json.replace("</", "<\\/"));
        at = w.position;
    }
    body.push_str(&markdown_to_html(&model.body_doc[at..]));
    body.push_str("<h2>Parameters</h2>\n");
    html_table(
        &mut body,
        ["Name", "Type", "Default", "Description"],
        model.params.iter().map(|p| [p.name.clone(), p.ty.clone(), p.default.clone(), p.doc.clone()]),
    );
    body.push_str("<h2>Ports</h2>\n");
    html_table(
        &mut body,
        ["Name", "Direction", "Type", "Description"],
        model.ports.iter().map(|p| [p.name.clone(), p.direction.clone(), p.ty.clone(), p.doc.clone()]),
    );
    let (head, attr) = if model.wave_blocks.is_empty() {
        (String::new(), "")
    } else {
        (format!("<script src=\"{}\"></script>\n", escape_html(wavedrom_url)), " onload=\"WaveDrom.ProcessAll()\"")
    };
    html_page(&model.name, &head, attr, &body)
}

/// Every page of the documentation tree, keyed by file name. Each module
/// name appears once; later duplicates are dropped.
pub fn render_docs(models: &[DocModel], wavedrom_url: &str) -> BTreeMap<String, String> {
    let mut by_name: BTreeMap<&str, &DocModel> = BTreeMap::new();
    for m in models {
        by_name.entry(&m.name).or_insert(m);
    }
    let mut pages = BTreeMap::new();
    let mut index_md = String::from("# Modules\n\n");
    let mut index_html = String::from("<h1>Modules</h1>\n<ul>\n");
    for (name, m) in &by_name {
        pages.insert(format!("{name}.md"), render_markdown(m));
        pages.insert(format!("{name}.html"), render_html(m, wavedrom_url));
        let _ = writeln!(index_md, "- [{name}]({name}.md)");
        let _ = writeln!(index_html, "<li><a href=\"{0}.html\">{0}</a></li>", escape_html(name));
    }
    index_html.push_str("</ul>\n");
    pages.insert("index.md".into(), index_md);
    pages.insert("index.html".into(), html_page("Modules", "", "", &index_html));
    pages
}
