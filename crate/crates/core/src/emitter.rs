//! Lowering of analyzed modules to SystemVerilog text.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path as FsPath, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::analyzer::{bind_always_ff, Context, FfBinding};
use crate::diag::Code;
use crate::resolver::{ConcreteModule, NamespaceRoot, ScopeId};
use crate::syntax::ast::*;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum ClockType {
    #[default]
    Posedge,
    Negedge,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum ResetType {
    #[default]
    AsyncLow,
    AsyncHigh,
    SyncLow,
    SyncHigh,
}

impl ClockType {
    pub const ALL: [ClockType; 2] = [ClockType::Posedge, ClockType::Negedge];

    pub fn as_str(self) -> &'static str {
        match self {
            ClockType::Posedge => "posedge",
            ClockType::Negedge => "negedge",
        }
    }
}

impl ResetType {
    pub const ALL: [ResetType; 4] = [ResetType::AsyncLow, ResetType::AsyncHigh, ResetType::SyncLow, ResetType::SyncHigh];

    pub fn as_str(self) -> &'static str {
        match self {
            ResetType::AsyncLow => "async_low",
            ResetType::AsyncHigh => "async_high",
            ResetType::SyncLow => "sync_low",
            ResetType::SyncHigh => "sync_high",
        }
    }

    pub fn is_async(self) -> bool {
        matches!(self, ResetType::AsyncLow | ResetType::AsyncHigh)
    }

    pub fn is_high(self) -> bool {
        matches!(self, ResetType::AsyncHigh | ResetType::SyncHigh)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid value `{0}`")]
pub struct InvalidEnumValue(pub String);

impl FromStr for ClockType {
    type Err = InvalidEnumValue;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClockType::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| InvalidEnumValue(s.to_string()))
    }
}

impl FromStr for ResetType {
    type Err = InvalidEnumValue;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ResetType::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| InvalidEnumValue(s.to_string()))
    }
}

impl fmt::Display for ClockType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for ResetType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Clock edge and reset style applied to the generic `clock`/`reset`
/// types. Explicit variants such as `clock_negedge` ignore it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct EmitConfig {
    pub clock_type: ClockType,
    pub reset_type: ResetType,
}

impl EmitConfig {
    pub fn edge_of(&self, kind: TypeKind) -> ClockType {
        match kind {
            TypeKind::ClockNegedge => ClockType::Negedge,
            TypeKind::ClockPosedge => ClockType::Posedge,
            _ => self.clock_type,
        }
    }

    pub fn reset_of(&self, kind: TypeKind) -> ResetType {
        match kind {
            TypeKind::ResetAsyncHigh => ResetType::AsyncHigh,
            TypeKind::ResetAsyncLow => ResetType::AsyncLow,
            TypeKind::ResetSyncHigh => ResetType::SyncHigh,
            TypeKind::ResetSyncLow => ResetType::SyncLow,
            _ => self.reset_type,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmitUnit {
    pub module_name: String,
    pub text: String,
    /// Source name → emitted name for the module and its generic
    /// parameters.
    pub name_map: BTreeMap<String, String>,
}

const INDENT: &str = "  ";

/// `N-1:0` for a packed or unpacked bound, folded when `N` is a literal.
fn upper_bound(e: &Expr, emit: &dyn Fn(&Expr) -> String) -> String {
    match &e.kind {
        ExprKind::Decimal { value: Some(v), .. } if *v > 0 => (v - 1).to_string(),
        ExprKind::Binary { op, .. } if op.precedence() < BinaryOp::Sub.precedence() => format!("({})-1", emit(e)),
        _ => format!("{}-1", emit(e)),
    }
}

/// SystemVerilog type text, without unpacked dimensions.
pub fn lower_type(ty: &TypeSpec) -> String {
    lower_type_with(ty, &|e| crate::syntax::format::format_expr(e))
}

/// Unpacked dimensions, placed after the declared name.
pub fn lower_unpacked(ty: &TypeSpec) -> String {
    lower_unpacked_with(ty, &|e| crate::syntax::format::format_expr(e))
}

fn lower_type_with(ty: &TypeSpec, emit: &dyn Fn(&Expr) -> String) -> String {
    let mut s = match ty.kind {
        TypeKind::U32 => return "int unsigned".into(),
        TypeKind::U64 => return "longint unsigned".into(),
        TypeKind::Bit => "bit".to_string(),
        _ => "logic".to_string(),
    };
    if !ty.packed.is_empty() {
        s.push(' ');
        for d in &ty.packed {
            let _ = write!(s, "[{}:0]", upper_bound(d, emit));
        }
    }
    s
}

fn lower_unpacked_with(ty: &TypeSpec, emit: &dyn Fn(&Expr) -> String) -> String {
    let mut s = String::new();
    for d in &ty.unpacked {
        let _ = write!(s, " [0:{}]", upper_bound(d, emit));
    }
    s
}

struct Emitter<'a> {
    ctx: &'a Context<'a>,
    cm: Option<&'a ConcreteModule>,
    scope: ScopeId,
    cfg: EmitConfig,
    out: String,
    depth: usize,
}

impl<'a> Emitter<'a> {
    fn line(&mut self, text: &str) {
        if text.is_empty() {
            self.out.push('\n');
            return;
        }
        for _ in 0..self.depth {
            self.out.push_str(INDENT);
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn comments(&mut self, trivia: &Trivia) {
        for c in &trivia.leading {
            let text = c.text.clone();
            for l in text.lines() {
                self.line(l.trim_end());
            }
        }
        if let Some(doc) = &trivia.doc {
            for l in doc.text.lines() {
                let body = l.trim_end();
                self.line(&if body.is_empty() { "//".to_string() } else { format!("//{body}") });
            }
        }
    }

    fn end_comments(&mut self, comments: &[Comment]) {
        for c in comments {
            for l in c.text.lines() {
                self.line(l.trim_end());
            }
        }
    }

    fn path(&self, p: &Path) -> String {
        let dependency = matches!(self.ctx.res.get(p).map(|r| &r.root), Some(NamespaceRoot::Dependency(name)) if *name == p.first().name);
        let segs = if dependency && p.segments.len() > 1 { &p.segments[1..] } else { &p.segments[..] };
        segs.iter().map(|s| s.name.as_str()).collect::<Vec<_>>().join("::")
    }

    fn expr(&self, e: &Expr) -> String {
        match &e.kind {
            ExprKind::Path(p) => self.path(p),
            ExprKind::Sized { text, .. } | ExprKind::Decimal { text, .. } => text.clone(),
            ExprKind::Unary { op, operand } => format!("{}{}", op.as_str(), self.expr(operand)),
            ExprKind::Binary { op, lhs, rhs } => format!("{} {} {}", self.expr(lhs), op.as_str(), self.expr(rhs)),
            ExprKind::Index { base, index } => format!("{}[{}]", self.expr(base), self.expr(index)),
            ExprKind::Range { base, hi, lo } => format!("{}[{}:{}]", self.expr(base), self.expr(hi), self.expr(lo)),
            ExprKind::Call { path, args } => {
                format!("{}({})", self.path(path), args.iter().map(|a| self.expr(a)).collect::<Vec<_>>().join(", "))
            }
            ExprKind::Paren(inner) => format!("({})", self.expr(inner)),
        }
    }

    fn cond(&self, e: &Expr) -> String {
        match &e.kind {
            ExprKind::Paren(inner) => self.expr(inner),
            _ => self.expr(e),
        }
    }

    fn ty(&self, ty: &TypeSpec) -> String {
        lower_type_with(ty, &|e| self.expr(e))
    }

    fn unpacked(&self, ty: &TypeSpec) -> String {
        lower_unpacked_with(ty, &|e| self.expr(e))
    }

    fn module(&mut self, m: &ModuleDecl, name: &str) {
        self.comments(&m.trivia);
        let has_params = !m.params.is_empty();
        let has_ports = !m.ports.is_empty();
        let mut head = format!("module {name}");
        if !has_params && !has_ports {
            head.push(';');
            self.line(&head);
        } else {
            if has_params {
                head.push_str(" #(");
                self.line(&head);
                self.depth += 1;
                for (i, p) in m.params.iter().enumerate() {
                    self.comments(&p.trivia);
                    let sep = if i + 1 < m.params.len() { "," } else { "" };
                    let text = format!("parameter {} {} = {}{sep}", self.ty(&p.ty), p.name.name, self.expr(&p.default));
                    self.line(&text);
                }
                self.depth -= 1;
                head = if has_ports { ") (".into() } else { ");".into() };
                self.line(&head);
            } else {
                head.push_str(" (");
                self.line(&head);
            }
            if has_ports {
                self.depth += 1;
                for (i, p) in m.ports.iter().enumerate() {
                    self.comments(&p.trivia);
                    let sep = if i + 1 < m.ports.len() { "," } else { "" };
                    let text = format!("{} {} {}{}{sep}", p.direction.as_str(), self.ty(&p.ty), p.name.name, self.unpacked(&p.ty));
                    self.line(&text);
                }
                self.depth -= 1;
                self.line(");");
            }
        }
        self.depth += 1;
        self.items(&m.body);
        if !m.body.is_empty() && !m.end_comments.is_empty() {
            self.line("");
        }
        self.end_comments(&m.end_comments);
        self.depth -= 1;
        self.line("endmodule");
    }

    fn items(&mut self, items: &[ModuleItem]) {
        let flat = flatten_items(items);
        let mut prev_simple: Option<bool> = None;
        for (item, _) in flat {
            let simple = matches!(item.kind, ModuleItemKind::Var(_) | ModuleItemKind::Const(_) | ModuleItemKind::Assign(_));
            if let Some(p) = prev_simple {
                if !(p && simple) {
                    self.line("");
                }
            }
            prev_simple = Some(simple);
            self.comments(&item.trivia);
            self.item(item);
        }
    }

    fn item(&mut self, item: &ModuleItem) {
        match &item.kind {
            ModuleItemKind::Var(v) => {
                let text = format!("{} {}{};", self.ty(&v.ty), v.name.name, self.unpacked(&v.ty));
                self.line(&text);
            }
            ModuleItemKind::Const(c) => {
                let text = format!("localparam {} {}{} = {};", self.ty(&c.ty), c.name.name, self.unpacked(&c.ty), self.expr(&c.value));
                self.line(&text);
            }
            ModuleItemKind::Inst(i) => self.inst(i),
            ModuleItemKind::Assign(a) => {
                let text = format!("assign {} = {};", self.expr(&a.lhs), self.expr(&a.rhs));
                self.line(&text);
            }
            ModuleItemKind::AlwaysFf(ff) => self.always_ff(ff),
            ModuleItemKind::AlwaysComb(c) => {
                self.line("always_comb begin");
                self.block_body(&c.body, Ctx::Comb);
                self.line("end");
            }
            ModuleItemKind::Function(f) => self.function(f),
            ModuleItemKind::UnsafeCdc(u) => self.items(&u.items),
        }
    }

    fn function(&mut self, f: &FunctionDecl) {
        self.comments(&f.trivia);
        let args: Vec<String> =
            f.args.iter().map(|a| format!("input {} {}{}", self.ty(&a.ty), a.name.name, self.unpacked(&a.ty))).collect();
        let head = format!("function automatic {} {}({});", self.ty(&f.ret), f.name.name, args.join(", "));
        self.line(&head);
        self.block_body(&f.body, Ctx::Function);
        self.line("endfunction");
    }

    fn connections(&mut self, conns: &[Connection]) {
        let width = conns.iter().map(|c| c.name.name.len()).max().unwrap_or(0);
        self.depth += 1;
        for (i, c) in conns.iter().enumerate() {
            self.comments(&c.trivia);
            let sep = if i + 1 < conns.len() { "," } else { "" };
            let text = format!(".{:width$} ({}){sep}", c.name.name, self.expr(&c.expr));
            self.line(&text);
        }
        self.depth -= 1;
    }

    fn inst(&mut self, i: &InstDecl) {
        let target = self
            .cm
            .and_then(|cm| cm.target_of(i))
            .map(|t| self.ctx.modules[t].name.clone())
            .unwrap_or_else(|| self.path(&i.target));
        if i.params.is_empty() && i.ports.is_empty() {
            let text = format!("{target} {} ();", i.name.name);
            self.line(&text);
            return;
        }
        if i.params.is_empty() {
            let text = format!("{target} {} (", i.name.name);
            self.line(&text);
        } else {
            let text = format!("{target} #(");
            self.line(&text);
            self.connections(&i.params);
            let text = format!(") {} (", i.name.name);
            self.line(&text);
        }
        self.connections(&i.ports);
        self.line(");");
    }

    fn binding(&self, ff: &AlwaysFf) -> FfBinding {
        bind_always_ff(ff, self.scope, self.ctx.table, self.ctx.res).0
    }

    fn always_ff(&mut self, ff: &AlwaysFf) {
        let binding = self.binding(ff);
        let table = self.ctx.table;
        let kind_of = |id| table.symbol(id).ty.as_ref().map(|t: &TypeSpec| t.kind).unwrap_or(TypeKind::Logic);
        let clock = binding.clock.map(|c| (table.symbol(c).name.clone(), self.cfg.edge_of(kind_of(c))));
        let reset = binding.reset.map(|r| (table.symbol(r).name.clone(), self.cfg.reset_of(kind_of(r))));
        let mut sens = match &clock {
            Some((name, edge)) => format!("{edge} {name}"),
            None => ff.clock.as_ref().map(|c| format!("{} {}", self.cfg.clock_type, c.name)).unwrap_or_default(),
        };
        if let Some((name, rt)) = &reset {
            if rt.is_async() {
                let edge = if rt.is_high() { "posedge" } else { "negedge" };
                let _ = write!(sens, " or {edge} {name}");
            }
        }
        let head = format!("always_ff @ ({sens}) begin");
        self.line(&head);
        let cond = reset.map(|(name, rt)| if rt.is_high() { name } else { format!("!{name}") });
        self.block_body(&ff.body, Ctx::Ff(cond));
        self.line("end");
    }

    fn block_body(&mut self, b: &Block, ctx: Ctx) {
        self.depth += 1;
        for s in &b.stmts {
            self.stmt(s, &ctx);
        }
        self.end_comments(&b.end_comments);
        self.depth -= 1;
    }

    fn stmt(&mut self, s: &Stmt, ctx: &Ctx) {
        self.comments(&s.trivia);
        match &s.kind {
            StmtKind::Assign { lhs, op, rhs } => {
                let arrow = if matches!(ctx, Ctx::Ff(_)) { "<=" } else { "=" };
                let lhs = self.expr(lhs);
                let rhs = self.expr(rhs);
                let text = match op.binary() {
                    Some(bin) => format!("{lhs} {arrow} {lhs} {} ({rhs});", bin.as_str()),
                    None => format!("{lhs} {arrow} {rhs};"),
                };
                self.line(&text);
            }
            StmtKind::If { cond, then, otherwise } => {
                let head = format!("if ({}) begin", self.cond(cond));
                self.if_chain(head, then, otherwise, ctx);
            }
            StmtKind::IfReset { then, otherwise, .. } => {
                let cond = match ctx {
                    Ctx::Ff(Some(c)) => c.clone(),
                    _ => "1'b0".into(),
                };
                self.if_chain(format!("if ({cond}) begin"), then, otherwise, ctx);
            }
            StmtKind::Return(e) => {
                let text = format!("return {};", self.expr(e));
                self.line(&text);
            }
            StmtKind::Block(b) => {
                self.line("begin");
                self.block_body(b, ctx.clone());
                self.line("end");
            }
            StmtKind::UnsafeCdc(b) => {
                for s in &b.stmts {
                    self.stmt(s, ctx);
                }
            }
        }
    }

    fn if_chain(&mut self, head: String, then: &Block, otherwise: &Option<ElseBranch>, ctx: &Ctx) {
        self.line(&head);
        self.block_body(then, ctx.clone());
        let mut next = otherwise;
        loop {
            match next {
                None => {
                    self.line("end");
                    return;
                }
                Some(ElseBranch::Block(b)) => {
                    self.line("end else begin");
                    self.block_body(b, ctx.clone());
                    self.line("end");
                    return;
                }
                Some(ElseBranch::If(s)) => {
                    let (head, then, rest) = match &s.kind {
                        StmtKind::If { cond, then, otherwise } => (format!("end else if ({}) begin", self.cond(cond)), then, otherwise),
                        StmtKind::IfReset { then, otherwise, .. } => {
                            let cond = match ctx {
                                Ctx::Ff(Some(c)) => c.clone(),
                                _ => "1'b0".into(),
                            };
                            (format!("end else if ({cond}) begin"), then, otherwise)
                        }
                        _ => unreachable!("else branch is always an if"),
                    };
                    self.comments(&s.trivia);
                    self.line(&head);
                    self.block_body(then, ctx.clone());
                    next = rest;
                }
            }
        }
    }

    fn package(&mut self, p: &PackageDecl) {
        self.comments(&p.trivia);
        let head = format!("package {};", p.name.name);
        self.line(&head);
        self.depth += 1;
        for (i, item) in p.items.iter().enumerate() {
            match item {
                PackageItem::Const(c) => {
                    if i > 0 && !matches!(p.items[i - 1], PackageItem::Const(_)) {
                        self.line("");
                    }
                    self.comments(&c.trivia);
                    let text = format!("localparam {} {}{} = {};", self.ty(&c.ty), c.name.name, self.unpacked(&c.ty), self.expr(&c.value));
                    self.line(&text);
                }
                PackageItem::Function(f) => {
                    if i > 0 {
                        self.line("");
                    }
                    self.function(f);
                }
            }
        }
        self.depth -= 1;
        self.line("endpackage");
    }
}

#[derive(Debug, Clone)]
enum Ctx {
    /// Reset condition text when a reset is bound.
    Ff(Option<String>),
    Comb,
    Function,
}

/// Lowers one concrete module.
pub fn emit_module(ctx: &Context, module: &ConcreteModule, cfg: &EmitConfig) -> EmitUnit {
    let decl = module.decl(ctx.design);
    let mut e = Emitter { ctx, cm: Some(module), scope: module.scope, cfg: *cfg, out: String::new(), depth: 0 };
    e.module(decl, &module.name);
    let mut name_map = BTreeMap::new();
    name_map.insert(decl.name.name.clone(), module.name.clone());
    for (param, target) in &module.subst {
        name_map.insert(param.clone(), ctx.modules[*target].name.clone());
    }
    EmitUnit { module_name: module.name.clone(), text: e.out, name_map }
}

/// Lowers one package.
pub fn emit_package(ctx: &Context, p: &PackageDecl, scope: ScopeId) -> String {
    let mut e = Emitter { ctx, cm: None, scope, cfg: EmitConfig::default(), out: String::new(), depth: 0 };
    e.package(p);
    e.out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NameMapEntry {
    pub template: String,
    pub args: Vec<String>,
}

/// Where and how one namespace is emitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitOutput {
    pub cfg: EmitConfig,
    /// Directory for this namespace's files, relative to the output root.
    pub prefix: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProjectOutput {
    /// Relative path → text, in path order.
    pub files: BTreeMap<PathBuf, String>,
    pub name_map: BTreeMap<String, NameMapEntry>,
}

impl ProjectOutput {
    pub fn name_map_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.name_map).expect("name map serializes");
        s.push('\n');
        s
    }
}

/// Renders every namespace of the design: one `.sv` per `.vl`, items in
/// source order, template instances at the template's position.
pub fn render_project(ctx: &Context, units: &[UnitOutput]) -> ProjectOutput {
    let mut out = ProjectOutput::default();
    for (ns_idx, ns) in ctx.design.iter().enumerate() {
        let unit = &units[ns_idx];
        for (file_idx, file) in ns.files.iter().enumerate() {
            let mut chunks: Vec<String> = Vec::new();
            for (item_idx, item) in file.ast.items.iter().enumerate() {
                let item_ref = crate::resolver::ItemRef { ns: ns_idx, file: file_idx, item: item_idx };
                match item {
                    Item::Module(_) => {
                        let mut mods: Vec<&ConcreteModule> = ctx.modules.iter().filter(|m| m.source == item_ref).collect();
                        mods.sort_by(|a, b| a.name.cmp(&b.name));
                        for m in mods {
                            chunks.push(emit_module(ctx, m, &unit.cfg).text);
                            if let Some(inst) = &m.instance {
                                out.name_map.insert(
                                    m.name.clone(),
                                    NameMapEntry { template: inst.template.clone(), args: inst.args.clone() },
                                );
                            }
                        }
                    }
                    Item::Package(p) => {
                        let sym = ctx.table.lookup_local(ctx.table.root(ns_idx), &p.name.name);
                        if sym.is_some_and(|s| ctx.table.symbol(s).item == Some(item_ref)) {
                            chunks.push(emit_package(ctx, p, ctx.table.item_scope(item_ref)));
                        }
                    }
                }
            }
            let rel = unit.prefix.join(FsPath::new(&file.path).with_extension("sv"));
            out.files.insert(rel, chunks.join("\n"));
        }
    }
    out
}

#[derive(Debug, Error)]
#[error("cannot write `{path}`: {source}")]
pub struct EmitError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

impl EmitError {
    pub fn code(&self) -> Code {
        Code::EIO01
    }
}

/// Writes a rendered project under `out_dir`, plus `name_map.json`.
/// Returns the written paths.
pub fn write_project(output: &ProjectOutput, out_dir: &FsPath) -> Result<Vec<PathBuf>, EmitError> {
    let mut written = Vec::new();
    let write = |path: PathBuf, text: &str, written: &mut Vec<PathBuf>| -> Result<(), EmitError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|source| EmitError { path: parent.to_path_buf(), source })?;
        }
        std::fs::write(&path, text).map_err(|source| EmitError { path: path.clone(), source })?;
        written.push(path);
        Ok(())
    };
    for (rel, text) in &output.files {
        write(out_dir.join(rel), text, &mut written)?;
    }
    write(out_dir.join("name_map.json"), &output.name_map_json(), &mut written)?;
    Ok(written)
}

/// Renders and writes in one step.
pub fn emit_project(ctx: &Context, units: &[UnitOutput], out_dir: &FsPath) -> Result<Vec<PathBuf>, EmitError> {
    write_project(&render_project(ctx, units), out_dir)
}
