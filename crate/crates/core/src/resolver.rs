//! Symbol tables, path resolution, and monomorphization of generic modules.
//!
//! A design is a list of namespaces: the local project plus one per
//! dependency, each named by its project name. Items in one namespace see
//! each other without imports; a dependency is reached through a path whose
//! first segment is the dependency's name.

use std::collections::{BTreeMap, HashMap};

use crate::diag::{Code, Diagnostic};
use crate::source::{FileId, Span};
use crate::syntax::ast::*;

#[derive(Debug, Clone)]
pub struct ParsedFile {
    pub id: FileId,
    /// Path used for ordering, relative to the namespace root.
    pub path: String,
    pub ast: SourceFile,
}

#[derive(Debug, Clone)]
pub struct Namespace {
    pub name: String,
    /// Names of the namespaces this one may reference.
    pub deps: Vec<String>,
    pub files: Vec<ParsedFile>,
}

/// Location of a top-level item: (namespace, file, item) indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ItemRef {
    pub ns: usize,
    pub file: usize,
    pub item: usize,
}

impl ItemRef {
    pub fn item<'a>(&self, design: &'a [Namespace]) -> &'a Item {
        &design[self.ns].files[self.file].ast.items[self.item]
    }

    pub fn module<'a>(&self, design: &'a [Namespace]) -> &'a ModuleDecl {
        match self.item(design) {
            Item::Module(m) => m,
            Item::Package(_) => panic!("item is not a module"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScopeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymbolId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScopeKind {
    Project,
    Module,
    Package,
    Function,
}

#[derive(Debug, Clone)]
pub struct Scope {
    pub parent: Option<ScopeId>,
    pub kind: ScopeKind,
    pub ns: usize,
    pub entries: BTreeMap<String, SymbolId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymbolKind {
    Module,
    Package,
    Param,
    Const,
    Port,
    Var,
    Inst,
    Function,
    GenericParam,
}

impl SymbolKind {
    pub fn describe(self) -> &'static str {
        match self {
            SymbolKind::Module => "module",
            SymbolKind::Package => "package",
            SymbolKind::Param => "parameter",
            SymbolKind::Const => "constant",
            SymbolKind::Port => "port",
            SymbolKind::Var => "variable",
            SymbolKind::Inst => "instance",
            SymbolKind::Function => "function",
            SymbolKind::GenericParam => "generic parameter",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Symbol {
    pub name: String,
    pub kind: SymbolKind,
    pub span: Span,
    pub scope: ScopeId,
    pub ns: usize,
    pub is_pub: bool,
    pub ty: Option<TypeSpec>,
    pub direction: Option<Direction>,
    pub domain: Option<String>,
    /// Scope opened by this symbol (module, package, function).
    pub inner: Option<ScopeId>,
    /// Top-level item declaring a module or package.
    pub item: Option<ItemRef>,
    /// Argument count for functions.
    pub arity: Option<usize>,
    /// Default of a param, value of a const.
    pub value: Option<Expr>,
    /// Generic parameter count for modules.
    pub generic_arity: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NamespaceRoot {
    Local,
    Dependency(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedPath {
    pub segments: Vec<String>,
    pub target: SymbolId,
    pub root: NamespaceRoot,
}

/// What a path is used for; fixes which symbol kinds are acceptable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Use {
    Value,
    Call,
    Inst,
    GenericArg,
    Signal,
}

impl Use {
    fn accepts(self, kind: SymbolKind) -> bool {
        use SymbolKind::*;
        match self {
            Use::Value => matches!(kind, Param | Const | Port | Var),
            Use::Call => kind == Function,
            Use::Inst | Use::GenericArg => matches!(kind, Module | GenericParam),
            Use::Signal => matches!(kind, Port | Var),
        }
    }

    fn expected(self) -> &'static str {
        match self {
            Use::Value => "a value",
            Use::Call => "a function",
            Use::Inst | Use::GenericArg => "a module",
            Use::Signal => "a signal",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    scopes: Vec<Scope>,
    symbols: Vec<Symbol>,
    roots: Vec<ScopeId>,
    ns_names: Vec<String>,
    ns_deps: Vec<Vec<String>>,
    item_scopes: HashMap<ItemRef, ScopeId>,
    function_scopes: HashMap<(FileId, u32), ScopeId>,
}

impl SymbolTable {
    pub fn symbol(&self, id: SymbolId) -> &Symbol {
        &self.symbols[id.0 as usize]
    }

    pub fn scope(&self, id: ScopeId) -> &Scope {
        &self.scopes[id.0 as usize]
    }

    pub fn root(&self, ns: usize) -> ScopeId {
        self.roots[ns]
    }

    pub fn namespace_name(&self, ns: usize) -> &str {
        &self.ns_names[ns]
    }

    /// Scope of a top-level module or package.
    pub fn item_scope(&self, item: ItemRef) -> ScopeId {
        self.item_scopes[&item]
    }

    /// Scope of the function whose name is at `name_span`.
    pub fn function_scope(&self, name_span: Span) -> Option<ScopeId> {
        self.function_scopes.get(&(name_span.file, name_span.start)).copied()
    }

    pub fn lookup_local(&self, scope: ScopeId, name: &str) -> Option<SymbolId> {
        self.scope(scope).entries.get(name).copied()
    }

    /// Innermost-first lookup of a single name.
    pub fn lookup(&self, mut scope: ScopeId, name: &str) -> Option<SymbolId> {
        loop {
            if let Some(id) = self.lookup_local(scope, name) {
                return Some(id);
            }
            scope = self.scope(scope).parent?;
        }
    }

    /// Every symbol declared directly in `scope`, in name order.
    pub fn entries(&self, scope: ScopeId) -> impl Iterator<Item = (&str, SymbolId)> {
        self.scope(scope).entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    fn new_scope(&mut self, parent: Option<ScopeId>, kind: ScopeKind, ns: usize) -> ScopeId {
        let id = ScopeId(self.scopes.len() as u32);
        self.scopes.push(Scope { parent, kind, ns, entries: BTreeMap::new() });
        id
    }

    fn declare(&mut self, scope: ScopeId, mut sym: Symbol, diags: &mut Vec<Diagnostic>) -> Option<SymbolId> {
        if let Some(prev) = self.lookup_local(scope, &sym.name) {
            let prev = self.symbol(prev);
            diags.push(
                Diagnostic::new(Code::E0201, sym.span, format!("`{}` is defined multiple times", sym.name))
                    .with_related(prev.span, format!("first definition of `{}`", prev.name)),
            );
            return None;
        }
        sym.scope = scope;
        let id = SymbolId(self.symbols.len() as u32);
        self.scopes[scope.0 as usize].entries.insert(sym.name.clone(), id);
        self.symbols.push(sym);
        Some(id)
    }

    /// Resolves `path` as seen from `scope`.
    pub fn resolve(&self, path: &Path, scope: ScopeId, usage: Use) -> Result<ResolvedPath, Diagnostic> {
        let ns = self.scope(scope).ns;
        let first = path.first();
        let segments: Vec<String> = path.segments.iter().map(|s| s.name.clone()).collect();

        let (mut current, mut root, mut rest) = match self.lookup(scope, &first.name) {
            Some(id) => (id, NamespaceRoot::Local, &path.segments[1..]),
            None => {
                let dep = self.ns_deps[ns].iter().find(|d| **d == first.name);
                let dep_ns = dep.and_then(|d| self.ns_names.iter().position(|n| n == d));
                match (dep_ns, path.segments.get(1)) {
                    (Some(dep_ns), Some(second)) => {
                        let root_scope = self.root(dep_ns);
                        let Some(id) = self.lookup_local(root_scope, &second.name).filter(|id| self.symbol(*id).is_pub)
                        else {
                            return Err(Diagnostic::new(
                                Code::E0202,
                                second.span,
                                format!("`{}` has no public item `{}`", first.name, second.name),
                            ));
                        };
                        (id, NamespaceRoot::Dependency(first.name.clone()), &path.segments[2..])
                    }
                    _ => {
                        return Err(Diagnostic::new(
                            Code::E0202,
                            first.span,
                            format!("cannot find `{}` in this scope", first.name),
                        ));
                    }
                }
            }
        };

        while let Some((seg, tail)) = rest.split_first() {
            let sym = self.symbol(current);
            let inner = match (sym.kind, sym.inner) {
                (SymbolKind::Package, Some(inner)) => inner,
                _ => {
                    return Err(Diagnostic::new(
                        Code::E0203,
                        seg.span,
                        format!("`{}` is a {}, not a package", sym.name, sym.kind.describe()),
                    ));
                }
            };
            current = self.lookup_local(inner, &seg.name).ok_or_else(|| {
                Diagnostic::new(Code::E0202, seg.span, format!("cannot find `{}` in package `{}`", seg.name, sym.name))
            })?;
            rest = tail;
            if root == NamespaceRoot::Local && self.symbol(current).ns != ns {
                root = NamespaceRoot::Dependency(self.ns_names[self.symbol(current).ns].clone());
            }
        }

        let target = self.symbol(current);
        if !usage.accepts(target.kind) {
            let code = if usage == Use::GenericArg { Code::E0205 } else { Code::E0203 };
            return Err(Diagnostic::new(
                code,
                path.span,
                format!("expected {}, found {} `{}`", usage.expected(), target.kind.describe(), path.to_text()),
            ));
        }
        Ok(ResolvedPath { segments, target: current, root })
    }
}

fn symbol(name: &Ident, kind: SymbolKind, ns: usize) -> Symbol {
    Symbol {
        name: name.name.clone(),
        kind,
        span: name.span,
        scope: ScopeId(0),
        ns,
        is_pub: false,
        ty: None,
        direction: None,
        domain: None,
        inner: None,
        item: None,
        arity: None,
        value: None,
        generic_arity: 0,
    }
}

/// Declares every item of every namespace. Files are visited in path order
/// so the surviving declaration of a duplicate does not depend on input
/// order.
pub fn build_symbols(design: &[Namespace]) -> (SymbolTable, Vec<Diagnostic>) {
    let mut table = SymbolTable::default();
    let mut diags = Vec::new();
    for (ns_idx, ns) in design.iter().enumerate() {
        let root = table.new_scope(None, ScopeKind::Project, ns_idx);
        table.roots.push(root);
        table.ns_names.push(ns.name.clone());
        table.ns_deps.push(ns.deps.clone());

        let mut order: Vec<usize> = (0..ns.files.len()).collect();
        order.sort_by(|a, b| ns.files[*a].path.cmp(&ns.files[*b].path));
        for file_idx in order {
            for (item_idx, item) in ns.files[file_idx].ast.items.iter().enumerate() {
                let item_ref = ItemRef { ns: ns_idx, file: file_idx, item: item_idx };
                match item {
                    Item::Module(m) => declare_module(&mut table, root, item_ref, m, &mut diags),
                    Item::Package(p) => declare_package(&mut table, root, item_ref, p, &mut diags),
                }
            }
        }
    }
    (table, diags)
}

fn declare_module(table: &mut SymbolTable, root: ScopeId, item_ref: ItemRef, m: &ModuleDecl, diags: &mut Vec<Diagnostic>) {
    let ns = item_ref.ns;
    let scope = table.new_scope(Some(root), ScopeKind::Module, ns);
    table.item_scopes.insert(item_ref, scope);
    let mut sym = symbol(&m.name, SymbolKind::Module, ns);
    sym.is_pub = m.is_pub;
    sym.inner = Some(scope);
    sym.item = Some(item_ref);
    sym.generic_arity = m.generic_params.len();
    table.declare(root, sym, diags);

    for g in &m.generic_params {
        table.declare(scope, symbol(g, SymbolKind::GenericParam, ns), diags);
    }
    for p in &m.params {
        let mut sym = symbol(&p.name, SymbolKind::Param, ns);
        sym.ty = Some(p.ty.clone());
        sym.value = Some(p.default.clone());
        table.declare(scope, sym, diags);
    }
    for p in &m.ports {
        let mut sym = symbol(&p.name, SymbolKind::Port, ns);
        sym.ty = Some(p.ty.clone());
        sym.direction = Some(p.direction);
        sym.domain = p.domain.as_ref().map(|d| d.name.clone());
        table.declare(scope, sym, diags);
    }
    for (item, _) in flatten_items(&m.body) {
        match &item.kind {
            ModuleItemKind::Var(v) => {
                let mut sym = symbol(&v.name, SymbolKind::Var, ns);
                sym.ty = Some(v.ty.clone());
                sym.domain = v.domain.as_ref().map(|d| d.name.clone());
                table.declare(scope, sym, diags);
            }
            ModuleItemKind::Const(c) => {
                let mut sym = symbol(&c.name, SymbolKind::Const, ns);
                sym.ty = Some(c.ty.clone());
                sym.value = Some(c.value.clone());
                table.declare(scope, sym, diags);
            }
            ModuleItemKind::Inst(i) => {
                table.declare(scope, symbol(&i.name, SymbolKind::Inst, ns), diags);
            }
            ModuleItemKind::Function(f) => declare_function(table, scope, f, ns, diags),
            ModuleItemKind::Assign(_)
            | ModuleItemKind::AlwaysFf(_)
            | ModuleItemKind::AlwaysComb(_)
            | ModuleItemKind::UnsafeCdc(_) => {}
        }
    }
}

fn declare_package(table: &mut SymbolTable, root: ScopeId, item_ref: ItemRef, p: &PackageDecl, diags: &mut Vec<Diagnostic>) {
    let ns = item_ref.ns;
    let scope = table.new_scope(Some(root), ScopeKind::Package, ns);
    table.item_scopes.insert(item_ref, scope);
    let mut sym = symbol(&p.name, SymbolKind::Package, ns);
    sym.is_pub = p.is_pub;
    sym.inner = Some(scope);
    sym.item = Some(item_ref);
    table.declare(root, sym, diags);
    for item in &p.items {
        match item {
            PackageItem::Const(c) => {
                let mut sym = symbol(&c.name, SymbolKind::Const, ns);
                sym.ty = Some(c.ty.clone());
                sym.value = Some(c.value.clone());
                table.declare(scope, sym, diags);
            }
            PackageItem::Function(f) => declare_function(table, scope, f, ns, diags),
        }
    }
}

fn declare_function(table: &mut SymbolTable, parent: ScopeId, f: &FunctionDecl, ns: usize, diags: &mut Vec<Diagnostic>) {
    let scope = table.new_scope(Some(parent), ScopeKind::Function, ns);
    table.function_scopes.insert((f.name.span.file, f.name.span.start), scope);
    let mut sym = symbol(&f.name, SymbolKind::Function, ns);
    sym.ty = Some(f.ret.clone());
    sym.inner = Some(scope);
    sym.arity = Some(f.args.len());
    table.declare(parent, sym, diags);
    for a in &f.args {
        let mut sym = symbol(&a.name, SymbolKind::Var, ns);
        sym.ty = Some(a.ty.clone());
        table.declare(scope, sym, diags);
    }
}

/// Resolved target of every path in the design, keyed by the path's
/// position.
#[derive(Debug, Clone, Default)]
pub struct Resolution {
    paths: HashMap<(FileId, u32), ResolvedPath>,
}

impl Resolution {
    pub fn get(&self, path: &Path) -> Option<&ResolvedPath> {
        self.paths.get(&(path.span.file, path.span.start))
    }

    pub fn target(&self, path: &Path) -> Option<SymbolId> {
        self.get(path).map(|r| r.target)
    }

    /// Target of a single identifier (sensitivity lists).
    pub fn ident_target(&self, ident: &Ident) -> Option<SymbolId> {
        self.paths.get(&(ident.span.file, ident.span.start)).map(|r| r.target)
    }
}

struct Resolver<'a> {
    table: &'a SymbolTable,
    out: Resolution,
    diags: Vec<Diagnostic>,
}

impl Resolver<'_> {
    fn path(&mut self, path: &Path, scope: ScopeId, usage: Use) -> Option<SymbolId> {
        match self.table.resolve(path, scope, usage) {
            Ok(r) => {
                let target = r.target;
                self.out.paths.insert((path.span.file, path.span.start), r);
                Some(target)
            }
            Err(d) => {
                self.diags.push(d);
                None
            }
        }
    }

    fn expr(&mut self, e: &Expr, scope: ScopeId) {
        e.walk(&mut |sub| match &sub.kind {
            ExprKind::Path(p) => {
                self.path(p, scope, Use::Value);
            }
            ExprKind::Call { path, .. } => {
                self.path(path, scope, Use::Call);
            }
            _ => {}
        });
    }

    fn ty(&mut self, ty: &TypeSpec, scope: ScopeId) {
        for d in ty.packed.iter().chain(&ty.unpacked) {
            self.expr(d, scope);
        }
    }

    fn block(&mut self, b: &Block, scope: ScopeId) {
        b.walk(&mut |s| match &s.kind {
            StmtKind::Assign { lhs, rhs, .. } => {
                self.expr(lhs, scope);
                self.expr(rhs, scope);
            }
            StmtKind::If { cond, .. } => self.expr(cond, scope),
            StmtKind::Return(e) => self.expr(e, scope),
            StmtKind::IfReset { .. } | StmtKind::Block(_) | StmtKind::UnsafeCdc(_) => {}
        });
    }

    fn function(&mut self, f: &FunctionDecl) {
        let Some(scope) = self.table.function_scope(f.name.span) else {
            return;
        };
        for a in &f.args {
            self.ty(&a.ty, scope);
        }
        self.ty(&f.ret, scope);
        self.block(&f.body, scope);
    }

    fn module(&mut self, m: &ModuleDecl, scope: ScopeId) {
        for p in &m.params {
            self.ty(&p.ty, scope);
            self.expr(&p.default, scope);
        }
        for p in &m.ports {
            self.ty(&p.ty, scope);
        }
        for (item, _) in flatten_items(&m.body) {
            match &item.kind {
                ModuleItemKind::Var(v) => self.ty(&v.ty, scope),
                ModuleItemKind::Const(c) => {
                    self.ty(&c.ty, scope);
                    self.expr(&c.value, scope);
                }
                ModuleItemKind::Inst(i) => self.inst(i, scope),
                ModuleItemKind::Assign(a) => {
                    self.expr(&a.lhs, scope);
                    self.expr(&a.rhs, scope);
                }
                ModuleItemKind::AlwaysFf(ff) => {
                    for id in ff.clock.iter().chain(&ff.reset) {
                        self.path(&Path::single(id.clone()), scope, Use::Signal);
                    }
                    self.block(&ff.body, scope);
                }
                ModuleItemKind::AlwaysComb(c) => self.block(&c.body, scope),
                ModuleItemKind::Function(f) => self.function(f),
                ModuleItemKind::UnsafeCdc(_) => {}
            }
        }
    }

    fn inst(&mut self, i: &InstDecl, scope: ScopeId) {
        let target = self.path(&i.target, scope, Use::Inst);
        for arg in &i.generic_args {
            self.path(arg, scope, Use::GenericArg);
        }
        if let Some(target) = target {
            let sym = self.table.symbol(target);
            let expected = if sym.kind == SymbolKind::Module { sym.generic_arity } else { 0 };
            if expected != i.generic_args.len() {
                let span = i.generic_args.last().map(|a| i.target.span.to(a.span)).unwrap_or(i.target.span);
                self.diags.push(Diagnostic::new(
                    Code::E0204,
                    span,
                    format!(
                        "`{}` expects {} generic argument(s), found {}",
                        i.target.to_text(),
                        expected,
                        i.generic_args.len()
                    ),
                ));
            }
        }
        for c in i.params.iter().chain(&i.ports) {
            self.expr(&c.expr, scope);
        }
    }
}

/// Resolves every path in the design, reporting E0202/E0203/E0204/E0205.
pub fn resolve_design(design: &[Namespace], table: &SymbolTable) -> (Resolution, Vec<Diagnostic>) {
    let mut r = Resolver { table, out: Resolution::default(), diags: Vec::new() };
    for (ns_idx, ns) in design.iter().enumerate() {
        for (file_idx, file) in ns.files.iter().enumerate() {
            for (item_idx, item) in file.ast.items.iter().enumerate() {
                let scope = table.item_scope(ItemRef { ns: ns_idx, file: file_idx, item: item_idx });
                match item {
                    Item::Module(m) => r.module(m, scope),
                    Item::Package(p) => {
                        for pi in &p.items {
                            match pi {
                                PackageItem::Const(c) => {
                                    r.ty(&c.ty, scope);
                                    r.expr(&c.value, scope);
                                }
                                PackageItem::Function(f) => r.function(f),
                            }
                        }
                    }
                }
            }
        }
    }
    (r.out, r.diags)
}

/// A module ready for checking and emission: either a plain module or one
/// instance of a generic template.
#[derive(Debug, Clone)]
pub struct ConcreteModule {
    pub source: ItemRef,
    pub symbol: SymbolId,
    /// SystemVerilog module name.
    pub name: String,
    pub scope: ScopeId,
    /// Generic parameter name → concrete module index.
    pub subst: BTreeMap<String, usize>,
    /// Instance name span start → concrete module index of its target.
    pub inst_targets: HashMap<u32, usize>,
    pub instance: Option<GenericInstance>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenericInstance {
    pub template: String,
    pub args: Vec<String>,
}

impl ConcreteModule {
    pub fn decl<'a>(&self, design: &'a [Namespace]) -> &'a ModuleDecl {
        self.source.module(design)
    }

    pub fn target_of(&self, inst: &InstDecl) -> Option<usize> {
        self.inst_targets.get(&inst.name.span.start).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct InstanceKey {
    template: SymbolId,
    args: Vec<SymbolId>,
}

/// Name of module `arg` as used in a mangled name for a template living in
/// namespace `template_ns`: bare when local, `ns::Name` otherwise, with
/// `::` replaced by `_`.
fn mangle_arg(table: &SymbolTable, template_ns: usize, arg: SymbolId) -> String {
    let sym = table.symbol(arg);
    if sym.ns == template_ns {
        sym.name.clone()
    } else {
        format!("{}_{}", table.namespace_name(sym.ns), sym.name)
    }
}

pub fn mangle(template: &str, args: &[String]) -> String {
    let mut name = template.to_string();
    for a in args {
        name.push_str("__");
        name.push_str(&a.replace("::", "_"));
    }
    name
}

/// Expands every generic instantiation reachable from a non-generic module
/// into its own concrete module. Identical (template, args) pairs share
/// one instance; templates themselves produce nothing.
pub fn monomorphize(design: &[Namespace], table: &SymbolTable, res: &Resolution) -> (Vec<ConcreteModule>, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let mut modules: Vec<ConcreteModule> = Vec::new();
    let mut index: BTreeMap<InstanceKey, usize> = BTreeMap::new();

    // Roots: every surviving non-generic module, in namespace/path order.
    let mut roots: Vec<SymbolId> = Vec::new();
    for (ns, _) in design.iter().enumerate() {
        let mut mods: Vec<SymbolId> = table
            .entries(table.root(ns))
            .map(|(_, id)| id)
            .filter(|id| {
                let s = table.symbol(*id);
                s.kind == SymbolKind::Module && s.generic_arity == 0
            })
            .collect();
        mods.sort_by_key(|id| {
            let item = table.symbol(*id).item.unwrap();
            (design[ns].files[item.file].path.clone(), item.item)
        });
        roots.extend(mods);
    }
    for id in roots {
        let sym = table.symbol(id);
        let source = sym.item.unwrap();
        index.insert(InstanceKey { template: id, args: vec![] }, modules.len());
        modules.push(ConcreteModule {
            source,
            symbol: id,
            name: sym.name.clone(),
            scope: table.item_scope(source),
            subst: BTreeMap::new(),
            inst_targets: HashMap::new(),
            instance: None,
        });
    }

    let mut edges: Vec<Vec<(usize, Span)>> = Vec::new();
    let mut next = 0;
    while next < modules.len() {
        let current = next;
        next += 1;
        edges.push(Vec::new());
        let decl = modules[current].decl(design);
        let subst = modules[current].subst.clone();
        for (item, _) in flatten_items(&decl.body) {
            let ModuleItemKind::Inst(inst) = &item.kind else {
                continue;
            };
            let Some(target) = res.target(&inst.target) else {
                continue;
            };
            let tsym = table.symbol(target);
            let resolved = match tsym.kind {
                SymbolKind::GenericParam => subst.get(&tsym.name).copied(),
                SymbolKind::Module if tsym.generic_arity == 0 => {
                    index.get(&InstanceKey { template: target, args: vec![] }).copied()
                }
                SymbolKind::Module if tsym.generic_arity == inst.generic_args.len() => {
                    instantiate(design, table, res, inst, target, &subst, &mut modules, &mut index, &mut diags)
                }
                _ => None,
            };
            if let Some(t) = resolved {
                modules[current].inst_targets.insert(inst.name.span.start, t);
                edges[current].push((t, inst.name.span));
            }
        }
    }

    report_cycles(&modules, &edges, &mut diags);
    report_name_collisions(table, &modules, &mut diags);
    (modules, diags)
}

#[allow(clippy::too_many_arguments)]
fn instantiate(
    design: &[Namespace],
    table: &SymbolTable,
    res: &Resolution,
    inst: &InstDecl,
    template: SymbolId,
    subst: &BTreeMap<String, usize>,
    modules: &mut Vec<ConcreteModule>,
    index: &mut BTreeMap<InstanceKey, usize>,
    diags: &mut Vec<Diagnostic>,
) -> Option<usize> {
    let mut args = Vec::new();
    for arg in &inst.generic_args {
        let id = res.target(arg)?;
        let sym = table.symbol(id);
        let concrete = match sym.kind {
            SymbolKind::GenericParam => modules[*subst.get(&sym.name)?].symbol,
            SymbolKind::Module if sym.generic_arity == 0 => id,
            _ => {
                diags.push(Diagnostic::new(
                    Code::E0205,
                    arg.span,
                    format!("generic module `{}` cannot be a generic argument", arg.to_text()),
                ));
                return None;
            }
        };
        args.push(concrete);
    }
    let key = InstanceKey { template, args: args.clone() };
    if let Some(&idx) = index.get(&key) {
        return Some(idx);
    }
    let tsym = table.symbol(template);
    let source = tsym.item.unwrap();
    let decl = source.module(design);
    let arg_names: Vec<String> = args.iter().map(|a| mangle_arg(table, tsym.ns, *a)).collect();
    let mut new_subst = BTreeMap::new();
    for (param, arg) in decl.generic_params.iter().zip(&args) {
        let idx = index.get(&InstanceKey { template: *arg, args: vec![] }).copied()?;
        new_subst.insert(param.name.clone(), idx);
    }
    let idx = modules.len();
    index.insert(key, idx);
    modules.push(ConcreteModule {
        source,
        symbol: template,
        name: mangle(&tsym.name, &arg_names),
        scope: table.item_scope(source),
        subst: new_subst,
        inst_targets: HashMap::new(),
        instance: Some(GenericInstance { template: tsym.name.clone(), args: arg_names }),
    });
    Some(idx)
}

fn report_cycles(modules: &[ConcreteModule], edges: &[Vec<(usize, Span)>], diags: &mut Vec<Diagnostic>) {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut marks = vec![Mark::New; modules.len()];
    for start in 0..modules.len() {
        if marks[start] != Mark::New {
            continue;
        }
        // Iterative DFS: (node, next edge index).
        let mut stack = vec![(start, 0usize)];
        marks[start] = Mark::Active;
        while let Some(&mut (node, ref mut edge)) = stack.last_mut() {
            if let Some(&(to, span)) = edges[node].get(*edge) {
                *edge += 1;
                match marks[to] {
                    Mark::New => {
                        marks[to] = Mark::Active;
                        stack.push((to, 0));
                    }
                    Mark::Active => {
                        diags.push(Diagnostic::new(
                            Code::E0206,
                            span,
                            format!("recursive instantiation: `{}` instantiates `{}` which is still being built", modules[node].name, modules[to].name),
                        ));
                    }
                    Mark::Done => {}
                }
            } else {
                marks[node] = Mark::Done;
                stack.pop();
            }
        }
    }
}

fn report_name_collisions(table: &SymbolTable, modules: &[ConcreteModule], diags: &mut Vec<Diagnostic>) {
    let mut seen: BTreeMap<&str, &ConcreteModule> = BTreeMap::new();
    for m in modules {
        if let Some(first) = seen.get(m.name.as_str()) {
            let span = table.symbol(m.symbol).span;
            diags.push(
                Diagnostic::new(Code::E0201, span, format!("emitted module name `{}` is used twice", m.name))
                    .with_related(table.symbol(first.symbol).span, "also emitted from here"),
            );
        } else {
            seen.insert(&m.name, m);
        }
    }
}
