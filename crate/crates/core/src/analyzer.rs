//! Semantic checks over resolved, monomorphized modules.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use num_bigint::BigUint;

use crate::diag::{Code, Diagnostic};
use crate::resolver::{ConcreteModule, ItemRef, Namespace, Resolution, ScopeId, SymbolId, SymbolKind, SymbolTable, Use};
use crate::source::Span;
use crate::syntax::ast::*;

/// Process index, first write, and the union of written bits.
type DriverSite = (usize, Span, Option<(u64, u64)>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstValue {
    pub value: u64,
    pub span: Span,
}

/// Evaluates a constant expression over 64-bit unsigned integers. Any wrap,
/// division by zero, or reference to a non-constant is E0301.
pub fn eval_const(expr: &Expr, scope: ScopeId, table: &SymbolTable) -> Result<ConstValue, Diagnostic> {
    let mut stack = Vec::new();
    eval(expr, scope, table, &mut stack).map(|value| ConstValue { value, span: expr.span })
}

fn eval(expr: &Expr, scope: ScopeId, table: &SymbolTable, stack: &mut Vec<SymbolId>) -> Result<u64, Diagnostic> {
    let fail = |msg: String| Diagnostic::new(Code::E0301, expr.span, msg);
    match &expr.kind {
        ExprKind::Sized { value, text, .. } | ExprKind::Decimal { value, text } => match value {
            Some(v) => u64::try_from(*v).map_err(|_| fail(format!("`{text}` does not fit in 64 bits"))),
            None => Err(fail(format!("`{text}` is not a valid literal"))),
        },
        ExprKind::Path(p) => {
            let resolved = table.resolve(p, scope, Use::Value)?;
            let sym = table.symbol(resolved.target);
            match (&sym.kind, &sym.value) {
                (SymbolKind::Param | SymbolKind::Const, Some(value)) => {
                    if stack.contains(&resolved.target) {
                        return Err(fail(format!("`{}` is defined in terms of itself", sym.name)));
                    }
                    stack.push(resolved.target);
                    let v = eval(value, sym.scope, table, stack);
                    stack.pop();
                    v
                }
                _ => Err(fail(format!("{} `{}` is not a constant", sym.kind.describe(), sym.name))),
            }
        }
        ExprKind::Unary { op, operand } => {
            let v = eval(operand, scope, table, stack)?;
            match op {
                UnaryOp::Not => Ok((v == 0) as u64),
                UnaryOp::BitNot => Ok(!v),
                UnaryOp::Neg if v == 0 => Ok(0),
                UnaryOp::Neg => Err(fail("negative constant values are not representable".into())),
            }
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let a = eval(lhs, scope, table, stack)?;
            let b = eval(rhs, scope, table, stack)?;
            let overflow = || fail(format!("constant `{}` overflows 64 bits", op.as_str()));
            match op {
                BinaryOp::Add => a.checked_add(b).ok_or_else(overflow),
                BinaryOp::Sub => a.checked_sub(b).ok_or_else(|| fail("constant subtraction underflows".into())),
                BinaryOp::Mul => a.checked_mul(b).ok_or_else(overflow),
                BinaryOp::Div => a.checked_div(b).ok_or_else(|| fail("division by zero".into())),
                BinaryOp::Rem => a.checked_rem(b).ok_or_else(|| fail("division by zero".into())),
                BinaryOp::Shl => {
                    if a == 0 || b == 0 {
                        Ok(a)
                    } else if b >= 64 || u64::from(a.leading_zeros()) < b {
                        Err(overflow())
                    } else {
                        Ok(a << b)
                    }
                }
                BinaryOp::Shr => Ok(if b >= 64 { 0 } else { a >> b }),
                BinaryOp::Lt => Ok((a < b) as u64),
                BinaryOp::Le => Ok((a <= b) as u64),
                BinaryOp::Gt => Ok((a > b) as u64),
                BinaryOp::Ge => Ok((a >= b) as u64),
                BinaryOp::Eq => Ok((a == b) as u64),
                BinaryOp::Ne => Ok((a != b) as u64),
                BinaryOp::BitAnd => Ok(a & b),
                BinaryOp::BitXor => Ok(a ^ b),
                BinaryOp::BitOr => Ok(a | b),
                BinaryOp::And => Ok((a != 0 && b != 0) as u64),
                BinaryOp::Or => Ok((a != 0 || b != 0) as u64),
            }
        }
        ExprKind::Paren(inner) => eval(inner, scope, table, stack),
        ExprKind::Index { .. } | ExprKind::Range { .. } | ExprKind::Call { .. } => {
            Err(fail("expression is not constant".into()))
        }
    }
}

/// Clock and reset bound to one `always_ff`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FfBinding {
    pub clock: Option<SymbolId>,
    pub reset: Option<SymbolId>,
}

/// First `if_reset` keyword inside `block`.
pub fn find_if_reset(block: &Block) -> Option<Span> {
    let mut found = None;
    block.walk(&mut |s| {
        if let (StmtKind::IfReset { keyword, .. }, None) = (&s.kind, found) {
            found = Some(*keyword);
        }
    });
    found
}

fn signals_of(table: &SymbolTable, scope: ScopeId, pred: fn(TypeKind) -> bool) -> Vec<SymbolId> {
    let mut out: Vec<SymbolId> = table
        .entries(scope)
        .map(|(_, id)| id)
        .filter(|id| {
            let s = table.symbol(*id);
            matches!(s.kind, SymbolKind::Port | SymbolKind::Var) && s.ty.as_ref().is_some_and(|t| pred(t.kind))
        })
        .collect();
    out.sort_by_key(|id| table.symbol(*id).span.start);
    out
}

/// Binds the clock and reset of an `always_ff`. The abbreviated form picks
/// the module's unique clock, and its unique reset when `if_reset` needs
/// one.
pub fn bind_always_ff(ff: &AlwaysFf, scope: ScopeId, table: &SymbolTable, res: &Resolution) -> (FfBinding, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let mut binding = FfBinding::default();
    let if_reset = find_if_reset(&ff.body);
    let check = |id: &Ident, pred: fn(TypeKind) -> bool, what: &str, diags: &mut Vec<Diagnostic>| -> Option<SymbolId> {
        let target = res.ident_target(id)?;
        let sym = table.symbol(target);
        if sym.ty.as_ref().is_some_and(|t| pred(t.kind)) {
            Some(target)
        } else {
            diags.push(Diagnostic::new(Code::E0314, id.span, format!("`{}` is not {what}-typed", id.name)));
            None
        }
    };
    match &ff.clock {
        Some(clock) => {
            binding.clock = check(clock, TypeKind::is_clock, "clock", &mut diags);
            if let Some(reset) = &ff.reset {
                binding.reset = check(reset, TypeKind::is_reset, "reset", &mut diags);
            } else if let Some(span) = if_reset {
                diags.push(Diagnostic::new(Code::E0313, span, "`if_reset` used but this `always_ff` has no reset"));
            }
        }
        None => {
            let clocks = signals_of(table, scope, TypeKind::is_clock);
            match clocks.as_slice() {
                [one] => binding.clock = Some(*one),
                _ => diags.push(candidates_error(table, ff.keyword, "clock", &clocks)),
            }
            if if_reset.is_some() {
                let resets = signals_of(table, scope, TypeKind::is_reset);
                match resets.as_slice() {
                    [one] => binding.reset = Some(*one),
                    _ => diags.push(candidates_error(table, ff.keyword, "reset", &resets)),
                }
            }
        }
    }
    (binding, diags)
}

fn candidates_error(table: &SymbolTable, span: Span, what: &str, found: &[SymbolId]) -> Diagnostic {
    let mut d = if found.is_empty() {
        Diagnostic::new(Code::E0312, span, format!("cannot infer the {what}: the module has no {what} signal"))
    } else {
        Diagnostic::new(
            Code::E0312,
            span,
            format!("cannot infer the {what}: {} candidates; name it explicitly", found.len()),
        )
    };
    for id in found {
        let s = table.symbol(*id);
        d = d.with_related(s.span, format!("{what} candidate `{}`", s.name));
    }
    d
}

/// Must-assign analysis of a combinational block: a signal assigned on
/// some path but not on every path infers a latch (W0305).
pub fn check_latches(body: &Block) -> Vec<Diagnostic> {
    let (all, any) = must_assign(&body.stmts);
    any.into_iter()
        .filter(|(name, _)| !all.contains_key(name))
        .map(|(name, span)| {
            Diagnostic::new(Code::W0305, span, format!("`{name}` is not assigned on every path; a latch will be inferred"))
        })
        .collect()
}

type Assigned = BTreeMap<String, Span>;

/// (assigned on every path, assigned on some path), each with the first
/// assignment site.
fn must_assign(stmts: &[Stmt]) -> (Assigned, Assigned) {
    let mut all = Assigned::new();
    let mut any = Assigned::new();
    for s in stmts {
        let (a, b) = stmt_assigns(s);
        merge_first(&mut all, a);
        merge_first(&mut any, b);
    }
    (all, any)
}

fn merge_first(into: &mut Assigned, from: Assigned) {
    for (k, v) in from {
        let e = into.entry(k).or_insert(v);
        if v.start < e.start {
            *e = v;
        }
    }
}

fn stmt_assigns(s: &Stmt) -> (Assigned, Assigned) {
    match &s.kind {
        StmtKind::Assign { lhs, .. } => {
            let mut m = Assigned::new();
            if let Some(root) = lhs.lvalue_root() {
                m.insert(root.to_text(), root.span);
            }
            (m.clone(), m)
        }
        StmtKind::If { then, otherwise, .. } | StmtKind::IfReset { then, otherwise, .. } => {
            let (t_all, t_any) = must_assign(&then.stmts);
            let (e_all, e_any) = match otherwise {
                Some(ElseBranch::If(s)) => stmt_assigns(s),
                Some(ElseBranch::Block(b)) => must_assign(&b.stmts),
                None => Default::default(),
            };
            let all = t_all.iter().filter(|(k, _)| e_all.contains_key(*k)).map(|(k, v)| (k.clone(), *v)).collect();
            let mut any = t_any;
            merge_first(&mut any, e_any);
            (all, any)
        }
        StmtKind::Block(b) | StmtKind::UnsafeCdc(b) => must_assign(&b.stmts),
        StmtKind::Return(_) => Default::default(),
    }
}

/// Flags sized literals whose value needs more bits than their width.
pub fn check_literal_widths(expr: &Expr) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    expr.walk(&mut |e| {
        if let ExprKind::Sized { text, width: Some(width), base, value } = &e.kind {
            let too_wide = match value {
                _ if *width == 0 => true,
                Some(v) => *width < 128 && *v >= 1u128 << width,
                None => digit_bits(text, *base).is_some_and(|bits| bits > u64::from(*width)),
            };
            if too_wide {
                let msg = if *width == 0 {
                    format!("`{text}` has zero width")
                } else {
                    format!("`{text}` does not fit in {width} bit(s)")
                };
                out.push(Diagnostic::new(Code::E0311, e.span, msg));
            }
        }
    });
    out
}

/// Bit length of the value written by a sized literal's digits.
fn digit_bits(text: &str, base: Base) -> Option<u64> {
    let digits: String = text.split_once('\'').map(|(_, r)| &r[1..]).unwrap_or("").chars().filter(|&c| c != '_').collect();
    BigUint::parse_bytes(digits.as_bytes(), base.radix()).map(|v| v.bits())
}

/// Every expression syntactically inside `m`, including type dimensions.
pub fn module_exprs(m: &ModuleDecl) -> Vec<&Expr> {
    let mut out = Vec::new();
    for p in &m.params {
        type_exprs(&p.ty, &mut out);
        out.push(&p.default);
    }
    for p in &m.ports {
        type_exprs(&p.ty, &mut out);
    }
    for (item, _) in flatten_items(&m.body) {
        match &item.kind {
            ModuleItemKind::Var(v) => type_exprs(&v.ty, &mut out),
            ModuleItemKind::Const(c) => {
                type_exprs(&c.ty, &mut out);
                out.push(&c.value);
            }
            ModuleItemKind::Inst(i) => out.extend(i.params.iter().chain(&i.ports).map(|c| &c.expr)),
            ModuleItemKind::Assign(a) => {
                out.push(&a.lhs);
                out.push(&a.rhs);
            }
            ModuleItemKind::AlwaysFf(ff) => block_exprs(&ff.body, &mut out),
            ModuleItemKind::AlwaysComb(c) => block_exprs(&c.body, &mut out),
            ModuleItemKind::Function(f) => function_exprs(f, &mut out),
            ModuleItemKind::UnsafeCdc(_) => {}
        }
    }
    out
}

fn type_exprs<'a>(ty: &'a TypeSpec, out: &mut Vec<&'a Expr>) {
    out.extend(ty.packed.iter().chain(&ty.unpacked));
}

fn function_exprs<'a>(f: &'a FunctionDecl, out: &mut Vec<&'a Expr>) {
    for a in &f.args {
        type_exprs(&a.ty, out);
    }
    type_exprs(&f.ret, out);
    block_exprs(&f.body, out);
}

fn block_exprs<'a>(b: &'a Block, out: &mut Vec<&'a Expr>) {
    b.walk(&mut |s| match &s.kind {
        StmtKind::Assign { lhs, rhs, .. } => {
            out.push(lhs);
            out.push(rhs);
        }
        StmtKind::If { cond, .. } => out.push(cond),
        StmtKind::Return(e) => out.push(e),
        StmtKind::IfReset { .. } | StmtKind::Block(_) | StmtKind::UnsafeCdc(_) => {}
    });
}

/// Checks call arity (E0310) for every call inside `expr`.
fn check_calls(expr: &Expr, res: &Resolution, table: &SymbolTable, diags: &mut Vec<Diagnostic>) {
    expr.walk(&mut |e| {
        if let ExprKind::Call { path, args } = &e.kind {
            let Some(target) = res.target(path) else { return };
            let sym = table.symbol(target);
            if let Some(arity) = sym.arity.filter(|a| *a != args.len()) {
                diags.push(
                    Diagnostic::new(
                        Code::E0310,
                        e.span,
                        format!("`{}` takes {arity} argument(s) but {} were supplied", sym.name, args.len()),
                    )
                    .with_related(sym.span, "function declared here"),
                );
            }
        }
    });
}

pub struct Context<'a> {
    pub design: &'a [Namespace],
    pub table: &'a SymbolTable,
    pub res: &'a Resolution,
    pub modules: &'a [ConcreteModule],
}

/// Runs every check over every concrete module, every never-instantiated
/// template, and every package.
pub fn analyze(ctx: &Context) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let plain: HashMap<SymbolId, usize> = ctx
        .modules
        .iter()
        .enumerate()
        .filter(|(_, m)| m.instance.is_none())
        .map(|(i, m)| (m.symbol, i))
        .collect();
    let instantiated: HashSet<SymbolId> = ctx.modules.iter().map(|m| m.symbol).collect();
    let empty = HashMap::new();

    for cm in ctx.modules {
        ModuleCheck::new(ctx, cm.decl(ctx.design), cm.scope, &cm.inst_targets, &plain).run(&mut diags);
    }
    for (ns_idx, ns) in ctx.design.iter().enumerate() {
        for (file_idx, file) in ns.files.iter().enumerate() {
            for (item_idx, item) in file.ast.items.iter().enumerate() {
                let item_ref = ItemRef { ns: ns_idx, file: file_idx, item: item_idx };
                let Some(id) = ctx.table.lookup_local(ctx.table.root(ns_idx), &item.name().name) else {
                    continue;
                };
                if ctx.table.symbol(id).item != Some(item_ref) {
                    continue;
                }
                let scope = ctx.table.item_scope(item_ref);
                match item {
                    Item::Module(m) if m.is_generic() && !instantiated.contains(&id) => {
                        ModuleCheck::new(ctx, m, scope, &empty, &plain).run(&mut diags);
                    }
                    Item::Module(_) => {}
                    Item::Package(p) => check_package(ctx, p, scope, &mut diags),
                }
            }
        }
    }
    crate::diag::sort_and_dedup(&mut diags);
    diags
}

fn check_package(ctx: &Context, p: &PackageDecl, scope: ScopeId, diags: &mut Vec<Diagnostic>) {
    let mut exprs = Vec::new();
    for item in &p.items {
        match item {
            PackageItem::Const(c) => {
                type_exprs(&c.ty, &mut exprs);
                exprs.push(&c.value);
                if let Err(d) = eval_const(&c.value, scope, ctx.table) {
                    diags.push(d);
                }
            }
            PackageItem::Function(f) => function_exprs(f, &mut exprs),
        }
    }
    for e in exprs {
        diags.extend(check_literal_widths(e));
        check_calls(e, ctx.res, ctx.table, diags);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ProcKind {
    Ff,
    Comb,
    Assign,
    Inst,
}

#[derive(Debug)]
struct Proc {
    kind: ProcKind,
    in_unsafe: bool,
    binding: FfBinding,
}

#[derive(Debug)]
struct Read {
    sym: SymbolId,
    span: Span,
    proc: Option<usize>,
    in_unsafe: bool,
    /// A bare clock/reset handed to a child's clock/reset port.
    clock_conn: bool,
}

#[derive(Debug)]
struct Write {
    sym: SymbolId,
    span: Span,
    proc: usize,
    bits: Option<(u64, u64)>,
    clock_conn: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Domain {
    Default,
    Named(String),
    Mixed,
}

impl Domain {
    fn join(&self, other: &Domain) -> Domain {
        match (self, other) {
            (Domain::Default, d) | (d, Domain::Default) => d.clone(),
            (Domain::Named(a), Domain::Named(b)) if a == b => self.clone(),
            _ => Domain::Mixed,
        }
    }

    fn conflicts_with(&self, clock: &Domain) -> bool {
        match (self, clock) {
            (Domain::Named(a), Domain::Named(b)) => a != b,
            (Domain::Mixed, Domain::Named(_)) => true,
            _ => false,
        }
    }

    fn describe(&self) -> String {
        match self {
            Domain::Default => "the default domain".into(),
            Domain::Named(d) => format!("domain `{d}"),
            Domain::Mixed => "mixed domains".into(),
        }
    }
}

struct ModuleCheck<'a> {
    ctx: &'a Context<'a>,
    decl: &'a ModuleDecl,
    scope: ScopeId,
    targets: &'a HashMap<u32, usize>,
    plain: &'a HashMap<SymbolId, usize>,
    diags: Vec<Diagnostic>,
    procs: Vec<Proc>,
    reads: Vec<Read>,
    writes: Vec<Write>,
    /// Signals connected to an instance whose ports are unknown.
    opaque: HashSet<SymbolId>,
}

impl<'a> ModuleCheck<'a> {
    fn new(
        ctx: &'a Context<'a>,
        decl: &'a ModuleDecl,
        scope: ScopeId,
        targets: &'a HashMap<u32, usize>,
        plain: &'a HashMap<SymbolId, usize>,
    ) -> Self {
        ModuleCheck {
            ctx,
            decl,
            scope,
            targets,
            plain,
            diags: Vec::new(),
            procs: Vec::new(),
            reads: Vec::new(),
            writes: Vec::new(),
            opaque: HashSet::new(),
        }
    }

    fn run(mut self, out: &mut Vec<Diagnostic>) {
        self.check_constants();
        for e in module_exprs(self.decl) {
            self.diags.extend(check_literal_widths(e));
            check_calls(e, self.ctx.res, self.ctx.table, &mut self.diags);
        }
        self.collect();
        self.check_drivers();
        self.check_direction();
        self.check_clock_dataflow();
        self.check_cdc();
        out.append(&mut self.diags);
    }

    fn table(&self) -> &'a SymbolTable {
        self.ctx.table
    }

    fn local(&self, path: &Path) -> Option<SymbolId> {
        let id = self.ctx.res.target(path)?;
        let sym = self.table().symbol(id);
        (sym.scope == self.scope && matches!(sym.kind, SymbolKind::Port | SymbolKind::Var | SymbolKind::Param | SymbolKind::Const))
            .then_some(id)
    }

    fn const_ok(&mut self, e: &Expr, scope: ScopeId) -> Option<u64> {
        match eval_const(e, scope, self.table()) {
            Ok(v) => Some(v.value),
            Err(d) => {
                self.diags.push(d);
                None
            }
        }
    }

    fn check_dims(&mut self, ty: &TypeSpec) {
        for d in ty.packed.iter().chain(&ty.unpacked) {
            if self.const_ok(d, self.scope) == Some(0) {
                self.diags.push(Diagnostic::new(Code::E0301, d.span, "array dimension must be at least 1"));
            }
        }
    }

    fn check_constants(&mut self) {
        let decl = self.decl;
        for p in &decl.params {
            self.check_dims(&p.ty);
            self.const_ok(&p.default, self.scope);
        }
        for p in &decl.ports {
            self.check_dims(&p.ty);
        }
        for (item, _) in flatten_items(&decl.body) {
            match &item.kind {
                ModuleItemKind::Var(v) => self.check_dims(&v.ty),
                ModuleItemKind::Const(c) => {
                    self.check_dims(&c.ty);
                    self.const_ok(&c.value, self.scope);
                }
                ModuleItemKind::Inst(i) => {
                    for c in &i.params {
                        self.const_ok(&c.expr, self.scope);
                    }
                }
                _ => {}
            }
        }
    }

    fn new_proc(&mut self, kind: ProcKind, in_unsafe: bool, binding: FfBinding) -> usize {
        self.procs.push(Proc { kind, in_unsafe, binding });
        self.procs.len() - 1
    }

    fn read_expr(&mut self, e: &Expr, proc: Option<usize>, in_unsafe: bool) {
        let mut found = Vec::new();
        e.walk(&mut |sub| {
            if let ExprKind::Path(p) = &sub.kind {
                found.push(p);
            }
        });
        for p in found {
            if let Some(sym) = self.local(p) {
                self.reads.push(Read { sym, span: p.span, proc, in_unsafe, clock_conn: false });
            }
        }
    }

    /// Records the write of an lvalue and the reads in its selects.
    fn write_lvalue(&mut self, lhs: &Expr, proc: usize, in_unsafe: bool, compound: bool, clock_conn: bool) {
        let Some(root) = lhs.lvalue_root() else {
            self.read_expr(lhs, Some(proc), in_unsafe);
            return;
        };
        let bits = match &lhs.kind {
            ExprKind::Index { base, index } if matches!(base.kind, ExprKind::Path(_)) => {
                eval_const(index, self.scope, self.table()).ok().map(|v| (v.value, v.value))
            }
            ExprKind::Range { base, hi, lo } if matches!(base.kind, ExprKind::Path(_)) => {
                match (eval_const(hi, self.scope, self.table()), eval_const(lo, self.scope, self.table())) {
                    (Ok(h), Ok(l)) => Some((l.value.min(h.value), l.value.max(h.value))),
                    _ => None,
                }
            }
            _ => None,
        };
        let mut selects = Vec::new();
        let mut cur = lhs;
        loop {
            match &cur.kind {
                ExprKind::Index { base, index } => {
                    selects.push(&**index);
                    cur = base;
                }
                ExprKind::Range { base, hi, lo } => {
                    selects.push(&**hi);
                    selects.push(&**lo);
                    cur = base;
                }
                _ => break,
            }
        }
        for s in selects {
            self.read_expr(s, Some(proc), in_unsafe);
        }
        if let Some(sym) = self.local(root) {
            if compound {
                self.reads.push(Read { sym, span: root.span, proc: Some(proc), in_unsafe, clock_conn: false });
            }
            self.writes.push(Write { sym, span: root.span, proc, bits, clock_conn });
        }
    }

    fn stmts(&mut self, block: &Block, proc: usize, in_unsafe: bool) {
        for s in &block.stmts {
            self.stmt(s, proc, in_unsafe);
        }
    }

    fn stmt(&mut self, s: &Stmt, proc: usize, in_unsafe: bool) {
        match &s.kind {
            StmtKind::Assign { lhs, op, rhs } => {
                self.write_lvalue(lhs, proc, in_unsafe, *op != AssignOp::Assign, false);
                self.read_expr(rhs, Some(proc), in_unsafe);
            }
            StmtKind::If { cond, then, otherwise } => {
                self.read_expr(cond, Some(proc), in_unsafe);
                self.stmts(then, proc, in_unsafe);
                self.else_branch(otherwise, proc, in_unsafe);
            }
            StmtKind::IfReset { then, otherwise, .. } => {
                if let Some(reset) = self.procs[proc].binding.reset {
                    self.reads.push(Read { sym: reset, span: s.span, proc: Some(proc), in_unsafe, clock_conn: true });
                }
                self.stmts(then, proc, in_unsafe);
                self.else_branch(otherwise, proc, in_unsafe);
            }
            StmtKind::Return(e) => self.read_expr(e, Some(proc), in_unsafe),
            StmtKind::Block(b) => self.stmts(b, proc, in_unsafe),
            StmtKind::UnsafeCdc(b) => self.stmts(b, proc, true),
        }
    }

    fn else_branch(&mut self, e: &Option<ElseBranch>, proc: usize, in_unsafe: bool) {
        match e {
            Some(ElseBranch::If(s)) => self.stmt(s, proc, in_unsafe),
            Some(ElseBranch::Block(b)) => self.stmts(b, proc, in_unsafe),
            None => {}
        }
    }

    fn inst_target(&self, inst: &InstDecl) -> Option<usize> {
        if let Some(t) = self.targets.get(&inst.name.span.start) {
            return Some(*t);
        }
        self.plain.get(&self.ctx.res.target(&inst.target)?).copied()
    }

    fn collect(&mut self) {
        let decl = self.decl;
        for p in &decl.params {
            self.read_expr(&p.default, None, false);
        }
        for (item, in_unsafe) in flatten_items(&decl.body) {
            match &item.kind {
                ModuleItemKind::Var(_) | ModuleItemKind::UnsafeCdc(_) => {}
                ModuleItemKind::Const(c) => self.read_expr(&c.value, None, in_unsafe),
                ModuleItemKind::Inst(i) => self.inst(i, in_unsafe),
                ModuleItemKind::Assign(a) => {
                    let proc = self.new_proc(ProcKind::Assign, in_unsafe, FfBinding::default());
                    self.write_lvalue(&a.lhs, proc, in_unsafe, false, false);
                    self.read_expr(&a.rhs, Some(proc), in_unsafe);
                }
                ModuleItemKind::AlwaysFf(ff) => {
                    let (binding, diags) = bind_always_ff(ff, self.scope, self.table(), self.ctx.res);
                    self.diags.extend(diags);
                    let proc = self.new_proc(ProcKind::Ff, in_unsafe, binding);
                    self.stmts(&ff.body, proc, in_unsafe);
                }
                ModuleItemKind::AlwaysComb(c) => {
                    self.diags.extend(check_latches(&c.body));
                    let proc = self.new_proc(ProcKind::Comb, in_unsafe, FfBinding::default());
                    self.stmts(&c.body, proc, in_unsafe);
                }
                ModuleItemKind::Function(f) => {
                    let mut exprs = Vec::new();
                    function_exprs(f, &mut exprs);
                    for e in exprs {
                        self.read_expr(e, None, in_unsafe);
                    }
                }
            }
        }
    }

    fn inst(&mut self, inst: &InstDecl, in_unsafe: bool) {
        for c in &inst.params {
            self.read_expr(&c.expr, None, in_unsafe);
        }
        let proc = self.new_proc(ProcKind::Inst, in_unsafe, FfBinding::default());
        let Some(target) = self.inst_target(inst) else {
            // Unknown ports: every connected signal may be read or driven.
            for c in &inst.ports {
                if let ExprKind::Path(p) = &c.expr.kind {
                    if let Some(sym) = self.local(p) {
                        self.opaque.insert(sym);
                        self.reads.push(Read { sym, span: p.span, proc: Some(proc), in_unsafe, clock_conn: true });
                        continue;
                    }
                }
                self.read_expr(&c.expr, Some(proc), in_unsafe);
            }
            return;
        };
        let child = &self.ctx.modules[target];
        let child_decl = child.decl(self.ctx.design);
        let child_name = child.name.clone();
        self.check_connections(inst, &inst.params, &child_name, "parameter", child_decl.params.iter().map(|p| &p.name), false);
        self.check_connections(inst, &inst.ports, &child_name, "port", child_decl.ports.iter().map(|p| &p.name), true);

        for c in &inst.ports {
            let Some(port) = child_decl.ports.iter().find(|p| p.name.name == c.name.name) else {
                self.read_expr(&c.expr, Some(proc), in_unsafe);
                continue;
            };
            let clock_port = port.ty.kind.is_clock() || port.ty.kind.is_reset();
            let bare = matches!(c.expr.kind, ExprKind::Path(_));
            match port.direction {
                Direction::Input => {
                    if let (true, ExprKind::Path(p)) = (clock_port, &c.expr.kind) {
                        if let Some(sym) = self.local(p) {
                            self.reads.push(Read { sym, span: p.span, proc: Some(proc), in_unsafe, clock_conn: true });
                        }
                    } else {
                        self.read_expr(&c.expr, Some(proc), in_unsafe);
                    }
                }
                Direction::Output => {
                    if c.expr.is_lvalue() {
                        self.write_lvalue(&c.expr, proc, in_unsafe, false, clock_port && bare);
                    } else {
                        self.diags.push(Diagnostic::new(
                            Code::E0306,
                            c.expr.span,
                            format!("output port `{}` of `{child_name}` must connect to an assignable signal", c.name.name),
                        ));
                        self.read_expr(&c.expr, Some(proc), in_unsafe);
                    }
                }
            }
        }
    }

    fn check_connections<'b>(
        &mut self,
        inst: &InstDecl,
        conns: &[Connection],
        child: &str,
        what: &str,
        declared: impl Iterator<Item = &'b Ident>,
        required: bool,
    ) {
        let declared: Vec<&Ident> = declared.collect();
        let mut seen: HashMap<&str, Span> = HashMap::new();
        for c in conns {
            if !declared.iter().any(|d| d.name == c.name.name) {
                self.diags.push(Diagnostic::new(
                    Code::E0307,
                    c.name.span,
                    format!("`{child}` has no {what} named `{}`", c.name.name),
                ));
            }
            if let Some(first) = seen.get(c.name.name.as_str()) {
                self.diags.push(
                    Diagnostic::new(Code::E0309, c.name.span, format!("{what} `{}` is connected more than once", c.name.name))
                        .with_related(*first, "first connected here"),
                );
            } else {
                seen.insert(&c.name.name, c.name.span);
            }
        }
        if required {
            for d in declared {
                if !seen.contains_key(d.name.as_str()) {
                    self.diags.push(
                        Diagnostic::new(
                            Code::E0308,
                            inst.name.span,
                            format!("{what} `{}` of `{child}` is not connected", d.name),
                        )
                        .with_related(d.span, format!("{what} declared here")),
                    );
                }
            }
        }
    }

    fn check_drivers(&mut self) {
        let table = self.table();
        let mut by_sym: BTreeMap<SymbolId, Vec<&Write>> = BTreeMap::new();
        for w in &self.writes {
            by_sym.entry(w.sym).or_default().push(w);
        }
        for (sym, writes) in &by_sym {
            // One site per process: the first write, with the union of its bits.
            let mut sites: Vec<DriverSite> = Vec::new();
            for w in writes {
                match sites.iter_mut().find(|s| s.0 == w.proc) {
                    Some(site) => {
                        site.2 = match (site.2, w.bits) {
                            (Some((a, b)), Some((c, d))) => Some((a.min(c), b.max(d))),
                            _ => None,
                        }
                    }
                    None => sites.push((w.proc, w.span, w.bits)),
                }
            }
            'outer: for j in 1..sites.len() {
                for i in 0..j {
                    let overlap = match (sites[i].2, sites[j].2) {
                        (Some((a, b)), Some((c, d))) => a <= d && c <= b,
                        _ => true,
                    };
                    if overlap {
                        let name = &table.symbol(*sym).name;
                        self.diags.push(
                            Diagnostic::new(Code::E0302, sites[j].1, format!("`{name}` is driven from more than one place"))
                                .with_related(sites[i].1, "also driven here"),
                        );
                        break 'outer;
                    }
                }
            }
        }

        let read_count: HashMap<SymbolId, usize> = self.reads.iter().fold(HashMap::new(), |mut m, r| {
            *m.entry(r.sym).or_default() += 1;
            m
        });
        for (_, id) in table.entries(self.scope) {
            let sym = table.symbol(id);
            if self.opaque.contains(&id) {
                continue;
            }
            let driven = by_sym.contains_key(&id);
            let reads = read_count.get(&id).copied().unwrap_or(0);
            match (sym.kind, sym.direction) {
                (SymbolKind::Var, _) if reads == 0 => {
                    let msg = if driven {
                        format!("variable `{}` is assigned but never read", sym.name)
                    } else {
                        format!("variable `{}` is never used", sym.name)
                    };
                    self.diags.push(Diagnostic::new(Code::W0304, sym.span, msg));
                }
                (SymbolKind::Var, _) if !driven => {
                    let first_read = self.reads.iter().filter(|r| r.sym == id).map(|r| r.span).min_by_key(|s| s.start);
                    let mut d = Diagnostic::new(Code::E0303, sym.span, format!("variable `{}` is read but never assigned", sym.name));
                    if let Some(span) = first_read {
                        d = d.with_related(span, "read here");
                    }
                    self.diags.push(d);
                }
                (SymbolKind::Port, Some(Direction::Output)) if !driven => {
                    self.diags.push(Diagnostic::new(Code::E0303, sym.span, format!("output `{}` is never driven", sym.name)));
                }
                _ => {}
            }
        }
    }

    fn check_direction(&mut self) {
        let table = self.table();
        for w in &self.writes {
            let sym = table.symbol(w.sym);
            let what = match (sym.kind, sym.direction) {
                (SymbolKind::Port, Some(Direction::Input)) => "input port",
                (SymbolKind::Param, _) => "parameter",
                (SymbolKind::Const, _) => "constant",
                _ => continue,
            };
            self.diags.push(
                Diagnostic::new(Code::E0306, w.span, format!("cannot assign to {what} `{}`", sym.name))
                    .with_related(sym.span, "declared here"),
            );
        }
    }

    fn check_clock_dataflow(&mut self) {
        let table = self.table();
        let is_clock_like = |id: SymbolId| table.symbol(id).ty.as_ref().is_some_and(|t| t.kind.is_clock() || t.kind.is_reset());
        let mut found: Vec<(Span, SymbolId)> = self
            .reads
            .iter()
            .filter(|r| !r.clock_conn && is_clock_like(r.sym))
            .map(|r| (r.span, r.sym))
            .chain(self.writes.iter().filter(|w| !w.clock_conn && is_clock_like(w.sym)).map(|w| (w.span, w.sym)))
            .collect();
        found.sort_by_key(|(s, _)| s.start);
        for (span, id) in found {
            let sym = table.symbol(id);
            let kind = sym.ty.as_ref().map(|t| t.kind.as_str()).unwrap_or("clock");
            self.diags.push(Diagnostic::new(
                Code::E0315,
                span,
                format!("`{}` has type `{kind}` and cannot be used as ordinary data", sym.name),
            ));
        }
    }

    fn declared_domain(&self, id: SymbolId) -> Option<Domain> {
        self.table().symbol(id).domain.clone().map(Domain::Named)
    }

    fn clock_domain(&self, proc: &Proc, domains: &HashMap<SymbolId, Domain>) -> Domain {
        proc.binding.clock.and_then(|c| domains.get(&c).cloned()).unwrap_or(Domain::Default)
    }

    /// Domain of every signal: declared, else the clock of the driving
    /// `always_ff`, else the join of everything read by its combinational
    /// driver.
    fn infer_domains(&self) -> HashMap<SymbolId, Domain> {
        let mut domains: HashMap<SymbolId, Domain> = HashMap::new();
        for (_, id) in self.table().entries(self.scope) {
            domains.insert(id, self.declared_domain(id).unwrap_or(Domain::Default));
        }
        let mut proc_reads: Vec<Vec<SymbolId>> = vec![Vec::new(); self.procs.len()];
        for r in &self.reads {
            if let Some(p) = r.proc {
                proc_reads[p].push(r.sym);
            }
        }
        loop {
            let mut changed = false;
            for w in &self.writes {
                if self.declared_domain(w.sym).is_some() {
                    continue;
                }
                let proc = &self.procs[w.proc];
                let source = match proc.kind {
                    ProcKind::Ff => self.clock_domain(proc, &domains),
                    ProcKind::Comb | ProcKind::Assign => proc_reads[w.proc]
                        .iter()
                        .fold(Domain::Default, |acc, s| acc.join(domains.get(s).unwrap_or(&Domain::Default))),
                    ProcKind::Inst => Domain::Default,
                };
                let current = domains.get(&w.sym).cloned().unwrap_or(Domain::Default);
                let next = current.join(&source);
                if next != current {
                    domains.insert(w.sym, next);
                    changed = true;
                }
            }
            if !changed {
                return domains;
            }
        }
    }

    fn check_cdc(&mut self) {
        let domains = self.infer_domains();
        let table = self.table();
        let mut found = BTreeSet::new();
        for r in &self.reads {
            let Some(p) = r.proc else { continue };
            let proc = &self.procs[p];
            if proc.kind != ProcKind::Ff || r.in_unsafe || proc.in_unsafe {
                continue;
            }
            if Some(r.sym) == proc.binding.reset || Some(r.sym) == proc.binding.clock {
                continue;
            }
            let clock = self.clock_domain(proc, &domains);
            let signal = domains.get(&r.sym).cloned().unwrap_or(Domain::Default);
            if signal.conflicts_with(&clock) && found.insert((r.span.start, r.sym)) {
                let sym = table.symbol(r.sym);
                self.diags.push(
                    Diagnostic::new(
                        Code::E0316,
                        r.span,
                        format!(
                            "`{}` belongs to {} but is read in a process clocked in {}",
                            sym.name,
                            signal.describe(),
                            clock.describe()
                        ),
                    )
                    .with_related(sym.span, "declared here"),
                );
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resolver::{build_symbols, monomorphize, resolve_design, ParsedFile};
    use crate::source::FileId;
    use crate::syntax::{parse_expr_str, parse_source};

    fn check(src: &str) -> Vec<Diagnostic> {
        let r = parse_source(src, FileId(0));
        assert!(r.diagnostics.is_empty(), "{:#?}", r.diagnostics);
        let design = vec![Namespace {
            name: "p".into(),
            deps: vec![],
            files: vec![ParsedFile { id: FileId(0), path: "a.vl".into(), ast: r.file }],
        }];
        let (table, mut diags) = build_symbols(&design);
        let (res, more) = resolve_design(&design, &table);
        diags.extend(more);
        let (modules, more) = monomorphize(&design, &table, &res);
        diags.extend(more);
        diags.extend(analyze(&Context { design: &design, table: &table, res: &res, modules: &modules }));
        crate::diag::sort_and_dedup(&mut diags);
        diags
    }

    fn codes(src: &str) -> Vec<Code> {
        check(src).iter().map(|d| d.code).collect()
    }

    const COUNTER: &str = "module Counter #(\n    param WIDTH: u32 = 1,\n) (\n    i_clk: input clock,\n    i_rst: input reset,\n    o_cnt: output logic<WIDTH>,\n) {\n    var r_cnt: logic<WIDTH>;\n\n    always_ff {\n        if_reset {\n            r_cnt = 0;\n        } else {\n            r_cnt += 1;\n        }\n    }\n\n    always_comb {\n        o_cnt = r_cnt;\n    }\n}\n";

    fn eval_in(src: &str, expr: &str) -> Result<u64, Code> {
        let r = parse_source(src, FileId(0));
        let design = vec![Namespace {
            name: "p".into(),
            deps: vec![],
            files: vec![ParsedFile { id: FileId(0), path: "a.vl".into(), ast: r.file }],
        }];
        let (table, _) = build_symbols(&design);
        let scope = table.item_scope(ItemRef { ns: 0, file: 0, item: 0 });
        let e = parse_expr_str(expr).unwrap();
        eval_const(&e, scope, &table).map(|v| v.value).map_err(|d| d.code)
    }

    #[test]
    fn const_eval() {
        assert_eq!(eval_in(COUNTER, "WIDTH-1"), Ok(0));
        assert_eq!(eval_in(COUNTER, "0"), Ok(0));
        assert_eq!(eval_in(COUNTER, "1/0"), Err(Code::E0301));
        assert_eq!(eval_in(COUNTER, "0 - 1"), Err(Code::E0301));
        assert_eq!(eval_in(COUNTER, "1 << 64"), Err(Code::E0301));
        assert_eq!(eval_in(COUNTER, "18446744073709551615 + 1"), Err(Code::E0301));
        assert_eq!(eval_in(COUNTER, "r_cnt + 1"), Err(Code::E0301));
        assert_eq!(eval_in(COUNTER, "nope"), Err(Code::E0202));
        assert_eq!(eval_in(COUNTER, "(2 + 3) * 4 % 7"), Ok(6));
        assert_eq!(eval_in(COUNTER, "8'hff >> 4 == 15"), Ok(1));
    }

    #[test]
    fn const_cycle() {
        let src = "module M { const A: u32 = B; const B: u32 = A; }";
        assert_eq!(eval_in(src, "A"), Err(Code::E0301));
    }

    #[test]
    fn counter_is_clean() {
        assert_eq!(check(COUNTER), []);
    }

    #[test]
    fn multiple_drivers() {
        let src = "module M (i_clk: input clock, o: output logic) {\n var r: logic;\n always_ff { r = 1; }\n assign r = 0;\n assign o = r;\n}";
        let d = check(src);
        assert_eq!(d.iter().map(|d| d.code).collect::<Vec<_>>(), [Code::E0302]);
        assert_eq!(d[0].span.line, 4);
        assert_eq!(d[0].related[0].span.line, 3);
    }

    #[test]
    fn disjoint_selects_do_not_conflict() {
        let src = "module M (o: output logic<2>) {\n assign o[0] = 1;\n assign o[1] = 0;\n}";
        assert_eq!(codes(src), []);
        let src = "module M (o: output logic<2>) {\n assign o[1:0] = 1;\n assign o[1] = 0;\n}";
        assert_eq!(codes(src), [Code::E0302]);
    }

    #[test]
    fn unused_and_uninitialized() {
        assert_eq!(codes("module M { var x: logic; }"), [Code::W0304]);
        assert_eq!(codes("module M (o: output logic) { var x: logic; assign o = x; }"), [Code::E0303]);
        assert_eq!(codes("module M (o: output logic) { var x: logic; assign x = 1; }"), [Code::E0303, Code::W0304]);
    }

    #[test]
    fn latches() {
        let l = |body: &str| {
            let src = format!("module M (en: input logic, a: input logic, b: input logic, y: output logic) {{ always_comb {{ {body} }} }}");
            codes(&src)
        };
        assert_eq!(l("if en { y = a; }"), [Code::W0305]);
        assert_eq!(l("if en { y = a; } else { y = b; }"), []);
        assert_eq!(l("y = b; if en { y = a; }"), []);
        assert_eq!(l("if en { y = a; } else if a { y = b; }"), [Code::W0305]);
        assert_eq!(l("if en { y = a; } else if a { y = b; } else { y = 0; }"), []);
    }

    #[test]
    fn direction() {
        let src = "module M (i: input logic, o: output logic) { always_comb { i = 1; o = i; } }";
        assert_eq!(codes(src), [Code::E0306]);
        let src = "module C (o: output logic) { assign o = 1; }\nmodule M (a: input logic, b: input logic) { inst c: C (o: a + b); }";
        assert_eq!(codes(src), [Code::E0306]);
    }

    #[test]
    fn connectivity() {
        let child = "module Child (i_clk: input clock, i_rst: input reset, o_cnt: output logic) { always_ff { if_reset { o_cnt = 0; } else { o_cnt = 1; } } }\n";
        let src = format!("{child}module M (clk: input clock, rst: input reset) {{ inst c: Child (i_clk: clk, i_rst: rst); }}");
        assert_eq!(codes(&src), [Code::E0308]);
        let src = format!("{child}module M (clk: input clock, rst: input reset, o: output logic) {{ inst c: Child (i_clk: clk, i_rst: rst, o_cnt: o, o_cnt: o); }}");
        assert_eq!(codes(&src), [Code::E0309]);
        let src = format!("{child}module M (clk: input clock, rst: input reset, o: output logic) {{ inst c: Child (i_clk: clk, i_rst: rst, o_cnt: o, bogus: o); }}");
        assert_eq!(codes(&src), [Code::E0307]);
        let src = "module M (a: input logic, b: input logic, o: output logic) {\n function f (x: logic) -> logic { return x; }\n assign o = f(a, b);\n}";
        assert_eq!(codes(src), [Code::E0310]);
    }

    #[test]
    fn literal_widths() {
        let lit = |t: &str| check_literal_widths(&parse_expr_str(t).unwrap()).len();
        assert_eq!(lit("4'd16"), 1);
        assert_eq!(lit("4'd15"), 0);
        assert_eq!(lit("1'b0"), 0);
        assert_eq!(lit("0'b0"), 1);
        assert_eq!(lit("8'hff + 8'h100"), 1);
        assert_eq!(lit("64'hffff_ffff_ffff_ffff"), 0);
        assert_eq!(lit("8'hffffffffffffffffffffffffffffffffff"), 1);
    }

    #[test]
    fn clock_reset_binding() {
        let two = "module M (c1: input clock, c2: input clock, o: output logic) { always_ff { o = 1; } }";
        assert_eq!(codes(two), [Code::E0312]);
        let none = "module M (o: output logic) { always_ff { o = 1; } }";
        assert_eq!(codes(none), [Code::E0312]);
        let no_reset = "module M (c: input clock, o: output logic) { always_ff { if_reset { o = 0; } } }";
        assert_eq!(codes(no_reset), [Code::E0312]);
        let explicit = "module M (c: input clock, r: input reset, o: output logic) { always_ff (c) { if_reset { o = 0; } } }";
        assert_eq!(codes(explicit), [Code::E0313]);
        let not_clock = "module M (c: input logic, o: output logic) { always_ff (c) { o = 1; } }";
        assert_eq!(codes(not_clock), [Code::E0314]);
        let dataflow = "module M (c: input clock, o: output logic) { assign o = c; }";
        assert_eq!(codes(dataflow), [Code::E0315]);
    }

    const TWO_DOMAINS: &str = "module M (\n i_clk_a: input `a clock,\n i_clk_b: input `b clock,\n i_d: input `a logic,\n o_d: output `b logic,\n) {\n var r_a: logic;\n always_ff (i_clk_a) { r_a = i_d; }\n always_ff (i_clk_b) { o_d = r_a; }\n}";

    #[test]
    fn cdc_detected_and_suppressed() {
        let d = check(TWO_DOMAINS);
        assert_eq!(d.iter().map(|d| d.code).collect::<Vec<_>>(), [Code::E0316]);
        assert_eq!(d[0].span.line, 9);
        let wrapped = TWO_DOMAINS.replace("{ o_d = r_a; }", "{ unsafe (cdc) { o_d = r_a; } }");
        assert_eq!(codes(&wrapped), []);
        let item_level = TWO_DOMAINS.replace(" always_ff (i_clk_b) { o_d = r_a; }", " unsafe (cdc) { always_ff (i_clk_b) { o_d = r_a; } }");
        assert_eq!(codes(&item_level), []);
    }

    #[test]
    fn cdc_through_comb() {
        let src = TWO_DOMAINS.replace("var r_a: logic;", "var r_a: logic;\n var w: logic;\n assign w = r_a;").replace("o_d = r_a;", "o_d = w;");
        assert_eq!(codes(&src), [Code::E0316]);
    }

    #[test]
    fn generic_instances_checked_with_their_arguments() {
        let src = "module Q::<T> (i: input logic) { inst u: T (i: i); }\nmodule A (i: input logic) {}\nmodule B (j: input logic) {}\nmodule Top (i: input logic) { inst a: Q::<A> (i: i); inst b: Q::<B> (i: i); }";
        assert_eq!(codes(src), [Code::E0308, Code::E0307]);
    }
}
