//! Canonical pretty-printer (the auto-formatter).
//!
//! Layout: 4-space indentation, one item per line, one port/param/
//! connection per line with a trailing comma, blank line between top-level
//! items. Comments and doc comments are re-emitted verbatim.

use crate::syntax::ast::*;

const INDENT: &str = "    ";

pub fn format(file: &SourceFile) -> String {
    let mut p = Printer::default();
    for (i, item) in file.items.iter().enumerate() {
        if i > 0 {
            p.blank();
        }
        match item {
            Item::Module(m) => p.module(m),
            Item::Package(pk) => p.package(pk),
        }
    }
    if !file.end_comments.is_empty() {
        if !file.items.is_empty() {
            p.blank();
        }
        p.comments(&file.end_comments);
    }
    p.out
}

pub fn format_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

pub fn format_type(ty: &TypeSpec) -> String {
    let mut s = ty.kind.as_str().to_string();
    if !ty.packed.is_empty() {
        s.push('<');
        s.push_str(&join_exprs(&ty.packed));
        s.push('>');
    }
    if !ty.unpacked.is_empty() {
        s.push('[');
        s.push_str(&join_exprs(&ty.unpacked));
        s.push(']');
    }
    s
}

fn join_exprs(exprs: &[Expr]) -> String {
    exprs.iter().map(format_expr).collect::<Vec<_>>().join(", ")
}

fn write_expr(s: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::Path(p) => s.push_str(&p.to_text()),
        ExprKind::Sized { text, .. } | ExprKind::Decimal { text, .. } => s.push_str(text),
        ExprKind::Unary { op, operand } => {
            s.push_str(op.as_str());
            write_expr(s, operand);
        }
        ExprKind::Binary { op, lhs, rhs } => {
            write_expr(s, lhs);
            s.push(' ');
            s.push_str(op.as_str());
            s.push(' ');
            write_expr(s, rhs);
        }
        ExprKind::Index { base, index } => {
            write_expr(s, base);
            s.push('[');
            write_expr(s, index);
            s.push(']');
        }
        ExprKind::Range { base, hi, lo } => {
            write_expr(s, base);
            s.push('[');
            write_expr(s, hi);
            s.push(':');
            write_expr(s, lo);
            s.push(']');
        }
        ExprKind::Call { path, args } => {
            s.push_str(&path.to_text());
            s.push('(');
            s.push_str(&join_exprs(args));
            s.push(')');
        }
        ExprKind::Paren(inner) => {
            s.push('(');
            write_expr(s, inner);
            s.push(')');
        }
    }
}

/// One row of an aligned comma list.
struct Row<'a> {
    trivia: &'a Trivia,
    name: &'a str,
    rest: String,
}

#[derive(Default)]
struct Printer {
    out: String,
    level: usize,
}

impl Printer {
    fn line(&mut self, text: &str) {
        for _ in 0..self.level {
            self.out.push_str(INDENT);
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn blank(&mut self) {
        if !self.out.is_empty() && !self.out.ends_with("\n\n") {
            self.out.push('\n');
        }
    }

    /// Appends to the last emitted line.
    fn append(&mut self, text: &str) {
        debug_assert!(self.out.ends_with('\n'));
        self.out.pop();
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn comments(&mut self, comments: &[Comment]) {
        for c in comments {
            self.line(&c.text);
        }
    }

    fn leading(&mut self, trivia: &Trivia) {
        self.comments(&trivia.leading);
        if let Some(doc) = &trivia.doc {
            for l in doc.text.split('\n') {
                self.line(&format!("///{l}"));
            }
        }
    }

    fn trailing(&mut self, trivia: &Trivia) {
        if let Some(d) = &trivia.trailing_doc {
            self.append(&format!(" ///{}", d.text));
        } else if let Some(c) = &trivia.trailing {
            self.append(&format!(" {}", c.text));
        }
    }

    fn rows(&mut self, rows: &[Row<'_>]) {
        let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
        self.level += 1;
        for r in rows {
            self.leading(r.trivia);
            self.line(&format!("{:<width$} {},", format!("{}:", r.name), r.rest, width = width + 1));
            self.trailing(r.trivia);
        }
        self.level -= 1;
    }

    fn module(&mut self, m: &ModuleDecl) {
        self.leading(&m.trivia);
        let mut head = String::new();
        if m.is_pub {
            head.push_str("pub ");
        }
        head.push_str("module ");
        head.push_str(&m.name.name);
        if !m.generic_params.is_empty() {
            let names: Vec<_> = m.generic_params.iter().map(|g| g.name.as_str()).collect();
            head.push_str(&format!("::<{}>", names.join(", ")));
        }
        if !m.params.is_empty() {
            self.line(&format!("{head} #("));
            let rows: Vec<_> = m
                .params
                .iter()
                .map(|p| Row {
                    trivia: &p.trivia,
                    name: &p.name.name,
                    rest: format!("{} = {}", format_type(&p.ty), format_expr(&p.default)),
                })
                .collect();
            self.rows_with_prefix(&rows, "param ");
            head = ")".to_string();
        }
        if m.ports.is_empty() {
            self.line(&format!("{head} () {{"));
        } else {
            self.line(&format!("{head} ("));
            let dir_width = m.ports.iter().map(|p| p.direction.as_str().len()).max().unwrap_or(0);
            let rows: Vec<_> = m
                .ports
                .iter()
                .map(|p| {
                    let mut rest = format!("{:<dir_width$} ", p.direction.as_str());
                    if let Some(d) = &p.domain {
                        rest.push_str(&format!("`{} ", d.name));
                    }
                    rest.push_str(&format_type(&p.ty));
                    Row { trivia: &p.trivia, name: &p.name.name, rest }
                })
                .collect();
            self.rows(&rows);
            self.line(") {");
        }
        self.module_items(&m.body, &m.end_comments);
        self.line("}");
        self.trailing(&m.trivia);
    }

    fn rows_with_prefix(&mut self, rows: &[Row<'_>], prefix: &str) {
        let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
        self.level += 1;
        for r in rows {
            self.leading(r.trivia);
            self.line(&format!("{prefix}{:<width$} {},", format!("{}:", r.name), r.rest, width = width + 1));
            self.trailing(r.trivia);
        }
        self.level -= 1;
    }

    fn module_items(&mut self, items: &[ModuleItem], end_comments: &[Comment]) {
        self.level += 1;
        let mut prev_simple: Option<bool> = None;
        for item in items {
            let simple = is_simple(item);
            if let Some(prev) = prev_simple {
                if !(prev && simple) {
                    self.blank();
                }
            }
            self.module_item(item);
            prev_simple = Some(simple);
        }
        self.comments(end_comments);
        self.level -= 1;
    }

    fn module_item(&mut self, item: &ModuleItem) {
        self.leading(&item.trivia);
        match &item.kind {
            ModuleItemKind::Var(v) => {
                let domain = v.domain.as_ref().map(|d| format!("`{} ", d.name)).unwrap_or_default();
                self.line(&format!("var {}: {domain}{};", v.name.name, format_type(&v.ty)));
            }
            ModuleItemKind::Const(c) => self.const_decl(c),
            ModuleItemKind::Inst(i) => self.inst(i),
            ModuleItemKind::Assign(a) => {
                self.line(&format!("assign {} = {};", format_expr(&a.lhs), format_expr(&a.rhs)));
            }
            ModuleItemKind::AlwaysFf(ff) => {
                let head = match (&ff.clock, &ff.reset) {
                    (Some(c), Some(r)) => format!("always_ff ({}, {})", c.name, r.name),
                    (Some(c), None) => format!("always_ff ({})", c.name),
                    _ => "always_ff".to_string(),
                };
                self.block(&head, &ff.body);
            }
            ModuleItemKind::AlwaysComb(c) => self.block("always_comb", &c.body),
            ModuleItemKind::UnsafeCdc(u) => {
                self.line("unsafe (cdc) {");
                self.module_items(&u.items, &u.end_comments);
                self.line("}");
            }
            ModuleItemKind::Function(f) => self.function(f),
        }
        self.trailing(&item.trivia);
    }

    fn const_decl(&mut self, c: &ConstDecl) {
        self.leading(&c.trivia);
        self.line(&format!("const {}: {} = {};", c.name.name, format_type(&c.ty), format_expr(&c.value)));
        self.trailing(&c.trivia);
    }

    fn inst(&mut self, i: &InstDecl) {
        let mut head = format!("inst {}: {}", i.name.name, i.target.to_text());
        if !i.generic_args.is_empty() {
            let args: Vec<_> = i.generic_args.iter().map(Path::to_text).collect();
            head.push_str(&format!("::<{}>", args.join(", ")));
        }
        if !i.params.is_empty() {
            self.line(&format!("{head} #("));
            self.connections(&i.params);
            head = ")".to_string();
        }
        if i.ports.is_empty() {
            self.line(&format!("{head};"));
        } else {
            self.line(&format!("{head} ("));
            self.connections(&i.ports);
            self.line(");");
        }
    }

    fn connections(&mut self, conns: &[Connection]) {
        let rows: Vec<_> = conns
            .iter()
            .map(|c| Row { trivia: &c.trivia, name: &c.name.name, rest: format_expr(&c.expr) })
            .collect();
        self.rows(&rows);
    }

    fn function(&mut self, f: &FunctionDecl) {
        self.leading(&f.trivia);
        let multiline = f.args.iter().any(|a| a.trivia != Trivia::default());
        if multiline {
            self.line(&format!("function {} (", f.name.name));
            let rows: Vec<_> = f
                .args
                .iter()
                .map(|a| Row { trivia: &a.trivia, name: &a.name.name, rest: format_type(&a.ty) })
                .collect();
            self.rows(&rows);
            self.block(&format!(") -> {}", format_type(&f.ret)), &f.body);
        } else {
            let args: Vec<_> = f.args.iter().map(|a| format!("{}: {}", a.name.name, format_type(&a.ty))).collect();
            self.block(&format!("function {} ({}) -> {}", f.name.name, args.join(", "), format_type(&f.ret)), &f.body);
        }
        self.trailing(&f.trivia);
    }

    fn package(&mut self, pk: &PackageDecl) {
        self.leading(&pk.trivia);
        let vis = if pk.is_pub { "pub " } else { "" };
        self.line(&format!("{vis}package {} {{", pk.name.name));
        self.level += 1;
        let mut prev_const: Option<bool> = None;
        for item in &pk.items {
            let is_const = matches!(item, PackageItem::Const(_));
            if let Some(prev) = prev_const {
                if !(prev && is_const) {
                    self.blank();
                }
            }
            match item {
                PackageItem::Const(c) => self.const_decl(c),
                PackageItem::Function(f) => self.function(f),
            }
            prev_const = Some(is_const);
        }
        self.comments(&pk.end_comments);
        self.level -= 1;
        self.line("}");
        self.trailing(&pk.trivia);
    }

    /// Prints `head {`, the block's statements, and `}`.
    fn block(&mut self, head: &str, b: &Block) {
        self.line(&format!("{head} {{"));
        self.block_body(b);
        self.line("}");
    }

    fn block_body(&mut self, b: &Block) {
        self.level += 1;
        for s in &b.stmts {
            self.stmt(s);
        }
        self.comments(&b.end_comments);
        self.level -= 1;
    }

    fn stmt(&mut self, s: &Stmt) {
        self.leading(&s.trivia);
        self.stmt_kind(&s.kind, "");
        self.trailing(&s.trivia);
    }

    fn stmt_kind(&mut self, kind: &StmtKind, prefix: &str) {
        match kind {
            StmtKind::Assign { lhs, op, rhs } => {
                self.line(&format!("{} {} {};", format_expr(lhs), op.as_str(), format_expr(rhs)));
            }
            StmtKind::If { cond, then, otherwise } => {
                self.branch(&format!("{prefix}if {}", format_expr(cond)), then, otherwise.as_ref());
            }
            StmtKind::IfReset { then, otherwise, .. } => {
                self.branch(&format!("{prefix}if_reset"), then, otherwise.as_ref());
            }
            StmtKind::Return(e) => self.line(&format!("return {};", format_expr(e))),
            StmtKind::Block(b) => self.block(prefix.trim_end(), b),
            StmtKind::UnsafeCdc(b) => self.block("unsafe (cdc)", b),
        }
    }

    fn branch(&mut self, head: &str, then: &Block, otherwise: Option<&ElseBranch>) {
        self.line(&format!("{head} {{"));
        self.block_body(then);
        match otherwise {
            None => self.line("}"),
            Some(ElseBranch::Block(b)) => {
                self.line("} else {");
                self.block_body(b);
                self.line("}");
            }
            Some(ElseBranch::If(s)) => {
                // `} else if ... {` continues on the closing line.
                let mut nested = Printer { out: String::new(), level: self.level };
                nested.stmt_kind(&s.kind, "");
                let text = nested.out;
                let first_indent = INDENT.repeat(self.level);
                let rest = text.strip_prefix(&first_indent).unwrap_or(&text);
                self.out.push_str(&first_indent);
                self.out.push_str("} else ");
                self.out.push_str(rest);
            }
        }
    }
}

fn is_simple(item: &ModuleItem) -> bool {
    match &item.kind {
        ModuleItemKind::Var(_) | ModuleItemKind::Const(_) | ModuleItemKind::Assign(_) => true,
        ModuleItemKind::Inst(i) => i.params.is_empty() && i.ports.is_empty(),
        _ => false,
    }
}
