//! Syntax tree. Spans are carried everywhere; structural comparison
//! ignores them (see [`structural_eq`]).

use serde::Serialize;

use crate::lexer::DocComment;
use crate::source::{FileId, Span};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

impl Ident {
    pub fn as_str(&self) -> &str {
        &self.name
    }
}

/// A regular `//` or `/* */` comment kept for the formatter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Comment {
    pub text: String,
    pub span: Span,
}

/// Comments and doc comments around a list element.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Trivia {
    pub leading: Vec<Comment>,
    pub doc: Option<DocComment>,
    /// Same-line comment after the element.
    pub trailing: Option<Comment>,
    /// Same-line `///` after the element (port/param documentation).
    pub trailing_doc: Option<DocComment>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceFile {
    pub file: FileId,
    pub items: Vec<Item>,
    pub end_comments: Vec<Comment>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Item {
    Module(ModuleDecl),
    Package(PackageDecl),
}

impl Item {
    pub fn name(&self) -> &Ident {
        match self {
            Item::Module(m) => &m.name,
            Item::Package(p) => &p.name,
        }
    }

    pub fn is_pub(&self) -> bool {
        match self {
            Item::Module(m) => m.is_pub,
            Item::Package(p) => p.is_pub,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModuleDecl {
    pub trivia: Trivia,
    pub is_pub: bool,
    pub name: Ident,
    pub generic_params: Vec<Ident>,
    pub params: Vec<ParamDecl>,
    pub ports: Vec<PortDecl>,
    pub body: Vec<ModuleItem>,
    pub end_comments: Vec<Comment>,
    pub span: Span,
}

impl ModuleDecl {
    pub fn doc(&self) -> Option<&DocComment> {
        self.trivia.doc.as_ref()
    }

    pub fn is_generic(&self) -> bool {
        !self.generic_params.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PackageDecl {
    pub trivia: Trivia,
    pub is_pub: bool,
    pub name: Ident,
    pub items: Vec<PackageItem>,
    pub end_comments: Vec<Comment>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PackageItem {
    Const(ConstDecl),
    Function(FunctionDecl),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamDecl {
    pub trivia: Trivia,
    pub name: Ident,
    pub ty: TypeSpec,
    pub default: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Direction {
    Input,
    Output,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Input => "input",
            Direction::Output => "output",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PortDecl {
    pub trivia: Trivia,
    pub name: Ident,
    pub direction: Direction,
    /// Clock domain label without the leading tick.
    pub domain: Option<Ident>,
    pub ty: TypeSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TypeKind {
    Clock,
    ClockPosedge,
    ClockNegedge,
    Reset,
    ResetAsyncHigh,
    ResetAsyncLow,
    ResetSyncHigh,
    ResetSyncLow,
    Logic,
    Bit,
    U32,
    U64,
}

impl TypeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TypeKind::Clock => "clock",
            TypeKind::ClockPosedge => "clock_posedge",
            TypeKind::ClockNegedge => "clock_negedge",
            TypeKind::Reset => "reset",
            TypeKind::ResetAsyncHigh => "reset_async_high",
            TypeKind::ResetAsyncLow => "reset_async_low",
            TypeKind::ResetSyncHigh => "reset_sync_high",
            TypeKind::ResetSyncLow => "reset_sync_low",
            TypeKind::Logic => "logic",
            TypeKind::Bit => "bit",
            TypeKind::U32 => "u32",
            TypeKind::U64 => "u64",
        }
    }

    pub fn is_clock(self) -> bool {
        matches!(self, TypeKind::Clock | TypeKind::ClockPosedge | TypeKind::ClockNegedge)
    }

    pub fn is_reset(self) -> bool {
        matches!(
            self,
            TypeKind::Reset
                | TypeKind::ResetAsyncHigh
                | TypeKind::ResetAsyncLow
                | TypeKind::ResetSyncHigh
                | TypeKind::ResetSyncLow
        )
    }

    pub fn accepts_dims(self) -> bool {
        matches!(self, TypeKind::Logic | TypeKind::Bit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeSpec {
    pub kind: TypeKind,
    /// From `<...>`, outermost first.
    pub packed: Vec<Expr>,
    /// From `[...]`.
    pub unpacked: Vec<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModuleItem {
    pub trivia: Trivia,
    pub kind: ModuleItemKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ModuleItemKind {
    Var(VarDecl),
    Const(ConstDecl),
    Inst(InstDecl),
    Assign(AssignDecl),
    AlwaysFf(AlwaysFf),
    AlwaysComb(AlwaysComb),
    /// Module-level `unsafe (cdc) { ... }` wrapping other items.
    UnsafeCdc(UnsafeItems),
    Function(FunctionDecl),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarDecl {
    pub name: Ident,
    pub domain: Option<Ident>,
    pub ty: TypeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstDecl {
    pub trivia: Trivia,
    pub name: Ident,
    pub ty: TypeSpec,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Connection {
    pub trivia: Trivia,
    pub name: Ident,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstDecl {
    pub name: Ident,
    pub target: Path,
    pub generic_args: Vec<Path>,
    pub params: Vec<Connection>,
    pub ports: Vec<Connection>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignDecl {
    pub lhs: Expr,
    pub rhs: Expr,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlwaysFf {
    pub keyword: Span,
    pub clock: Option<Ident>,
    pub reset: Option<Ident>,
    pub body: Block,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlwaysComb {
    pub keyword: Span,
    pub body: Block,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnsafeItems {
    pub items: Vec<ModuleItem>,
    pub end_comments: Vec<Comment>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionDecl {
    pub trivia: Trivia,
    pub name: Ident,
    pub args: Vec<FunctionArg>,
    pub ret: TypeSpec,
    pub body: Block,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionArg {
    pub trivia: Trivia,
    pub name: Ident,
    pub ty: TypeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub end_comments: Vec<Comment>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stmt {
    pub trivia: Trivia,
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum AssignOp {
    Assign,
    Add,
    Sub,
    Mul,
    And,
    Or,
    Xor,
    Shl,
    Shr,
}

impl AssignOp {
    pub fn as_str(self) -> &'static str {
        match self {
            AssignOp::Assign => "=",
            AssignOp::Add => "+=",
            AssignOp::Sub => "-=",
            AssignOp::Mul => "*=",
            AssignOp::And => "&=",
            AssignOp::Or => "|=",
            AssignOp::Xor => "^=",
            AssignOp::Shl => "<<=",
            AssignOp::Shr => ">>=",
        }
    }

    /// Binary operator a compound assignment expands to.
    pub fn binary(self) -> Option<BinaryOp> {
        Some(match self {
            AssignOp::Assign => return None,
            AssignOp::Add => BinaryOp::Add,
            AssignOp::Sub => BinaryOp::Sub,
            AssignOp::Mul => BinaryOp::Mul,
            AssignOp::And => BinaryOp::BitAnd,
            AssignOp::Or => BinaryOp::BitOr,
            AssignOp::Xor => BinaryOp::BitXor,
            AssignOp::Shl => BinaryOp::Shl,
            AssignOp::Shr => BinaryOp::Shr,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ElseBranch {
    If(Box<Stmt>),
    Block(Block),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum StmtKind {
    Assign { lhs: Expr, op: AssignOp, rhs: Expr },
    If { cond: Expr, then: Block, otherwise: Option<ElseBranch> },
    IfReset { keyword: Span, then: Block, otherwise: Option<ElseBranch> },
    Return(Expr),
    Block(Block),
    UnsafeCdc(Block),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Path {
    pub segments: Vec<Ident>,
    pub span: Span,
}

impl Path {
    pub fn single(ident: Ident) -> Path {
        let span = ident.span;
        Path { segments: vec![ident], span }
    }

    pub fn is_single(&self) -> bool {
        self.segments.len() == 1
    }

    pub fn first(&self) -> &Ident {
        &self.segments[0]
    }

    pub fn last(&self) -> &Ident {
        self.segments.last().expect("paths are never empty")
    }

    pub fn to_text(&self) -> String {
        self.segments.iter().map(|s| s.name.as_str()).collect::<Vec<_>>().join("::")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum UnaryOp {
    Not,
    BitNot,
    Neg,
}

impl UnaryOp {
    pub fn as_str(self) -> &'static str {
        match self {
            UnaryOp::Not => "!",
            UnaryOp::BitNot => "~",
            UnaryOp::Neg => "-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BinaryOp {
    Mul,
    Div,
    Rem,
    Add,
    Sub,
    Shl,
    Shr,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    BitAnd,
    BitXor,
    BitOr,
    And,
    Or,
}

impl BinaryOp {
    pub fn as_str(self) -> &'static str {
        match self {
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Shl => "<<",
            BinaryOp::Shr => ">>",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::BitAnd => "&",
            BinaryOp::BitXor => "^",
            BinaryOp::BitOr => "|",
            BinaryOp::And => "&&",
            BinaryOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter. Follows SystemVerilog.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem => 10,
            BinaryOp::Add | BinaryOp::Sub => 9,
            BinaryOp::Shl | BinaryOp::Shr => 8,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 7,
            BinaryOp::Eq | BinaryOp::Ne => 6,
            BinaryOp::BitAnd => 5,
            BinaryOp::BitXor => 4,
            BinaryOp::BitOr => 3,
            BinaryOp::And => 2,
            BinaryOp::Or => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Base {
    Bin,
    Dec,
    Hex,
}

impl Base {
    pub fn radix(self) -> u32 {
        match self {
            Base::Bin => 2,
            Base::Dec => 10,
            Base::Hex => 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ExprKind {
    Path(Path),
    Sized {
        /// Verbatim source text, e.g. `8'hff`.
        text: String,
        width: Option<u32>,
        base: Base,
        /// `None` when the digits are malformed or exceed 128 bits.
        value: Option<u128>,
    },
    Decimal {
        text: String,
        value: Option<u128>,
    },
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Index {
        base: Box<Expr>,
        index: Box<Expr>,
    },
    Range {
        base: Box<Expr>,
        hi: Box<Expr>,
        lo: Box<Expr>,
    },
    Call {
        path: Path,
        args: Vec<Expr>,
    },
    Paren(Box<Expr>),
}

impl Expr {
    /// Signal named by an assignable expression (`a`, `a[i]`, `a[h:l]`).
    pub fn lvalue_root(&self) -> Option<&Path> {
        match &self.kind {
            ExprKind::Path(p) => Some(p),
            ExprKind::Index { base, .. } | ExprKind::Range { base, .. } => base.lvalue_root(),
            _ => None,
        }
    }

    pub fn is_lvalue(&self) -> bool {
        self.lvalue_root().is_some_and(Path::is_single)
    }

    /// Visits every sub-expression, parents first.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Path(_) | ExprKind::Sized { .. } | ExprKind::Decimal { .. } => {}
            ExprKind::Unary { operand, .. } => operand.walk(f),
            ExprKind::Binary { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            ExprKind::Index { base, index } => {
                base.walk(f);
                index.walk(f);
            }
            ExprKind::Range { base, hi, lo } => {
                base.walk(f);
                hi.walk(f);
                lo.walk(f);
            }
            ExprKind::Call { args, .. } => args.iter().for_each(|a| a.walk(f)),
            ExprKind::Paren(inner) => inner.walk(f),
        }
    }
}

impl Block {
    /// Visits every statement, including nested ones, parents first.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        for s in &self.stmts {
            s.walk(f);
        }
    }
}

impl Stmt {
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        match &self.kind {
            StmtKind::Assign { .. } | StmtKind::Return(_) => {}
            StmtKind::If { then, otherwise, .. } | StmtKind::IfReset { then, otherwise, .. } => {
                then.walk(f);
                match otherwise {
                    Some(ElseBranch::If(s)) => s.walk(f),
                    Some(ElseBranch::Block(b)) => b.walk(f),
                    None => {}
                }
            }
            StmtKind::Block(b) | StmtKind::UnsafeCdc(b) => b.walk(f),
        }
    }
}

/// Flattens module-level `unsafe (cdc)` wrappers, reporting whether each
/// item sits inside one.
pub fn flatten_items(items: &[ModuleItem]) -> Vec<(&ModuleItem, bool)> {
    fn go<'a>(items: &'a [ModuleItem], in_unsafe: bool, out: &mut Vec<(&'a ModuleItem, bool)>) {
        for item in items {
            match &item.kind {
                ModuleItemKind::UnsafeCdc(u) => go(&u.items, true, out),
                _ => out.push((item, in_unsafe)),
            }
        }
    }
    let mut out = Vec::new();
    go(items, false, &mut out);
    out
}

/// Compares two trees ignoring every span.
pub fn structural_eq<T: Serialize>(a: &T, b: &T) -> bool {
    strip_spans(serde_json::to_value(a).expect("ast serializes"))
        == strip_spans(serde_json::to_value(b).expect("ast serializes"))
}

fn strip_spans(v: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match v {
        Value::Object(map) => Value::Object(
            map.into_iter()
                .filter(|(k, _)| !matches!(k.as_str(), "span" | "keyword" | "attached_to" | "file"))
                .map(|(k, v)| (k, strip_spans(v)))
                .collect(),
        ),
        Value::Array(items) => Value::Array(items.into_iter().map(strip_spans).collect()),
        other => other,
    }
}
