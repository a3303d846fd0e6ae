//! Recursive descent parser with precedence climbing for expressions.
//!
//! Errors are reported as diagnostics; the parser resynchronizes at the next
//! `;` or `}` and keeps going, so one run reports every independent error.

use crate::diag::{Code, Diagnostic};
use crate::lexer::{self, DocComment, Keyword, Lexed, Punct, Token, TokenKind, TriviaKind};
use crate::source::{FileId, Span};
use crate::syntax::ast::*;

pub struct ParseResult {
    pub file: SourceFile,
    pub diagnostics: Vec<Diagnostic>,
}

/// Lexes and parses one file.
pub fn parse_source(source: &str, file: FileId) -> ParseResult {
    let lexed = lexer::tokenize(source, file);
    let mut result = parse(lexed.clone());
    let mut diagnostics = lexed.diagnostics;
    diagnostics.append(&mut result.diagnostics);
    result.diagnostics = diagnostics;
    result
}

/// Parses a token stream. Lexer diagnostics in `lexed` are not repeated.
pub fn parse(lexed: Lexed) -> ParseResult {
    let file = lexed.tokens.last().map(|t| t.span.file).unwrap_or_default();
    let mut p = Parser::new(lexed);
    let items = p.source_items();
    let end = p.peek().span;
    let end_comments = p.take_leading(end.start).0;
    ParseResult { file: SourceFile { file, items, end_comments }, diagnostics: p.diags }
}

/// Parses a standalone expression such as `WIDTH-1`.
pub fn parse_expr_str(text: &str) -> Result<Expr, Vec<Diagnostic>> {
    let lexed = lexer::tokenize(text, FileId(0));
    let mut diags = lexed.diagnostics.clone();
    let mut p = Parser::new(lexed);
    let expr = p.expr();
    if expr.is_some() && p.peek().kind != TokenKind::Eof {
        p.error_expected(&["end of expression"]);
    }
    diags.append(&mut p.diags);
    match expr {
        Some(e) if diags.is_empty() => Ok(e),
        _ => Err(diags),
    }
}

type PResult<T> = Option<T>;

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    comments: Vec<(Comment, bool)>,
    next_comment: usize,
    docs: Vec<DocComment>,
    next_doc: usize,
    diags: Vec<Diagnostic>,
    in_always_ff: bool,
    /// Inside `<...>`: `>` closes the list instead of being an operator.
    in_angle: bool,
}

impl Parser {
    fn new(lexed: Lexed) -> Self {
        let comments = lexed
            .trivia
            .into_iter()
            .filter(|t| matches!(t.kind, TriviaKind::LineComment | TriviaKind::BlockComment))
            .map(|t| (Comment { text: t.text.trim_end().to_string(), span: t.span }, t.trailing))
            .collect();
        Parser {
            tokens: lexed.tokens,
            pos: 0,
            comments,
            next_comment: 0,
            docs: lexed.docs,
            next_doc: 0,
            diags: Vec::new(),
            in_always_ff: false,
            in_angle: false,
        }
    }

    // ---- token helpers ----

    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek_at(&self, n: usize) -> &Token {
        &self.tokens[(self.pos + n).min(self.tokens.len() - 1)]
    }

    fn prev_span(&self) -> Span {
        self.tokens[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if t.kind != TokenKind::Eof {
            self.pos += 1;
        }
        t
    }

    fn at(&self, p: Punct) -> bool {
        self.peek().is_punct(p)
    }

    fn at_kw(&self, k: Keyword) -> bool {
        self.peek().is_keyword(k)
    }

    fn eat(&mut self, p: Punct) -> bool {
        if self.at(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: Keyword) -> bool {
        if self.at_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn describe(t: &Token) -> String {
        match t.kind {
            TokenKind::Eof => "end of file".to_string(),
            _ => format!("`{}`", t.text),
        }
    }

    fn error_expected(&mut self, expected: &[&str]) {
        let t = self.peek().clone();
        let list = match expected {
            [one] => one.to_string(),
            many => format!("one of {}", many.join(", ")),
        };
        let code = if t.kind == TokenKind::Eof { Code::E0103 } else { Code::E0101 };
        let msg = if code == Code::E0103 {
            format!("unexpected end of file, expected {list}")
        } else {
            format!("expected {list}, found {}", Self::describe(&t))
        };
        self.diags.push(Diagnostic::new(code, t.span, msg));
    }

    fn expect(&mut self, p: Punct) -> PResult<Span> {
        if self.at(p) {
            Some(self.bump().span)
        } else {
            self.error_expected(&[&format!("`{}`", p.as_str())]);
            None
        }
    }

    fn expect_kw(&mut self, k: Keyword) -> PResult<Span> {
        if self.at_kw(k) {
            Some(self.bump().span)
        } else {
            self.error_expected(&[&format!("`{}`", k.as_str())]);
            None
        }
    }

    fn ident(&mut self) -> PResult<Ident> {
        if self.peek().kind == TokenKind::Ident {
            let t = self.bump();
            Some(Ident { name: t.text, span: t.span })
        } else {
            self.error_expected(&["identifier"]);
            None
        }
    }

    /// Expects the closing delimiter of a list opened at `open`.
    fn close(&mut self, p: Punct, open: Span) -> PResult<Span> {
        if self.at(p) {
            return Some(self.bump().span);
        }
        if self.peek().kind == TokenKind::Eof {
            self.diags.push(
                Diagnostic::new(Code::E0103, open, format!("unclosed delimiter, expected `{}`", p.as_str()))
                    .with_related(self.peek().span, "file ends here"),
            );
        } else {
            self.error_expected(&[&format!("`{}`", p.as_str())]);
        }
        None
    }

    /// Skips to just after the next `;`, or to (not past) the next `}`,
    /// at the current nesting depth. Always makes progress unless already
    /// at `}` or end of file.
    fn recover(&mut self) {
        let mut depth = 0usize;
        loop {
            let t = self.peek();
            match t.kind {
                TokenKind::Eof => return,
                TokenKind::Punct(Punct::RBrace) if depth == 0 => return,
                TokenKind::Punct(Punct::RBrace) => depth -= 1,
                TokenKind::Punct(Punct::LBrace) => depth += 1,
                TokenKind::Punct(Punct::Semi) if depth == 0 => {
                    self.bump();
                    return;
                }
                _ => {}
            }
            self.bump();
            if depth == 0 && self.prev_is(Punct::RBrace) {
                return;
            }
        }
    }

    fn prev_is(&self, p: Punct) -> bool {
        self.pos > 0 && self.tokens[self.pos - 1].is_punct(p)
    }

    // ---- comment attachment ----

    /// Claims every unclaimed comment that ends before `before`, plus the
    /// doc comment documenting the token at `before`.
    fn take_leading(&mut self, before: u32) -> (Vec<Comment>, Option<DocComment>) {
        let mut comments = Vec::new();
        while let Some((c, _)) = self.comments.get(self.next_comment) {
            if c.span.end > before {
                break;
            }
            comments.push(c.clone());
            self.next_comment += 1;
        }
        let mut doc = None;
        while let Some(d) = self.docs.get(self.next_doc) {
            if d.span.end > before {
                break;
            }
            let d = d.clone();
            self.next_doc += 1;
            if !d.trailing && d.attached_to.start == before {
                doc = Some(d);
            } else {
                let text = d.text.split('\n').map(|l| format!("///{l}")).collect::<Vec<_>>().join("\n");
                comments.push(Comment { text, span: d.span });
            }
        }
        comments.sort_by_key(|c| c.span.start);
        (comments, doc)
    }

    fn leading_trivia(&mut self) -> Trivia {
        let start = self.peek().span.start;
        let (leading, doc) = self.take_leading(start);
        Trivia { leading, doc, trailing: None, trailing_doc: None }
    }

    /// Claims a same-line comment or doc comment following the previous token.
    fn take_trailing(&mut self, trivia: &mut Trivia) {
        let prev = self.prev_span();
        let next_start = self.peek().span.start;
        if let Some(d) = self.docs.get(self.next_doc) {
            if d.trailing && d.attached_to == prev && d.span.start < next_start {
                trivia.trailing_doc = Some(d.clone());
                self.next_doc += 1;
                return;
            }
        }
        if let Some((c, trailing)) = self.comments.get(self.next_comment) {
            if *trailing && c.span.start >= prev.end && c.span.start < next_start {
                trivia.trailing = Some(c.clone());
                self.next_comment += 1;
            }
        }
    }

    fn end_comments(&mut self) -> Vec<Comment> {
        let start = self.peek().span.start;
        self.take_leading(start).0
    }

    // ---- items ----

    fn source_items(&mut self) -> Vec<Item> {
        let mut items = Vec::new();
        while self.peek().kind != TokenKind::Eof {
            let before = self.pos;
            match self.item() {
                Some(item) => items.push(item),
                None => {
                    self.recover_item();
                    if self.pos == before {
                        self.bump();
                    }
                }
            }
        }
        items
    }

    fn recover_item(&mut self) {
        while self.peek().kind != TokenKind::Eof {
            if self.at_kw(Keyword::Module) || self.at_kw(Keyword::Package) || self.at_kw(Keyword::Pub) {
                return;
            }
            if self.at(Punct::LBrace) {
                self.skip_balanced();
                continue;
            }
            self.bump();
        }
    }

    fn skip_balanced(&mut self) {
        let mut depth = 0usize;
        loop {
            let t = self.bump();
            match t.kind {
                TokenKind::Punct(Punct::LBrace) => depth += 1,
                TokenKind::Punct(Punct::RBrace) => {
                    depth -= 1;
                    if depth == 0 {
                        return;
                    }
                }
                TokenKind::Eof => return,
                _ => {}
            }
        }
    }

    fn item(&mut self) -> PResult<Item> {
        let trivia = self.leading_trivia();
        let start = self.peek().span;
        let is_pub = self.eat_kw(Keyword::Pub);
        if self.at_kw(Keyword::Module) {
            self.module(trivia, is_pub, start).map(Item::Module)
        } else if self.at_kw(Keyword::Package) {
            self.package(trivia, is_pub, start).map(Item::Package)
        } else {
            self.error_expected(&["`module`", "`package`"]);
            None
        }
    }

    /// Parses `open { elem , } close`, with an optional trailing comma.
    fn comma_list<T>(&mut self, open: Punct, close: Punct, mut elem: impl FnMut(&mut Self) -> PResult<T>) -> PResult<Vec<T>> {
        let open_span = self.expect(open)?;
        let mut out = Vec::new();
        while !self.at(close) {
            if self.peek().kind == TokenKind::Eof {
                return self.close(close, open_span).map(|_| out);
            }
            out.push(elem(self)?);
            if !self.eat(Punct::Comma) {
                break;
            }
        }
        self.close(close, open_span)?;
        Some(out)
    }

    /// Like `comma_list`, but elements carry trivia (leading comments,
    /// docs, and same-line comments after the comma).
    fn documented_list<T>(
        &mut self,
        open: Punct,
        close: Punct,
        mut elem: impl FnMut(&mut Self, Trivia) -> PResult<T>,
        trivia_of: fn(&mut T) -> &mut Trivia,
    ) -> PResult<Vec<T>> {
        let open_span = self.expect(open)?;
        let mut out = Vec::new();
        while !self.at(close) {
            if self.peek().kind == TokenKind::Eof {
                return self.close(close, open_span).map(|_| out);
            }
            let trivia = self.leading_trivia();
            let mut item = elem(self, trivia)?;
            let more = self.eat(Punct::Comma);
            self.take_trailing(trivia_of(&mut item));
            out.push(item);
            if !more {
                break;
            }
        }
        // Comments between the last element and the closer stay with it.
        if !out.is_empty() {
            let stray = self.end_comments();
            if let Some(last) = out.last_mut() {
                trivia_of(last).leading.extend(stray);
            }
        }
        self.close(close, open_span)?;
        Some(out)
    }

    fn module(&mut self, trivia: Trivia, is_pub: bool, start: Span) -> PResult<ModuleDecl> {
        self.expect_kw(Keyword::Module)?;
        let name = self.ident()?;
        let mut generic_params = Vec::new();
        if self.at(Punct::ColonColon) {
            self.bump();
            let saved = std::mem::replace(&mut self.in_angle, true);
            let params = self.comma_list(Punct::Lt, Punct::Gt, Self::ident);
            self.in_angle = saved;
            generic_params = params?;
        }
        let mut params = Vec::new();
        if self.eat(Punct::Hash) {
            params = self.documented_list(Punct::LParen, Punct::RParen, Self::param, |p| &mut p.trivia)?;
        }
        let mut ports = Vec::new();
        if self.at(Punct::LParen) {
            ports = self.documented_list(Punct::LParen, Punct::RParen, Self::port, |p| &mut p.trivia)?;
        }
        let (body, end_comments, end) = self.module_body()?;
        Some(ModuleDecl {
            trivia,
            is_pub,
            name,
            generic_params,
            params,
            ports,
            body,
            end_comments,
            span: start.to(end),
        })
    }

    fn module_body(&mut self) -> PResult<(Vec<ModuleItem>, Vec<Comment>, Span)> {
        let open = self.expect(Punct::LBrace)?;
        let mut body = Vec::new();
        loop {
            if self.at(Punct::RBrace) {
                break;
            }
            if self.peek().kind == TokenKind::Eof {
                self.close(Punct::RBrace, open);
                return None;
            }
            let before = self.pos;
            match self.module_item() {
                Some(item) => body.push(item),
                None => {
                    self.recover();
                    if self.pos == before && !self.at(Punct::RBrace) {
                        self.bump();
                    }
                }
            }
        }
        let end_comments = self.end_comments();
        let end = self.bump().span;
        Some((body, end_comments, end))
    }

    fn param(&mut self, trivia: Trivia) -> PResult<ParamDecl> {
        self.expect_kw(Keyword::Param)?;
        let name = self.ident()?;
        self.expect(Punct::Colon)?;
        let ty = self.type_spec()?;
        self.expect(Punct::Eq)?;
        let default = self.expr()?;
        Some(ParamDecl { trivia, name, ty, default })
    }

    fn port(&mut self, trivia: Trivia) -> PResult<PortDecl> {
        let name = self.ident()?;
        self.expect(Punct::Colon)?;
        let direction = if self.eat_kw(Keyword::Input) {
            Direction::Input
        } else if self.eat_kw(Keyword::Output) {
            Direction::Output
        } else {
            self.error_expected(&["`input`", "`output`"]);
            return None;
        };
        let domain = self.domain();
        let ty = self.type_spec()?;
        Some(PortDecl { trivia, name, direction, domain, ty })
    }

    fn domain(&mut self) -> Option<Ident> {
        if self.peek().kind == TokenKind::DomainTick {
            let t = self.bump();
            let span = Span { start: t.span.start + 1, column: t.span.column + 1, ..t.span };
            Some(Ident { name: t.text[1..].to_string(), span })
        } else {
            None
        }
    }

    fn type_spec(&mut self) -> PResult<TypeSpec> {
        let t = self.peek().clone();
        let kind = match t.kind {
            TokenKind::Keyword(k) => match k {
                Keyword::Clock => TypeKind::Clock,
                Keyword::ClockPosedge => TypeKind::ClockPosedge,
                Keyword::ClockNegedge => TypeKind::ClockNegedge,
                Keyword::Reset => TypeKind::Reset,
                Keyword::ResetAsyncHigh => TypeKind::ResetAsyncHigh,
                Keyword::ResetAsyncLow => TypeKind::ResetAsyncLow,
                Keyword::ResetSyncHigh => TypeKind::ResetSyncHigh,
                Keyword::ResetSyncLow => TypeKind::ResetSyncLow,
                Keyword::Logic => TypeKind::Logic,
                Keyword::Bit => TypeKind::Bit,
                Keyword::U32 => TypeKind::U32,
                Keyword::U64 => TypeKind::U64,
                _ => return self.type_error(),
            },
            _ => return self.type_error(),
        };
        self.bump();
        let mut packed = Vec::new();
        let mut unpacked = Vec::new();
        if kind.accepts_dims() {
            if self.at(Punct::Lt) {
                let saved = std::mem::replace(&mut self.in_angle, true);
                let dims = self.comma_list(Punct::Lt, Punct::Gt, Self::expr);
                self.in_angle = saved;
                packed = dims?;
            }
            if self.at(Punct::LBracket) {
                unpacked = self.comma_list(Punct::LBracket, Punct::RBracket, Self::expr)?;
            }
        }
        Some(TypeSpec { kind, packed, unpacked, span: t.span.to(self.prev_span()) })
    }

    fn type_error<T>(&mut self) -> PResult<T> {
        self.error_expected(&["type"]);
        None
    }

    fn package(&mut self, trivia: Trivia, is_pub: bool, start: Span) -> PResult<PackageDecl> {
        self.expect_kw(Keyword::Package)?;
        let name = self.ident()?;
        let open = self.expect(Punct::LBrace)?;
        let mut items = Vec::new();
        loop {
            if self.at(Punct::RBrace) {
                break;
            }
            if self.peek().kind == TokenKind::Eof {
                self.close(Punct::RBrace, open);
                return None;
            }
            let before = self.pos;
            let trivia = self.leading_trivia();
            let parsed = if self.at_kw(Keyword::Const) {
                self.const_decl(trivia).map(PackageItem::Const)
            } else if self.at_kw(Keyword::Function) {
                self.function(trivia).map(PackageItem::Function)
            } else {
                self.error_expected(&["`const`", "`function`"]);
                None
            };
            match parsed {
                Some(mut item) => {
                    let trivia = match &mut item {
                        PackageItem::Const(c) => &mut c.trivia,
                        PackageItem::Function(f) => &mut f.trivia,
                    };
                    self.take_trailing(trivia);
                    items.push(item);
                }
                None => {
                    self.recover();
                    if self.pos == before && !self.at(Punct::RBrace) {
                        self.bump();
                    }
                }
            }
        }
        let end_comments = self.end_comments();
        let end = self.bump().span;
        Some(PackageDecl { trivia, is_pub, name, items, end_comments, span: start.to(end) })
    }

    fn const_decl(&mut self, trivia: Trivia) -> PResult<ConstDecl> {
        self.expect_kw(Keyword::Const)?;
        let name = self.ident()?;
        self.expect(Punct::Colon)?;
        let ty = self.type_spec()?;
        self.expect(Punct::Eq)?;
        let value = self.expr()?;
        self.expect(Punct::Semi)?;
        Some(ConstDecl { trivia, name, ty, value })
    }

    fn function(&mut self, trivia: Trivia) -> PResult<FunctionDecl> {
        let start = self.expect_kw(Keyword::Function)?;
        let name = self.ident()?;
        let args = self.documented_list(
            Punct::LParen,
            Punct::RParen,
            |p, trivia| {
                let name = p.ident()?;
                p.expect(Punct::Colon)?;
                let ty = p.type_spec()?;
                Some(FunctionArg { trivia, name, ty })
            },
            |a| &mut a.trivia,
        )?;
        self.expect(Punct::Arrow)?;
        let ret = self.type_spec()?;
        let saved = std::mem::replace(&mut self.in_always_ff, false);
        let body = self.block();
        self.in_always_ff = saved;
        let body = body?;
        let span = start.to(body.span);
        Some(FunctionDecl { trivia, name, args, ret, body, span })
    }

    fn module_item(&mut self) -> PResult<ModuleItem> {
        let mut trivia = self.leading_trivia();
        let start = self.peek().span;
        let t = self.peek().clone();
        let kind = match t.kind {
            TokenKind::Keyword(Keyword::Var) => {
                self.bump();
                let name = self.ident()?;
                self.expect(Punct::Colon)?;
                let domain = self.domain();
                let ty = self.type_spec()?;
                self.expect(Punct::Semi)?;
                ModuleItemKind::Var(VarDecl { name, domain, ty })
            }
            TokenKind::Keyword(Keyword::Const) => {
                let c = self.const_decl(Trivia::default())?;
                ModuleItemKind::Const(c)
            }
            TokenKind::Keyword(Keyword::Inst) => ModuleItemKind::Inst(self.inst()?),
            TokenKind::Keyword(Keyword::Assign) => {
                self.bump();
                let lhs = self.lvalue()?;
                self.expect(Punct::Eq)?;
                let rhs = self.expr()?;
                self.expect(Punct::Semi)?;
                ModuleItemKind::Assign(AssignDecl { lhs, rhs })
            }
            TokenKind::Keyword(Keyword::AlwaysFf) => {
                let keyword = self.bump().span;
                let (mut clock, mut reset) = (None, None);
                if self.at(Punct::LParen) {
                    let open = self.bump().span;
                    clock = Some(self.ident()?);
                    if self.eat(Punct::Comma) && !self.at(Punct::RParen) {
                        reset = Some(self.ident()?);
                        self.eat(Punct::Comma);
                    }
                    self.close(Punct::RParen, open)?;
                }
                let saved = std::mem::replace(&mut self.in_always_ff, true);
                let body = self.block();
                self.in_always_ff = saved;
                ModuleItemKind::AlwaysFf(AlwaysFf { keyword, clock, reset, body: body? })
            }
            TokenKind::Keyword(Keyword::AlwaysComb) => {
                let keyword = self.bump().span;
                let body = self.block()?;
                ModuleItemKind::AlwaysComb(AlwaysComb { keyword, body })
            }
            TokenKind::Keyword(Keyword::Unsafe) => {
                self.unsafe_header()?;
                let (items, end_comments, _) = self.module_body()?;
                ModuleItemKind::UnsafeCdc(UnsafeItems { items, end_comments })
            }
            TokenKind::Keyword(Keyword::Function) => ModuleItemKind::Function(self.function(Trivia::default())?),
            _ => {
                self.error_expected(&[
                    "`var`",
                    "`const`",
                    "`inst`",
                    "`assign`",
                    "`always_ff`",
                    "`always_comb`",
                    "`unsafe`",
                    "`function`",
                ]);
                return None;
            }
        };
        let span = start.to(self.prev_span());
        self.take_trailing(&mut trivia);
        Some(ModuleItem { trivia, kind, span })
    }

    fn unsafe_header(&mut self) -> PResult<()> {
        self.expect_kw(Keyword::Unsafe)?;
        let open = self.expect(Punct::LParen)?;
        self.expect_kw(Keyword::Cdc)?;
        self.close(Punct::RParen, open)?;
        Some(())
    }

    fn inst(&mut self) -> PResult<InstDecl> {
        self.expect_kw(Keyword::Inst)?;
        let name = self.ident()?;
        self.expect(Punct::Colon)?;
        let target = self.path()?;
        let mut generic_args = Vec::new();
        if self.at(Punct::ColonColon) {
            self.bump();
            let saved = std::mem::replace(&mut self.in_angle, true);
            let args = self.comma_list(Punct::Lt, Punct::Gt, Self::path);
            self.in_angle = saved;
            generic_args = args?;
        }
        let mut params = Vec::new();
        if self.eat(Punct::Hash) {
            params = self.documented_list(Punct::LParen, Punct::RParen, Self::connection, |c| &mut c.trivia)?;
        }
        let mut ports = Vec::new();
        if self.at(Punct::LParen) {
            ports = self.documented_list(Punct::LParen, Punct::RParen, Self::connection, |c| &mut c.trivia)?;
        }
        self.expect(Punct::Semi)?;
        Some(InstDecl { name, target, generic_args, params, ports })
    }

    fn connection(&mut self, trivia: Trivia) -> PResult<Connection> {
        let name = self.ident()?;
        self.expect(Punct::Colon)?;
        let expr = self.expr()?;
        Some(Connection { trivia, name, expr })
    }

    fn path(&mut self) -> PResult<Path> {
        let first = self.ident()?;
        let mut segments = vec![first];
        while self.at(Punct::ColonColon) && self.peek_at(1).kind == TokenKind::Ident {
            self.bump();
            segments.push(self.ident()?);
        }
        let span = segments[0].span.to(segments.last().unwrap().span);
        Some(Path { segments, span })
    }

    // ---- statements ----

    fn block(&mut self) -> PResult<Block> {
        let open = self.expect(Punct::LBrace)?;
        let mut stmts = Vec::new();
        loop {
            if self.at(Punct::RBrace) {
                break;
            }
            if self.peek().kind == TokenKind::Eof {
                self.close(Punct::RBrace, open);
                return None;
            }
            let before = self.pos;
            match self.stmt() {
                Some(s) => stmts.push(s),
                None => {
                    self.recover();
                    if self.pos == before && !self.at(Punct::RBrace) {
                        self.bump();
                    }
                }
            }
        }
        let end_comments = self.end_comments();
        let end = self.bump().span;
        Some(Block { stmts, end_comments, span: open.to(end) })
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let mut trivia = self.leading_trivia();
        let mut stmt = self.stmt_inner(Trivia::default())?;
        self.take_trailing(&mut trivia);
        stmt.trivia = trivia;
        Some(stmt)
    }

    fn stmt_inner(&mut self, trivia: Trivia) -> PResult<Stmt> {
        let start = self.peek().span;
        let t = self.peek().clone();
        let kind = match t.kind {
            TokenKind::Keyword(Keyword::If) => {
                self.bump();
                let cond = self.expr()?;
                let then = self.block()?;
                let otherwise = self.else_branch()?;
                StmtKind::If { cond, then, otherwise }
            }
            TokenKind::Keyword(Keyword::IfReset) => {
                let keyword = self.bump().span;
                if !self.in_always_ff {
                    self.diags.push(Diagnostic::new(
                        Code::E0102,
                        keyword,
                        "`if_reset` is only allowed inside `always_ff`",
                    ));
                }
                let then = self.block()?;
                let otherwise = self.else_branch()?;
                StmtKind::IfReset { keyword, then, otherwise }
            }
            TokenKind::Keyword(Keyword::Return) => {
                self.bump();
                let e = self.expr()?;
                self.expect(Punct::Semi)?;
                StmtKind::Return(e)
            }
            TokenKind::Keyword(Keyword::Unsafe) => {
                self.unsafe_header()?;
                StmtKind::UnsafeCdc(self.block()?)
            }
            TokenKind::Punct(Punct::LBrace) => StmtKind::Block(self.block()?),
            TokenKind::Ident => {
                let lhs = self.lvalue()?;
                let op = match self.peek().kind {
                    TokenKind::Punct(p) => assign_op(p),
                    _ => None,
                };
                let Some(op) = op else {
                    self.error_expected(&["assignment operator"]);
                    return None;
                };
                self.bump();
                let rhs = self.expr()?;
                self.expect(Punct::Semi)?;
                StmtKind::Assign { lhs, op, rhs }
            }
            _ => {
                self.error_expected(&["statement"]);
                return None;
            }
        };
        Some(Stmt { trivia, kind, span: start.to(self.prev_span()) })
    }

    fn else_branch(&mut self) -> PResult<Option<ElseBranch>> {
        if !self.eat_kw(Keyword::Else) {
            return Some(None);
        }
        if self.at_kw(Keyword::If) || self.at_kw(Keyword::IfReset) {
            Some(Some(ElseBranch::If(Box::new(self.stmt_inner(Trivia::default())?))))
        } else {
            Some(Some(ElseBranch::Block(self.block()?)))
        }
    }

    fn lvalue(&mut self) -> PResult<Expr> {
        let e = self.postfix()?;
        if !e.is_lvalue() {
            self.diags.push(Diagnostic::new(Code::E0101, e.span, "expected an assignable signal"));
            return None;
        }
        Some(e)
    }

    // ---- expressions ----

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(0)
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        let TokenKind::Punct(p) = self.peek().kind else {
            return None;
        };
        let op = match p {
            Punct::Star => BinaryOp::Mul,
            Punct::Slash => BinaryOp::Div,
            Punct::Percent => BinaryOp::Rem,
            Punct::Plus => BinaryOp::Add,
            Punct::Minus => BinaryOp::Sub,
            Punct::Shl => BinaryOp::Shl,
            Punct::Shr => BinaryOp::Shr,
            Punct::Lt => BinaryOp::Lt,
            Punct::Le => BinaryOp::Le,
            Punct::Gt => BinaryOp::Gt,
            Punct::Ge => BinaryOp::Ge,
            Punct::EqEq => BinaryOp::Eq,
            Punct::Ne => BinaryOp::Ne,
            Punct::Amp => BinaryOp::BitAnd,
            Punct::Caret => BinaryOp::BitXor,
            Punct::Pipe => BinaryOp::BitOr,
            Punct::AndAnd => BinaryOp::And,
            Punct::OrOr => BinaryOp::Or,
            _ => return None,
        };
        if self.in_angle && matches!(op, BinaryOp::Gt | BinaryOp::Ge | BinaryOp::Shr) {
            return None;
        }
        Some(op)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op() {
            let prec = op.precedence();
            if prec <= min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec)?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr { kind: ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }, span };
        }
        Some(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let op = match self.peek().kind {
            TokenKind::Punct(Punct::Bang) => Some(UnaryOp::Not),
            TokenKind::Punct(Punct::Tilde) => Some(UnaryOp::BitNot),
            TokenKind::Punct(Punct::Minus) => Some(UnaryOp::Neg),
            _ => None,
        };
        match op {
            Some(op) => {
                let start = self.bump().span;
                let operand = self.unary()?;
                let span = start.to(operand.span);
                Some(Expr { kind: ExprKind::Unary { op, operand: Box::new(operand) }, span })
            }
            None => self.postfix(),
        }
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        while self.at(Punct::LBracket) {
            let open = self.bump().span;
            let saved = std::mem::replace(&mut self.in_angle, false);
            let first = self.expr();
            let second = match first {
                Some(_) if self.eat(Punct::Colon) => self.expr().map(Some),
                Some(_) => Some(None),
                None => None,
            };
            self.in_angle = saved;
            let (first, second) = (first?, second?);
            let end = self.close(Punct::RBracket, open)?;
            let span = e.span.to(end);
            e = match second {
                Some(lo) => Expr { kind: ExprKind::Range { base: Box::new(e), hi: Box::new(first), lo: Box::new(lo) }, span },
                None => Expr { kind: ExprKind::Index { base: Box::new(e), index: Box::new(first) }, span },
            };
        }
        Some(e)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let t = self.peek().clone();
        match t.kind {
            TokenKind::Ident => {
                let path = self.path()?;
                if self.at(Punct::LParen) {
                    let saved = std::mem::replace(&mut self.in_angle, false);
                    let args = self.comma_list(Punct::LParen, Punct::RParen, Self::expr);
                    self.in_angle = saved;
                    let args = args?;
                    let span = path.span.to(self.prev_span());
                    Some(Expr { kind: ExprKind::Call { path, args }, span })
                } else {
                    let span = path.span;
                    Some(Expr { kind: ExprKind::Path(path), span })
                }
            }
            TokenKind::SizedLiteral => {
                self.bump();
                Some(Expr { kind: sized_literal(&t.text), span: t.span })
            }
            TokenKind::DecimalLiteral => {
                self.bump();
                let value = digits_value(&t.text, 10);
                Some(Expr { kind: ExprKind::Decimal { text: t.text, value }, span: t.span })
            }
            TokenKind::Punct(Punct::LParen) => {
                let open = self.bump().span;
                let saved = std::mem::replace(&mut self.in_angle, false);
                let inner = self.expr();
                self.in_angle = saved;
                let inner = inner?;
                let end = self.close(Punct::RParen, open)?;
                Some(Expr { kind: ExprKind::Paren(Box::new(inner)), span: open.to(end) })
            }
            _ => {
                self.error_expected(&["expression"]);
                None
            }
        }
    }
}

fn assign_op(p: Punct) -> Option<AssignOp> {
    Some(match p {
        Punct::Eq => AssignOp::Assign,
        Punct::PlusEq => AssignOp::Add,
        Punct::MinusEq => AssignOp::Sub,
        Punct::StarEq => AssignOp::Mul,
        Punct::AmpEq => AssignOp::And,
        Punct::PipeEq => AssignOp::Or,
        Punct::CaretEq => AssignOp::Xor,
        Punct::ShlEq => AssignOp::Shl,
        Punct::ShrEq => AssignOp::Shr,
        _ => return None,
    })
}

/// Value of a digit string with `_` separators; `None` on a bad digit,
/// no digits, or more than 128 bits.
pub fn digits_value(digits: &str, radix: u32) -> Option<u128> {
    let mut value: u128 = 0;
    let mut any = false;
    for c in digits.chars().filter(|&c| c != '_') {
        let d = c.to_digit(radix)?;
        value = value.checked_mul(radix as u128)?.checked_add(d as u128)?;
        any = true;
    }
    any.then_some(value)
}

fn sized_literal(text: &str) -> ExprKind {
    let (width_text, rest) = text.split_once('\'').unwrap_or((text, ""));
    let mut chars = rest.chars();
    let base = match chars.next().and_then(lexer::base_radix) {
        Some(2) => Base::Bin,
        Some(16) => Base::Hex,
        _ => Base::Dec,
    };
    let digits = chars.as_str();
    let width = digits_value(width_text, 10).and_then(|w| u32::try_from(w).ok());
    ExprKind::Sized { text: text.to_string(), width, base, value: digits_value(digits, base.radix()) }
}
