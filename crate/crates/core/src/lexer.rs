//! Tokenizer. Produces tokens, trivia (whitespace and comments), and
//! grouped `///` documentation comments.
//!
//! Every byte of the input ends up in exactly one token or trivia entry, so
//! the source can be rebuilt from the lexer output.

use serde::Serialize;

use crate::diag::{Code, Diagnostic};
use crate::source::{FileId, Span};

macro_rules! keywords {
    ($($variant:ident => $text:literal,)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
        pub enum Keyword {
            $($variant,)*
        }

        impl Keyword {
            pub fn lookup(s: &str) -> Option<Keyword> {
                match s {
                    $($text => Some(Keyword::$variant),)*
                    _ => None,
                }
            }

            pub fn as_str(self) -> &'static str {
                match self {
                    $(Keyword::$variant => $text,)*
                }
            }
        }
    };
}

keywords! {
    Module => "module",
    Package => "package",
    Param => "param",
    Const => "const",
    Var => "var",
    Inst => "inst",
    Input => "input",
    Output => "output",
    AlwaysFf => "always_ff",
    AlwaysComb => "always_comb",
    Assign => "assign",
    If => "if",
    Else => "else",
    IfReset => "if_reset",
    Unsafe => "unsafe",
    Cdc => "cdc",
    Function => "function",
    Return => "return",
    Pub => "pub",
    Clock => "clock",
    ClockPosedge => "clock_posedge",
    ClockNegedge => "clock_negedge",
    Reset => "reset",
    ResetAsyncHigh => "reset_async_high",
    ResetAsyncLow => "reset_async_low",
    ResetSyncHigh => "reset_sync_high",
    ResetSyncLow => "reset_sync_low",
    Logic => "logic",
    Bit => "bit",
    U32 => "u32",
    U64 => "u64",
}

macro_rules! puncts {
    ($($variant:ident => $text:literal,)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
        pub enum Punct {
            $($variant,)*
        }

        impl Punct {
            /// Longest spelling first, so a linear scan gives maximal munch.
            const TABLE: &'static [(&'static str, Punct)] = &[$(($text, Punct::$variant),)*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(Punct::$variant => $text,)*
                }
            }
        }
    };
}

puncts! {
    ShlEq => "<<=",
    ShrEq => ">>=",
    ColonColon => "::",
    PlusEq => "+=",
    MinusEq => "-=",
    StarEq => "*=",
    AmpEq => "&=",
    PipeEq => "|=",
    CaretEq => "^=",
    Shl => "<<",
    Shr => ">>",
    Le => "<=",
    Ge => ">=",
    EqEq => "==",
    Ne => "!=",
    AndAnd => "&&",
    OrOr => "||",
    Arrow => "->",
    LParen => "(",
    RParen => ")",
    LBrace => "{",
    RBrace => "}",
    LBracket => "[",
    RBracket => "]",
    Lt => "<",
    Gt => ">",
    Comma => ",",
    Semi => ";",
    Colon => ":",
    Hash => "#",
    Eq => "=",
    Plus => "+",
    Minus => "-",
    Star => "*",
    Slash => "/",
    Percent => "%",
    Amp => "&",
    Caret => "^",
    Pipe => "|",
    Bang => "!",
    Tilde => "~",
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TokenKind {
    Keyword(Keyword),
    Ident,
    /// `<width>'<base><digits>`, e.g. `8'hff`.
    SizedLiteral,
    DecimalLiteral,
    Punct(Punct),
    /// Clock domain annotation such as `` `a ``.
    DomainTick,
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub span: Span,
}

impl Token {
    pub fn is_punct(&self, p: Punct) -> bool {
        self.kind == TokenKind::Punct(p)
    }

    pub fn is_keyword(&self, k: Keyword) -> bool {
        self.kind == TokenKind::Keyword(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriviaKind {
    Whitespace,
    LineComment,
    BlockComment,
    /// One `///` line. Also grouped into a [`DocComment`].
    DocLine,
    /// Bytes that were reported as E0001.
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trivia {
    pub kind: TriviaKind,
    pub text: String,
    pub span: Span,
    /// Comment starts on the same line as the preceding token.
    pub trailing: bool,
}

/// One or more consecutive `///` lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DocComment {
    /// Line bodies with the `///` marker removed, joined by `\n`.
    pub text: String,
    pub span: Span,
    /// Token the comment documents: the next token for a leading block,
    /// the previous token for a same-line trailing comment.
    pub attached_to: Span,
    pub trailing: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Lexed {
    pub tokens: Vec<Token>,
    pub trivia: Vec<Trivia>,
    pub docs: Vec<DocComment>,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

pub fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Digit alphabet of a sized-literal base character, or `None` when the
/// character is not a base.
pub fn base_radix(base: char) -> Option<u32> {
    match base.to_ascii_lowercase() {
        'b' => Some(2),
        'd' => Some(10),
        'h' => Some(16),
        _ => None,
    }
}

struct Cursor<'a> {
    src: &'a str,
    file: FileId,
    pos: usize,
    line: u32,
    column: u32,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_nth(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn bump_while(&mut self, f: impl Fn(char) -> bool) {
        while self.peek().is_some_and(&f) {
            self.bump();
        }
    }

    fn span_from(&self, start: (usize, u32, u32)) -> Span {
        Span {
            file: self.file,
            start: start.0 as u32,
            end: self.pos as u32,
            line: start.1,
            column: start.2,
        }
    }

    fn mark(&self) -> (usize, u32, u32) {
        (self.pos, self.line, self.column)
    }
}

pub fn tokenize(source: &str, file: FileId) -> Lexed {
    let mut cur = Cursor { src: source, file, pos: 0, line: 1, column: 1 };
    let mut out = Lexed::default();
    let mut last_token_line: Option<u32> = None;

    while let Some(c) = cur.peek() {
        let start = cur.mark();
        let trailing = last_token_line == Some(cur.line);

        if c.is_whitespace() {
            cur.bump_while(char::is_whitespace);
            push_trivia(&mut out, &cur, start, TriviaKind::Whitespace, false);
            continue;
        }

        if cur.rest().starts_with("//") {
            let is_doc = cur.rest().starts_with("///") && !cur.rest().starts_with("////");
            cur.bump_while(|c| c != '\n');
            let kind = if is_doc { TriviaKind::DocLine } else { TriviaKind::LineComment };
            push_trivia(&mut out, &cur, start, kind, trailing);
            continue;
        }

        if cur.rest().starts_with("/*") {
            cur.bump();
            cur.bump();
            let mut closed = false;
            while cur.peek().is_some() {
                if cur.rest().starts_with("*/") {
                    cur.bump();
                    cur.bump();
                    closed = true;
                    break;
                }
                cur.bump();
            }
            if !closed {
                out.diagnostics.push(Diagnostic::new(
                    Code::E0001,
                    cur.span_from(start),
                    "unterminated block comment",
                ));
            }
            push_trivia(&mut out, &cur, start, TriviaKind::BlockComment, trailing);
            continue;
        }

        let kind = if is_ident_start(c) {
            cur.bump_while(is_ident_continue);
            let text = &source[start.0..cur.pos];
            match Keyword::lookup(text) {
                Some(k) => TokenKind::Keyword(k),
                None => TokenKind::Ident,
            }
        } else if c.is_ascii_digit() {
            lex_number(&mut cur, start, &mut out.diagnostics)
        } else if c == '`' && cur.peek_nth(1).is_some_and(is_ident_start) {
            cur.bump();
            cur.bump_while(is_ident_continue);
            TokenKind::DomainTick
        } else if let Some(&(text, p)) = Punct::TABLE.iter().find(|(t, _)| cur.rest().starts_with(t)) {
            for _ in 0..text.len() {
                cur.bump();
            }
            TokenKind::Punct(p)
        } else {
            cur.bump();
            let span = cur.span_from(start);
            out.diagnostics.push(Diagnostic::new(
                Code::E0001,
                span,
                format!("invalid character `{}`", c.escape_default()),
            ));
            push_trivia(&mut out, &cur, start, TriviaKind::Invalid, false);
            continue;
        };

        let span = cur.span_from(start);
        out.tokens.push(Token { kind, text: source[start.0..cur.pos].to_string(), span });
        last_token_line = Some(cur.line);
    }

    let eof = cur.mark();
    out.tokens.push(Token { kind: TokenKind::Eof, text: String::new(), span: cur.span_from(eof) });
    out.docs = group_docs(&out.tokens, &out.trivia);
    out
}

fn push_trivia(out: &mut Lexed, cur: &Cursor<'_>, start: (usize, u32, u32), kind: TriviaKind, trailing: bool) {
    let span = cur.span_from(start);
    out.trivia.push(Trivia { kind, text: cur.src[start.0..cur.pos].to_string(), span, trailing });
}

fn lex_number(cur: &mut Cursor<'_>, start: (usize, u32, u32), diags: &mut Vec<Diagnostic>) -> TokenKind {
    cur.bump_while(|c| c.is_ascii_digit() || c == '_');
    let is_sized = cur.peek() == Some('\'') && cur.peek_nth(1).and_then(base_radix).is_some();
    if !is_sized {
        return TokenKind::DecimalLiteral;
    }
    cur.bump();
    let radix = cur.bump().and_then(base_radix).expect("checked above");
    let digits_start = cur.pos;
    cur.bump_while(is_ident_continue);
    let digits = &cur.src[digits_start..cur.pos];
    let has_digit = digits.chars().any(|c| c != '_');
    let bad = digits.chars().find(|&c| c != '_' && !c.is_digit(radix));
    if !has_digit || bad.is_some() {
        let msg = match bad {
            Some(c) => format!("digit `{c}` is not valid in a base-{radix} literal"),
            None => "sized literal has no digits".to_string(),
        };
        diags.push(Diagnostic::new(Code::E0002, cur.span_from(start), msg));
    }
    TokenKind::SizedLiteral
}

/// Groups `///` lines into doc comments and resolves what each documents.
fn group_docs(tokens: &[Token], trivia: &[Trivia]) -> Vec<DocComment> {
    let mut docs = Vec::new();
    let mut i = 0;
    while i < trivia.len() {
        let t = &trivia[i];
        if t.kind != TriviaKind::DocLine {
            i += 1;
            continue;
        }
        let mut lines = vec![doc_body(&t.text)];
        let mut span = t.span;
        let mut j = i + 1;
        if !t.trailing {
            // Absorb following leading doc lines separated only by whitespace.
            while j + 1 < trivia.len()
                && trivia[j].kind == TriviaKind::Whitespace
                && trivia[j].span.end == trivia[j + 1].span.start
                && trivia[j].span.start == span.end
                && trivia[j].text.matches('\n').count() == 1
                && trivia[j + 1].kind == TriviaKind::DocLine
                && !trivia[j + 1].trailing
            {
                lines.push(doc_body(&trivia[j + 1].text));
                span = span.to(trivia[j + 1].span);
                j += 2;
            }
        }
        let attached_to = if t.trailing {
            tokens.iter().rev().find(|tok| tok.span.end <= t.span.start).map(|tok| tok.span)
        } else {
            tokens
                .iter()
                .find(|tok| tok.span.start >= span.end && tok.kind != TokenKind::Eof)
                .map(|tok| tok.span)
        };
        docs.push(DocComment {
            text: lines.join("\n"),
            span,
            attached_to: attached_to.unwrap_or(span),
            trailing: t.trailing,
        });
        i = j;
    }
    docs
}

fn doc_body(line: &str) -> String {
    line.trim_end_matches('\r').strip_prefix("///").unwrap_or(line).to_string()
}
