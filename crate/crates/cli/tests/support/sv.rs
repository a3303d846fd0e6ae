//! Reader for the SystemVerilog subset the emitter produces, used to
//! compare emitted code structurally.

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Num(String),
    Ident(String),
    Unary(String, Box<Expr>),
    Binary(String, Box<Expr>, Box<Expr>),
    Index(Box<Expr>, Box<Expr>, Option<Box<Expr>>),
    Call(String, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Assign { lhs: Expr, nonblocking: bool, rhs: Expr },
    If { cond: Expr, then: Vec<Stmt>, otherwise: Vec<Stmt> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Port {
    pub dir: String,
    pub name: String,
    pub packed: Vec<(Expr, Expr)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub edge: String,
    pub signal: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Item {
    Logic { name: String, packed: Vec<(Expr, Expr)> },
    AlwaysFf { sensitivity: Vec<Edge>, body: Vec<Stmt> },
    AlwaysComb(Vec<Stmt>),
    Assign(Expr, Expr),
    Inst { module: String, name: String, params: Vec<(String, Expr)>, conns: Vec<(String, Expr)> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Module {
    pub name: String,
    /// Name and default; the declared type is not kept, so `parameter W = 1`
    /// and `parameter int unsigned W = 1` read the same.
    pub params: Vec<(String, Expr)>,
    pub ports: Vec<Port>,
    pub items: Vec<Item>,
}

fn tokenize(text: &str) -> Vec<String> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if text[i..].starts_with("//") {
            i = text[i..].find('\n').map_or(b.len(), |n| i + n);
        } else if text[i..].starts_with("/*") {
            i = text[i + 2..].find("*/").map_or(b.len(), |n| i + n + 4);
        } else if c.is_ascii_alphanumeric() || c == b'_' || c == b'\'' || c == b'$' {
            let start = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'\'' || b[i] == b'$') {
                i += 1;
            }
            out.push(text[start..i].to_string());
        } else {
            let three = ["<<=", ">>="];
            let two = ["<=", ">=", "==", "!=", "&&", "||", "<<", ">>", "::"];
            let len = if three.iter().any(|t| text[i..].starts_with(t)) {
                3
            } else if two.iter().any(|t| text[i..].starts_with(t)) {
                2
            } else {
                1
            };
            out.push(text[i..i + len].to_string());
            i += len;
        }
    }
    out
}

struct Reader {
    toks: Vec<String>,
    pos: usize,
}

type R<T> = Result<T, String>;

impl Reader {
    fn peek(&self) -> &str {
        self.toks.get(self.pos).map_or("", String::as_str)
    }

    fn peek_at(&self, n: usize) -> &str {
        self.toks.get(self.pos + n).map_or("", String::as_str)
    }

    fn next(&mut self) -> String {
        let t = self.peek().to_string();
        self.pos += 1;
        t
    }

    fn eat(&mut self, t: &str) -> bool {
        if self.peek() == t {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &str) -> R<()> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(format!("expected `{t}`, found `{}` at token {}", self.peek(), self.pos))
        }
    }

    fn ident(&mut self) -> R<String> {
        let t = self.next();
        if t.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_') {
            Ok(t)
        } else {
            Err(format!("expected identifier, found `{t}`"))
        }
    }

    fn module(&mut self) -> R<Module> {
        self.expect("module")?;
        let name = self.ident()?;
        let mut params = Vec::new();
        if self.eat("#") {
            self.expect("(")?;
            while !self.eat(")") {
                self.expect("parameter")?;
                while self.peek_at(1) != "=" {
                    self.next();
                }
                let n = self.ident()?;
                self.expect("=")?;
                params.push((n, self.expr()?));
                self.eat(",");
            }
        }
        let mut ports = Vec::new();
        if self.eat("(") {
            while !self.eat(")") {
                let dir = self.next();
                self.eat("logic");
                let packed = self.dims()?;
                ports.push(Port { dir, name: self.ident()?, packed });
                self.eat(",");
            }
        }
        self.expect(";")?;
        let mut items = Vec::new();
        while !self.eat("endmodule") {
            if self.peek().is_empty() {
                return Err("missing endmodule".into());
            }
            items.push(self.item()?);
        }
        Ok(Module { name, params, ports, items })
    }

    fn dims(&mut self) -> R<Vec<(Expr, Expr)>> {
        let mut out = Vec::new();
        while self.eat("[") {
            let hi = self.expr()?;
            self.expect(":")?;
            let lo = self.expr()?;
            self.expect("]")?;
            out.push((hi, lo));
        }
        Ok(out)
    }

    fn item(&mut self) -> R<Item> {
        match self.peek() {
            "logic" => {
                self.next();
                let packed = self.dims()?;
                let name = self.ident()?;
                self.expect(";")?;
                Ok(Item::Logic { name, packed })
            }
            "always_ff" => {
                self.next();
                self.expect("@")?;
                self.expect("(")?;
                let mut sensitivity = Vec::new();
                loop {
                    let edge = self.next();
                    sensitivity.push(Edge { edge, signal: self.ident()? });
                    if !self.eat("or") {
                        break;
                    }
                }
                self.expect(")")?;
                Ok(Item::AlwaysFf { sensitivity, body: self.stmt_list()? })
            }
            "always_comb" => {
                self.next();
                Ok(Item::AlwaysComb(self.stmt_list()?))
            }
            "assign" => {
                self.next();
                let l = self.expr()?;
                self.expect("=")?;
                let r = self.expr()?;
                self.expect(";")?;
                Ok(Item::Assign(l, r))
            }
            _ => {
                let module = self.ident()?;
                let mut params = Vec::new();
                if self.eat("#") {
                    params = self.named_list()?;
                }
                let name = self.ident()?;
                let conns = self.named_list()?;
                self.expect(";")?;
                Ok(Item::Inst { module, name, params, conns })
            }
        }
    }

    fn named_list(&mut self) -> R<Vec<(String, Expr)>> {
        self.expect("(")?;
        let mut out = Vec::new();
        while !self.eat(")") {
            self.expect(".")?;
            let n = self.ident()?;
            self.expect("(")?;
            let e = self.expr()?;
            self.expect(")")?;
            out.push((n, e));
            self.eat(",");
        }
        Ok(out)
    }

    /// A statement, with `begin ... end` flattened into a list.
    fn stmt_list(&mut self) -> R<Vec<Stmt>> {
        if self.eat("begin") {
            let mut out = Vec::new();
            while !self.eat("end") {
                out.extend(self.stmt_list()?);
            }
            return Ok(out);
        }
        if self.eat("if") {
            self.expect("(")?;
            let cond = self.expr()?;
            self.expect(")")?;
            let then = self.stmt_list()?;
            let otherwise = if self.eat("else") { self.stmt_list()? } else { Vec::new() };
            return Ok(vec![Stmt::If { cond, then, otherwise }]);
        }
        let lhs = self.expr_above(7)?;
        let nonblocking = match self.next().as_str() {
            "<=" => true,
            "=" => false,
            t => return Err(format!("expected assignment, found `{t}`")),
        };
        let rhs = self.expr()?;
        self.expect(";")?;
        Ok(vec![Stmt::Assign { lhs, nonblocking, rhs }])
    }

    fn expr(&mut self) -> R<Expr> {
        self.expr_above(0)
    }

    fn binary_prec(op: &str) -> Option<u8> {
        Some(match op {
            "||" => 1,
            "&&" => 2,
            "|" => 3,
            "^" => 4,
            "&" => 5,
            "==" | "!=" => 6,
            "<" | "<=" | ">" | ">=" => 7,
            "<<" | ">>" => 8,
            "+" | "-" => 9,
            "*" | "/" | "%" => 10,
            _ => return None,
        })
    }

    /// Binary operators with precedence above `min`.
    fn expr_above(&mut self, min: u8) -> R<Expr> {
        let mut lhs = self.unary()?;
        while let Some(p) = Self::binary_prec(self.peek()).filter(|&p| p > min) {
            let op = self.next();
            let rhs = self.expr_above(p)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> R<Expr> {
        if matches!(self.peek(), "!" | "~" | "-") {
            let op = self.next();
            return Ok(Expr::Unary(op, Box::new(self.unary()?)));
        }
        let mut e = self.primary()?;
        while self.eat("[") {
            let a = self.expr()?;
            let b = if self.eat(":") { Some(Box::new(self.expr()?)) } else { None };
            self.expect("]")?;
            e = Expr::Index(Box::new(e), Box::new(a), b);
        }
        Ok(e)
    }

    fn primary(&mut self) -> R<Expr> {
        if self.eat("(") {
            let e = self.expr()?;
            self.expect(")")?;
            return Ok(e);
        }
        let t = self.next();
        if t.starts_with(|c: char| c.is_ascii_digit()) || t.starts_with('\'') {
            return Ok(Expr::Num(t));
        }
        if !t.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_') {
            return Err(format!("unexpected `{t}` in expression"));
        }
        let mut name = t;
        while self.eat("::") {
            name = format!("{name}::{}", self.ident()?);
        }
        if self.eat("(") {
            let mut args = Vec::new();
            while !self.eat(")") {
                args.push(self.expr()?);
                self.eat(",");
            }
            return Ok(Expr::Call(name, args));
        }
        Ok(Expr::Ident(name))
    }
}

/// Reads every module in `text`. Grouping parentheses leave no trace.
pub fn read(text: &str) -> Result<Vec<Module>, String> {
    let mut r = Reader { toks: tokenize(text), pos: 0 };
    let mut out = Vec::new();
    while !r.peek().is_empty() {
        out.push(r.module()?);
    }
    Ok(out)
}

impl Module {
    /// Renames every occurrence of the signal `from`.
    pub fn rename(&mut self, from: &str, to: &str) {
        fn e(x: &mut Expr, from: &str, to: &str) {
            match x {
                Expr::Ident(n) if n == from => *n = to.to_string(),
                Expr::Unary(_, a) => e(a, from, to),
                Expr::Binary(_, a, b) => {
                    e(a, from, to);
                    e(b, from, to);
                }
                Expr::Index(a, b, c) => {
                    e(a, from, to);
                    e(b, from, to);
                    if let Some(c) = c {
                        e(c, from, to);
                    }
                }
                Expr::Call(_, args) => args.iter_mut().for_each(|a| e(a, from, to)),
                _ => {}
            }
        }
        fn s(list: &mut [Stmt], from: &str, to: &str) {
            for st in list {
                match st {
                    Stmt::Assign { lhs, rhs, .. } => {
                        e(lhs, from, to);
                        e(rhs, from, to);
                    }
                    Stmt::If { cond, then, otherwise } => {
                        e(cond, from, to);
                        s(then, from, to);
                        s(otherwise, from, to);
                    }
                }
            }
        }
        for p in &mut self.ports {
            if p.name == from {
                p.name = to.to_string();
            }
        }
        for item in &mut self.items {
            match item {
                Item::Logic { name, .. } if name == from => *name = to.to_string(),
                Item::AlwaysFf { sensitivity, body } => {
                    for edge in sensitivity {
                        if edge.signal == from {
                            edge.signal = to.to_string();
                        }
                    }
                    s(body, from, to);
                }
                Item::AlwaysComb(body) => s(body, from, to),
                Item::Assign(a, b) => {
                    e(a, from, to);
                    e(b, from, to);
                }
                _ => {}
            }
        }
    }
}
