//! Recursive-descent recognizer for statement lines and expressions.
//!
//! The parser does not build an expression tree. It validates the token
//! stream against the expression grammar and emits a flat list of events:
//! every identifier with its syntactic role, every string literal, and the
//! boundaries of lambda, comprehension, function and class scopes. Scope
//! analysis and the transformation passes consume these events.

use crate::error::ParseError;
use crate::token::{FPart, Token, TokenKind};
use crate::tree::{BodyId, BodyKind, Module, Stmt, Suite};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Load,
    Store,
    Del,
    Attr,
    Keyword,
    Param,
    /// Binding created by `import a` or by an `as` alias.
    ImportBind,
    /// Unaliased name in `from m import name`; also a binding.
    FromBind,
    /// Original name in `from m import name as alias`.
    FromOrig,
    /// Module path components.
    ImportPath,
    Global,
    Nonlocal,
    FuncName,
    ClassName,
    Walrus,
}

impl Role {
    pub fn binds(self) -> bool {
        matches!(
            self,
            Role::Store
                | Role::Del
                | Role::Param
                | Role::ImportBind
                | Role::FromBind
                | Role::FuncName
                | Role::ClassName
                | Role::Walrus
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScopeKind {
    Module,
    Function,
    Class,
    Lambda,
    Comprehension,
}

#[derive(Debug, Clone)]
pub enum Event<'a> {
    Name {
        tok: &'a Token,
        role: Role,
        /// Immediately called: `name(...)`.
        called: bool,
        /// Number of arguments when called.
        nargs: usize,
    },
    Str {
        tok: &'a Token,
        /// Inside a parameter, return or variable annotation.
        annotation: bool,
        /// Inside an f-string replacement field.
        nested: bool,
    },
    StarImport,
    Enter(ScopeKind, Option<&'a Token>),
    Exit,
    BeginBody(BodyId, BodyKind),
    EndBody,
}

type PResult<T> = Result<T, ParseError>;

#[derive(Debug)]
enum Shape {
    Name(usize),
    Attr,
    Subscript,
    Seq(Vec<Shape>),
    Starred(Box<Shape>),
    Other(&'static str),
}

const BINOPS: &[&str] = &[
    "==", "!=", "<", ">", "<=", ">=", "|", "^", "&", "<<", ">>", "+", "-", "*", "/", "//", "%",
    "@", "**",
];
const AUGASSIGN: &[&str] = &[
    "+=", "-=", "*=", "/=", "//=", "%=", "@=", "&=", "|=", "^=", ">>=", "<<=", "**=",
];

pub(crate) struct Parser<'a, 'e> {
    toks: &'a [Token],
    pos: usize,
    ev: &'e mut Vec<Event<'a>>,
    line: usize,
    annotation: bool,
    nested: bool,
}

impl<'a, 'e> Parser<'a, 'e> {
    pub(crate) fn new(toks: &'a [Token], ev: &'e mut Vec<Event<'a>>, line: usize) -> Self {
        Parser {
            toks,
            pos: 0,
            ev,
            line,
            annotation: false,
            nested: false,
        }
    }

    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&'a Token> {
        self.toks.get(self.pos + n)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn at_op(&self, op: &str) -> bool {
        self.peek().is_some_and(|t| t.is_op(op))
    }

    fn at_kw(&self, kw: &str) -> bool {
        self.peek().is_some_and(|t| t.is_kw(kw))
    }

    fn bump(&mut self) -> &'a Token {
        let t = &self.toks[self.pos];
        self.pos += 1;
        t
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.at_op(op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let near = match self.peek() {
            Some(t) => format!(" near '{}'", t.source()),
            None => " at end of line".to_string(),
        };
        ParseError::syntax(self.line, 1, format!("{}{near}", msg.into()))
    }

    fn expect_op(&mut self, op: &str) -> PResult<&'a Token> {
        if self.at_op(op) {
            Ok(self.bump())
        } else {
            Err(self.err(format!("expected '{op}'")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{kw}'")))
        }
    }

    fn expect_ident(&mut self) -> PResult<&'a Token> {
        match self.peek() {
            Some(t) if t.is_ident() => Ok(self.bump()),
            _ => Err(self.err("expected a name")),
        }
    }

    pub(crate) fn expect_end(&self) -> PResult<()> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.err("invalid syntax"))
        }
    }

    fn push_name(&mut self, tok: &'a Token, role: Role) -> usize {
        self.ev.push(Event::Name {
            tok,
            role,
            called: false,
            nargs: 0,
        });
        self.ev.len() - 1
    }

    fn starts_expr(&self) -> bool {
        let Some(t) = self.peek() else { return false };
        match &t.kind {
            TokenKind::Name => {
                !crate::token::is_keyword(&t.text)
                    || matches!(
                        t.text.as_str(),
                        "lambda" | "not" | "await" | "True" | "False" | "None"
                    )
            }
            TokenKind::Number | TokenKind::Str | TokenKind::FStr(_) => true,
            TokenKind::Op => matches!(
                t.text.as_str(),
                "(" | "[" | "{" | "-" | "+" | "~" | "..." | "*"
            ),
        }
    }

    fn bind(&mut self, shape: &Shape, role: Role) -> PResult<()> {
        match shape {
            Shape::Name(i) => {
                if let Event::Name { role: r, .. } = &mut self.ev[*i] {
                    *r = role;
                }
                Ok(())
            }
            Shape::Attr | Shape::Subscript => Ok(()),
            Shape::Seq(items) => items.iter().try_for_each(|s| self.bind(s, role)),
            Shape::Starred(inner) => self.bind(inner, role),
            Shape::Other(what) => Err(ParseError::syntax(
                self.line,
                1,
                format!("cannot assign to {what}"),
            )),
        }
    }

    // ---- expressions -------------------------------------------------

    fn star_expressions(&mut self) -> PResult<Shape> {
        let first = self.star_expression()?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if !self.starts_expr() {
                break;
            }
            items.push(self.star_expression()?);
        }
        Ok(Shape::Seq(items))
    }

    fn star_expression(&mut self) -> PResult<Shape> {
        if self.eat_op("*") {
            Ok(Shape::Starred(Box::new(self.disjunction()?)))
        } else {
            self.expression()
        }
    }

    fn star_named_expression(&mut self) -> PResult<Shape> {
        if self.eat_op("*") {
            Ok(Shape::Starred(Box::new(self.disjunction()?)))
        } else {
            self.named_expression()
        }
    }

    fn named_expression(&mut self) -> PResult<Shape> {
        if self.peek().is_some_and(|t| t.is_ident()) && self.peek_at(1).is_some_and(|t| t.is_op(":=")) {
            let tok = self.bump();
            self.push_name(tok, Role::Walrus);
            self.bump();
            self.expression()?;
            return Ok(Shape::Other("named expression"));
        }
        self.expression()
    }

    fn expression(&mut self) -> PResult<Shape> {
        if self.at_kw("lambda") {
            return self.lambdef();
        }
        let shape = self.disjunction()?;
        if self.eat_kw("if") {
            self.disjunction()?;
            self.expect_kw("else")?;
            self.expression()?;
            return Ok(Shape::Other("conditional expression"));
        }
        Ok(shape)
    }

    fn at_binop(&self) -> bool {
        let Some(t) = self.peek() else { return false };
        match &t.kind {
            TokenKind::Op => BINOPS.contains(&t.text.as_str()),
            TokenKind::Name => match t.text.as_str() {
                "and" | "or" | "in" | "is" => true,
                "not" => self.peek_at(1).is_some_and(|n| n.is_kw("in")),
                _ => false,
            },
            _ => false,
        }
    }

    fn disjunction(&mut self) -> PResult<Shape> {
        let mut shape = self.operand()?;
        while self.at_binop() {
            let op = self.bump();
            if op.is_kw("is") {
                self.eat_kw("not");
            } else if op.is_kw("not") {
                self.expect_kw("in")?;
            }
            self.operand()?;
            shape = Shape::Other("expression");
        }
        Ok(shape)
    }

    fn operand(&mut self) -> PResult<Shape> {
        let mut unary = false;
        while self.at_kw("not")
            || self.at_kw("await")
            || self.at_op("-")
            || self.at_op("+")
            || self.at_op("~")
        {
            self.bump();
            unary = true;
        }
        if self.at_kw("lambda") {
            return self.lambdef();
        }
        let shape = self.primary()?;
        Ok(if unary { Shape::Other("expression") } else { shape })
    }

    fn primary(&mut self) -> PResult<Shape> {
        let shape = self.atom()?;
        self.trailers(shape)
    }

    fn trailers(&mut self, mut shape: Shape) -> PResult<Shape> {
        loop {
            if self.eat_op(".") {
                let tok = self.expect_ident()?;
                self.push_name(tok, Role::Attr);
                shape = Shape::Attr;
            } else if self.at_op("(") {
                let n = self.call_args()?;
                if let Shape::Name(i) = shape {
                    if let Event::Name { called, nargs, .. } = &mut self.ev[i] {
                        *called = true;
                        *nargs = n;
                    }
                }
                shape = Shape::Other("function call");
            } else if self.at_op("[") {
                self.subscript()?;
                shape = Shape::Subscript;
            } else {
                return Ok(shape);
            }
        }
    }

    fn atom(&mut self) -> PResult<Shape> {
        let Some(tok) = self.peek() else {
            return Err(self.err("expected an expression"));
        };
        match &tok.kind {
            TokenKind::Name => {
                if tok.is_ident() {
                    self.bump();
                    Ok(Shape::Name(self.push_name(tok, Role::Load)))
                } else if matches!(tok.text.as_str(), "True" | "False" | "None") {
                    self.bump();
                    Ok(Shape::Other("literal"))
                } else {
                    Err(self.err("invalid syntax"))
                }
            }
            TokenKind::Number => {
                self.bump();
                Ok(Shape::Other("literal"))
            }
            TokenKind::Str | TokenKind::FStr(_) => self.strings(),
            TokenKind::Op => match tok.text.as_str() {
                "(" => self.paren_atom(),
                "[" => self.list_atom(),
                "{" => self.brace_atom(),
                "..." => {
                    self.bump();
                    Ok(Shape::Other("Ellipsis"))
                }
                _ => Err(self.err("invalid syntax")),
            },
        }
    }

    fn strings(&mut self) -> PResult<Shape> {
        let mut kinds = (false, false);
        while let Some(tok) = self.peek().filter(|t| t.is_string()) {
            self.bump();
            let bytes = tok.text.chars().take_while(|c| *c != '\'' && *c != '"').any(|c| c == 'b' || c == 'B');
            if bytes {
                kinds.0 = true;
            } else {
                kinds.1 = true;
            }
            self.ev.push(Event::Str {
                tok,
                annotation: self.annotation,
                nested: self.nested,
            });
            if let TokenKind::FStr(f) = &tok.kind {
                self.fstring_parts(&f.parts)?;
            }
        }
        if kinds.0 && kinds.1 {
            return Err(self.err("cannot mix bytes and nonbytes literals"));
        }
        Ok(Shape::Other("literal"))
    }

    fn fstring_parts(&mut self, parts: &'a [FPart]) -> PResult<()> {
        for part in parts {
            if let FPart::Field(field) = part {
                let mut sub = Parser {
                    toks: &field.expr,
                    pos: 0,
                    ev: &mut *self.ev,
                    line: self.line,
                    annotation: self.annotation,
                    nested: true,
                };
                if sub.at_kw("yield") {
                    sub.yield_expr()?;
                } else {
                    sub.star_expressions()?;
                }
                sub.expect_end()?;
                if let Some(spec) = &field.spec {
                    self.fstring_parts(spec)?;
                }
            }
        }
        Ok(())
    }

    fn paren_atom(&mut self) -> PResult<Shape> {
        self.bump();
        if self.eat_op(")") {
            return Ok(Shape::Seq(Vec::new()));
        }
        if self.at_kw("yield") {
            self.yield_expr()?;
            self.expect_op(")")?;
            return Ok(Shape::Other("yield expression"));
        }
        let start = self.ev.len();
        let first = self.star_named_expression()?;
        if self.at_comp_for() {
            self.comprehension(start)?;
            self.expect_op(")")?;
            return Ok(Shape::Other("generator expression"));
        }
        if self.at_op(",") {
            let mut items = vec![first];
            while self.eat_op(",") {
                if self.at_op(")") {
                    break;
                }
                items.push(self.star_named_expression()?);
            }
            self.expect_op(")")?;
            return Ok(Shape::Seq(items));
        }
        self.expect_op(")")?;
        Ok(first)
    }

    fn list_atom(&mut self) -> PResult<Shape> {
        self.bump();
        if self.eat_op("]") {
            return Ok(Shape::Seq(Vec::new()));
        }
        let start = self.ev.len();
        let first = self.star_named_expression()?;
        if self.at_comp_for() {
            self.comprehension(start)?;
            self.expect_op("]")?;
            return Ok(Shape::Other("list comprehension"));
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_op("]") {
                break;
            }
            items.push(self.star_named_expression()?);
        }
        self.expect_op("]")?;
        Ok(Shape::Seq(items))
    }

    fn brace_atom(&mut self) -> PResult<Shape> {
        self.bump();
        if self.eat_op("}") {
            return Ok(Shape::Other("dict literal"));
        }
        let start = self.ev.len();
        let is_dict;
        if self.eat_op("**") {
            self.disjunction()?;
            is_dict = true;
        } else {
            self.star_named_expression()?;
            if self.eat_op(":") {
                self.expression()?;
                is_dict = true;
            } else {
                is_dict = false;
            }
            if self.at_comp_for() {
                self.comprehension(start)?;
                self.expect_op("}")?;
                return Ok(Shape::Other("comprehension"));
            }
        }
        while self.eat_op(",") {
            if self.at_op("}") {
                break;
            }
            if is_dict {
                if self.eat_op("**") {
                    self.disjunction()?;
                } else {
                    self.expression()?;
                    self.expect_op(":")?;
                    self.expression()?;
                }
            } else {
                self.star_named_expression()?;
            }
        }
        self.expect_op("}")?;
        Ok(Shape::Other(if is_dict { "dict literal" } else { "set display" }))
    }

    fn at_comp_for(&self) -> bool {
        self.at_kw("for") || (self.at_kw("async") && self.peek_at(1).is_some_and(|t| t.is_kw("for")))
    }

    /// Parses the `for ... in ... if ...` clauses after a comprehension
    /// element whose events start at `elt_start`. The first iterable is
    /// evaluated in the enclosing scope, so its events are moved in front
    /// of the scope entry.
    fn comprehension(&mut self, elt_start: usize) -> PResult<()> {
        self.ev.insert(elt_start, Event::Enter(ScopeKind::Comprehension, None));
        let mut first = true;
        while self.at_comp_for() {
            self.eat_kw("async");
            self.expect_kw("for")?;
            let targets = self.target_list()?;
            self.bind(&targets, Role::Store)?;
            self.expect_kw("in")?;
            let iter_start = self.ev.len();
            self.disjunction()?;
            if first {
                let moved: Vec<Event<'a>> = self.ev.drain(iter_start..).collect();
                self.ev.splice(elt_start..elt_start, moved);
                first = false;
            }
            while self.eat_kw("if") {
                self.disjunction()?;
            }
        }
        self.ev.push(Event::Exit);
        Ok(())
    }

    fn lambdef(&mut self) -> PResult<Shape> {
        self.expect_kw("lambda")?;
        let mut params = Vec::new();
        while !self.at_op(":") {
            if self.eat_op("/") {
            } else if self.eat_op("*") {
                if self.peek().is_some_and(|t| t.is_ident()) {
                    params.push(self.bump());
                }
            } else if self.eat_op("**") {
                params.push(self.expect_ident()?);
            } else {
                params.push(self.expect_ident()?);
                if self.eat_op("=") {
                    self.expression()?;
                }
            }
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(":")?;
        self.ev.push(Event::Enter(ScopeKind::Lambda, None));
        for p in params {
            self.push_name(p, Role::Param);
        }
        self.expression()?;
        self.ev.push(Event::Exit);
        Ok(Shape::Other("lambda"))
    }

    fn call_args(&mut self) -> PResult<usize> {
        self.expect_op("(")?;
        let mut n = 0;
        while !self.at_op(")") {
            n += 1;
            if self.eat_op("*") || self.eat_op("**") {
                self.expression()?;
            } else if self.peek().is_some_and(|t| t.is_ident())
                && self.peek_at(1).is_some_and(|t| t.is_op("="))
            {
                let tok = self.bump();
                self.push_name(tok, Role::Keyword);
                self.bump();
                self.expression()?;
            } else {
                let start = self.ev.len();
                self.named_expression()?;
                if self.at_comp_for() {
                    self.comprehension(start)?;
                }
            }
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(")")?;
        Ok(n)
    }

    fn subscript(&mut self) -> PResult<()> {
        self.expect_op("[")?;
        loop {
            self.slice()?;
            if !self.eat_op(",") || self.at_op("]") {
                break;
            }
        }
        self.expect_op("]")?;
        Ok(())
    }

    fn slice(&mut self) -> PResult<()> {
        if !self.at_op(":") {
            if self.eat_op("*") {
                self.disjunction()?;
            } else {
                self.named_expression()?;
            }
        }
        if self.eat_op(":") {
            if !self.at_op(":") && !self.at_op(",") && !self.at_op("]") {
                self.expression()?;
            }
            if self.eat_op(":") && !self.at_op(",") && !self.at_op("]") {
                self.expression()?;
            }
        }
        Ok(())
    }

    fn yield_expr(&mut self) -> PResult<Shape> {
        self.expect_kw("yield")?;
        if self.eat_kw("from") {
            self.expression()?;
        } else if self.starts_expr() {
            self.star_expressions()?;
        }
        Ok(Shape::Other("yield expression"))
    }

    fn target_list(&mut self) -> PResult<Shape> {
        let first = self.target()?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if !self.starts_expr() {
                break;
            }
            items.push(self.target()?);
        }
        Ok(Shape::Seq(items))
    }

    fn target(&mut self) -> PResult<Shape> {
        if self.eat_op("*") {
            return Ok(Shape::Starred(Box::new(self.target()?)));
        }
        let close = if self.at_op("(") {
            ")"
        } else if self.at_op("[") {
            "]"
        } else {
            return self.primary();
        };
        self.bump();
        let inner = if self.at_op(close) {
            Shape::Seq(Vec::new())
        } else {
            let first = self.target()?;
            if self.at_op(",") {
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.at_op(close) {
                        break;
                    }
                    items.push(self.target()?);
                }
                Shape::Seq(items)
            } else if close == "]" {
                Shape::Seq(vec![first])
            } else {
                first
            }
        };
        self.expect_op(close)?;
        self.trailers(inner)
    }

    // ---- statements --------------------------------------------------

    pub(crate) fn simple_stmts(&mut self) -> PResult<()> {
        loop {
            self.small_stmt()?;
            if self.eat_op(";") {
                if self.at_end() {
                    return Ok(());
                }
                continue;
            }
            return self.expect_end();
        }
    }

    fn small_stmt(&mut self) -> PResult<()> {
        let Some(tok) = self.peek() else {
            return Err(self.err("expected a statement"));
        };
        if tok.is_name() {
            match tok.text.as_str() {
                "pass" | "break" | "continue" => {
                    self.bump();
                    return Ok(());
                }
                "return" => {
                    self.bump();
                    if self.starts_expr() {
                        self.star_expressions()?;
                    }
                    return Ok(());
                }
                "raise" => {
                    self.bump();
                    if self.starts_expr() {
                        self.expression()?;
                        if self.eat_kw("from") {
                            self.expression()?;
                        }
                    }
                    return Ok(());
                }
                "global" | "nonlocal" => {
                    self.bump();
                    let role = if tok.text == "global" { Role::Global } else { Role::Nonlocal };
                    loop {
                        let name = self.expect_ident()?;
                        self.push_name(name, role);
                        if !self.eat_op(",") {
                            return Ok(());
                        }
                    }
                }
                "del" => {
                    self.bump();
                    let targets = self.target_list()?;
                    return self.bind(&targets, Role::Del);
                }
                "assert" => {
                    self.bump();
                    self.expression()?;
                    if self.eat_op(",") {
                        self.expression()?;
                    }
                    return Ok(());
                }
                "import" => {
                    self.bump();
                    loop {
                        self.dotted_as_name()?;
                        if !self.eat_op(",") {
                            return Ok(());
                        }
                    }
                }
                "from" => return self.import_from(),
                _ => {}
            }
        }
        self.expr_stmt()
    }

    fn dotted_as_name(&mut self) -> PResult<()> {
        let mut parts = vec![self.expect_ident()?];
        while self.eat_op(".") {
            parts.push(self.expect_ident()?);
        }
        if self.eat_kw("as") {
            for p in parts {
                self.push_name(p, Role::ImportPath);
            }
            let alias = self.expect_ident()?;
            self.push_name(alias, Role::ImportBind);
        } else {
            for (i, p) in parts.into_iter().enumerate() {
                self.push_name(p, if i == 0 { Role::ImportBind } else { Role::ImportPath });
            }
        }
        Ok(())
    }

    fn import_from(&mut self) -> PResult<()> {
        self.expect_kw("from")?;
        let mut dots = 0;
        while self.eat_op(".") || self.eat_op("...") {
            dots += 1;
        }
        if self.peek().is_some_and(|t| t.is_ident()) {
            loop {
                let p = self.expect_ident()?;
                self.push_name(p, Role::ImportPath);
                if !self.eat_op(".") {
                    break;
                }
            }
        } else if dots == 0 {
            return Err(self.err("expected a module name"));
        }
        self.expect_kw("import")?;
        if self.eat_op("*") {
            self.ev.push(Event::StarImport);
            return Ok(());
        }
        let paren = self.eat_op("(");
        loop {
            let name = self.expect_ident()?;
            if self.eat_kw("as") {
                self.push_name(name, Role::FromOrig);
                let alias = self.expect_ident()?;
                self.push_name(alias, Role::ImportBind);
            } else {
                self.push_name(name, Role::FromBind);
            }
            if !self.eat_op(",") || (paren && self.at_op(")")) {
                break;
            }
        }
        if paren {
            self.expect_op(")")?;
        }
        Ok(())
    }

    fn rhs(&mut self) -> PResult<Shape> {
        if self.at_kw("yield") {
            self.yield_expr()
        } else {
            self.star_expressions()
        }
    }

    fn expr_stmt(&mut self) -> PResult<()> {
        let lhs = self.rhs()?;
        if self.eat_op(":") {
            if !matches!(lhs, Shape::Name(_) | Shape::Attr | Shape::Subscript) {
                return Err(self.err("only single target can be annotated"));
            }
            self.annotation = true;
            let r = self.expression();
            self.annotation = false;
            r?;
            self.bind(&lhs, Role::Store)?;
            if self.eat_op("=") {
                self.rhs()?;
            }
            return Ok(());
        }
        if self.peek().is_some_and(|t| matches!(t.kind, TokenKind::Op) && AUGASSIGN.contains(&t.text.as_str())) {
            if !matches!(lhs, Shape::Name(_) | Shape::Attr | Shape::Subscript) {
                return Err(self.err("illegal expression for augmented assignment"));
            }
            self.bump();
            self.bind(&lhs, Role::Store)?;
            self.rhs()?;
            return Ok(());
        }
        if self.at_op("=") {
            let mut shapes = vec![lhs];
            while self.eat_op("=") {
                shapes.push(self.rhs()?);
            }
            shapes.pop();
            for s in &shapes {
                self.bind(s, Role::Store)?;
            }
        }
        Ok(())
    }

    // ---- compound statement headers ----------------------------------

    pub(crate) fn decorator(&mut self) -> PResult<()> {
        self.expect_op("@")?;
        self.named_expression()?;
        self.expect_end()
    }

    /// Header of a clause whose keyword is `kw` (async already stripped by
    /// the caller's choice of keyword).
    pub(crate) fn clause_header(&mut self, kw: &str) -> PResult<()> {
        self.eat_kw("async");
        match kw {
            "if" | "elif" | "while" => {
                self.bump();
                self.named_expression()?;
            }
            "else" | "try" | "finally" => {
                self.bump();
            }
            "except" => {
                self.bump();
                self.eat_op("*");
                if !self.at_op(":") {
                    self.expression()?;
                    if self.eat_kw("as") {
                        let name = self.expect_ident()?;
                        self.push_name(name, Role::Store);
                    }
                }
            }
            "for" => {
                self.bump();
                let targets = self.target_list()?;
                self.bind(&targets, Role::Store)?;
                self.expect_kw("in")?;
                self.star_expressions()?;
            }
            "with" => {
                self.bump();
                self.with_items()?;
            }
            "def" => {
                self.bump();
                let name = self.expect_ident()?;
                self.push_name(name, Role::FuncName);
                if self.at_op("[") {
                    return Err(ParseError::unsupported(self.line, "type parameter list"));
                }
                self.expect_op("(")?;
                self.params()?;
                self.expect_op(")")?;
                if self.eat_op("->") {
                    self.annotated_expression()?;
                }
            }
            "class" => {
                self.bump();
                let name = self.expect_ident()?;
                self.push_name(name, Role::ClassName);
                if self.at_op("[") {
                    return Err(ParseError::unsupported(self.line, "type parameter list"));
                }
                if self.at_op("(") {
                    self.call_args()?;
                }
            }
            _ => return Err(self.err("unknown compound statement")),
        }
        self.expect_op(":")?;
        self.expect_end()
    }

    fn annotated_expression(&mut self) -> PResult<()> {
        self.annotation = true;
        let r = self.expression();
        self.annotation = false;
        r.map(|_| ())
    }

    fn params(&mut self) -> PResult<()> {
        while !self.at_op(")") {
            if self.eat_op("/") {
            } else if self.eat_op("*") {
                if self.peek().is_some_and(|t| t.is_ident()) {
                    let p = self.bump();
                    self.push_name(p, Role::Param);
                    if self.eat_op(":") {
                        self.annotated_expression()?;
                    }
                }
            } else if self.eat_op("**") {
                let p = self.expect_ident()?;
                self.push_name(p, Role::Param);
                if self.eat_op(":") {
                    self.annotated_expression()?;
                }
            } else {
                let p = self.expect_ident()?;
                self.push_name(p, Role::Param);
                if self.eat_op(":") {
                    self.annotated_expression()?;
                }
                if self.eat_op("=") {
                    self.expression()?;
                }
            }
            if !self.eat_op(",") {
                break;
            }
        }
        Ok(())
    }

    fn with_items(&mut self) -> PResult<()> {
        if self.at_op("(") {
            let (pos, len) = (self.pos, self.ev.len());
            if self.paren_with_items().is_ok() && self.at_op(":") {
                return Ok(());
            }
            self.pos = pos;
            self.ev.truncate(len);
        }
        loop {
            self.expression()?;
            if self.eat_kw("as") {
                let t = self.target()?;
                self.bind(&t, Role::Store)?;
            }
            if !self.eat_op(",") {
                return Ok(());
            }
        }
    }

    fn paren_with_items(&mut self) -> PResult<()> {
        self.expect_op("(")?;
        loop {
            self.expression()?;
            if self.eat_kw("as") {
                let t = self.target()?;
                self.bind(&t, Role::Store)?;
            }
            if !self.eat_op(",") || self.at_op(")") {
                break;
            }
        }
        self.expect_op(")")?;
        Ok(())
    }
}

/// Validates a whole module and returns its event stream.
pub fn module_events(module: &Module) -> Result<Vec<Event<'_>>, ParseError> {
    let mut walker = Walker {
        ev: Vec::new(),
        line: 1 + newlines(&module.header),
    };
    walker.ev.push(Event::Enter(ScopeKind::Module, None));
    walker.ev.push(Event::BeginBody(BodyId::module(), BodyKind::Module));
    let mut path = Vec::new();
    walker.block(&module.body.stmts, &mut path)?;
    walker.ev.push(Event::EndBody);
    walker.ev.push(Event::Exit);
    Ok(walker.ev)
}

pub(crate) fn newlines(s: &str) -> usize {
    let b = s.as_bytes();
    b.iter()
        .enumerate()
        .filter(|(i, c)| **c == b'\n' || (**c == b'\r' && b.get(i + 1) != Some(&b'\n')))
        .count()
}

fn token_newlines(tokens: &[Token]) -> usize {
    tokens
        .iter()
        .map(|t| {
            let mut s = String::new();
            t.render_into(&mut s);
            newlines(&s)
        })
        .sum()
}

struct Walker<'a> {
    ev: Vec<Event<'a>>,
    line: usize,
}

impl<'a> Walker<'a> {
    fn block(&mut self, stmts: &'a [Stmt], path: &mut Vec<(u32, u32)>) -> PResult<()> {
        for (i, stmt) in stmts.iter().enumerate() {
            match stmt {
                Stmt::Simple(line) => {
                    self.line += newlines(&line.leading);
                    Parser::new(&line.tokens, &mut self.ev, self.line).simple_stmts()?;
                    self.line += token_newlines(&line.tokens) + newlines(&line.end);
                }
                Stmt::Compound(c) => {
                    for d in &c.decorators {
                        self.line += newlines(&d.leading);
                        Parser::new(&d.tokens, &mut self.ev, self.line).decorator()?;
                        self.line += token_newlines(&d.tokens) + newlines(&d.end);
                    }
                    let kw = c.keyword();
                    for (ci, clause) in c.clauses.iter().enumerate() {
                        self.line += newlines(&clause.leading);
                        let scope = match kw {
                            "def" => Some(ScopeKind::Function),
                            "class" => Some(ScopeKind::Class),
                            _ => None,
                        };
                        let mut header = Vec::new();
                        Parser::new(&clause.header, &mut header, self.line)
                            .clause_header(clause.keyword())?;
                        self.line += token_newlines(&clause.header);
                        let mut inner = Vec::new();
                        if let Some(kind) = scope {
                            let mut depth = 0i32;
                            let mut name = None;
                            for ev in header {
                                match &ev {
                                    Event::Enter(..) => depth += 1,
                                    Event::Exit => depth -= 1,
                                    Event::Name { role: Role::Param, .. } if depth == 0 => {
                                        inner.push(ev);
                                        continue;
                                    }
                                    Event::Name {
                                        tok,
                                        role: Role::FuncName | Role::ClassName,
                                        ..
                                    } if depth == 0 => name = Some(*tok),
                                    _ => {}
                                }
                                self.ev.push(ev);
                            }
                            self.ev.push(Event::Enter(kind, name));
                            self.ev.extend(inner);
                        } else {
                            self.ev.extend(header);
                        }
                        path.push((i as u32, ci as u32));
                        match &clause.body {
                            Suite::Inline { tokens, end } => {
                                Parser::new(tokens, &mut self.ev, self.line).simple_stmts()?;
                                self.line += token_newlines(tokens) + newlines(end);
                            }
                            Suite::Block { end, block } => {
                                self.line += newlines(end);
                                self.ev.push(Event::BeginBody(
                                    BodyId(path.clone()),
                                    c.body_kind(ci),
                                ));
                                self.block(&block.stmts, path)?;
                                self.ev.push(Event::EndBody);
                            }
                        }
                        path.pop();
                        if scope.is_some() {
                            self.ev.push(Event::Exit);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
