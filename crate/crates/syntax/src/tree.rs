//! Statement-level concrete syntax tree.
//!
//! Statements own the blank and comment lines that precede them (`leading`)
//! and their indentation; expressions stay as token sequences. Rendering is
//! plain concatenation in document order.

use crate::token::{FPart, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Module {
    /// Byte-order mark, shebang and encoding-declaration lines. Kept apart
    /// from the first statement so nothing is ever inserted above them.
    pub header: String,
    pub body: Block,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    /// Trivia rendered after the last statement. The parser leaves this
    /// empty except for the module body, where it holds end-of-file trivia.
    pub trailing: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Simple(Line),
    Compound(Compound),
}

/// One logical line of simple statements, or a decorator line.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Line {
    pub leading: String,
    pub indent: String,
    pub tokens: Vec<Token>,
    /// Whitespace, trailing comment and newline.
    pub end: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Compound {
    pub decorators: Vec<Line>,
    pub clauses: Vec<Clause>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub leading: String,
    pub indent: String,
    /// Header tokens up to and including the colon.
    pub header: Vec<Token>,
    pub body: Suite,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Suite {
    /// Simple statements on the header line: `if x: return y`.
    Inline { tokens: Vec<Token>, end: String },
    /// `end` closes the header line.
    Block { end: String, block: Block },
}

/// What kind of statement list a block is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BodyKind {
    Module,
    Function,
    Class,
    Loop,
    Conditional,
    Try,
    With,
}

impl Clause {
    pub fn keyword(&self) -> &str {
        match self.header.first() {
            Some(t) if t.is_kw("async") => self.header.get(1).map_or("", |t| t.text.as_str()),
            Some(t) => t.text.as_str(),
            None => "",
        }
    }
}

impl Compound {
    pub fn keyword(&self) -> &str {
        self.clauses[0].keyword()
    }

    /// Kind of the body owned by clause `index`.
    pub fn body_kind(&self, index: usize) -> BodyKind {
        let first = self.keyword();
        match (first, self.clauses[index].keyword()) {
            ("def", _) => BodyKind::Function,
            ("class", _) => BodyKind::Class,
            ("for" | "while", _) => BodyKind::Loop,
            ("if", _) => BodyKind::Conditional,
            ("try", _) => BodyKind::Try,
            _ => BodyKind::With,
        }
    }
}

impl Stmt {
    pub fn leading(&self) -> &str {
        match self {
            Stmt::Simple(l) => &l.leading,
            Stmt::Compound(c) => match c.decorators.first() {
                Some(d) => &d.leading,
                None => &c.clauses[0].leading,
            },
        }
    }

    pub fn leading_mut(&mut self) -> &mut String {
        match self {
            Stmt::Simple(l) => &mut l.leading,
            Stmt::Compound(c) => match c.decorators.first_mut() {
                Some(d) => &mut d.leading,
                None => &mut c.clauses[0].leading,
            },
        }
    }

    pub fn indent(&self) -> &str {
        match self {
            Stmt::Simple(l) => &l.indent,
            Stmt::Compound(c) => match c.decorators.first() {
                Some(d) => &d.indent,
                None => &c.clauses[0].indent,
            },
        }
    }

    /// Rewrites the indentation of this statement and everything nested in
    /// it. Only statement indentation changes; continuation lines and string
    /// contents are left alone, which keeps the program meaning intact.
    pub fn reindent(&mut self, f: &dyn Fn(&str) -> String) {
        match self {
            Stmt::Simple(l) => l.indent = f(&l.indent),
            Stmt::Compound(c) => {
                for d in &mut c.decorators {
                    d.indent = f(&d.indent);
                }
                for clause in &mut c.clauses {
                    clause.indent = f(&clause.indent);
                    if let Suite::Block { block, .. } = &mut clause.body {
                        for s in &mut block.stmts {
                            s.reindent(f);
                        }
                    }
                }
            }
        }
    }

    /// Docstring-shaped statement: an expression made only of plain string
    /// literals.
    pub fn is_string_expr(&self) -> bool {
        match self {
            Stmt::Simple(l) => {
                !l.tokens.is_empty() && l.tokens.iter().all(|t| matches!(t.kind, TokenKind::Str))
            }
            Stmt::Compound(_) => false,
        }
    }

    pub fn is_future_import(&self) -> bool {
        match self {
            Stmt::Simple(l) => {
                l.tokens.len() >= 2 && l.tokens[0].is_kw("from") && l.tokens[1].text == "__future__"
            }
            Stmt::Compound(_) => false,
        }
    }

    pub fn render_into(&self, out: &mut String) {
        match self {
            Stmt::Simple(l) => l.render_into(out),
            Stmt::Compound(c) => {
                for d in &c.decorators {
                    d.render_into(out);
                }
                for clause in &c.clauses {
                    clause.render_into(out);
                }
            }
        }
    }
}

impl Line {
    pub fn render_into(&self, out: &mut String) {
        out.push_str(&self.leading);
        out.push_str(&self.indent);
        for t in &self.tokens {
            t.render_into(out);
        }
        out.push_str(&self.end);
    }
}

impl Clause {
    pub fn render_into(&self, out: &mut String) {
        out.push_str(&self.leading);
        out.push_str(&self.indent);
        for t in &self.header {
            t.render_into(out);
        }
        match &self.body {
            Suite::Inline { tokens, end } => {
                for t in tokens {
                    t.render_into(out);
                }
                out.push_str(end);
            }
            Suite::Block { end, block } => {
                out.push_str(end);
                block.render_into(out);
            }
        }
    }
}

impl Block {
    pub fn render_into(&self, out: &mut String) {
        for s in &self.stmts {
            s.render_into(out);
        }
        out.push_str(&self.trailing);
    }
}

impl Module {
    pub fn render(&self) -> String {
        let mut out = String::with_capacity(1024);
        out.push_str(&self.header);
        self.body.render_into(&mut out);
        out
    }

    /// Assigns token ids `0..n` in render order, descending into f-string
    /// replacement fields.
    pub fn renumber(&mut self) {
        let mut next = 0u32;
        self.for_each_token_mut(&mut |t| {
            t.id = next;
            next += 1;
        });
    }

    /// Visits every token, including those nested in f-strings, in render
    /// order.
    pub fn for_each_token_mut(&mut self, f: &mut dyn FnMut(&mut Token)) {
        block_tokens_mut(&mut self.body, f);
    }

    pub fn for_each_token(&self, f: &mut dyn FnMut(&Token)) {
        block_tokens(&self.body, f);
    }
}

pub(crate) fn visit_tokens_mut(tokens: &mut [Token], f: &mut dyn FnMut(&mut Token)) {
    for t in tokens {
        f(t);
        if let TokenKind::FStr(fs) = &mut t.kind {
            parts_tokens_mut(&mut fs.parts, f);
        }
    }
}

fn parts_tokens_mut(parts: &mut [FPart], f: &mut dyn FnMut(&mut Token)) {
    for p in parts {
        if let FPart::Field(field) = p {
            visit_tokens_mut(&mut field.expr, f);
            if let Some(spec) = &mut field.spec {
                parts_tokens_mut(spec, f);
            }
        }
    }
}

fn block_tokens_mut(block: &mut Block, f: &mut dyn FnMut(&mut Token)) {
    for s in &mut block.stmts {
        match s {
            Stmt::Simple(l) => visit_tokens_mut(&mut l.tokens, f),
            Stmt::Compound(c) => {
                for d in &mut c.decorators {
                    visit_tokens_mut(&mut d.tokens, f);
                }
                for clause in &mut c.clauses {
                    visit_tokens_mut(&mut clause.header, f);
                    match &mut clause.body {
                        Suite::Inline { tokens, .. } => visit_tokens_mut(tokens, f),
                        Suite::Block { block, .. } => block_tokens_mut(block, f),
                    }
                }
            }
        }
    }
}

pub(crate) fn visit_tokens(tokens: &[Token], f: &mut dyn FnMut(&Token)) {
    for t in tokens {
        f(t);
        if let TokenKind::FStr(fs) = &t.kind {
            parts_tokens(&fs.parts, f);
        }
    }
}

fn parts_tokens(parts: &[FPart], f: &mut dyn FnMut(&Token)) {
    for p in parts {
        if let FPart::Field(field) = p {
            visit_tokens(&field.expr, f);
            if let Some(spec) = &field.spec {
                parts_tokens(spec, f);
            }
        }
    }
}

fn block_tokens(block: &Block, f: &mut dyn FnMut(&Token)) {
    for s in &block.stmts {
        match s {
            Stmt::Simple(l) => visit_tokens(&l.tokens, f),
            Stmt::Compound(c) => {
                for d in &c.decorators {
                    visit_tokens(&d.tokens, f);
                }
                for clause in &c.clauses {
                    visit_tokens(&clause.header, f);
                    match &clause.body {
                        Suite::Inline { tokens, .. } => visit_tokens(tokens, f),
                        Suite::Block { block, .. } => block_tokens(block, f),
                    }
                }
            }
        }
    }
}

/// Path to a statement list: a sequence of (statement index, clause index)
/// steps from the module body. The module body is the empty path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BodyId(pub Vec<(u32, u32)>);

impl BodyId {
    pub fn module() -> Self {
        BodyId(Vec::new())
    }

    pub fn is_module(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, stmt: usize, clause: usize) -> Self {
        let mut path = self.0.clone();
        path.push((stmt as u32, clause as u32));
        BodyId(path)
    }
}

impl std::fmt::Display for BodyId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_empty() {
            return f.write_str("module");
        }
        for (i, (s, c)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            write!(f, "{s}.{c}")?;
        }
        Ok(())
    }
}

impl Module {
    /// Replaces the text of name tokens by id. Returns how many changed.
    pub fn rename_tokens(&mut self, names: &std::collections::HashMap<crate::token::TokenId, String>) -> usize {
        let mut n = 0;
        self.for_each_token_mut(&mut |t| {
            if t.is_name() {
                if let Some(new) = names.get(&t.id) {
                    t.text = new.clone();
                    n += 1;
                }
            }
        });
        n
    }
}

impl Module {
    /// Visits every top-level token sequence: simple-statement lines,
    /// decorators, clause headers and inline suites. Tokens nested in
    /// f-string fields are reached through their enclosing token.
    pub fn for_each_slice_mut(&mut self, f: &mut dyn FnMut(&mut Vec<Token>)) {
        fn block(b: &mut Block, f: &mut dyn FnMut(&mut Vec<Token>)) {
            for s in &mut b.stmts {
                match s {
                    Stmt::Simple(l) => f(&mut l.tokens),
                    Stmt::Compound(c) => {
                        for d in &mut c.decorators {
                            f(&mut d.tokens);
                        }
                        for clause in &mut c.clauses {
                            f(&mut clause.header);
                            match &mut clause.body {
                                Suite::Inline { tokens, .. } => f(tokens),
                                Suite::Block { block: inner, .. } => block(inner, f),
                            }
                        }
                    }
                }
            }
        }
        block(&mut self.body, f);
    }

    /// Visits every trivia string below the header: leading lines, line
    /// ends, token prefixes and block trailers.
    pub fn for_each_trivia_mut(&mut self, f: &mut dyn FnMut(&mut String)) {
        fn line(l: &mut Line, f: &mut dyn FnMut(&mut String)) {
            f(&mut l.leading);
            tokens(&mut l.tokens, f);
            f(&mut l.end);
        }
        fn tokens(ts: &mut [Token], f: &mut dyn FnMut(&mut String)) {
            for t in ts {
                f(&mut t.pre);
            }
        }
        fn block(b: &mut Block, f: &mut dyn FnMut(&mut String)) {
            for s in &mut b.stmts {
                match s {
                    Stmt::Simple(l) => line(l, f),
                    Stmt::Compound(c) => {
                        for d in &mut c.decorators {
                            line(d, f);
                        }
                        for clause in &mut c.clauses {
                            f(&mut clause.leading);
                            tokens(&mut clause.header, f);
                            match &mut clause.body {
                                Suite::Inline { tokens: ts, end } => {
                                    tokens(ts, f);
                                    f(end);
                                }
                                Suite::Block { end, block: inner } => {
                                    f(end);
                                    block(inner, f);
                                }
                            }
                        }
                    }
                }
            }
            f(&mut b.trailing);
        }
        block(&mut self.body, f);
    }
}
