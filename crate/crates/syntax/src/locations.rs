//! Insertion points and tree-editing helpers.

use crate::error::ParseError;
use crate::tree::{Block, BodyId, BodyKind, Compound, Module, Stmt, Suite};

/// A position between two statements of an eligible statement list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EligibleLocation {
    pub body: BodyId,
    /// Insertion index, `0..=len`.
    pub index: usize,
    pub kind: BodyKind,
}

impl std::fmt::Display for EligibleLocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}@{}", self.body, self.index)
    }
}

fn eligible_kind(kind: BodyKind) -> bool {
    matches!(
        kind,
        BodyKind::Module
            | BodyKind::Function
            | BodyKind::Loop
            | BodyKind::Conditional
            | BodyKind::Try
    )
}

/// Number of leading statements of `block` that nothing may precede: a
/// docstring and, for the module body, `from __future__` imports.
pub fn protected_prefix(block: &Block, kind: BodyKind) -> usize {
    let mut n = 0;
    if matches!(kind, BodyKind::Module | BodyKind::Function | BodyKind::Class)
        && block.stmts.first().is_some_and(|s| s.is_string_expr())
    {
        n = 1;
    }
    if kind == BodyKind::Module {
        while block.stmts.get(n).is_some_and(|s| s.is_future_import()) {
            n += 1;
        }
    }
    n
}

/// Eligible locations in render order.
pub fn eligible_locations(module: &Module) -> Vec<EligibleLocation> {
    let mut out = Vec::new();
    collect(&module.body, BodyId::module(), BodyKind::Module, &mut out);
    out
}

fn collect(block: &Block, id: BodyId, kind: BodyKind, out: &mut Vec<EligibleLocation>) {
    let eligible = eligible_kind(kind);
    let skip = protected_prefix(block, kind);
    let push = |index: usize, out: &mut Vec<EligibleLocation>| {
        if eligible && index >= skip {
            out.push(EligibleLocation {
                body: id.clone(),
                index,
                kind,
            });
        }
    };
    for (i, stmt) in block.stmts.iter().enumerate() {
        push(i, out);
        if let Stmt::Compound(c) = stmt {
            for (ci, clause) in c.clauses.iter().enumerate() {
                if let Suite::Block { block: inner, .. } = &clause.body {
                    collect(inner, id.child(i, ci), c.body_kind(ci), out);
                }
            }
        }
    }
    push(block.stmts.len(), out);
}

impl Module {
    pub fn body(&self, id: &BodyId) -> Option<&Block> {
        let mut block = &self.body;
        for &(s, c) in &id.0 {
            let Stmt::Compound(comp) = block.stmts.get(s as usize)? else { return None };
            match &comp.clauses.get(c as usize)?.body {
                Suite::Block { block: inner, .. } => block = inner,
                Suite::Inline { .. } => return None,
            }
        }
        Some(block)
    }

    pub fn body_mut(&mut self, id: &BodyId) -> Option<&mut Block> {
        let mut block = &mut self.body;
        for &(s, c) in &id.0 {
            let Stmt::Compound(comp) = block.stmts.get_mut(s as usize)? else { return None };
            match &mut comp.clauses.get_mut(c as usize)?.body {
                Suite::Block { block: inner, .. } => block = inner,
                Suite::Inline { .. } => return None,
            }
        }
        Some(block)
    }

    pub fn body_kind(&self, id: &BodyId) -> Option<BodyKind> {
        let Some((&(s, c), parent)) = id.0.split_last() else {
            return Some(BodyKind::Module);
        };
        let parent = self.body(&BodyId(parent.to_vec()))?;
        match parent.stmts.get(s as usize)? {
            Stmt::Compound(comp) if (c as usize) < comp.clauses.len() => {
                Some(comp.body_kind(c as usize))
            }
            _ => None,
        }
    }

    /// Indentation of the statements in a body.
    pub fn body_indent(&self, id: &BodyId) -> String {
        self.body(id)
            .and_then(|b| b.stmts.first())
            .map_or_else(String::new, |s| s.indent().to_string())
    }

    /// One level of indentation as used by this file: the difference
    /// between the first nested block's indentation and its parent's.
    /// Defaults to four spaces.
    pub fn indent_unit(&self) -> String {
        fn find(block: &Block) -> Option<String> {
            for stmt in &block.stmts {
                if let Stmt::Compound(c) = stmt {
                    for clause in &c.clauses {
                        if let Suite::Block { block: inner, .. } = &clause.body {
                            if let Some(first) = inner.stmts.first() {
                                if let Some(unit) = first.indent().strip_prefix(clause.indent.as_str()) {
                                    if !unit.is_empty() {
                                        return Some(unit.to_string());
                                    }
                                }
                            }
                        }
                    }
                }
            }
            None
        }
        find(&self.body).unwrap_or_else(|| "    ".to_string())
    }
}

impl Stmt {
    /// The newline-bearing tail of the statement's last physical line.
    pub fn last_end_mut(&mut self) -> &mut String {
        match self {
            Stmt::Simple(l) => &mut l.end,
            Stmt::Compound(c) => compound_last_end(c),
        }
    }
}

fn compound_last_end(c: &mut Compound) -> &mut String {
    let clause = c.clauses.last_mut().expect("compound statement has a clause");
    match &mut clause.body {
        Suite::Inline { end, .. } => end,
        Suite::Block { end, block } => match block.stmts.last_mut() {
            Some(s) => s.last_end_mut(),
            None => end,
        },
    }
}

fn ensure_newline(s: &mut String) {
    if !s.ends_with('\n') && !s.ends_with('\r') {
        s.push('\n');
    }
}

impl Block {
    /// Inserts statements before position `index`. Comments attached to the
    /// statement currently at `index` stay with it.
    pub fn insert_stmts(&mut self, index: usize, stmts: Vec<Stmt>) {
        if index > 0 {
            if let Some(prev) = self.stmts.get_mut(index - 1) {
                ensure_newline(prev.last_end_mut());
            }
        }
        let idx = index.min(self.stmts.len());
        self.stmts.splice(idx..idx, stmts);
    }

    /// Inserts raw comment lines before position `index`. `text` must be
    /// complete lines, each ending in a newline.
    pub fn insert_comment_lines(&mut self, index: usize, text: &str) {
        if index > 0 {
            if let Some(prev) = self.stmts.get_mut(index - 1) {
                ensure_newline(prev.last_end_mut());
            }
        }
        match self.stmts.get_mut(index) {
            Some(stmt) => stmt.leading_mut().insert_str(0, text),
            None => self.trailing.insert_str(0, text),
        }
    }
}

/// Parses statements written at column zero and shifts them to `indent`.
pub fn parse_statements(src: &str, indent: &str) -> Result<Vec<Stmt>, ParseError> {
    let module = crate::parser::build(src)?;
    crate::grammar::module_events(&module)?;
    let mut stmts = module.body.stmts;
    if !indent.is_empty() {
        for s in &mut stmts {
            s.reindent(&|i| format!("{indent}{i}"));
        }
    }
    Ok(stmts)
}
