//! Scope resolution and the rename-safety policy.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::grammar::{module_events, Event, Role, ScopeKind};
use crate::literal::{fstring_literal_text, literal_value, LiteralValue};
use crate::token::{is_builtin, is_dunder, FPart, Token, TokenId, TokenKind};
use crate::tree::{BodyId, Module};

pub type ScopeId = usize;

/// Builtins whose use lets code reach variables by their names at runtime.
const REFLECTIVE: &[&str] = &["exec", "eval", "locals", "globals", "vars", "dir", "__import__"];

/// Attribute names of frame introspection APIs.
const FRAME_ATTRS: &[&str] = &["_getframe", "currentframe", "f_locals", "f_globals", "stack"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BindingKind {
    Function,
    Class,
    Variable,
    Parameter,
}

#[derive(Debug, Clone)]
pub struct Scope {
    pub kind: ScopeKind,
    pub parent: Option<ScopeId>,
    /// Function or class name for named scopes.
    pub name: Option<String>,
    /// Names bound anywhere in this scope's own code, including names
    /// declared global or nonlocal.
    pub bound: BTreeSet<String>,
    pub globals: BTreeSet<String>,
    pub nonlocals: BTreeSet<String>,
    /// A reflective builtin is used here or in a nested scope.
    pub reflective: bool,
}

impl Scope {
    fn new(kind: ScopeKind, parent: Option<ScopeId>, name: Option<String>) -> Self {
        Scope {
            kind,
            parent,
            name,
            bound: BTreeSet::new(),
            globals: BTreeSet::new(),
            nonlocals: BTreeSet::new(),
            reflective: false,
        }
    }

    /// Bound here and owned by this scope (not redirected by a
    /// global/nonlocal declaration).
    pub fn owns(&self, name: &str) -> bool {
        self.bound.contains(name) && !self.globals.contains(name) && !self.nonlocals.contains(name)
    }

    pub fn declares(&self, name: &str) -> bool {
        self.globals.contains(name) || self.nonlocals.contains(name)
    }
}

#[derive(Debug, Clone)]
pub struct Binding {
    pub name: String,
    pub kind: BindingKind,
    pub scope: ScopeId,
    /// Tokens that bind the name (assignment targets, parameters, def and
    /// class names, loop targets, `del` targets).
    pub sites: Vec<TokenId>,
    /// Tokens that read the name or redeclare it with global/nonlocal.
    pub references: Vec<TokenId>,
    pub renameable: bool,
}

/// Names and string data that constrain renaming.
#[derive(Debug, Clone, Default)]
pub struct Facts {
    /// Every identifier token text in the unit, f-string fields included.
    pub identifiers: BTreeSet<String>,
    pub attributes: BTreeSet<String>,
    pub keywords: BTreeSet<String>,
    /// Names listed in `from m import ...` (original names).
    pub from_imported: BTreeSet<String>,
    /// Names bound by import statements.
    pub imported: BTreeSet<String>,
    /// Identifier-shaped words in string literals.
    pub string_words: BTreeSet<String>,
    /// Names used in self-documenting f-string fields (`{x=}`).
    pub debug_names: BTreeSet<String>,
    pub star_import: bool,
}

impl Facts {
    /// Names another file could use to reach into this one, or this file
    /// into another: attribute names, from-imported names, keyword
    /// argument names and identifier-shaped string data.
    pub fn exported_names(&self) -> BTreeSet<String> {
        let mut out = self.attributes.clone();
        out.extend(self.from_imported.iter().cloned());
        out.extend(self.keywords.iter().cloned());
        out.extend(self.string_words.iter().cloned());
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct BindingTable {
    pub bindings: Vec<Binding>,
    pub scopes: Vec<Scope>,
    pub body_scopes: BTreeMap<BodyId, ScopeId>,
    pub facts: Facts,
    by_token: HashMap<TokenId, usize>,
}

impl BindingTable {
    /// Binding a token (site or reference) belongs to.
    pub fn binding_of(&self, tok: TokenId) -> Option<usize> {
        self.by_token.get(&tok).copied()
    }

    pub fn renameable(&self) -> impl Iterator<Item = (usize, &Binding)> {
        self.bindings.iter().enumerate().filter(|(_, b)| b.renameable)
    }

    pub fn scope_of_body(&self, body: &BodyId) -> Option<ScopeId> {
        self.body_scopes.get(body).copied()
    }

    /// Names that dead code inserted into `scope` may assign without
    /// changing how any existing reference resolves: names the scope
    /// already owns, minus dunders and private names.
    pub fn reusable_names(&self, scope: ScopeId) -> Vec<String> {
        let s = &self.scopes[scope];
        s.bound
            .iter()
            .filter(|n| s.owns(n) && !n.starts_with("__"))
            .cloned()
            .collect()
    }

    /// Token-id keyed replacement map for a set of renamed bindings.
    pub fn rename_map(&self, names: &HashMap<usize, String>) -> HashMap<TokenId, String> {
        let mut out = HashMap::new();
        for (&idx, new) in names {
            let b = &self.bindings[idx];
            for &t in b.sites.iter().chain(&b.references) {
                out.insert(t, new.clone());
            }
        }
        out
    }
}

struct Use {
    scope: ScopeId,
    name: String,
    tok: TokenId,
    role: Role,
}

struct Site {
    scope: ScopeId,
    name: String,
    tok: TokenId,
    role: Role,
}

pub(crate) fn analyze(module: &Module, external: &BTreeSet<String>) -> BindingTable {
    let events = module_events(module).expect("a parsed module always validates");
    let mut table = BindingTable::default();
    let mut facts = Facts::default();
    let mut stack: Vec<ScopeId> = Vec::new();
    let mut sites: Vec<Site> = Vec::new();
    let mut uses: Vec<Use> = Vec::new();

    for ev in &events {
        match ev {
            Event::Enter(kind, name) => {
                let parent = stack.last().copied();
                table
                    .scopes
                    .push(Scope::new(*kind, parent, name.map(|t| t.text.clone())));
                stack.push(table.scopes.len() - 1);
            }
            Event::Exit => {
                stack.pop();
            }
            Event::BeginBody(id, _) => {
                table.body_scopes.insert(id.clone(), *stack.last().unwrap());
            }
            Event::EndBody => {}
            Event::StarImport => facts.star_import = true,
            Event::Str { tok, .. } => collect_string_words(tok, &mut facts.string_words),
            Event::Name { tok, role, nargs, .. } => {
                let cur = *stack.last().unwrap();
                let name = tok.text.clone();
                match role {
                    Role::Attr => {
                        facts.attributes.insert(name);
                    }
                    Role::Keyword => {
                        facts.keywords.insert(name);
                    }
                    Role::ImportPath => {}
                    Role::FromOrig => {
                        facts.from_imported.insert(name);
                    }
                    Role::Global | Role::Nonlocal => {
                        let s = &mut table.scopes[cur];
                        if *role == Role::Global {
                            s.globals.insert(name.clone());
                        } else {
                            s.nonlocals.insert(name.clone());
                        }
                        uses.push(Use { scope: cur, name, tok: tok.id, role: *role });
                    }
                    Role::Load => {
                        // exec/eval given an explicit namespace cannot see ours.
                        let isolated = matches!(name.as_str(), "exec" | "eval") && *nargs >= 2;
                        if REFLECTIVE.contains(&name.as_str()) && !isolated {
                            table.scopes[cur].reflective = true;
                        }
                        uses.push(Use { scope: cur, name, tok: tok.id, role: *role });
                    }
                    _ => {
                        if matches!(role, Role::ImportBind | Role::FromBind) {
                            facts.imported.insert(name.clone());
                        }
                        if *role == Role::FromBind {
                            facts.from_imported.insert(name.clone());
                        }
                        let mut scope = cur;
                        if *role == Role::Walrus {
                            while table.scopes[scope].kind == ScopeKind::Comprehension {
                                scope = table.scopes[scope].parent.unwrap();
                            }
                        }
                        table.scopes[scope].bound.insert(name.clone());
                        sites.push(Site { scope, name, tok: tok.id, role: *role });
                    }
                }
            }
        }
    }

    module.for_each_token(&mut |t: &Token| {
        if t.is_ident() {
            facts.identifiers.insert(t.text.clone());
        }
        if let TokenKind::FStr(f) = &t.kind {
            collect_debug_names(&f.parts, &mut facts.debug_names);
        }
    });

    let frame_access = FRAME_ATTRS.iter().any(|a| facts.attributes.contains(*a));
    let name_introspection =
        facts.attributes.contains("__name__") || facts.attributes.contains("__qualname__");

    // A reflective call can observe its own scope and every enclosing one.
    for i in 0..table.scopes.len() {
        if table.scopes[i].reflective || frame_access {
            let mut p = Some(i);
            while let Some(s) = p {
                table.scopes[s].reflective = true;
                p = table.scopes[s].parent;
            }
        }
    }

    // Group binding sites by the scope that owns them.
    let mut keyed: BTreeMap<(ScopeId, String), Vec<(TokenId, Role)>> = BTreeMap::new();
    for site in &sites {
        let s = &table.scopes[site.scope];
        let owner = if s.globals.contains(&site.name) {
            Some(0)
        } else if s.nonlocals.contains(&site.name) {
            resolve_enclosing(&table.scopes, site.scope, &site.name)
        } else {
            Some(site.scope)
        };
        if let Some(owner) = owner {
            keyed
                .entry((owner, site.name.clone()))
                .or_default()
                .push((site.tok, site.role));
        }
    }

    let mut excluded: BTreeSet<(ScopeId, String)> = BTreeSet::new();
    let mut index: HashMap<(ScopeId, String), usize> = HashMap::new();
    type Sites = Vec<(TokenId, Role)>;
    let mut ordered: Vec<((ScopeId, String), Sites)> = keyed.into_iter().collect();
    ordered.sort_by_key(|(_, v)| v.iter().map(|(t, _)| *t).min());
    for (key, mut toks) in ordered {
        toks.sort_by_key(|(t, _)| *t);
        let name = &key.1;
        let imported = toks.iter().any(|(_, r)| matches!(r, Role::ImportBind | Role::FromBind));
        if imported || is_dunder(name) || name.starts_with("__") || is_builtin(name) {
            excluded.insert(key);
            continue;
        }
        let kind = match toks[0].1 {
            Role::FuncName => BindingKind::Function,
            Role::ClassName => BindingKind::Class,
            Role::Param => BindingKind::Parameter,
            _ => BindingKind::Variable,
        };
        index.insert(key.clone(), table.bindings.len());
        table.bindings.push(Binding {
            name: name.clone(),
            kind,
            scope: key.0,
            sites: toks.iter().map(|(t, _)| *t).collect(),
            references: Vec::new(),
            renameable: true,
        });
    }

    for u in &uses {
        let owner = match u.role {
            Role::Global => Some(0),
            Role::Nonlocal => resolve_enclosing(&table.scopes, u.scope, &u.name),
            _ => resolve(&table.scopes, u.scope, &u.name),
        };
        if let Some(&b) = owner.and_then(|o| index.get(&(o, u.name.clone()))) {
            table.bindings[b].references.push(u.tok);
        }
    }

    for (i, b) in table.bindings.iter_mut().enumerate() {
        b.references.sort_unstable();
        for &t in b.sites.iter().chain(&b.references) {
            table.by_token.insert(t, i);
        }
        let scope = &table.scopes[b.scope];
        let n = b.name.as_str();
        let frozen = scope.reflective
            || scope.kind == ScopeKind::Class
            || (facts.star_import && b.scope == 0)
            || facts.attributes.contains(n)
            || facts.keywords.contains(n)
            || facts.from_imported.contains(n)
            || facts.string_words.contains(n)
            || facts.debug_names.contains(n)
            || external.contains(n)
            || (name_introspection && matches!(b.kind, BindingKind::Function | BindingKind::Class));
        b.renameable = !frozen;
    }

    table.facts = facts;
    table
}

/// Scope that a read of `name` in `scope` resolves to, if any binding owns
/// it. Class scopes are invisible to nested scopes.
fn resolve(scopes: &[Scope], scope: ScopeId, name: &str) -> Option<ScopeId> {
    let s = &scopes[scope];
    if s.globals.contains(name) {
        return Some(0);
    }
    if s.nonlocals.contains(name) {
        return resolve_enclosing(scopes, scope, name);
    }
    if s.owns(name) {
        return Some(scope);
    }
    let mut p = s.parent;
    while let Some(a) = p {
        let anc = &scopes[a];
        if anc.kind == ScopeKind::Module {
            return anc.bound.contains(name).then_some(a);
        }
        if anc.kind != ScopeKind::Class {
            if anc.globals.contains(name) {
                return Some(0);
            }
            if anc.owns(name) {
                return Some(a);
            }
        }
        p = anc.parent;
    }
    None
}

/// Target of a `nonlocal` declaration: the nearest enclosing function-like
/// scope owning the name.
fn resolve_enclosing(scopes: &[Scope], scope: ScopeId, name: &str) -> Option<ScopeId> {
    let mut p = scopes[scope].parent;
    while let Some(a) = p {
        let anc = &scopes[a];
        match anc.kind {
            ScopeKind::Module => return None,
            ScopeKind::Class => {}
            _ if anc.owns(name) => return Some(a),
            _ => {}
        }
        p = anc.parent;
    }
    None
}

fn collect_string_words(tok: &Token, out: &mut BTreeSet<String>) {
    let text = match literal_value(tok) {
        Some(LiteralValue::Str(s)) => s,
        Some(LiteralValue::Bytes(b)) => String::from_utf8_lossy(&b).into_owned(),
        None => match fstring_literal_text(tok) {
            Some(s) => s,
            None => tok.source(),
        },
    };
    let mut word = String::new();
    for c in text.chars().chain(std::iter::once(' ')) {
        if crate::token::is_ident_continue(c) {
            word.push(c);
        } else if !word.is_empty() {
            if crate::token::is_valid_identifier(&word) {
                out.insert(std::mem::take(&mut word));
            } else {
                word.clear();
            }
        }
    }
}

fn collect_debug_names(parts: &[FPart], out: &mut BTreeSet<String>) {
    for p in parts {
        if let FPart::Field(f) = p {
            if !f.debug.is_empty() {
                crate::tree::visit_tokens(&f.expr, &mut |t| {
                    if t.is_ident() {
                        out.insert(t.text.clone());
                    }
                });
            }
            for t in &f.expr {
                if let TokenKind::FStr(inner) = &t.kind {
                    collect_debug_names(&inner.parts, out);
                }
            }
            if let Some(spec) = &f.spec {
                collect_debug_names(spec, out);
            }
        }
    }
}
