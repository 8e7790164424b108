//! Lossless concrete syntax trees for Python source, with scope analysis
//! and insertion-point enumeration.
//!
//! ```
//! let src = "x = 1  # one\n\ndef f(a):\n    return a + x\n";
//! let unit = ctfam_syntax::parse(src).unwrap();
//! assert_eq!(unit.render(), src);
//! assert_eq!(unit.analyze_bindings().bindings.len(), 3);
//! ```

mod error;
mod grammar;
mod lexer;
pub mod literal;
mod locations;
mod parser;
mod scope;
mod token;
mod tree;
mod unit;

pub use error::{Location, ParseError};
pub use grammar::{module_events, Event, Role, ScopeKind};
pub use locations::{eligible_locations, parse_statements, protected_prefix, EligibleLocation};
pub use scope::{Binding, BindingKind, BindingTable, Facts, Scope, ScopeId};
pub use token::{
    is_builtin, is_dunder, is_keyword, is_valid_identifier, FField, FPart, FString, Token,
    TokenId, TokenKind, BUILTINS, KEYWORDS,
};
pub use tree::{Block, BodyId, BodyKind, Clause, Compound, Line, Module, Stmt, Suite};
pub use unit::{parse, render, SourceUnit};
