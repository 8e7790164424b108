//! Tokens of a logical line.
//!
//! Each token owns the trivia that precedes it on the same logical line
//! (spaces, backslash continuations, and newlines or comments inside
//! brackets), so concatenating `pre + text` over a line reproduces it.

/// Token identifier, unique within one tree. Assigned in render order by
/// [`crate::Module::renumber`].
pub type TokenId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Name,
    Number,
    /// Plain, raw, or bytes literal (no `f` prefix).
    Str,
    /// Formatted string literal. `text` holds the prefix and opening quote.
    FStr(Box<FString>),
    Op,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub pre: String,
    pub text: String,
    pub kind: TokenKind,
    pub id: TokenId,
}

impl Token {
    pub fn new(kind: TokenKind, text: impl Into<String>) -> Self {
        Token {
            pre: String::new(),
            text: text.into(),
            kind,
            id: 0,
        }
    }

    pub fn op(text: &str) -> Self {
        Token::new(TokenKind::Op, text)
    }

    pub fn name(text: &str) -> Self {
        Token::new(TokenKind::Name, text)
    }

    pub fn with_pre(mut self, pre: impl Into<String>) -> Self {
        self.pre = pre.into();
        self
    }

    pub fn is_name(&self) -> bool {
        matches!(self.kind, TokenKind::Name)
    }

    /// An identifier that is not a hard keyword.
    pub fn is_ident(&self) -> bool {
        self.is_name() && !is_keyword(&self.text)
    }

    pub fn is_kw(&self, kw: &str) -> bool {
        self.is_name() && self.text == kw
    }

    pub fn is_op(&self, op: &str) -> bool {
        matches!(self.kind, TokenKind::Op) && self.text == op
    }

    pub fn is_string(&self) -> bool {
        matches!(self.kind, TokenKind::Str | TokenKind::FStr(_))
    }

    pub fn render_into(&self, out: &mut String) {
        out.push_str(&self.pre);
        self.render_body(out);
    }

    /// Source text without the leading trivia.
    pub fn render_body(&self, out: &mut String) {
        out.push_str(&self.text);
        if let TokenKind::FStr(f) = &self.kind {
            f.render_into(out);
        }
    }

    pub fn source(&self) -> String {
        let mut s = String::new();
        self.render_body(&mut s);
        s
    }
}

/// Body of an f-string after its opening quote.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FString {
    pub parts: Vec<FPart>,
    /// Closing quote(s).
    pub close: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FPart {
    /// Raw literal source text, `{{` and `}}` included as written.
    Literal(String),
    Field(FField),
}

/// A `{expr[=][!c][:spec]}` replacement field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FField {
    pub expr: Vec<Token>,
    /// Whitespace between the expression and what follows it.
    pub expr_tail: String,
    /// Self-documenting `=` with any whitespace after it, or empty.
    pub debug: String,
    /// `!r`, `!s`, `!a` or empty.
    pub conversion: String,
    pub spec: Option<Vec<FPart>>,
}

impl FString {
    pub fn render_into(&self, out: &mut String) {
        render_parts(&self.parts, out);
        out.push_str(&self.close);
    }
}

fn render_parts(parts: &[FPart], out: &mut String) {
    for part in parts {
        match part {
            FPart::Literal(s) => out.push_str(s),
            FPart::Field(f) => {
                out.push('{');
                for t in &f.expr {
                    t.render_into(out);
                }
                out.push_str(&f.expr_tail);
                out.push_str(&f.debug);
                out.push_str(&f.conversion);
                if let Some(spec) = &f.spec {
                    out.push(':');
                    render_parts(spec, out);
                }
                out.push('}');
            }
        }
    }
}

pub const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class",
    "continue", "def", "del", "elif", "else", "except", "finally", "for", "from", "global",
    "if", "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return",
    "try", "while", "with", "yield",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

/// Names provided by the `builtins` module of CPython 3.10.
pub const BUILTINS: &[&str] = &[
    "abs", "aiter", "all", "anext", "any", "ascii", "bin", "bool", "breakpoint", "bytearray",
    "bytes", "callable", "chr", "classmethod", "compile", "complex", "copyright", "credits",
    "delattr", "dict", "dir", "divmod", "enumerate", "eval", "exec", "exit", "filter", "float",
    "format", "frozenset", "getattr", "globals", "hasattr", "hash", "help", "hex", "id", "input",
    "int", "isinstance", "issubclass", "iter", "len", "license", "list", "locals", "map", "max",
    "memoryview", "min", "next", "object", "oct", "open", "ord", "pow", "print", "property",
    "quit", "range", "repr", "reversed", "round", "set", "setattr", "slice", "sorted",
    "staticmethod", "str", "sum", "super", "tuple", "type", "vars", "zip", "Ellipsis",
    "NotImplemented", "ArithmeticError", "AssertionError", "AttributeError", "BaseException",
    "BlockingIOError", "BrokenPipeError", "BufferError", "BytesWarning", "ChildProcessError",
    "ConnectionAbortedError", "ConnectionError", "ConnectionRefusedError",
    "ConnectionResetError", "DeprecationWarning", "EOFError", "EncodingWarning",
    "EnvironmentError", "Exception", "FileExistsError", "FileNotFoundError",
    "FloatingPointError", "FutureWarning", "GeneratorExit", "IOError", "ImportError",
    "ImportWarning", "IndentationError", "IndexError", "InterruptedError", "IsADirectoryError",
    "KeyError", "KeyboardInterrupt", "LookupError", "MemoryError", "ModuleNotFoundError",
    "NameError", "NotADirectoryError", "NotImplementedError", "OSError", "OverflowError",
    "PendingDeprecationWarning", "PermissionError", "ProcessLookupError", "RecursionError",
    "ReferenceError", "ResourceWarning", "RuntimeError", "RuntimeWarning",
    "StopAsyncIteration", "StopIteration", "SyntaxError", "SyntaxWarning", "SystemError",
    "SystemExit", "TabError", "TimeoutError", "TypeError", "UnboundLocalError",
    "UnicodeDecodeError", "UnicodeEncodeError", "UnicodeError", "UnicodeTranslateError",
    "UnicodeWarning", "UserWarning", "ValueError", "Warning", "ZeroDivisionError",
];

pub fn is_builtin(s: &str) -> bool {
    BUILTINS.contains(&s)
}

pub fn is_dunder(s: &str) -> bool {
    s.len() > 4 && s.starts_with("__") && s.ends_with("__")
}

pub fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_ascii_alphabetic() || (!c.is_ascii() && unicode_ident::is_xid_start(c))
}

pub fn is_ident_continue(c: char) -> bool {
    c == '_' || c.is_ascii_alphanumeric() || (!c.is_ascii() && unicode_ident::is_xid_continue(c))
}

/// True when `s` is a legal identifier and not a hard keyword.
pub fn is_valid_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if is_ident_start(c) => {}
        _ => return false,
    }
    chars.all(is_ident_continue) && !is_keyword(s)
}
