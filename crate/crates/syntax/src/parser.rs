//! Groups logical lines into blocks by indentation.

use crate::error::ParseError;
use crate::lexer::{tokenize, RawLine};
use crate::token::Token;
use crate::tree::{Block, Clause, Compound, Line, Module, Stmt, Suite};

pub(crate) fn build(src: &str) -> Result<Module, ParseError> {
    let (bom, text) = match src.strip_prefix('\u{feff}') {
        Some(rest) => ("\u{feff}", rest),
        None => ("", src),
    };
    let lexed = tokenize(text)?;
    let mut builder = Builder {
        lines: lexed.lines.into_iter().map(Some).collect(),
        pos: 0,
    };
    let mut body = builder.block("")?;
    if builder.pos < builder.lines.len() {
        let line = builder.lines[builder.pos].as_ref().unwrap();
        return Err(ParseError::syntax(line.line, 1, "unindent does not match any outer indentation level"));
    }
    body.trailing = lexed.trailing;

    let mut header = bom.to_string();
    let first_trivia = match body.stmts.first_mut() {
        Some(stmt) => stmt.leading_mut(),
        None => &mut body.trailing,
    };
    let cut = header_len(first_trivia);
    header.push_str(&first_trivia[..cut]);
    first_trivia.replace_range(..cut, "");
    Ok(Module { header, body })
}

/// Length of the shebang / encoding-declaration prefix of the file's
/// leading trivia.
fn header_len(trivia: &str) -> usize {
    let mut lines = trivia.split_inclusive('\n');
    let first = lines.next().unwrap_or("");
    let second = lines.next().unwrap_or("");
    let is_coding = |l: &str| {
        let t = l.trim_start_matches([' ', '\t', '\x0c']);
        t.starts_with('#') && (t.contains("coding:") || t.contains("coding="))
    };
    if first.ends_with('\n') && is_coding(second) {
        first.len() + second.len()
    } else if first.starts_with("#!") || is_coding(first) {
        first.len()
    } else {
        0
    }
}

struct Builder {
    lines: Vec<Option<RawLine>>,
    pos: usize,
}

impl Builder {
    fn peek(&self) -> Option<&RawLine> {
        self.lines.get(self.pos).and_then(|l| l.as_ref())
    }

    fn take(&mut self) -> RawLine {
        let line = self.lines[self.pos].take().expect("line consumed twice");
        self.pos += 1;
        line
    }

    fn block(&mut self, indent: &str) -> Result<Block, ParseError> {
        let mut stmts = Vec::new();
        while let Some(line) = self.peek() {
            if line.indent == indent {
                stmts.push(self.stmt()?);
            } else if indent.starts_with(line.indent.as_str()) {
                break;
            } else if line.indent.starts_with(indent) {
                return Err(ParseError::syntax(line.line, 1, "unexpected indent"));
            } else {
                return Err(ParseError::syntax(
                    line.line,
                    1,
                    "inconsistent use of tabs and spaces in indentation",
                ));
            }
        }
        Ok(Block {
            stmts,
            trailing: String::new(),
        })
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let line = self.peek().unwrap();
        let first = &line.tokens[0];
        if first.is_op("@") {
            return self.decorated();
        }
        let kw = compound_keyword(&line.tokens);
        if let Some(kw) = kw {
            return self.compound(Vec::new(), kw);
        }
        if first.text == "match"
            && first.is_name()
            && line.tokens.len() > 2
            && line.tokens.last().unwrap().is_op(":")
            && !line.tokens[1].is_op("=")
            && !line.tokens[1].is_op(":")
        {
            return Err(ParseError::unsupported(line.line, "match statement"));
        }
        if first.is_kw("type")
            && line.tokens.len() > 2
            && line.tokens[1].is_ident()
            && (line.tokens[2].is_op("=") || line.tokens[2].is_op("["))
        {
            return Err(ParseError::unsupported(line.line, "type alias statement"));
        }
        if let Some(cont) = ["elif", "else", "except", "finally"]
            .iter()
            .find(|k| first.is_kw(k))
        {
            return Err(ParseError::syntax(line.line, 1, format!("'{cont}' without matching statement")));
        }
        let raw = self.take();
        Ok(Stmt::Simple(Line {
            leading: raw.leading,
            indent: raw.indent,
            tokens: raw.tokens,
            end: raw.end,
        }))
    }

    fn decorated(&mut self) -> Result<Stmt, ParseError> {
        let indent = self.peek().unwrap().indent.clone();
        let mut decorators = Vec::new();
        while let Some(line) = self.peek() {
            if line.indent != indent || !line.tokens[0].is_op("@") {
                break;
            }
            let raw = self.take();
            decorators.push(Line {
                leading: raw.leading,
                indent: raw.indent,
                tokens: raw.tokens,
                end: raw.end,
            });
        }
        let line_no = decorators.last().map_or(1, |_| self.peek().map_or(1, |l| l.line));
        match self.peek() {
            Some(line) if line.indent == indent => match compound_keyword(&line.tokens) {
                Some(kw @ ("def" | "class")) => self.compound(decorators, kw),
                _ => Err(ParseError::syntax(line_no, 1, "decorator must precede def or class")),
            },
            _ => Err(ParseError::syntax(line_no, 1, "decorator must precede def or class")),
        }
    }

    fn compound(&mut self, decorators: Vec<Line>, kw: &'static str) -> Result<Stmt, ParseError> {
        let indent = self.peek().unwrap().indent.clone();
        let mut clauses = vec![self.clause()?];
        let allowed: &[&str] = match kw {
            "if" => &["elif", "else"],
            "for" | "while" => &["else"],
            "try" => &["except", "else", "finally"],
            _ => &[],
        };
        let mut seen_else = false;
        let mut seen_finally = false;
        while let Some(line) = self.peek() {
            if line.indent != indent {
                break;
            }
            let first = &line.tokens[0];
            let Some(cont) = allowed.iter().find(|k| first.is_kw(k)) else {
                break;
            };
            let bad = (seen_else && *cont != "finally")
                || seen_finally
                || (kw == "try" && *cont == "else" && clauses.len() == 1)
                || (kw == "try" && *cont == "except" && seen_else);
            if bad {
                return Err(ParseError::syntax(line.line, 1, format!("unexpected '{cont}'")));
            }
            seen_else |= *cont == "else";
            seen_finally |= *cont == "finally";
            clauses.push(self.clause()?);
        }
        if kw == "try" && clauses.len() == 1 {
            let line = self.peek().map_or(0, |l| l.line);
            return Err(ParseError::syntax(line, 1, "expected 'except' or 'finally' block"));
        }
        Ok(Stmt::Compound(Compound {
            decorators,
            clauses,
        }))
    }

    fn clause(&mut self) -> Result<Clause, ParseError> {
        let raw = self.take();
        let colon = header_colon(&raw.tokens)
            .ok_or_else(|| ParseError::syntax(raw.line, 1, "expected ':'"))?;
        let mut header = raw.tokens;
        let rest = header.split_off(colon + 1);
        let body = if rest.is_empty() {
            match self.peek() {
                Some(next)
                    if next.indent.len() > raw.indent.len()
                        && next.indent.starts_with(raw.indent.as_str()) =>
                {
                    let inner = next.indent.clone();
                    Suite::Block {
                        end: raw.end,
                        block: self.block(&inner)?,
                    }
                }
                _ => {
                    return Err(ParseError::syntax(raw.line + 1, 1, "expected an indented block"));
                }
            }
        } else {
            if compound_keyword(&rest).is_some() {
                return Err(ParseError::syntax(raw.line, 1, "compound statement after ':' on the same line"));
            }
            Suite::Inline {
                tokens: rest,
                end: raw.end,
            }
        };
        Ok(Clause {
            leading: raw.leading,
            indent: raw.indent,
            header,
            body,
        })
    }
}

pub(crate) fn compound_keyword(tokens: &[Token]) -> Option<&'static str> {
    let first = tokens.first()?;
    let (tok, is_async) = if first.is_kw("async") {
        (tokens.get(1)?, true)
    } else {
        (first, false)
    };
    let kws: &[&'static str] = if is_async {
        &["def", "for", "with"]
    } else {
        &["if", "while", "for", "try", "with", "def", "class"]
    };
    kws.iter().copied().find(|k| tok.is_kw(k))
}

/// Index of the colon ending a compound-statement header: the first `:` at
/// bracket depth zero not consumed by a `lambda`.
fn header_colon(tokens: &[Token]) -> Option<usize> {
    let mut depth = 0i32;
    let mut lambdas = 0;
    for (i, t) in tokens.iter().enumerate() {
        if t.is_op("(") || t.is_op("[") || t.is_op("{") {
            depth += 1;
        } else if t.is_op(")") || t.is_op("]") || t.is_op("}") {
            depth -= 1;
        } else if depth == 0 && t.is_kw("lambda") {
            lambdas += 1;
        } else if depth == 0 && t.is_op(":") {
            if lambdas == 0 {
                return Some(i);
            }
            lambdas -= 1;
        }
    }
    None
}
