//! Splits source text into logical lines of tokens.
//!
//! Blank lines and comment-only lines become trivia attached to the next
//! logical line. Nothing is dropped: the trivia, indentation, token `pre`
//! strings and line ends of all lines concatenate back to the input.

use crate::error::ParseError;
use crate::token::{is_ident_continue, is_ident_start, FField, FPart, FString, Token, TokenKind};

#[derive(Debug)]
pub(crate) struct RawLine {
    pub leading: String,
    pub indent: String,
    pub tokens: Vec<Token>,
    pub end: String,
    pub line: usize,
}

#[derive(Debug)]
pub(crate) struct Lexed {
    pub lines: Vec<RawLine>,
    pub trailing: String,
}

const OPS3: &[&str] = &["**=", "//=", ">>=", "<<=", "..."];
const OPS2: &[&str] = &[
    "**", "//", ">>", "<<", "<=", ">=", "==", "!=", "->", ":=", "+=", "-=", "*=", "/=", "%=",
    "&=", "|=", "^=", "@=",
];
const OPS1: &str = "+-*/%@&|^~<>()[]{},:;.=";

const STRING_PREFIXES: &[&str] = &["r", "u", "b", "br", "rb", "f", "fr", "rf"];

pub(crate) fn tokenize(src: &str) -> Result<Lexed, ParseError> {
    Lexer::new(src, 1).lines()
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    line_start: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Lexer {
            src,
            pos: 0,
            line,
            line_start: 0,
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.rest().chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' || (c == '\r' && self.peek() != Some('\n')) {
            self.line += 1;
            self.line_start = self.pos;
        }
        Some(c)
    }

    fn column(&self) -> usize {
        self.src[self.line_start..self.pos].chars().count() + 1
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::syntax(self.line, self.column(), message)
    }

    /// Consumes one newline sequence into `out`. Returns false if none.
    fn eat_newline(&mut self, out: &mut String) -> bool {
        match self.peek() {
            Some('\r') => {
                out.push('\r');
                self.bump();
                if self.peek() == Some('\n') {
                    out.push('\n');
                    self.bump();
                }
                true
            }
            Some('\n') => {
                out.push('\n');
                self.bump();
                true
            }
            _ => false,
        }
    }

    fn take_while(&mut self, out: &mut String, f: impl Fn(char) -> bool) {
        while let Some(c) = self.peek() {
            if !f(c) {
                break;
            }
            out.push(c);
            self.bump();
        }
    }

    fn lines(mut self) -> Result<Lexed, ParseError> {
        let mut lines = Vec::new();
        let mut pending = String::new();
        while self.pos < self.src.len() {
            let mut indent = String::new();
            self.take_while(&mut indent, |c| matches!(c, ' ' | '\t' | '\x0c'));
            match self.peek() {
                None => {
                    pending.push_str(&indent);
                }
                Some('\n') | Some('\r') => {
                    pending.push_str(&indent);
                    self.eat_newline(&mut pending);
                }
                Some('#') => {
                    pending.push_str(&indent);
                    self.take_while(&mut pending, |c| c != '\n' && c != '\r');
                    self.eat_newline(&mut pending);
                }
                Some(_) => {
                    let line = self.line;
                    let (tokens, end) = self.scan_tokens(false)?;
                    if tokens.is_empty() {
                        return Err(ParseError::syntax(line, 1, "expected a statement"));
                    }
                    lines.push(RawLine {
                        leading: std::mem::take(&mut pending),
                        indent,
                        tokens,
                        end,
                        line,
                    });
                }
            }
        }
        Ok(Lexed {
            lines,
            trailing: pending,
        })
    }

    /// Scans tokens up to the end of a logical line. In `nested` mode (an
    /// f-string replacement field) newlines are trivia and scanning stops at
    /// the end of input.
    fn scan_tokens(&mut self, nested: bool) -> Result<(Vec<Token>, String), ParseError> {
        let mut tokens = Vec::new();
        let mut stack: Vec<(char, usize)> = Vec::new();
        let mut pre = String::new();
        loop {
            let Some(c) = self.peek() else {
                if let Some((open, line)) = stack.last() {
                    if !nested {
                        return Err(ParseError::syntax(
                            *line,
                            1,
                            format!("'{open}' was never closed"),
                        ));
                    }
                }
                return Ok((tokens, pre));
            };
            match c {
                ' ' | '\t' | '\x0c' => {
                    pre.push(c);
                    self.bump();
                }
                '\\' => match self.peek_at(1) {
                    Some('\n') | Some('\r') => {
                        pre.push('\\');
                        self.bump();
                        self.eat_newline(&mut pre);
                        if self.peek().is_none() {
                            return Err(self.error("unexpected EOF after line continuation"));
                        }
                    }
                    _ => return Err(self.error("unexpected character after line continuation")),
                },
                '#' => {
                    if nested {
                        return Err(self.error("f-string expression part cannot include '#'"));
                    }
                    self.take_while(&mut pre, |c| c != '\n' && c != '\r');
                    if stack.is_empty() {
                        self.eat_newline(&mut pre);
                        return Ok((tokens, pre));
                    }
                }
                '\n' | '\r' => {
                    self.eat_newline(&mut pre);
                    if !nested && stack.is_empty() {
                        return Ok((tokens, pre));
                    }
                }
                _ => {
                    let mut tok = self.scan_token(&mut stack)?;
                    tok.pre = std::mem::take(&mut pre);
                    tokens.push(tok);
                }
            }
        }
    }

    fn scan_token(&mut self, stack: &mut Vec<(char, usize)>) -> Result<Token, ParseError> {
        let c = self.peek().expect("caller checked");
        if is_ident_start(c) {
            let mut word = String::new();
            self.take_while(&mut word, is_ident_continue);
            if matches!(self.peek(), Some('\'') | Some('"'))
                && STRING_PREFIXES.contains(&word.to_ascii_lowercase().as_str())
            {
                return self.scan_string(word);
            }
            return Ok(Token::new(TokenKind::Name, word));
        }
        if c.is_ascii_digit() || (c == '.' && self.peek_at(1).is_some_and(|d| d.is_ascii_digit()))
        {
            return Ok(self.scan_number());
        }
        if c == '\'' || c == '"' {
            return self.scan_string(String::new());
        }
        let rest = self.rest();
        let op = OPS3
            .iter()
            .chain(OPS2.iter())
            .find(|op| rest.starts_with(*op))
            .map(|s| s.to_string())
            .or_else(|| OPS1.contains(c).then(|| c.to_string()));
        let Some(op) = op else {
            return Err(self.error(format!("invalid character {c:?}")));
        };
        match op.as_str() {
            "(" | "[" | "{" => stack.push((c, self.line)),
            ")" | "]" | "}" => {
                let want = match c {
                    ')' => '(',
                    ']' => '[',
                    _ => '{',
                };
                match stack.pop() {
                    Some((open, _)) if open == want => {}
                    Some((open, _)) => {
                        return Err(self.error(format!(
                            "closing parenthesis '{c}' does not match opening parenthesis '{open}'"
                        )))
                    }
                    None => return Err(self.error(format!("unmatched '{c}'"))),
                }
            }
            _ => {}
        }
        for _ in op.chars() {
            self.bump();
        }
        Ok(Token::new(TokenKind::Op, op))
    }

    fn scan_number(&mut self) -> Token {
        let mut s = String::new();
        let c = self.peek().unwrap();
        if c == '0' && matches!(self.peek_at(1), Some('x' | 'X' | 'o' | 'O' | 'b' | 'B')) {
            s.push(c);
            self.bump();
            s.push(self.bump().unwrap());
            self.take_while(&mut s, |c| c.is_ascii_hexdigit() || c == '_');
            return Token::new(TokenKind::Number, s);
        }
        self.take_while(&mut s, |c| c.is_ascii_digit() || c == '_');
        if self.peek() == Some('.') {
            s.push('.');
            self.bump();
            self.take_while(&mut s, |c| c.is_ascii_digit() || c == '_');
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let next = self.peek_at(1);
            let exp = match next {
                Some(d) if d.is_ascii_digit() => true,
                Some('+' | '-') => self.peek_at(2).is_some_and(|d| d.is_ascii_digit()),
                _ => false,
            };
            if exp {
                s.push(self.bump().unwrap());
                s.push(self.bump().unwrap());
                self.take_while(&mut s, |c| c.is_ascii_digit() || c == '_');
            }
        }
        if matches!(self.peek(), Some('j' | 'J')) {
            s.push(self.bump().unwrap());
        }
        Token::new(TokenKind::Number, s)
    }

    fn scan_string(&mut self, prefix: String) -> Result<Token, ParseError> {
        let start_line = self.line;
        let quote = self.bump().unwrap();
        let triple = self.peek() == Some(quote) && self.peek_at(1) == Some(quote);
        let mut open = prefix.clone();
        open.push(quote);
        if triple {
            self.bump();
            self.bump();
            open.push(quote);
            open.push(quote);
        }
        let mut body = String::new();
        let close;
        loop {
            match self.peek() {
                None => {
                    return Err(ParseError::syntax(
                        start_line,
                        1,
                        "unterminated string literal",
                    ))
                }
                Some('\\') => {
                    body.push('\\');
                    self.bump();
                    match self.peek() {
                        Some('\r') => {
                            self.eat_newline(&mut body);
                        }
                        Some(c) => {
                            body.push(c);
                            self.bump();
                        }
                        None => {}
                    }
                }
                Some(c) if c == quote => {
                    if !triple {
                        self.bump();
                        close = quote.to_string();
                        break;
                    }
                    if self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote) {
                        self.bump();
                        self.bump();
                        self.bump();
                        close = open[prefix.len()..].to_string();
                        break;
                    }
                    body.push(c);
                    self.bump();
                }
                Some('\n') | Some('\r') if !triple => {
                    return Err(ParseError::syntax(
                        start_line,
                        1,
                        "unterminated string literal",
                    ))
                }
                Some(c) => {
                    body.push(c);
                    self.bump();
                }
            }
        }
        let lower = prefix.to_ascii_lowercase();
        if lower.contains('f') {
            let raw = lower.contains('r');
            let mut cursor = FCursor {
                chars: body.chars().collect(),
                pos: 0,
                raw,
                line: start_line,
            };
            let parts = cursor.parts(false)?;
            return Ok(Token::new(
                TokenKind::FStr(Box::new(FString { parts, close })),
                open,
            ));
        }
        let mut text = open;
        text.push_str(&body);
        text.push_str(&close);
        Ok(Token::new(TokenKind::Str, text))
    }
}

struct FCursor {
    chars: Vec<char>,
    pos: usize,
    raw: bool,
    line: usize,
}

impl FCursor {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.chars.get(self.pos + n).copied()
    }

    fn error(&self, msg: &str) -> ParseError {
        ParseError::syntax(self.line, 1, format!("f-string: {msg}"))
    }

    fn parts(&mut self, in_spec: bool) -> Result<Vec<FPart>, ParseError> {
        let mut parts = Vec::new();
        let mut lit = String::new();
        loop {
            match self.peek() {
                None => {
                    if in_spec {
                        return Err(self.error("expecting '}'"));
                    }
                    break;
                }
                Some('{') => {
                    if !in_spec && self.peek_at(1) == Some('{') {
                        lit.push_str("{{");
                        self.pos += 2;
                    } else {
                        if !lit.is_empty() {
                            parts.push(FPart::Literal(std::mem::take(&mut lit)));
                        }
                        parts.push(FPart::Field(self.field()?));
                    }
                }
                Some('}') => {
                    if in_spec {
                        break;
                    }
                    if self.peek_at(1) == Some('}') {
                        lit.push_str("}}");
                        self.pos += 2;
                    } else {
                        return Err(self.error("single '}' is not allowed"));
                    }
                }
                Some('\\') if !self.raw => {
                    lit.push('\\');
                    self.pos += 1;
                    match self.peek() {
                        Some('N') if self.peek_at(1) == Some('{') => {
                            while let Some(c) = self.peek() {
                                lit.push(c);
                                self.pos += 1;
                                if c == '}' {
                                    break;
                                }
                            }
                        }
                        Some(c) if c != '{' && c != '}' => {
                            lit.push(c);
                            self.pos += 1;
                        }
                        _ => {}
                    }
                }
                Some(c) => {
                    lit.push(c);
                    self.pos += 1;
                }
            }
        }
        if !lit.is_empty() {
            parts.push(FPart::Literal(lit));
        }
        Ok(parts)
    }

    fn field(&mut self) -> Result<FField, ParseError> {
        debug_assert_eq!(self.peek(), Some('{'));
        self.pos += 1;
        let start = self.pos;
        let mut depth = 0usize;
        let mut quote: Option<char> = None;
        loop {
            let Some(c) = self.peek() else {
                return Err(self.error("expecting '}'"));
            };
            if let Some(q) = quote {
                if c == q {
                    quote = None;
                }
                self.pos += 1;
                continue;
            }
            match c {
                '\'' | '"' => quote = Some(c),
                '\\' => return Err(self.error("expression part cannot include a backslash")),
                '(' | '[' | '{' => depth += 1,
                ')' | ']' | '}' if depth > 0 => depth -= 1,
                '}' | ':' if depth == 0 => break,
                '!' if depth == 0 && self.peek_at(1) != Some('=') => break,
                '=' | '!' | '<' | '>' if self.peek_at(1) == Some('=') => {
                    self.pos += 2;
                    continue;
                }
                '=' if depth == 0 => break,
                _ => {}
            }
            self.pos += 1;
        }
        let expr_src: String = self.chars[start..self.pos].iter().collect();
        let mut lexer = Lexer::new(&expr_src, self.line);
        let (expr, expr_tail) = lexer.scan_tokens(true)?;
        if expr.is_empty() {
            return Err(self.error("empty expression not allowed"));
        }
        let mut debug = String::new();
        if self.peek() == Some('=') {
            debug.push('=');
            self.pos += 1;
            while let Some(c) = self.peek().filter(|c| c.is_whitespace()) {
                debug.push(c);
                self.pos += 1;
            }
        }
        let mut conversion = String::new();
        if self.peek() == Some('!') {
            match self.peek_at(1) {
                Some(c @ ('r' | 's' | 'a')) => {
                    conversion.push('!');
                    conversion.push(c);
                    self.pos += 2;
                }
                _ => return Err(self.error("invalid conversion character")),
            }
        }
        let mut spec = None;
        if self.peek() == Some(':') {
            self.pos += 1;
            spec = Some(self.parts(true)?);
        }
        if self.peek() != Some('}') {
            return Err(self.error("expecting '}'"));
        }
        self.pos += 1;
        Ok(FField {
            expr,
            expr_tail,
            debug,
            conversion,
            spec,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn render(lexed: &Lexed) -> String {
        let mut out = String::new();
        for line in &lexed.lines {
            out.push_str(&line.leading);
            out.push_str(&line.indent);
            for t in &line.tokens {
                t.render_into(&mut out);
            }
            out.push_str(&line.end);
        }
        out.push_str(&lexed.trailing);
        out
    }

    fn texts(src: &str) -> Vec<String> {
        tokenize(src).unwrap().lines[0]
            .tokens
            .iter()
            .map(|t| t.source())
            .collect()
    }

    #[test]
    fn operators_prefer_longest_match() {
        assert_eq!(texts("a //= b ** 2\n"), ["a", "//=", "b", "**", "2"]);
        assert_eq!(texts("x[...] != y\n"), ["x", "[", "...", "]", "!=", "y"]);
    }

    #[test]
    fn numbers() {
        assert_eq!(
            texts("f(0x1F, 1_000, 3.5e-2, .5, 1j, 2.)\n"),
            ["f", "(", "0x1F", ",", "1_000", ",", "3.5e-2", ",", ".5", ",", "1j", ",", "2.", ")"]
        );
    }

    #[test]
    fn brackets_span_lines_and_comments() {
        let src = "x = [1,  # one\n     2]\ny = 3\n";
        let lexed = tokenize(src).unwrap();
        assert_eq!(lexed.lines.len(), 2);
        assert_eq!(render(&lexed), src);
    }

    #[test]
    fn trivia_goes_to_next_line() {
        let src = "a = 1\n\n# note\n  \nb = 2  # tail\n# end\n";
        let lexed = tokenize(src).unwrap();
        assert_eq!(lexed.lines[1].leading, "\n# note\n  \n");
        assert_eq!(lexed.lines[1].end, "  # tail\n");
        assert_eq!(lexed.trailing, "# end\n");
        assert_eq!(render(&lexed), src);
    }

    #[test]
    fn strings_with_prefixes_and_triple_quotes() {
        let src = "s = rb'\\x00' + u\"a\\\"b\" + '''x\n'y'\n'''\n";
        let lexed = tokenize(src).unwrap();
        let toks = &lexed.lines[0].tokens;
        assert_eq!(toks[2].text, "rb'\\x00'");
        assert_eq!(toks[4].text, "u\"a\\\"b\"");
        assert!(toks[6].text.starts_with("'''"));
        assert_eq!(render(&lexed), src);
    }

    #[test]
    fn fstring_fields() {
        let src = "f'{a!r:>{w}} {{x}} {b = } {c[\"k\"]:.2f}'\n";
        let lexed = tokenize(src).unwrap();
        let tok = &lexed.lines[0].tokens[0];
        let TokenKind::FStr(f) = &tok.kind else { panic!() };
        let fields: Vec<_> = f
            .parts
            .iter()
            .filter_map(|p| match p {
                FPart::Field(f) => Some(f),
                _ => None,
            })
            .collect();
        assert_eq!(fields.len(), 3);
        assert_eq!(fields[0].conversion, "!r");
        assert!(fields[0].spec.as_ref().unwrap().iter().any(|p| matches!(p, FPart::Field(_))));
        assert_eq!(fields[1].debug, "= ");
        assert_eq!(fields[1].expr_tail, " ");
        assert_eq!(render(&lexed), src);
    }

    #[test]
    fn fstring_not_equal_is_not_conversion() {
        let lexed = tokenize("f'{a!=b}'\n").unwrap();
        let TokenKind::FStr(f) = &lexed.lines[0].tokens[0].kind else { panic!() };
        let FPart::Field(field) = &f.parts[0] else { panic!() };
        assert_eq!(field.expr.len(), 3);
        assert!(field.conversion.is_empty());
    }

    #[test]
    fn errors() {
        assert!(tokenize("x = (1,\n").is_err());
        assert!(tokenize("x = 'abc\n").is_err());
        assert!(tokenize("x = 1)\n").is_err());
        assert!(tokenize("x = $\n").is_err());
        assert!(tokenize("f'{}'\n").is_err());
    }

    #[test]
    fn continuation_and_crlf() {
        let src = "x = 1 + \\\r\n    2\r\ny = 'a\\\r\nb'\r\n";
        assert_eq!(render(&tokenize(src).unwrap()), src);
        assert_eq!(tokenize(src).unwrap().lines.len(), 2);
    }
}
