//! O: rename to random alphanumerics, drop docstrings, XOR-encrypt string
//! literals, then gzip the whole module behind a one-line exec wrapper.

use std::collections::HashMap;
use std::io::{Read, Write};

use ctfam_syntax::literal::{fstring_literal_value, literal_value, split_literal, LiteralValue};
use ctfam_syntax::{
    module_events, parse_statements, protected_prefix, Block, BodyKind, Event, FField, FPart, SourceUnit, Stmt,
    Suite, Token, TokenId, TokenKind,
};
use flate2::{read::GzDecoder, write::GzEncoder, Compression};

use crate::config::{InsertionReport, PassConfig, TransformTag};
use crate::error::TransformError;
use crate::names::NameGen;
use crate::rng::Stream;

use super::{finish, PassOutput};

pub const WRAPPER_PREFIX: &str = "from gzip import decompress as __;_=exec;_(__(b'";
pub const WRAPPER_SUFFIX: &str = "'))\n";

const NAME_LEN: usize = 12;

pub(super) fn obfuscate(unit: &SourceUnit, cfg: &PassConfig) -> Result<PassOutput, TransformError> {
    cfg.validate()?;
    let mut rng = Stream::derive(cfg.seed, &[TransformTag::O.as_str(), &unit.path]);
    let table = unit.analyze_bindings_with(&cfg.protected_names);
    let mut reserved = cfg.reserved_names.clone();
    reserved.extend(table.facts.identifiers.iter().cloned());
    let mut gen = NameGen::new(&reserved);
    let mut report = InsertionReport::default();
    let invalid = |source| TransformError::Invalid { path: unit.path.clone(), source };

    let mut names = HashMap::new();
    for (i, _) in table.renameable() {
        names.insert(i, gen.fresh_alnum(&mut rng, NAME_LEN)?);
    }
    report.renamed = names.len();
    let map = table.rename_map(&names);
    let mut work = unit.clone();
    work.edit(|m| m.rename_tokens(&map));

    work.edit(|m| strip_docstrings(&mut m.body, BodyKind::Module));

    let key_len = rng.range(8, 16);
    let key: Vec<u8> = (0..key_len).map(|_| rng.below(256) as u8).collect();
    let annotation: HashMap<TokenId, bool> = module_events(work.module())
        .map_err(invalid)?
        .into_iter()
        .filter_map(|e| match e {
            Event::Str { tok, annotation, .. } => Some((tok.id, annotation)),
            _ => None,
        })
        .collect();
    let mut decoder_names = Vec::with_capacity(4);
    for _ in 0..4 {
        decoder_names.push(gen.fresh_alnum(&mut rng, NAME_LEN)?);
    }
    let mut enc = Encryptor {
        key,
        annotation,
        names: decoder_names,
        used: [false; 4],
        left: 0,
    };
    work.edit(|m| m.for_each_slice_mut(&mut |s| enc.slice(s, false)));
    report.strings_left = enc.left;

    if enc.used.iter().any(|&u| u) {
        let mut params = Vec::with_capacity(8);
        for _ in 0..8 {
            params.push(gen.fresh_alnum(&mut rng, NAME_LEN)?);
        }
        let nl = if unit.original().contains("\r\n") { "\r\n" } else { "\n" };
        let code = enc.decoders(&params, &work.module().indent_unit()).replace('\n', nl);
        let stmts = parse_statements(&code, "").map_err(invalid)?;
        work.edit(|m| {
            let at = protected_prefix(&m.body, BodyKind::Module);
            m.body.insert_stmts(at, stmts)
        });
    }

    work.edit(|m| m.for_each_trivia_mut(&mut strip_comments));
    let payload = finish(&work)?.render();
    let wrapped = wrap(payload.as_bytes());
    let out = SourceUnit::parse(unit.path.clone(), &wrapped).map_err(invalid)?;
    Ok((out, report))
}

/// The gzip payload of a wrapped module, decompressed.
pub fn decompress_payload(text: &str) -> Option<String> {
    let body = text.strip_prefix(WRAPPER_PREFIX)?;
    let body = body.strip_suffix(WRAPPER_SUFFIX).or_else(|| body.strip_suffix("'))"))?;
    let Some(LiteralValue::Bytes(bytes)) = literal_value(&Token::new(TokenKind::Str, format!("b'{body}'"))) else {
        return None;
    };
    let mut out = String::new();
    GzDecoder::new(bytes.as_slice()).read_to_string(&mut out).ok()?;
    Some(out)
}

fn wrap(payload: &[u8]) -> String {
    let mut gz = GzEncoder::new(Vec::new(), Compression::best());
    gz.write_all(payload).expect("in-memory write");
    let bytes = gz.finish().expect("in-memory write");
    let mut out = String::from(WRAPPER_PREFIX);
    out.push_str(&escape_bytes(&bytes));
    out.push_str(WRAPPER_SUFFIX);
    out
}

fn escape_bytes(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 3);
    for &b in bytes {
        match b {
            b'\\' => out.push_str("\\\\"),
            b'\'' => out.push_str("\\'"),
            0x20..=0x7e => out.push(b as char),
            _ => out.push_str(&format!("\\x{b:02x}")),
        }
    }
    out
}

fn hex_escape(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("\\x{b:02x}")).collect()
}

fn strip_docstrings(block: &mut Block, kind: BodyKind) {
    if matches!(kind, BodyKind::Module | BodyKind::Function | BodyKind::Class)
        && block.stmts.first().is_some_and(Stmt::is_string_expr)
    {
        if block.stmts.len() == 1 && kind != BodyKind::Module {
            if let Stmt::Simple(line) = &mut block.stmts[0] {
                line.tokens = vec![Token::name("pass")];
            }
        } else {
            let mut doc = block.stmts.remove(0);
            let leading = std::mem::take(doc.leading_mut());
            match block.stmts.first_mut() {
                Some(next) => next.leading_mut().insert_str(0, &leading),
                None => block.trailing.insert_str(0, &leading),
            }
        }
    }
    for stmt in &mut block.stmts {
        if let Stmt::Compound(c) = stmt {
            for i in 0..c.clauses.len() {
                let inner_kind = c.body_kind(i);
                if let Suite::Block { block: inner, .. } = &mut c.clauses[i].body {
                    strip_docstrings(inner, inner_kind);
                }
            }
        }
    }
}

fn strip_comments(s: &mut String) {
    if !s.contains('#') {
        return;
    }
    let mut out = String::with_capacity(s.len());
    let mut in_comment = false;
    for c in s.chars() {
        if in_comment {
            if c == '\n' || c == '\r' {
                in_comment = false;
                out.push(c);
            }
        } else if c == '#' {
            in_comment = true;
        } else {
            out.push(c);
        }
    }
    *s = out;
}

// Decoder slots. The integer forms are for f-string fields, which may not
// contain backslashes before 3.12.
const TEXT: usize = 0;
const BYTES: usize = 1;
const TEXT_INT: usize = 2;
const BYTES_INT: usize = 3;

struct Encryptor {
    key: Vec<u8>,
    annotation: HashMap<TokenId, bool>,
    names: Vec<String>,
    used: [bool; 4],
    left: usize,
}

impl Encryptor {
    fn xor(&self, data: &[u8]) -> Vec<u8> {
        data.iter()
            .enumerate()
            .map(|(i, b)| b ^ self.key[i % self.key.len()])
            .collect()
    }

    fn call(&mut self, data: &[u8], bytes: bool, nested: bool) -> String {
        let enc = self.xor(data);
        let slot = match (bytes, nested) {
            (false, false) => TEXT,
            (true, false) => BYTES,
            (false, true) => TEXT_INT,
            (true, true) => BYTES_INT,
        };
        self.used[slot] = true;
        let name = &self.names[slot];
        if nested {
            // Hex, because decimal literals past 4300 digits are rejected.
            let hex: String = enc.iter().rev().map(|b| format!("{b:02x}")).collect();
            let trimmed = hex.trim_start_matches('0');
            let hex = if trimmed.is_empty() { "0" } else { trimmed };
            format!("{name}(0x{hex}, {})", enc.len())
        } else {
            format!("{name}(b'{}')", hex_escape(&enc))
        }
    }

    fn slice(&mut self, tokens: &mut [Token], nested: bool) {
        let mut i = 0;
        while i < tokens.len() {
            if !tokens[i].is_string() {
                i += 1;
                continue;
            }
            let start = i;
            while i < tokens.len() && tokens[i].is_string() {
                i += 1;
            }
            let run = &mut tokens[start..i];
            if self.annotation.get(&run[0].id).copied().unwrap_or(false) {
                self.left += run.len();
                continue;
            }
            let mut changed = false;
            for tok in run.iter_mut() {
                changed |= self.token(tok, nested);
            }
            if changed && run.len() > 1 {
                run[0].text.insert(0, '(');
                for tok in run[1..].iter_mut() {
                    tok.text.insert_str(0, "+ ");
                }
                let last = run.last_mut().expect("non-empty run");
                match &mut last.kind {
                    TokenKind::FStr(f) => f.close.push(')'),
                    _ => last.text.push(')'),
                }
            }
        }
    }

    fn token(&mut self, tok: &mut Token, nested: bool) -> bool {
        match literal_value(tok) {
            Some(LiteralValue::Str(s)) if !s.is_empty() => {
                tok.text = self.call(s.as_bytes(), false, nested);
                tok.kind = TokenKind::Op;
                return true;
            }
            Some(LiteralValue::Bytes(b)) if !b.is_empty() => {
                tok.text = self.call(&b, true, nested);
                tok.kind = TokenKind::Op;
                return true;
            }
            Some(_) => return false,
            None => {}
        }
        let raw = split_literal(&tok.text).0.raw;
        match &mut tok.kind {
            TokenKind::FStr(f) => self.fparts(&mut f.parts, raw),
            _ => {
                self.left += 1;
                false
            }
        }
    }

    fn fparts(&mut self, parts: &mut [FPart], raw: bool) -> bool {
        let mut changed = false;
        for part in parts.iter_mut() {
            match part {
                FPart::Literal(text) => match fstring_literal_value(text, raw) {
                    Some(v) if !v.is_empty() => {
                        let call = self.call(v.as_bytes(), false, true);
                        *part = FPart::Field(FField {
                            expr: vec![Token::new(TokenKind::Op, call)],
                            expr_tail: String::new(),
                            debug: String::new(),
                            conversion: String::new(),
                            spec: None,
                        });
                        changed = true;
                    }
                    Some(_) => {}
                    None => self.left += 1,
                },
                FPart::Field(field) => {
                    if field.debug.is_empty() {
                        self.slice(&mut field.expr, true);
                    } else {
                        // The field's source text is printed verbatim.
                        self.left += field.expr.iter().filter(|t| t.is_string()).count();
                    }
                    if let Some(spec) = &field.spec {
                        self.left += spec
                            .iter()
                            .filter(|p| matches!(p, FPart::Literal(s) if !s.is_empty()))
                            .count();
                    }
                }
            }
        }
        changed
    }

    fn decoders(&self, p: &[String], unit: &str) -> String {
        let (d, k, b, l, r, i, n, len) = (&p[0], &p[1], &p[2], &p[3], &p[4], &p[5], &p[6], &p[7]);
        let key = format!("b'{}'", hex_escape(&self.key));
        let defaults = format!("{k}={key}, {b}=bytes, {l}=len, {r}=range");
        let mut code = String::new();
        for slot in [TEXT, BYTES, TEXT_INT, BYTES_INT] {
            if !self.used[slot] {
                continue;
            }
            let name = &self.names[slot];
            let decode = if slot == TEXT || slot == TEXT_INT { ".decode()" } else { "" };
            if slot == TEXT || slot == BYTES {
                code.push_str(&format!(
                    "def {name}({d}, {defaults}):\n{unit}return {b}([{d}[{i}] ^ {k}[{i} % {l}({k})] for {i} in {r}({l}({d}))]){decode}\n"
                ));
            } else {
                code.push_str(&format!(
                    "def {name}({n}, {len}, {defaults}):\n{unit}return {b}([({n} >> (8 * {i}) & 255) ^ {k}[{i} % {l}({k})] for {i} in {r}({len})]){decode}\n"
                ));
            }
        }
        code
    }
}
