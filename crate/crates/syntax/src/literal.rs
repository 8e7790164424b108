//! Runtime values of string and bytes literals.

use crate::token::{FPart, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LiteralValue {
    Str(String),
    Bytes(Vec<u8>),
}

/// Prefix flags of a string token.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Prefix {
    pub raw: bool,
    pub bytes: bool,
    pub format: bool,
}

/// Splits a literal's text into prefix letters, quote delimiter and body.
/// For f-string tokens pass only `text` (prefix plus opening quote); the
/// body is then empty.
pub fn split_literal(text: &str) -> (Prefix, &str, &str) {
    let plen = text
        .find(['\'', '"'])
        .unwrap_or(text.len());
    let letters = &text[..plen];
    let prefix = Prefix {
        raw: letters.contains(['r', 'R']),
        bytes: letters.contains(['b', 'B']),
        format: letters.contains(['f', 'F']),
    };
    let rest = &text[plen..];
    let b = rest.as_bytes();
    let triple = b.len() >= 3 && b[0] == b[1] && b[1] == b[2];
    if rest.len() <= 1 || (triple && rest.len() == 3) {
        return (prefix, rest, "");
    }
    let qlen = if triple && rest.len() >= 6 { 3 } else { 1 };
    (prefix, &rest[..qlen], &rest[qlen..rest.len() - qlen])
}

/// Value of a plain (non-f) string or bytes literal token. Returns `None`
/// for f-strings and for literals this decoder cannot represent exactly
/// (named `\N{...}` escapes and lone surrogates).
pub fn literal_value(tok: &Token) -> Option<LiteralValue> {
    if !matches!(tok.kind, TokenKind::Str) {
        return None;
    }
    let (prefix, _, body) = split_literal(&tok.text);
    decode(body, prefix.raw, prefix.bytes, false)
}

/// Value of one literal piece of an f-string, with `{{`/`}}` collapsed.
pub fn fstring_literal_value(raw_text: &str, raw: bool) -> Option<String> {
    match decode(raw_text, raw, false, true)? {
        LiteralValue::Str(s) => Some(s),
        LiteralValue::Bytes(_) => None,
    }
}

/// Concatenated literal text of an f-string token with its fields
/// omitted; used to look for identifiers mentioned in string data.
pub fn fstring_literal_text(tok: &Token) -> Option<String> {
    let TokenKind::FStr(f) = &tok.kind else { return None };
    let (prefix, _, _) = split_literal(&tok.text);
    let mut out = String::new();
    collect_literals(&f.parts, prefix.raw, &mut out)?;
    Some(out)
}

fn collect_literals(parts: &[FPart], raw: bool, out: &mut String) -> Option<()> {
    for p in parts {
        match p {
            FPart::Literal(s) => out.push_str(&fstring_literal_value(s, raw)?),
            FPart::Field(field) => {
                out.push(' ');
                if let Some(spec) = &field.spec {
                    collect_literals(spec, raw, out)?;
                }
            }
        }
    }
    Some(())
}

fn decode(body: &str, raw: bool, bytes: bool, fstring: bool) -> Option<LiteralValue> {
    let src: Vec<char> = normalize_newlines(body).chars().collect();
    let mut out: Vec<u32> = Vec::with_capacity(src.len());
    let mut i = 0;
    while i < src.len() {
        let c = src[i];
        if fstring && (c == '{' || c == '}') && src.get(i + 1) == Some(&c) {
            out.push(c as u32);
            i += 2;
            continue;
        }
        if c != '\\' || raw {
            if raw && c == '\\' && i + 1 < src.len() {
                // A raw string still cannot end in an odd backslash, and the
                // escaped character stays as written.
                out.push('\\' as u32);
                out.push(src[i + 1] as u32);
                i += 2;
                continue;
            }
            out.push(c as u32);
            i += 1;
            continue;
        }
        let Some(&e) = src.get(i + 1) else {
            out.push('\\' as u32);
            break;
        };
        i += 2;
        match e {
            '\n' => {}
            '\\' => out.push('\\' as u32),
            '\'' => out.push('\'' as u32),
            '"' => out.push('"' as u32),
            'a' => out.push(7),
            'b' => out.push(8),
            'f' => out.push(12),
            'n' => out.push(10),
            'r' => out.push(13),
            't' => out.push(9),
            'v' => out.push(11),
            '0'..='7' => {
                let mut v = e.to_digit(8).unwrap();
                let mut n = 1;
                while n < 3 {
                    match src.get(i).and_then(|c| c.to_digit(8)) {
                        Some(d) => {
                            v = v * 8 + d;
                            i += 1;
                            n += 1;
                        }
                        None => break,
                    }
                }
                out.push(if bytes { v & 0xff } else { v });
            }
            'x' => {
                let v = hex(&src, i, 2)?;
                i += 2;
                out.push(v);
            }
            'u' if !bytes => {
                out.push(hex(&src, i, 4)?);
                i += 4;
            }
            'U' if !bytes => {
                out.push(hex(&src, i, 8)?);
                i += 8;
            }
            'N' if !bytes => return None,
            other => {
                out.push('\\' as u32);
                out.push(other as u32);
            }
        }
    }
    if bytes {
        out.iter()
            .map(|&v| u8::try_from(v).ok())
            .collect::<Option<Vec<u8>>>()
            .map(LiteralValue::Bytes)
    } else {
        out.iter()
            .map(|&v| char::from_u32(v))
            .collect::<Option<String>>()
            .map(LiteralValue::Str)
    }
}

fn hex(src: &[char], at: usize, n: usize) -> Option<u32> {
    let digits: String = src.get(at..at + n)?.iter().collect();
    u32::from_str_radix(&digits, 16).ok()
}

fn normalize_newlines(s: &str) -> String {
    s.replace("\r\n", "\n").replace('\r', "\n")
}
