//! Identifier and comment-text generation.

use std::collections::{BTreeSet, HashSet};
use std::sync::OnceLock;

use ctfam_syntax::{is_builtin, is_keyword, is_valid_identifier};

use crate::config::PassConfig;
use crate::error::TransformError;
use crate::rng::Stream;

const VOCAB_TXT: &str = include_str!("../data/vocab.txt");
const COMMENTS_TXT: &str = include_str!("../data/comments.txt");

const MAX_ATTEMPTS: usize = 1000;

/// Letter ranges for multilingual names. All are identifier-start
/// characters that NFKC normalisation leaves unchanged.
pub const SCRIPTS: &[(u32, u32)] = &[
    (0x4E00, 0x9FEF), // CJK unified ideographs
    (0x3041, 0x3096), // Hiragana
    (0x30A1, 0x30FA), // Katakana
    (0x0430, 0x044F), // Cyrillic lowercase
    (0x03B1, 0x03C9), // Greek lowercase
    (0xAC00, 0xD7A3), // Hangul syllables
    (0x05D0, 0x05EA), // Hebrew
    (0x0628, 0x063A), // Arabic
    (0x0915, 0x0928), // Devanagari consonants
];

fn lines(text: &'static str) -> Vec<&'static str> {
    text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect()
}

pub fn vocab() -> &'static [&'static str] {
    static V: OnceLock<Vec<&'static str>> = OnceLock::new();
    V.get_or_init(|| lines(VOCAB_TXT))
}

/// Comment pool entries. A literal `\n` inside an entry separates the
/// lines of a multi-line block.
pub fn comment_pool() -> &'static [&'static str] {
    static C: OnceLock<Vec<&'static str>> = OnceLock::new();
    C.get_or_init(|| lines(COMMENTS_TXT))
}

pub fn vocab_name(rng: &mut Stream) -> String {
    let words = vocab();
    let first = rng.pick(words);
    if rng.below(3) == 0 {
        let c = (b'a' + rng.below(26) as u8) as char;
        format!("{first}_{c}")
    } else {
        format!("{first}_{}", rng.pick(words))
    }
}

pub fn multilingual(rng: &mut Stream, (lo, hi): (usize, usize)) -> String {
    let (a, b) = *rng.pick(SCRIPTS);
    let len = rng.range(lo, hi);
    (0..len)
        .map(|_| char::from_u32(a + rng.below((b - a + 1) as u64) as u32).unwrap())
        .collect()
}

/// Random alphanumeric identifier of `len` characters starting with a
/// letter.
pub fn alnum(rng: &mut Stream, len: usize) -> String {
    const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
    const ALNUM: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
    let mut s = String::with_capacity(len);
    s.push(*rng.pick(LETTERS) as char);
    for _ in 1..len {
        s.push(*rng.pick(ALNUM) as char);
    }
    s
}

/// Hands out identifiers that collide with nothing already taken.
#[derive(Debug, Clone, Default)]
pub struct NameGen {
    taken: HashSet<String>,
    ascii_only: bool,
}

impl NameGen {
    pub fn new(reserved: &BTreeSet<String>) -> Self {
        NameGen {
            taken: reserved.iter().cloned().collect(),
            ascii_only: false,
        }
    }

    /// Restricts generated names to ASCII, for files whose declared source
    /// encoding is not UTF-8.
    pub fn ascii_only(mut self, yes: bool) -> Self {
        self.ascii_only = yes;
        self
    }

    pub fn is_free(&self, name: &str) -> bool {
        is_valid_identifier(name)
            && !is_keyword(name)
            && !is_builtin(name)
            && !name.starts_with("__")
            && !matches!(name, "match" | "case" | "type" | "_")
            && !self.taken.contains(name)
    }

    pub fn reserve(&mut self, name: &str) {
        self.taken.insert(name.to_string());
    }

    fn claim_with(
        &mut self,
        rng: &mut Stream,
        mut make: impl FnMut(&mut Stream) -> String,
    ) -> Result<String, TransformError> {
        for _ in 0..MAX_ATTEMPTS {
            let n = make(rng);
            if self.is_free(&n) {
                self.taken.insert(n.clone());
                return Ok(n);
            }
        }
        Err(TransformError::NameCollision(MAX_ATTEMPTS))
    }

    /// A vocabulary compound with probability `vocab_name_prob`, otherwise
    /// a multilingual random string.
    pub fn fresh(&mut self, rng: &mut Stream, cfg: &PassConfig) -> Result<String, TransformError> {
        let vocab = self.ascii_only || rng.chance(cfg.vocab_name_prob);
        let range = cfg.multilingual_len_range;
        self.claim_with(rng, |r| {
            if vocab {
                vocab_name(r)
            } else {
                multilingual(r, range)
            }
        })
    }

    pub fn fresh_alnum(&mut self, rng: &mut Stream, len: usize) -> Result<String, TransformError> {
        self.claim_with(rng, |r| alnum(r, len))
    }

    /// A free name that looks like `base`: a trailing or leading
    /// underscore, a doubled last letter, or a short suffix.
    pub fn near_miss(&mut self, rng: &mut Stream, base: &str) -> Option<String> {
        let last = base.chars().last()?;
        let mut options = vec![
            format!("{base}_"),
            format!("_{base}"),
            format!("{base}{last}"),
            format!("{base}2"),
            format!("{base}_fn"),
            format!("{base}_impl"),
        ];
        rng.shuffle(&mut options);
        let pick = options.into_iter().find(|n| self.is_free(n))?;
        self.taken.insert(pick.clone());
        Some(pick)
    }
}

/// Comment body text in a random script, a few words long.
pub fn multilingual_sentence(rng: &mut Stream, cfg: &PassConfig) -> String {
    let words = rng.range(1, 6);
    (0..words)
        .map(|_| multilingual(rng, cfg.multilingual_len_range))
        .collect::<Vec<_>>()
        .join(" ")
}
