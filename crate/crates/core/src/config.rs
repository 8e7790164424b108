use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::TransformError;

/// Exact rational number, used for probabilities and fractions so that
/// configuration files round-trip without float noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: u32,
    pub den: u32,
}

impl Ratio {
    pub const fn new(num: u32, den: u32) -> Ratio {
        Ratio { num, den }
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `round(self * n)`, halves rounded up.
    pub fn round_mul(self, n: usize) -> usize {
        let n = n as u64;
        ((2 * self.num as u64 * n + self.den as u64) / (2 * self.den as u64)) as usize
    }

    pub fn is_probability(self) -> bool {
        self.den > 0 && self.num <= self.den
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Ratio {
    type Err = String;

    /// Accepts `a/b`, or a decimal such as `0.35` (at most 6 places).
    fn from_str(s: &str) -> Result<Ratio, String> {
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let num = a.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
            let den: u32 = b.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
            if den == 0 {
                return Err(format!("zero denominator in {s:?}"));
            }
            return Ok(Ratio { num, den });
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 6 || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || int.is_empty() && frac.is_empty() {
            return Err(format!("not a ratio: {s:?}"));
        }
        let den = 10u32.pow(frac.len() as u32);
        let int: u32 = if int.is_empty() { 0 } else { int.parse().map_err(|_| format!("not a ratio: {s:?}"))? };
        let frac: u32 = if frac.is_empty() { 0 } else { frac.parse().unwrap() };
        Ok(Ratio { num: int * den + frac, den })
    }
}

impl Serialize for Ratio {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Ratio, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(u32),
            Float(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Int(n) => Ok(Ratio::new(n, 1)),
            Raw::Float(f) => format!("{f}").parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TransformTag {
    R,
    T1,
    T2,
    T3,
    T4,
    T5,
    O,
}

impl TransformTag {
    pub const ALL: [TransformTag; 7] = [
        TransformTag::R,
        TransformTag::T1,
        TransformTag::T2,
        TransformTag::T3,
        TransformTag::T4,
        TransformTag::T5,
        TransformTag::O,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TransformTag::R => "R",
            TransformTag::T1 => "T1",
            TransformTag::T2 => "T2",
            TransformTag::T3 => "T3",
            TransformTag::T4 => "T4",
            TransformTag::T5 => "T5",
            TransformTag::O => "O",
        }
    }
}

impl fmt::Display for TransformTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TransformTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        TransformTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s.trim())
            .ok_or_else(|| format!("unknown transformation tag {s:?}"))
    }
}

/// Knobs shared by all passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PassConfig {
    pub seed: u64,
    pub insertion_fraction: Ratio,
    pub max_loop_depth: usize,
    pub max_func_depth: usize,
    pub max_params: usize,
    pub english_comment_prob: Ratio,
    pub vocab_name_prob: Ratio,
    pub if_vs_try_prob: Ratio,
    pub reuse_original_name_prob: Ratio,
    pub multilingual_len_range: (usize, usize),
    /// Identifiers that fresh names must avoid, typically every name used
    /// anywhere in the program being transformed.
    #[serde(skip)]
    pub reserved_names: BTreeSet<String>,
    /// Names other files of the program may reach by name; never renamed.
    #[serde(skip)]
    pub protected_names: BTreeSet<String>,
}

impl Default for PassConfig {
    fn default() -> Self {
        PassConfig {
            seed: 0,
            insertion_fraction: Ratio::new(3, 10),
            max_loop_depth: 3,
            max_func_depth: 2,
            max_params: 4,
            english_comment_prob: Ratio::new(7, 10),
            vocab_name_prob: Ratio::new(1, 2),
            if_vs_try_prob: Ratio::new(1, 2),
            reuse_original_name_prob: Ratio::new(1, 3),
            multilingual_len_range: (4, 12),
            reserved_names: BTreeSet::new(),
            protected_names: BTreeSet::new(),
        }
    }
}

impl PassConfig {
    pub fn validate(&self) -> Result<(), TransformError> {
        let bad = |what: &str| Err(TransformError::InvalidConfig(what.to_string()));
        if self.insertion_fraction.den == 0
            || self.insertion_fraction.num == 0
            || self.insertion_fraction.num > self.insertion_fraction.den
        {
            return bad("insertion_fraction must lie in (0, 1]");
        }
        for (name, p) in [
            ("english_comment_prob", self.english_comment_prob),
            ("vocab_name_prob", self.vocab_name_prob),
            ("if_vs_try_prob", self.if_vs_try_prob),
            ("reuse_original_name_prob", self.reuse_original_name_prob),
        ] {
            if !p.is_probability() {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if self.max_loop_depth < 1 || self.max_func_depth < 1 {
            return bad("depth limits must be at least 1");
        }
        let (lo, hi) = self.multilingual_len_range;
        if lo < 1 || lo > hi {
            return bad("multilingual_len_range must be a non-empty range of positive lengths");
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> PassConfig {
        PassConfig { seed, ..self.clone() }
    }
}

/// One performed insertion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertionSite {
    pub tag: TransformTag,
    pub file: String,
    /// Statement list and index, e.g. `module@3` or `2.0/1.0@0`.
    pub location: String,
    pub construct: String,
    /// Source of the constructed-false guard, when the construct has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<Guard>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guard {
    pub kind: GuardKind,
    /// For `while`/`if`: the condition. For `for`: the iterable.
    pub expr: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuardKind {
    While,
    For,
    If,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertionReport {
    pub counts: BTreeMap<TransformTag, usize>,
    pub sites: Vec<InsertionSite>,
    /// Renamed bindings, for R and O.
    #[serde(default)]
    pub renamed: usize,
    /// String literals O had to leave in place.
    #[serde(default)]
    pub strings_left: usize,
}

impl InsertionReport {
    pub fn record(&mut self, site: InsertionSite) {
        *self.counts.entry(site.tag).or_default() += 1;
        self.sites.push(site);
    }

    pub fn merge(&mut self, other: InsertionReport) {
        for (tag, n) in other.counts {
            *self.counts.entry(tag).or_default() += n;
        }
        self.sites.extend(other.sites);
        self.renamed += other.renamed;
        self.strings_left += other.strings_left;
    }

    pub fn count(&self, tag: TransformTag) -> usize {
        self.counts.get(&tag).copied().unwrap_or(0)
    }
}
