//! Statistics over agent evaluation logs.
//!
//! Input is a JSONL file with one [`EvalRecord`] per line. Everything here
//! is a pure function of the record set: record order never changes an
//! output, because every grouping goes through a sorted map and every
//! mean is computed from integer counts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::AnalyticsError;
use crate::family::TransformChain;
use crate::rng::Stream;

pub const LOG_SCHEMA_VERSION: u32 = 1;
/// Two-sided 90% normal quantile.
pub const Z90: f64 = 1.645;
pub const BOOTSTRAP_DRAWS: usize = 10_000;
pub const DEFAULT_TOP_K: usize = 10;
pub const ALL_TOOLS: &str = "All tools";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    None,
    TokenLimit,
    WrongFlagLimit,
    MessageLimit,
}

impl FailureReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::None => "none",
            FailureReason::TokenLimit => "token_limit",
            FailureReason::WrongFlagLimit => "wrong_flag_limit",
            FailureReason::MessageLimit => "message_limit",
        }
    }
}

fn default_schema() -> u32 {
    LOG_SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRecord {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub model: String,
    pub family: String,
    pub chain: TransformChain,
    pub repeat: u32,
    pub solved: bool,
    pub total_tokens: u64,
    #[serde(default = "default_reason")]
    pub failure_reason: FailureReason,
    #[serde(default)]
    pub tool_calls: BTreeMap<String, u64>,
}

fn default_reason() -> FailureReason {
    FailureReason::None
}

impl EvalRecord {
    pub fn check(&self) -> Result<(), String> {
        if self.schema_version != LOG_SCHEMA_VERSION {
            return Err(format!("unsupported schema_version {}", self.schema_version));
        }
        if !self.chain.is_canonical() {
            return Err(format!("chain {} is not a family chain", self.chain));
        }
        if self.solved && self.failure_reason != FailureReason::None {
            return Err(format!("solved run has failure_reason {}", self.failure_reason.as_str()));
        }
        if self.model.is_empty() || self.family.is_empty() {
            return Err("model and family must be non-empty".into());
        }
        Ok(())
    }
}

/// Parses JSONL text. Blank lines are skipped; line numbers are 1-based.
pub fn parse_logs(text: &str) -> Result<Vec<EvalRecord>, AnalyticsError> {
    let mut out = Vec::new();
    let mut seen = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EvalRecord = serde_json::from_str(line).map_err(|e| AnalyticsError::Schema {
            line: line_no,
            message: e.to_string(),
        })?;
        rec.check().map_err(|message| AnalyticsError::Schema { line: line_no, message })?;
        let key = (rec.model.clone(), rec.family.clone(), rec.chain.clone(), rec.repeat);
        if let Some(first) = seen.insert(key, line_no) {
            return Err(AnalyticsError::Schema {
                line: line_no,
                message: format!("duplicate of the run on line {first}"),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_logs(path: &Path) -> Result<Vec<EvalRecord>, AnalyticsError> {
    let text = std::fs::read_to_string(path).map_err(|source| AnalyticsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_logs(&text)
}

fn families_of(records: &[EvalRecord]) -> Vec<String> {
    let set: BTreeSet<&str> = records.iter().map(|r| r.family.as_str()).collect();
    set.into_iter().map(str::to_string).collect()
}

fn fixed(x: f64) -> String {
    format!("{x:.4}")
}

fn csv_string(header: Vec<String>, rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub count: u64,
    pub solved: u64,
    /// `None` when the cell has no records.
    pub mean: Option<f64>,
    pub sd: Option<f64>,
}

impl Cell {
    fn from_counts(count: u64, solved: u64) -> Cell {
        if count == 0 {
            return Cell { count, solved, mean: None, sd: None };
        }
        let p = solved as f64 / count as f64;
        Cell {
            count,
            solved,
            mean: Some(p),
            // Population sd of a {0,1} sample with mean p.
            sd: Some((p * (1.0 - p)).sqrt()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolvabilityMatrix {
    pub chains: Vec<TransformChain>,
    pub families: Vec<String>,
    /// `cells[chain][family]`.
    pub cells: Vec<Vec<Cell>>,
}

impl SolvabilityMatrix {
    pub fn cell(&self, chain: &TransformChain, family: &str) -> Option<&Cell> {
        let r = self.chains.iter().position(|c| c == chain)?;
        let c = self.families.iter().position(|f| f == family)?;
        Some(&self.cells[r][c])
    }

    fn csv_with(&self, f: impl Fn(&Cell) -> String) -> String {
        let mut header = vec!["chain".to_string()];
        header.extend(self.families.iter().cloned());
        let rows = self
            .chains
            .iter()
            .zip(&self.cells)
            .map(|(chain, row)| std::iter::once(chain.to_string()).chain(row.iter().map(&f)).collect())
            .collect();
        csv_string(header, rows)
    }

    /// Empty fields mark cells without records.
    pub fn mean_csv(&self) -> String {
        self.csv_with(|c| c.mean.map(fixed).unwrap_or_default())
    }

    pub fn sd_csv(&self) -> String {
        self.csv_with(|c| c.sd.map(fixed).unwrap_or_default())
    }

    pub fn count_csv(&self) -> String {
        self.csv_with(|c| c.count.to_string())
    }
}

/// Rows are the 24 chains in canonical order, columns the families in
/// sorted order; each cell pools all models and repeats.
pub fn solvability_matrix(records: &[EvalRecord]) -> SolvabilityMatrix {
    let chains = TransformChain::canonical();
    let families = families_of(records);
    let mut counts: BTreeMap<(&TransformChain, &str), (u64, u64)> = BTreeMap::new();
    for r in records {
        let e = counts.entry((&r.chain, r.family.as_str())).or_default();
        e.0 += 1;
        e.1 += r.solved as u64;
    }
    let cells = chains
        .iter()
        .map(|c| {
            families
                .iter()
                .map(|f| {
                    let (n, k) = counts.get(&(c, f.as_str())).copied().unwrap_or((0, 0));
                    Cell::from_counts(n, k)
                })
                .collect()
        })
        .collect();
    SolvabilityMatrix { chains, families, cells }
}

/// Wilson score interval for `k` successes in `n` trials. Returns `(0, 1)`
/// for `n == 0`.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    let lo = if k == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let hi = if k == n { 1.0 } else { (center + half).clamp(p, 1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifficultyEntry {
    /// 1 is the hardest chain.
    pub rank: usize,
    pub chain: TransformChain,
    pub attempts: u64,
    pub solved: u64,
    pub score: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifficultyRanking {
    pub entries: Vec<DifficultyEntry>,
    /// Canonical chains with no attempts at all.
    pub excluded: Vec<TransformChain>,
}

impl DifficultyRanking {
    pub fn rank_of(&self, chain: &TransformChain) -> Option<usize> {
        self.entries.iter().find(|e| &e.chain == chain).map(|e| e.rank)
    }

    pub fn csv(&self) -> String {
        let header = ["rank", "chain", "attempts", "solved", "score", "ci_lo", "ci_hi"].map(String::from).to_vec();
        let rows = self
            .entries
            .iter()
            .map(|e| {
                vec![
                    e.rank.to_string(),
                    e.chain.to_string(),
                    e.attempts.to_string(),
                    e.solved.to_string(),
                    fixed(e.score),
                    fixed(e.ci_lo),
                    fixed(e.ci_hi),
                ]
            })
            .collect();
        csv_string(header, rows)
    }
}

/// Pools every attempt per chain and sorts ascending by solve rate. Equal
/// scores keep canonical chain order.
pub fn difficulty_ranking(records: &[EvalRecord]) -> DifficultyRanking {
    let mut counts: BTreeMap<&TransformChain, (u64, u64)> = BTreeMap::new();
    for r in records {
        let e = counts.entry(&r.chain).or_default();
        e.0 += 1;
        e.1 += r.solved as u64;
    }
    let mut entries = Vec::new();
    let mut excluded = Vec::new();
    for chain in TransformChain::canonical() {
        match counts.get(&chain) {
            Some(&(n, k)) => {
                let (lo, hi) = wilson_interval(k, n, Z90);
                entries.push(DifficultyEntry {
                    rank: 0,
                    chain,
                    attempts: n,
                    solved: k,
                    score: k as f64 / n as f64,
                    ci_lo: lo,
                    ci_hi: hi,
                });
            }
            None => excluded.push(chain),
        }
    }
    // Stable sort, so ties stay in canonical order.
    entries.sort_by(|a, b| a.score.total_cmp(&b.score));
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    DifficultyRanking { entries, excluded }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelEntry {
    /// 1 is the strongest model.
    pub rank: usize,
    pub model: String,
    pub score: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Experiments that contributed to the score.
    pub experiments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRanking {
    pub entries: Vec<ModelEntry>,
    pub bootstrap_draws: usize,
    pub bootstrap_seed: u64,
}

impl ModelRanking {
    pub fn score_of(&self, model: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.model == model).map(|e| e.score)
    }

    pub fn csv(&self) -> String {
        let header = ["rank", "model", "score", "ci_lo", "ci_hi", "experiments"].map(String::from).to_vec();
        let rows = self
            .entries
            .iter()
            .map(|e| {
                vec![
                    e.rank.to_string(),
                    e.model.clone(),
                    fixed(e.score),
                    fixed(e.ci_lo),
                    fixed(e.ci_hi),
                    e.experiments.to_string(),
                ]
            })
            .collect();
        csv_string(header, rows)
    }
}

/// Per-experiment relative scores: `rel[e][m]` is model `m`'s mean
/// half-win score against the other models present in experiment `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeScores {
    pub models: Vec<String>,
    /// Experiments as (family, chain), sorted.
    pub experiments: Vec<(String, TransformChain)>,
    pub rel: Vec<Vec<Option<f64>>>,
}

pub fn relative_scores(records: &[EvalRecord]) -> RelativeScores {
    let models: Vec<String> = records.iter().map(|r| r.model.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    type Counts<'a> = BTreeMap<&'a str, (u64, u64)>;
    let mut per: BTreeMap<(String, TransformChain), Counts> = BTreeMap::new();
    for r in records {
        let e = per
            .entry((r.family.clone(), r.chain.clone()))
            .or_default()
            .entry(r.model.as_str())
            .or_default();
        e.0 += 1;
        e.1 += r.solved as u64;
    }
    let mut experiments = Vec::new();
    let mut rel = Vec::new();
    for (key, by_model) in per {
        let means: Vec<Option<f64>> = models
            .iter()
            .map(|m| by_model.get(m.as_str()).map(|&(n, k)| k as f64 / n as f64))
            .collect();
        let row = (0..models.len())
            .map(|i| {
                let mine = means[i]?;
                let mut total = 0.0;
                let mut opponents = 0usize;
                for (j, theirs) in means.iter().enumerate() {
                    let Some(theirs) = theirs else { continue };
                    if i == j {
                        continue;
                    }
                    opponents += 1;
                    total += if mine > *theirs {
                        1.0
                    } else if mine < *theirs {
                        0.0
                    } else {
                        0.5
                    };
                }
                (opponents > 0).then(|| total / opponents as f64)
            })
            .collect();
        experiments.push(key);
        rel.push(row);
    }
    RelativeScores { models, experiments, rel }
}

fn mean_over(rel: &[Vec<Option<f64>>], idx: impl Iterator<Item = usize>, m: usize) -> Option<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for e in idx {
        if let Some(v) = rel[e][m] {
            total += v;
            n += 1;
        }
    }
    (n > 0).then(|| total / n as f64)
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Pairwise half-win ranking with a percentile bootstrap over experiments.
pub fn model_ranking(records: &[EvalRecord], draws: usize, seed: u64) -> Result<ModelRanking, AnalyticsError> {
    let rs = relative_scores(records);
    if rs.models.len() < 2 {
        return Err(AnalyticsError::TooFewModels(rs.models.len()));
    }
    let n_exp = rs.experiments.len();
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(draws); rs.models.len()];
    let mut rng = Stream::derive(seed, &["bootstrap"]);
    let mut idx = vec![0usize; n_exp];
    for _ in 0..draws {
        for slot in idx.iter_mut() {
            *slot = rng.index(n_exp);
        }
        for (m, s) in samples.iter_mut().enumerate() {
            if let Some(v) = mean_over(&rs.rel, idx.iter().copied(), m) {
                s.push(v);
            }
        }
    }
    let mut entries: Vec<ModelEntry> = rs
        .models
        .iter()
        .enumerate()
        .filter_map(|(m, name)| {
            let score = mean_over(&rs.rel, 0..n_exp, m)?;
            let experiments = rs.rel.iter().filter(|row| row[m].is_some()).count();
            let s = &mut samples[m];
            s.sort_by(f64::total_cmp);
            let (lo, hi) = if s.is_empty() {
                (score, score)
            } else {
                (percentile(s, 0.05), percentile(s, 0.95))
            };
            Some(ModelEntry {
                rank: 0,
                model: name.clone(),
                score,
                // The percentile interval need not contain the point
                // estimate; widen it when it does not.
                ci_lo: lo.min(score),
                ci_hi: hi.max(score),
                experiments,
            })
        })
        .collect();
    entries.sort_by(|a, b| b.score.total_cmp(&a.score));
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    Ok(ModelRanking {
        entries,
        bootstrap_draws: draws,
        bootstrap_seed: seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToolGrouping {
    Chain,
    Model,
    ChainFamily,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolGroup {
    /// Chain, model, or `chain/family`.
    pub key: String,
    pub totals: BTreeMap<String, u64>,
    /// Most used tools, count descending then name.
    pub top: Vec<(String, u64)>,
    /// Sum over every tool, not only the top ones.
    pub all: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolUsage {
    pub groups: Vec<ToolGroup>,
}

impl ToolUsage {
    pub fn group(&self, key: &str) -> Option<&ToolGroup> {
        self.groups.iter().find(|g| g.key == key)
    }

    pub fn csv(&self) -> String {
        let header = ["group", "tool", "count"].map(String::from).to_vec();
        let mut rows = Vec::new();
        for g in &self.groups {
            for (tool, n) in &g.top {
                rows.push(vec![g.key.clone(), tool.clone(), n.to_string()]);
            }
            rows.push(vec![g.key.clone(), ALL_TOOLS.to_string(), g.all.to_string()]);
        }
        csv_string(header, rows)
    }
}

pub fn tool_usage_summary(records: &[EvalRecord], grouping: ToolGrouping, top_k: usize) -> ToolUsage {
    // Sort keys carry the canonical chain index so chains keep display order.
    let mut by: BTreeMap<(usize, String), BTreeMap<String, u64>> = BTreeMap::new();
    for r in records {
        let ci = r.chain.canonical_index().unwrap_or(usize::MAX);
        let key = match grouping {
            ToolGrouping::Chain => (ci, r.chain.to_string()),
            ToolGrouping::Model => (0, r.model.clone()),
            ToolGrouping::ChainFamily => (ci, format!("{}/{}", r.chain, r.family)),
        };
        let totals = by.entry(key).or_default();
        for (tool, n) in &r.tool_calls {
            *totals.entry(tool.clone()).or_default() += n;
        }
    }
    let groups = by
        .into_iter()
        .map(|((_, key), totals)| {
            let mut top: Vec<(String, u64)> = totals.iter().map(|(t, n)| (t.clone(), *n)).collect();
            top.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            top.truncate(top_k);
            let all = totals.values().sum();
            ToolGroup { key, totals, top, all }
        })
        .collect();
    ToolUsage { groups }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenMatrix {
    pub chains: Vec<TransformChain>,
    pub families: Vec<String>,
    pub solved_only: bool,
    /// Mean tokens, `None` when no record qualifies.
    pub means: Vec<Vec<Option<f64>>>,
    pub counts: Vec<Vec<u64>>,
}

impl TokenMatrix {
    pub fn mean(&self, chain: &TransformChain, family: &str) -> Option<f64> {
        let r = self.chains.iter().position(|c| c == chain)?;
        let c = self.families.iter().position(|f| f == family)?;
        self.means[r][c]
    }

    pub fn absent_marker(&self) -> &'static str {
        if self.solved_only {
            "never_solved"
        } else {
            "no_runs"
        }
    }

    pub fn csv(&self) -> String {
        let mut header = vec!["chain".to_string()];
        header.extend(self.families.iter().cloned());
        let rows = self
            .chains
            .iter()
            .zip(&self.means)
            .map(|(c, row)| {
                std::iter::once(c.to_string())
                    .chain(row.iter().map(|m| m.map(fixed).unwrap_or_else(|| self.absent_marker().to_string())))
                    .collect()
            })
            .collect();
        csv_string(header, rows)
    }
}

pub fn token_summary(records: &[EvalRecord], solved_only: bool) -> TokenMatrix {
    let chains = TransformChain::canonical();
    let families = families_of(records);
    let mut sums: BTreeMap<(&TransformChain, &str), (u64, u128)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.solved || !solved_only) {
        let e = sums.entry((&r.chain, r.family.as_str())).or_default();
        e.0 += 1;
        e.1 += r.total_tokens as u128;
    }
    let mut means = Vec::new();
    let mut counts = Vec::new();
    for c in &chains {
        let mut mrow = Vec::new();
        let mut crow = Vec::new();
        for f in &families {
            let (n, s) = sums.get(&(c, f.as_str())).copied().unwrap_or((0, 0));
            crow.push(n);
            mrow.push((n > 0).then(|| s as f64 / n as f64));
        }
        means.push(mrow);
        counts.push(crow);
    }
    TokenMatrix {
        chains,
        families,
        solved_only,
        means,
        counts,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureShare {
    pub reason: FailureReason,
    pub count: u64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureBreakdown {
    pub failed: u64,
    /// Reasons that occur, most frequent first. An unsolved run without a
    /// recorded reason is counted under `none`.
    pub shares: Vec<FailureShare>,
}

impl FailureBreakdown {
    pub fn percent(&self, reason: FailureReason) -> f64 {
        self.shares.iter().find(|s| s.reason == reason).map_or(0.0, |s| s.percent)
    }

    /// One `reason: xx.x%` line per share.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for share in &self.shares {
            let _ = writeln!(s, "{}: {:.1}% ({} of {})", share.reason.as_str(), share.percent, share.count, self.failed);
        }
        s
    }

    pub fn csv(&self) -> String {
        let header = ["reason", "count", "percent"].map(String::from).to_vec();
        let rows = self
            .shares
            .iter()
            .map(|s| vec![s.reason.as_str().to_string(), s.count.to_string(), fixed(s.percent)])
            .collect();
        csv_string(header, rows)
    }
}

pub fn failure_breakdown(records: &[EvalRecord]) -> FailureBreakdown {
    let mut counts: BTreeMap<FailureReason, u64> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.solved) {
        *counts.entry(r.failure_reason).or_default() += 1;
    }
    let failed: u64 = counts.values().sum();
    let mut shares: Vec<FailureShare> = counts
        .into_iter()
        .map(|(reason, count)| FailureShare {
            reason,
            count,
            percent: 100.0 * count as f64 / failed as f64,
        })
        .collect();
    shares.sort_by(|a, b| b.count.cmp(&a.count).then(a.reason.cmp(&b.reason)));
    FailureBreakdown { failed, shares }
}
