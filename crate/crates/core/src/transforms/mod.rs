//! The seven source transformations.
//!
//! Every pass is a pure function of the input unit and its [`PassConfig`]:
//! randomness comes from a stream keyed by the config seed, the pass tag
//! and the file path. Insertion passes pick distinct sites from the
//! pre-pass location list and apply them back to front, so earlier edits
//! never shift the indices of later ones.

mod comments;
mod conditionals;
mod functions;
mod loops;
mod obfuscate;
mod rename;
mod synth;

use std::collections::BTreeSet;

use ctfam_syntax::{BindingTable, BodyId, EligibleLocation, SourceUnit};

use crate::config::{InsertionReport, PassConfig, Ratio, TransformTag};
use crate::error::TransformError;
use crate::names::NameGen;
use crate::rng::Stream;

pub use obfuscate::{decompress_payload, WRAPPER_PREFIX, WRAPPER_SUFFIX};
pub use rename::rename_identifiers;

pub type PassOutput = (SourceUnit, InsertionReport);

/// Applies one tag to one file.
pub fn apply(tag: TransformTag, unit: &SourceUnit, cfg: &PassConfig) -> Result<PassOutput, TransformError> {
    match tag {
        TransformTag::R => {
            let table = unit.analyze_bindings_with(&cfg.protected_names);
            rename_identifiers(unit, &table, cfg)
        }
        TransformTag::T1 => insert_loops(unit, cfg),
        TransformTag::T2 => insert_conditionals(unit, cfg),
        TransformTag::T3 => insert_functions(unit, cfg),
        TransformTag::T4 => insert_comments(unit, cfg),
        TransformTag::T5 => combine_t5(unit, cfg),
        TransformTag::O => obfuscate::obfuscate(unit, cfg),
    }
}

pub fn insert_loops(unit: &SourceUnit, cfg: &PassConfig) -> Result<PassOutput, TransformError> {
    run_insertions(unit, cfg, TransformTag::T1, None, &[])
}

pub fn insert_conditionals(unit: &SourceUnit, cfg: &PassConfig) -> Result<PassOutput, TransformError> {
    run_insertions(unit, cfg, TransformTag::T2, None, &[])
}

pub fn insert_functions(unit: &SourceUnit, cfg: &PassConfig) -> Result<PassOutput, TransformError> {
    run_insertions(unit, cfg, TransformTag::T3, None, &[])
}

pub fn insert_comments(unit: &SourceUnit, cfg: &PassConfig) -> Result<PassOutput, TransformError> {
    run_insertions(unit, cfg, TransformTag::T4, None, &[])
}

pub fn obfuscate(unit: &SourceUnit, cfg: &PassConfig) -> Result<SourceUnit, TransformError> {
    obfuscate::obfuscate(unit, cfg).map(|(u, _)| u)
}

/// Per-sub-pass budget of the combined pass: `max(1, round(p * e0 / 4))`.
pub fn t5_budget(cfg: &PassConfig, e0: usize) -> usize {
    let p = cfg.insertion_fraction;
    Ratio::new(p.num, p.den * 4).round_mul(e0).max(1)
}

/// Number of insertions a single insertion pass makes over `e` sites.
pub fn single_pass_count(cfg: &PassConfig, e: usize) -> usize {
    cfg.insertion_fraction.round_mul(e).max(1).min(e)
}

/// T1, T2, T3 and T4 in sequence, each with the same budget computed from
/// the original unit; site lists are recomputed between sub-passes.
pub fn combine_t5(unit: &SourceUnit, cfg: &PassConfig) -> Result<PassOutput, TransformError> {
    cfg.validate()?;
    let budget = t5_budget(cfg, unit.eligible_locations().len());
    let mut report = InsertionReport::default();
    let mut current = unit.clone();
    for tag in [TransformTag::T1, TransformTag::T2, TransformTag::T3, TransformTag::T4] {
        let (next, r) = run_insertions(&current, cfg, tag, Some(budget), &["T5"])?;
        report.merge(r);
        current = next;
    }
    Ok((current, report))
}

/// Shared state of one insertion pass over one file.
pub(crate) struct Ctx<'a> {
    pub cfg: &'a PassConfig,
    pub rng: Stream,
    pub names: NameGen,
    pub table: BindingTable,
    /// One indentation level in this file.
    pub unit: String,
    pub nl: &'static str,
    pub path: String,
    /// Every name bound anywhere in the file.
    pub bound_anywhere: BTreeSet<String>,
}

impl<'a> Ctx<'a> {
    pub fn new(unit: &SourceUnit, cfg: &'a PassConfig, labels: &[&str]) -> Ctx<'a> {
        let table = unit.analyze_bindings_with(&cfg.protected_names);
        let mut reserved = cfg.reserved_names.clone();
        reserved.extend(table.facts.identifiers.iter().cloned());
        let mut stream_labels: Vec<&str> = labels.to_vec();
        stream_labels.push(&unit.path);
        let bound_anywhere = table.scopes.iter().flat_map(|s| s.bound.iter().cloned()).collect();
        Ctx {
            cfg,
            rng: Stream::derive(cfg.seed, &stream_labels),
            names: NameGen::new(&reserved).ascii_only(non_utf8_source(unit)),
            table,
            unit: unit.module().indent_unit(),
            nl: if unit.original().contains("\r\n") { "\r\n" } else { "\n" },
            path: unit.path.clone(),
            bound_anywhere,
        }
    }

    pub fn fresh(&mut self) -> Result<String, TransformError> {
        self.names.fresh(&mut self.rng, self.cfg)
    }

    /// Names dead code in `body` may assign.
    pub fn reusable(&self, body: &BodyId) -> Vec<String> {
        self.table
            .scope_of_body(body)
            .map(|s| self.table.reusable_names(s))
            .unwrap_or_default()
    }

    /// An original name from `pool` with probability
    /// `reuse_original_name_prob`, otherwise a fresh one.
    pub fn maybe_reuse(&mut self, pool: &[String]) -> Result<String, TransformError> {
        if !pool.is_empty() && self.rng.chance(self.cfg.reuse_original_name_prob) {
            Ok(self.rng.pick(pool).clone())
        } else {
            self.fresh()
        }
    }

    /// Parses synthesized code written at column zero with `\n` line ends
    /// and moves it to `indent`.
    pub fn statements(&self, code: &str, indent: &str) -> Result<Vec<ctfam_syntax::Stmt>, TransformError> {
        let text = if self.nl == "\n" { code.to_string() } else { code.replace('\n', self.nl) };
        ctfam_syntax::parse_statements(&text, indent).map_err(|source| TransformError::Invalid {
            path: format!("{} (synthesized)", self.path),
            source,
        })
    }
}

/// The file declares a source encoding other than UTF-8, so non-ASCII
/// identifiers would be mis-decoded.
fn non_utf8_source(unit: &SourceUnit) -> bool {
    let header = unit.module().header.to_ascii_lowercase();
    header.contains("coding") && !(header.contains("utf-8") || header.contains("utf8"))
}

fn run_insertions(
    unit: &SourceUnit,
    cfg: &PassConfig,
    tag: TransformTag,
    count: Option<usize>,
    outer: &[&str],
) -> Result<PassOutput, TransformError> {
    cfg.validate()?;
    let mut labels: Vec<&str> = outer.to_vec();
    labels.push(tag.as_str());
    let mut ctx = Ctx::new(unit, cfg, &labels);
    let locations = unit.eligible_locations();
    let n = count.unwrap_or_else(|| single_pass_count(cfg, locations.len()));
    let chosen = ctx.rng.sample(locations.len(), n);
    let sites: Vec<EligibleLocation> = chosen.iter().map(|&i| locations[i].clone()).collect();
    let mut out = unit.clone();
    let mut report = InsertionReport::default();
    match tag {
        TransformTag::T1 => loops::apply(&mut ctx, &mut out, &sites, &mut report)?,
        TransformTag::T2 => conditionals::apply(&mut ctx, &mut out, &sites, &mut report)?,
        TransformTag::T3 => functions::apply(&mut ctx, &mut out, &sites, &mut report)?,
        TransformTag::T4 => comments::apply(&mut ctx, &mut out, &sites, &mut report)?,
        _ => unreachable!("not an insertion pass"),
    }
    // Sites were applied back to front; report them in source order.
    report.sites.reverse();
    Ok((finish(&out)?, report))
}

/// Re-parses the rendered output, proving it valid and giving the result
/// fresh token ids and original text.
pub(crate) fn finish(unit: &SourceUnit) -> Result<SourceUnit, TransformError> {
    unit.reparse().map_err(|source| TransformError::Invalid {
        path: unit.path.clone(),
        source,
    })
}
