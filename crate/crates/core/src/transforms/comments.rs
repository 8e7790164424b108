//! T4: comment lines at the enclosing indentation.

use ctfam_syntax::{EligibleLocation, SourceUnit};

use crate::config::{InsertionReport, InsertionSite, TransformTag};
use crate::error::TransformError;
use crate::names::{comment_pool, multilingual_sentence};

use super::Ctx;

pub(super) fn apply(
    ctx: &mut Ctx,
    out: &mut SourceUnit,
    sites: &[EligibleLocation],
    report: &mut InsertionReport,
) -> Result<(), TransformError> {
    for site in sites.iter().rev() {
        let (lines, construct) = if ctx.rng.chance(ctx.cfg.english_comment_prob) {
            let entry = *ctx.rng.pick(comment_pool());
            let lines: Vec<String> = entry.split("\\n").map(str::to_string).collect();
            let construct = if lines.len() > 1 { "comment_block" } else { "comment" };
            (lines, construct)
        } else {
            let n = ctx.rng.range(1, 2);
            let lines = (0..n).map(|_| multilingual_sentence(&mut ctx.rng, ctx.cfg)).collect();
            (lines, "comment_multilingual")
        };
        let indent = out.module().body_indent(&site.body);
        let text: String = lines
            .iter()
            .map(|l| format!("{indent}# {l}{}", ctx.nl))
            .collect();
        out.edit(|m| {
            m.body_mut(&site.body)
                .expect("site from pre-pass tree")
                .insert_comment_lines(site.index, &text)
        });
        report.record(InsertionSite {
            tag: TransformTag::T4,
            file: ctx.path.clone(),
            location: site.to_string(),
            construct: construct.into(),
            guard: None,
        });
    }
    Ok(())
}
