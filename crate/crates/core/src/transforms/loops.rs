//! T1: loop nests whose outermost guard never admits an iteration.

use ctfam_syntax::{EligibleLocation, SourceUnit};

use crate::config::{GuardKind, InsertionReport, InsertionSite, TransformTag};
use crate::error::TransformError;

use super::synth::{empty_iterable, false_condition, guard, junk_stmt};
use super::Ctx;

pub(super) fn apply(
    ctx: &mut Ctx,
    out: &mut SourceUnit,
    sites: &[EligibleLocation],
    report: &mut InsertionReport,
) -> Result<(), TransformError> {
    for site in sites.iter().rev() {
        let pool = ctx.reusable(&site.body);
        let (code, g) = loop_nest(ctx, &pool)?;
        let indent = out.module().body_indent(&site.body);
        let stmts = ctx.statements(&code, &indent)?;
        out.edit(|m| {
            m.body_mut(&site.body)
                .expect("site from pre-pass tree")
                .insert_stmts(site.index, stmts)
        });
        report.record(InsertionSite {
            tag: TransformTag::T1,
            file: ctx.path.clone(),
            location: site.to_string(),
            construct: "loop_nest".into(),
            guard: Some(g),
        });
    }
    Ok(())
}

fn loop_nest(ctx: &mut Ctx, pool: &[String]) -> Result<(String, crate::config::Guard), TransformError> {
    let depth = ctx.rng.range(1, ctx.cfg.max_loop_depth);
    let mut code = String::new();
    let mut reads: Vec<String> = pool.to_vec();
    let mut outer = None;
    for level in 0..depth {
        let pad = ctx.unit.repeat(level);
        let is_for = ctx.rng.below(2) == 0;
        let header = if level == 0 {
            if is_for {
                let v = ctx.maybe_reuse(pool)?;
                let it = empty_iterable(ctx);
                outer = Some(guard(GuardKind::For, &it));
                reads.push(v.clone());
                format!("for {v} in {it}:")
            } else {
                let c = false_condition(ctx);
                outer = Some(guard(GuardKind::While, &c));
                format!("while {c}:")
            }
        } else if is_for {
            let v = ctx.maybe_reuse(pool)?;
            let bound = ctx.rng.range(2, 20);
            reads.push(v.clone());
            format!("for {v} in range({bound}):")
        } else {
            let v = ctx.maybe_reuse(pool)?;
            let bound = ctx.rng.range(2, 20);
            let line = format!("while {v} < {bound}:");
            reads.push(v);
            line
        };
        code.push_str(&pad);
        code.push_str(&header);
        code.push('\n');
        let inner_pad = ctx.unit.repeat(level + 1);
        let last = level + 1 == depth;
        let stmts = if last { ctx.rng.range(1, 3) } else { ctx.rng.below(2) as usize };
        for _ in 0..stmts {
            let target = ctx.maybe_reuse(pool)?;
            let comp = ctx.fresh()?;
            let s = junk_stmt(&mut ctx.rng, &target, &reads, &comp);
            code.push_str(&inner_pad);
            code.push_str(&s);
            code.push('\n');
            reads.push(target);
        }
    }
    Ok((code, outer.expect("depth is at least one")))
}
