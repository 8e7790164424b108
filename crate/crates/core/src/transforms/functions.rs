//! T3: uncalled functions and lambdas.

use ctfam_syntax::{BindingKind, EligibleLocation, SourceUnit};

use crate::config::{InsertionReport, InsertionSite, TransformTag};
use crate::error::TransformError;

use super::synth::int_expr;
use super::Ctx;

pub(super) fn apply(
    ctx: &mut Ctx,
    out: &mut SourceUnit,
    sites: &[EligibleLocation],
    report: &mut InsertionReport,
) -> Result<(), TransformError> {
    for site in sites.iter().rev() {
        let pool = ctx.reusable(&site.body);
        let name = outer_name(ctx, site)?;
        let lambda = ctx.rng.below(2) == 0;
        let code = if lambda {
            let params = params(ctx, &pool)?;
            let body = int_expr(&mut ctx.rng, &params, 2);
            if params.is_empty() {
                format!("{name} = lambda: {body}\n")
            } else {
                format!("{name} = lambda {}: {body}\n", params.join(", "))
            }
        } else {
            let depth = ctx.rng.range(1, ctx.cfg.max_func_depth);
            def(ctx, &name, &pool, depth, 0)?
        };
        let indent = out.module().body_indent(&site.body);
        let stmts = ctx.statements(&code, &indent)?;
        out.edit(|m| {
            m.body_mut(&site.body)
                .expect("site from pre-pass tree")
                .insert_stmts(site.index, stmts)
        });
        report.record(InsertionSite {
            tag: TransformTag::T3,
            file: ctx.path.clone(),
            location: site.to_string(),
            construct: if lambda { "lambda" } else { "def" }.into(),
            guard: None,
        });
    }
    Ok(())
}

/// A fresh name, or with even odds a near-miss of a function defined in
/// the same scope.
fn outer_name(ctx: &mut Ctx, site: &EligibleLocation) -> Result<String, TransformError> {
    let scope = ctx.table.scope_of_body(&site.body);
    let nearby: Vec<String> = ctx
        .table
        .bindings
        .iter()
        .filter(|b| b.kind == BindingKind::Function && Some(b.scope) == scope)
        .map(|b| b.name.clone())
        .collect();
    if !nearby.is_empty() && ctx.rng.below(2) == 0 {
        let base = ctx.rng.pick(&nearby).clone();
        if let Some(n) = ctx.names.near_miss(&mut ctx.rng, &base) {
            return Ok(n);
        }
    }
    ctx.fresh()
}

fn params(ctx: &mut Ctx, pool: &[String]) -> Result<Vec<String>, TransformError> {
    let n = ctx.rng.range(0, ctx.cfg.max_params);
    let mut out: Vec<String> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut p = ctx.maybe_reuse(pool)?;
        if out.contains(&p) {
            p = ctx.fresh()?;
        }
        out.push(p);
    }
    Ok(out)
}

fn def(ctx: &mut Ctx, name: &str, pool: &[String], depth: usize, level: usize) -> Result<String, TransformError> {
    let params = params(ctx, pool)?;
    let pad = ctx.unit.repeat(level + 1);
    let mut code = format!("{}def {name}({}):\n", ctx.unit.repeat(level), params.join(", "));
    if depth > 1 {
        let inner = ctx.fresh()?;
        code.push_str(&def(ctx, &inner, pool, depth - 1, level + 1)?);
    }
    let mut reads = params.clone();
    if ctx.rng.below(2) == 0 {
        let local = ctx.fresh()?;
        code.push_str(&format!("{pad}{local} = {}\n", int_expr(&mut ctx.rng, &reads, 2)));
        reads.push(local);
    }
    code.push_str(&format!("{pad}return {}\n", int_expr(&mut ctx.rng, &reads, 2)));
    Ok(code)
}
