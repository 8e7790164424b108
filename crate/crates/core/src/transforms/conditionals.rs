//! T2: dead nested ifs, and try/except wrappers around live code whose
//! handlers catch an exception class nothing raises.

use ctfam_syntax::{protected_prefix, BodyId, BodyKind, Compound, EligibleLocation, SourceUnit, Stmt, Suite};

use crate::config::{GuardKind, InsertionReport, InsertionSite, TransformTag};
use crate::error::TransformError;

use super::synth::{false_condition, guard, int_expr, junk_stmt};
use super::Ctx;

pub(super) fn apply(
    ctx: &mut Ctx,
    out: &mut SourceUnit,
    sites: &[EligibleLocation],
    report: &mut InsertionReport,
) -> Result<(), TransformError> {
    let mut sentinels: Vec<String> = Vec::new();
    let exception_free = !ctx.bound_anywhere.contains("Exception");
    for site in sites.iter().rev() {
        let len = out.module().body(&site.body).map_or(0, |b| b.stmts.len());
        let want_if = ctx.rng.chance(ctx.cfg.if_vs_try_prob);
        let indent = out.module().body_indent(&site.body);
        if want_if || site.index >= len || !exception_free {
            let (code, g) = dead_if(ctx)?;
            let stmts = ctx.statements(&code, &indent)?;
            out.edit(|m| body(m, &site.body).insert_stmts(site.index, stmts));
            report.record(InsertionSite {
                tag: TransformTag::T2,
                file: ctx.path.clone(),
                location: site.to_string(),
                construct: "if".into(),
                guard: Some(g),
            });
        } else {
            let count = ctx.rng.range(1, 3.min(len - site.index));
            let nesting = ctx.rng.range(1, 2);
            let names: Vec<String> = (0..nesting).map(|_| ctx.fresh()).collect::<Result<_, _>>()?;
            let code = try_shell(ctx, &names)?;
            let shell = ctx.statements(&code, &indent)?;
            let unit = ctx.unit.clone();
            out.edit(|m| wrap(body(m, &site.body), site.index, count, shell, nesting, &indent, &unit));
            sentinels.extend(names);
            report.record(InsertionSite {
                tag: TransformTag::T2,
                file: ctx.path.clone(),
                location: site.to_string(),
                construct: format!("try_wrap:{count}"),
                guard: None,
            });
        }
    }
    if !sentinels.is_empty() {
        let mut code = String::new();
        for s in &sentinels {
            code.push_str(&format!("class {s}(Exception):\n{}pass\n", ctx.unit));
        }
        let stmts = ctx.statements(&code, "")?;
        out.edit(|m| {
            let at = protected_prefix(&m.body, BodyKind::Module);
            m.body.insert_stmts(at, stmts)
        });
    }
    Ok(())
}

fn body<'m>(m: &'m mut ctfam_syntax::Module, id: &BodyId) -> &'m mut ctfam_syntax::Block {
    m.body_mut(id).expect("site from pre-pass tree")
}

fn dead_if(ctx: &mut Ctx) -> Result<(String, crate::config::Guard), TransformError> {
    let cond = false_condition(ctx);
    let g = guard(GuardKind::If, &cond);
    let mut code = format!("if {cond}:\n");
    let depth = ctx.rng.range(2, 3);
    let mut reads = Vec::new();
    for level in 1..=depth {
        let pad = ctx.unit.repeat(level);
        for _ in 0..ctx.rng.range(1, 2) {
            let target = ctx.fresh()?;
            let comp = ctx.fresh()?;
            code.push_str(&format!("{pad}{}\n", junk_stmt(&mut ctx.rng, &target, &reads, &comp)));
            reads.push(target);
        }
        if level < depth {
            let a = int_expr(&mut ctx.rng, &reads, 1);
            let b = int_expr(&mut ctx.rng, &reads, 1);
            let op = *ctx.rng.pick(&["<", ">", "==", "!=", "<="]);
            code.push_str(&format!("{pad}if {a} {op} {b}:\n"));
        }
    }
    Ok((code, g))
}

/// `try` nest with a `pass` placeholder at the innermost body. Handlers
/// catch the sentinels, innermost first.
fn try_shell(ctx: &mut Ctx, sentinels: &[String]) -> Result<String, TransformError> {
    let n = sentinels.len();
    let mut code = String::new();
    for level in 0..n {
        code.push_str(&format!("{}try:\n", ctx.unit.repeat(level)));
    }
    code.push_str(&format!("{}pass\n", ctx.unit.repeat(n)));
    for level in (0..n).rev() {
        let pad = ctx.unit.repeat(level);
        code.push_str(&format!("{pad}except {}:\n", sentinels[level]));
        let target = ctx.fresh()?;
        let comp = ctx.fresh()?;
        let s = junk_stmt(&mut ctx.rng, &target, &[], &comp);
        code.push_str(&format!("{pad}{}{s}\n", ctx.unit));
    }
    Ok(code)
}

fn wrap(
    block: &mut ctfam_syntax::Block,
    index: usize,
    count: usize,
    mut shell: Vec<Stmt>,
    nesting: usize,
    base: &str,
    unit: &str,
) {
    let mut taken: Vec<Stmt> = block.stmts.drain(index..index + count).collect();
    let leading = std::mem::take(taken[0].leading_mut());
    let last = taken.last_mut().expect("count >= 1");
    let end = last.last_end_mut();
    if !end.ends_with('\n') && !end.ends_with('\r') {
        end.push('\n');
    }
    let pad = unit.repeat(nesting);
    for s in &mut taken {
        s.reindent(&|i: &str| match i.strip_prefix(base) {
            Some(rest) => format!("{base}{pad}{rest}"),
            None => format!("{pad}{i}"),
        });
    }
    let mut outer = shell.remove(0);
    *outer.leading_mut() = leading;
    let mut cur = &mut outer;
    for _ in 0..nesting {
        let Stmt::Compound(Compound { clauses, .. }) = cur else { unreachable!("try shell") };
        let Suite::Block { block: inner, .. } = &mut clauses[0].body else { unreachable!("try body") };
        if inner.stmts.first().is_some_and(|s| matches!(s, Stmt::Simple(_))) {
            inner.stmts = std::mem::take(&mut taken);
            break;
        }
        cur = &mut inner.stmts[0];
    }
    block.insert_stmts(index, vec![outer]);
}
