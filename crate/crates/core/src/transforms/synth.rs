//! Random dead-code snippets. Nothing produced here is ever executed; it
//! only has to parse and look plausible.

use crate::config::{Guard, GuardKind};
use crate::names::vocab;
use crate::rng::Stream;

use super::Ctx;

const INT_OPS: &[&str] = &["+", "-", "*", "^", "&", "|", "%", "//"];

fn word(rng: &mut Stream) -> &'static str {
    rng.pick(vocab())
}

/// Integer-valued expression over `vars` and small literals. Shift
/// amounts stay small so constant folding cannot build huge numbers.
pub fn int_expr(rng: &mut Stream, vars: &[String], depth: usize) -> String {
    let leaf = |rng: &mut Stream| -> String {
        if !vars.is_empty() && rng.below(2) == 0 {
            rng.pick(vars).clone()
        } else if rng.below(4) == 0 {
            format!("0x{:x}", rng.below(256))
        } else {
            rng.below(1000).to_string()
        }
    };
    if depth == 0 || rng.below(3) == 0 {
        return leaf(rng);
    }
    match rng.below(4) {
        0 => format!("({} << {})", int_expr(rng, vars, depth - 1), rng.below(8)),
        1 => format!("({} >> {})", int_expr(rng, vars, depth - 1), rng.below(8)),
        _ => {
            let op = rng.pick(INT_OPS);
            format!("({} {op} {})", int_expr(rng, vars, depth - 1), int_expr(rng, vars, depth - 1))
        }
    }
}

pub fn str_expr(rng: &mut Stream) -> String {
    let w = word(rng);
    match rng.below(5) {
        0 => format!("\"{w}\".upper()"),
        1 => format!("\"{w}\"[::-1]"),
        2 => format!("\"{w}\" + \"{}\"", word(rng)),
        3 => format!("\"{w}\".replace(\"{}\", \"{}\")", &w[..1], word(rng)),
        _ => format!("\"_\".join([\"{w}\", \"{}\"])", word(rng)),
    }
}

/// One assignment statement at column zero. `fresh_comp_var` names the
/// comprehension variable when a comprehension is chosen.
pub fn junk_stmt(rng: &mut Stream, target: &str, reads: &[String], fresh_comp_var: &str) -> String {
    match rng.below(6) {
        0 | 1 => format!("{target} = {}", int_expr(rng, reads, 2)),
        2 => format!("{target} = {}", str_expr(rng)),
        3 => {
            let v = fresh_comp_var;
            let op = rng.pick(&["*", "+", "^", "%"]);
            format!("{target} = [{v} {op} {} for {v} in range({})]", rng.range(1, 9), rng.range(2, 16))
        }
        4 => format!("{target} = len({}) * {}", str_expr(rng), rng.range(1, 9)),
        _ => {
            let a = int_expr(rng, reads, 1);
            let b = int_expr(rng, reads, 1);
            format!("{target} = {a} if {a} > {b} else {b}")
        }
    }
}

/// A condition that is false by construction.
pub fn false_condition(ctx: &mut Ctx) -> String {
    let rng = &mut ctx.rng;
    let len_free = !ctx.bound_anywhere.contains("len");
    loop {
        return match rng.below(9) {
            0 => {
                let a = rng.below(100);
                format!("{a} > {}", a + 1 + rng.below(50))
            }
            1 => {
                let a = rng.below(100);
                format!("{a} == {}", a + 1 + rng.below(9))
            }
            2 => format!("not {}", rng.range(1, 99)),
            3 => "None".to_string(),
            4 => {
                let w = word(rng);
                format!("\"{w}\" == \"{w}{}\"", (b'a' + rng.below(26) as u8) as char)
            }
            5 if len_free => {
                let w = word(rng);
                format!("len(\"{w}\") > {}", w.len() + rng.below(5) as usize)
            }
            5 => continue,
            6 => format!("{} in ()", rng.below(100)),
            7 => "() != ()".to_string(),
            _ => "False".to_string(),
        };
    }
}

/// An iterable that yields nothing, by construction.
pub fn empty_iterable(ctx: &mut Ctx) -> String {
    let range_free = !ctx.bound_anywhere.contains("range");
    let rng = &mut ctx.rng;
    loop {
        return match rng.below(8) {
            0 => "()".to_string(),
            1 => "[]".to_string(),
            2 => "\"\"".to_string(),
            3 => "b\"\"".to_string(),
            4 => "{}".to_string(),
            5 if range_free => {
                let hi = rng.below(50);
                format!("range({}, {hi})", hi + rng.below(10))
            }
            5 => continue,
            6 => {
                let w = word(rng);
                format!("\"{w}\"[{}:]", w.len() + rng.below(3) as usize)
            }
            _ => format!("[{}][1:]", rng.below(100)),
        };
    }
}

pub fn guard(kind: GuardKind, expr: &str) -> Guard {
    Guard { kind, expr: expr.to_string() }
}

