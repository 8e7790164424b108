#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;

use ctfam_core::PassConfig;
use ctfam_syntax::{Module, SourceUnit, Stmt, Suite};

pub const TOYS: [&str; 3] = ["toy_exec", "toy_modify", "toy_decrypt"];

pub fn toys_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("toys")
}

pub fn python() -> String {
    std::env::var("CTFAM_PYTHON").unwrap_or_else(|_| "python3".to_string())
}

/// Every `.py` file of every toy, as (path, unit).
pub fn toy_sources() -> Vec<(String, SourceUnit)> {
    let mut out = Vec::new();
    for toy in TOYS {
        let dir = toys_dir().join(toy);
        let mut files: Vec<_> = std::fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|e| e == "py") && !p.ends_with("solve.py"))
            .collect();
        files.sort();
        for f in files {
            let rel = format!("{toy}/{}", f.file_name().unwrap().to_string_lossy());
            let text = std::fs::read_to_string(&f).unwrap();
            out.push((rel.clone(), SourceUnit::parse(rel, &text).unwrap()));
        }
    }
    out
}

pub fn cfg(seed: u64) -> PassConfig {
    PassConfig { seed, ..PassConfig::default() }
}

/// Runs a Python snippet and returns stdout; panics with stderr on failure.
pub fn run_python(script: &str) -> String {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("script.py");
    std::fs::write(&path, script).unwrap();
    let out = Command::new(python())
        .arg(&path)
        .output()
        .expect("python interpreter available");
    assert!(
        out.status.success(),
        "python failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Checks that every source compiles under the interpreter. Returns the
/// paths that did not.
pub fn python_rejects(sources: &[(String, String)]) -> Vec<String> {
    let dir = tempfile::tempdir().unwrap();
    let mut names = Vec::new();
    for (i, (_, text)) in sources.iter().enumerate() {
        let p = dir.path().join(format!("f{i}.py"));
        std::fs::write(&p, text).unwrap();
        names.push(p.to_string_lossy().to_string());
    }
    let script = format!(
        "import sys\nbad=[]\nfor i,p in enumerate({names:?}):\n    try:\n        compile(open(p,'rb').read(), p, 'exec')\n    except SyntaxError as e:\n        bad.append(str(i)+' '+str(e))\nprint('\\n'.join(bad))\n"
    );
    run_python(&script)
        .lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            let i: usize = l.split(' ').next().unwrap().parse().unwrap();
            format!("{}: {l}", sources[i].0)
        })
        .collect()
}

/// Code tokens in order, comments and whitespace excluded.
pub fn code_tokens(m: &Module) -> Vec<String> {
    let mut out = Vec::new();
    m.for_each_token(&mut |t| out.push(t.text.clone()));
    out
}

/// Every simple line and clause header, tokens joined by single spaces.
pub fn statement_texts(m: &Module) -> Vec<String> {
    fn walk(stmts: &[Stmt], out: &mut Vec<String>) {
        for s in stmts {
            match s {
                Stmt::Simple(l) => out.push(join(&l.tokens)),
                Stmt::Compound(c) => {
                    for d in &c.decorators {
                        out.push(join(&d.tokens));
                    }
                    for clause in &c.clauses {
                        match &clause.body {
                            Suite::Inline { tokens, .. } => {
                                out.push(format!("{} {}", join(&clause.header), join(tokens)))
                            }
                            Suite::Block { block, .. } => {
                                out.push(join(&clause.header));
                                walk(&block.stmts, out);
                            }
                        }
                    }
                }
            }
        }
    }
    fn join(tokens: &[ctfam_syntax::Token]) -> String {
        let mut s = String::new();
        for t in tokens {
            if !s.is_empty() {
                s.push(' ');
            }
            let mut r = String::new();
            t.render_into(&mut r);
            s.push_str(r.trim_start());
        }
        s
    }
    let mut out = Vec::new();
    walk(&m.body.stmts, &mut out);
    out
}

/// Is `sub` a sub-multiset of `sup`?
pub fn sub_multiset(sub: &[String], sup: &[String]) -> Result<(), String> {
    let mut counts = std::collections::HashMap::new();
    for s in sup {
        *counts.entry(s.as_str()).or_insert(0i64) += 1;
    }
    for s in sub {
        let c = counts.entry(s.as_str()).or_insert(0);
        *c -= 1;
        if *c < 0 {
            return Err(s.clone());
        }
    }
    Ok(())
}

pub fn identifiers(m: &Module) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    m.for_each_token(&mut |t| {
        if t.is_name() {
            out.insert(t.text.clone());
        }
    });
    out
}
