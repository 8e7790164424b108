use std::collections::{BTreeSet, HashMap};

use ctfam_syntax::{
    literal::literal_value, parse, parse_statements, BindingKind, BodyId, ParseError, SourceUnit,
    Stmt, Suite, TokenKind,
};

const DYNASTIC: &str = include_str!("fixtures/dynastic.py");
const KITCHEN: &str = include_str!("fixtures/kitchen_sink.py");

fn round_trip(src: &str) {
    let unit = parse(src).unwrap_or_else(|e| panic!("{e}\n{src}"));
    assert_eq!(unit.render(), src);
}

#[test]
fn round_trips() {
    for src in [
        "",
        "x = 1\n",
        "x = 1",
        "\n\n# only a comment",
        "x = 1\r\nif x:\r\n    y = 2 \\\r\n        + 3\r\n",
        "if x:\n\ty = 1\n\tif y:\n\t\tpass\n",
        "\u{feff}print('bom')\n",
        "def f(a,\n      b):  # c\n    return (a +\n            b)\n\n\n",
        "class C: pass\n",
        "for i in []: pass\nelse: print(1)\n",
        "x = [\n    1,  # one\n\n    2,\n]\n",
        "s = '''a\n  b\n'''\n",
        "f'{x!r}' f\"{y:{w}.{p}}\" F'''{z}\n'''\n",
        "  \n\nx = 1\n  # indented comment\ny = 2\n",
        DYNASTIC,
        KITCHEN,
    ] {
        round_trip(src);
    }
}

#[test]
fn header_lines_are_kept_apart() {
    let unit = parse(KITCHEN).unwrap();
    assert!(unit.module().header.starts_with("#!/usr/bin/env python3\n# -*- coding"));
    let unit = parse("# coding: latin-1\nx = 1\n").unwrap();
    assert_eq!(unit.module().header, "# coding: latin-1\n");
    let unit = parse("# just a comment\nx = 1\n").unwrap();
    assert_eq!(unit.module().header, "");
}

fn syntax_error(src: &str) -> ParseError {
    match parse(src) {
        Ok(_) => panic!("accepted invalid source: {src:?}"),
        Err(e) => e,
    }
}

#[test]
fn rejects_invalid_source() {
    for src in [
        "def f(:\n",
        "def f(:",
        "x = = 1\n",
        "f() = 1\n",
        "a +\n",
        "x = 1 2\n",
        "if x\n    pass\n",
        "if x:\npass\n",
        "  x = 1\n",
        "x = (1\n",
        "x = 1)\n",
        "else:\n    pass\n",
        "try:\n    pass\n",
        "x = 'unterminated\n",
        "lambda: (yield)\nclass\n",
        "1 += 2\n",
        "[a, b] += 1\n",
        "import\n",
        "from . import\n",
        "f'{}'\n",
        "b'a' 'b'\n",
        "@deco\nx = 1\n",
        "if x:\n        a = 1\n    b = 2\n",
    ] {
        assert!(matches!(syntax_error(src), ParseError::Syntax { .. }), "{src:?}");
    }
}

#[test]
fn error_locations_point_at_the_line() {
    let e = syntax_error("x = 1\ny = 2\nz = = 3\n");
    assert_eq!(e.location().line, 3);
    let e = syntax_error("def f():\n    return (\n        1,\n    )\ndef g(:\n    pass\n");
    assert_eq!(e.location().line, 5);
}

#[test]
fn unsupported_constructs_are_reported() {
    for src in [
        "match x:\n    case 1:\n        pass\n",
        "type Alias = int\n",
        "def f[T](x: T) -> T:\n    return x\n",
    ] {
        assert!(matches!(syntax_error(src), ParseError::Unsupported { .. }), "{src:?}");
    }
    // Soft keywords used as plain names stay legal.
    round_trip("match = 1\ntype = 2\nmatch(type)\nprint(match, type)\n");
}

fn binding<'a>(unit_table: &'a ctfam_syntax::BindingTable, name: &str) -> Vec<&'a ctfam_syntax::Binding> {
    unit_table.bindings.iter().filter(|b| b.name == name).collect()
}

#[test]
fn bindings_of_a_function() {
    let t = parse("def to_identity_map(a): return a\n").unwrap().analyze_bindings();
    assert_eq!(t.bindings.len(), 2);
    assert_eq!(binding(&t, "to_identity_map")[0].kind, BindingKind::Function);
    let a = binding(&t, "a")[0];
    assert_eq!(a.kind, BindingKind::Parameter);
    assert_eq!(a.references.len(), 1);
}

#[test]
fn imports_and_free_names_are_excluded() {
    let unit = parse("import math; math.prod(x)\n").unwrap();
    let t = unit.analyze_bindings();
    assert!(t.bindings.is_empty());
    assert!(t.facts.imported.contains("math"));
}

#[test]
fn class_members() {
    let t = parse("class C:\n  def m(self): pass\n").unwrap().analyze_bindings();
    let names: BTreeSet<_> = t.bindings.iter().map(|b| b.name.as_str()).collect();
    assert_eq!(names, BTreeSet::from(["C", "m", "self"]));
    // Class-level names are reachable as attributes, so never renamed.
    assert!(!binding(&t, "m")[0].renameable);
    assert!(binding(&t, "self")[0].renameable);
}

#[test]
fn dynastic_bindings() {
    let t = parse(DYNASTIC).unwrap().analyze_bindings();
    let mut names: Vec<_> = t.bindings.iter().map(|b| b.name.as_str()).collect();
    names.sort();
    assert_eq!(
        names,
        ["a", "a", "c", "ch", "chi", "ech", "encrypt", "f", "from_identity_map", "i", "m", "to_identity_map"]
    );
    assert!(t.bindings.iter().all(|b| b.renameable));
    let tim = binding(&t, "to_identity_map")[0];
    assert_eq!((tim.sites.len(), tim.references.len()), (1, 1));
    let ech = binding(&t, "ech")[0];
    assert_eq!((ech.sites.len(), ech.references.len()), (2, 1));
}

#[test]
fn scoping_rules() {
    let src = "\
x = 1
def f():
    global x
    x = 2
    y = 3
    def g():
        nonlocal y
        y += 1
        return [y for y in range(3)]
    return g
class K:
    x = 5
    def h(self):
        return x
";
    let t = parse(src).unwrap().analyze_bindings();
    let xs = binding(&t, "x");
    assert_eq!(xs.len(), 2, "module x and class-level x");
    let module_x = xs.iter().find(|b| b.scope == 0).unwrap();
    // `x = 1`, `x = 2`; references: `global x` and the read in `h`.
    assert_eq!(module_x.sites.len(), 2);
    assert_eq!(module_x.references.len(), 2);
    let ys = binding(&t, "y");
    assert_eq!(ys.len(), 2, "function y and comprehension y");
    let fy = ys.iter().find(|b| b.sites.len() == 2).unwrap();
    assert_eq!(fy.references.len(), 1, "the nonlocal declaration");
}

#[test]
fn walrus_in_comprehension_binds_outside() {
    let t = parse("def f(d):\n    if any((hit := v) for v in d):\n        return hit\n").unwrap().analyze_bindings();
    let hit = binding(&t, "hit")[0];
    assert_eq!(t.scopes[hit.scope].name.as_deref(), Some("f"));
    assert_eq!(hit.references.len(), 1);
}

#[test]
fn conservative_rename_policy() {
    let src = "\
alpha = 1
beta = 2
gamma = 3
delta = 4
eps = 5
print(getattr(obj, 'alpha'), obj.beta, f(gamma=1), f'{delta=}', eps)
";
    let t = parse(src).unwrap().analyze_bindings();
    let renameable: BTreeSet<_> = t.renameable().map(|(_, b)| b.name.as_str()).collect();
    assert_eq!(renameable, BTreeSet::from(["eps"]));
    let ext = BTreeSet::from(["eps".to_string()]);
    let t = parse(src).unwrap().analyze_bindings_with(&ext);
    assert_eq!(t.renameable().count(), 0);

    let t = parse("a = 1\ndef f():\n    b = 2\n    return locals()\n").unwrap().analyze_bindings();
    assert_eq!(t.renameable().count(), 0, "reflection freezes the scope and its ancestors");
    let t = parse("a = 1\ndef f():\n    b = 2\n    return b\nexec('a')\n").unwrap().analyze_bindings();
    let renameable: Vec<_> = t.renameable().map(|(_, b)| b.name.as_str()).collect();
    assert_eq!(renameable, ["b"]);
    let t = parse("from m import *\na = 1\n").unwrap().analyze_bindings();
    assert_eq!(t.renameable().count(), 0);
    let t = parse("def input():\n    pass\n__all__ = []\n").unwrap().analyze_bindings();
    assert!(t.bindings.is_empty(), "builtin shadows and dunders are excluded");
}

fn stmt_kinds(stmts: &[Stmt], out: &mut Vec<String>) {
    for s in stmts {
        match s {
            Stmt::Simple(l) => out.push(format!("simple:{}", l.tokens[0].is_name() as u8)),
            Stmt::Compound(c) => {
                out.push(c.keyword().to_string());
                for clause in &c.clauses {
                    match &clause.body {
                        Suite::Block { block, .. } => stmt_kinds(&block.stmts, out),
                        Suite::Inline { .. } => out.push("inline".into()),
                    }
                }
            }
        }
    }
}

fn string_literals(unit: &SourceUnit) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    unit.module().for_each_token(&mut |t| {
        if t.is_string() {
            out.insert(format!("{:?}", literal_value(t)).replace(' ', "") + &t.text);
        }
    });
    out
}

/// Renaming every binding to a fresh unique name keeps the statement
/// structure and the string literals.
#[test]
fn binding_soundness() {
    for src in [DYNASTIC, KITCHEN] {
        let unit = parse(src).unwrap();
        let table = unit.analyze_bindings();
        let names: HashMap<usize, String> =
            (0..table.bindings.len()).map(|i| (i, format!("zz_fresh_{i}"))).collect();
        let map = table.rename_map(&names);
        let mut edited = unit.clone();
        let changed = edited.edit(|m| m.rename_tokens(&map));
        assert!(changed > 0);
        let reparsed = edited.reparse().unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        stmt_kinds(&unit.module().body.stmts, &mut a);
        stmt_kinds(&reparsed.module().body.stmts, &mut b);
        assert_eq!(a, b);
        let before: Vec<_> = string_literals(&unit).into_iter().filter(|s| !s.starts_with("None")).collect();
        let after: Vec<_> = string_literals(&reparsed).into_iter().filter(|s| !s.starts_with("None")).collect();
        assert_eq!(before, after);
        // No original binding name survives at its binding sites.
        let t2 = reparsed.analyze_bindings();
        assert!(t2.bindings.iter().all(|b| b.name.starts_with("zz_fresh_")));
    }
}

#[test]
fn fstring_fields_are_renamed() {
    let unit = parse("name = 'x'\nprint(f'{name} and {name!r:>{name}}')\n").unwrap();
    let table = unit.analyze_bindings();
    let b = &table.bindings[0];
    assert_eq!(b.references.len(), 3);
    let map = table.rename_map(&HashMap::from([(0, "nn".to_string())]));
    let mut u = unit.clone();
    u.edit(|m| m.rename_tokens(&map));
    assert_eq!(u.render(), "nn = 'x'\nprint(f'{nn} and {nn!r:>{nn}}')\n");
}

#[test]
fn location_counts() {
    let unit = parse("a = 1\nb = 2\nc = 3\n").unwrap();
    let locs = unit.eligible_locations();
    assert_eq!(locs.iter().map(|l| l.index).collect::<Vec<_>>(), [0, 1, 2, 3]);

    let unit = parse("from __future__ import annotations\nx = 1\n").unwrap();
    let idx: Vec<_> = unit.eligible_locations().iter().map(|l| l.index).collect();
    assert_eq!(idx, [1, 2]);

    let unit = parse("'''doc'''\nfrom __future__ import annotations\nx = 1\n").unwrap();
    let idx: Vec<_> = unit.eligible_locations().iter().map(|l| l.index).collect();
    assert_eq!(idx, [2, 3]);

    // Class bodies and with bodies contribute nothing; method bodies do.
    let unit = parse("class C:\n    x = 1\n    def m(self):\n        '''d'''\n        return 1\n").unwrap();
    let locs = unit.eligible_locations();
    assert_eq!(locs.len(), 2 + 2, "module 0..=1 and the method body after its docstring");
    assert_eq!(locs[1].body, BodyId(vec![(0, 0), (1, 0)]));
    assert_eq!(locs[1].index, 1);
    let unit = parse("with a:\n    x = 1\n").unwrap();
    assert_eq!(unit.eligible_locations().len(), 2);

    // Hand count: module 7, the two helpers 2 each, encrypt 4, its loop 4,
    // the if branch 2 and the else branch 3.
    let unit = parse(DYNASTIC).unwrap();
    assert_eq!(unit.eligible_locations().len(), 24);
    assert_eq!(unit.eligible_locations(), parse(DYNASTIC).unwrap().eligible_locations());
}

#[test]
fn locations_are_in_render_order() {
    let unit = parse(DYNASTIC).unwrap();
    let locs = unit.eligible_locations();
    let ids: Vec<String> = locs.iter().map(|l| l.to_string()).collect();
    assert_eq!(ids[0], "module@0");
    assert_eq!(ids[3], "2.0@0");
    assert_eq!(ids.last().unwrap(), "module@6");
}

#[test]
fn insertion_splices_between_statements() {
    let src = "a = 1\n# about b\nb = 2\nc = 3";
    let mut unit = parse(src).unwrap();
    let new = parse_statements("inserted = 0\n", "").unwrap();
    unit.edit(|m| m.body.insert_stmts(1, new));
    assert_eq!(unit.render(), "a = 1\ninserted = 0\n# about b\nb = 2\nc = 3");

    let new = parse_statements("tail = 1\n", "").unwrap();
    unit.edit(|m| m.body.insert_stmts(4, new));
    assert_eq!(unit.render(), "a = 1\ninserted = 0\n# about b\nb = 2\nc = 3\ntail = 1\n");
    unit.reparse().unwrap();
}

#[test]
fn nested_insertion_is_reindented() {
    let mut unit = parse("def f():\n\tif x:\n\t\treturn 1").unwrap();
    let id = BodyId(vec![(0, 0), (0, 0)]);
    let indent = unit.module().body_indent(&id);
    assert_eq!(indent, "\t\t");
    assert_eq!(unit.module().indent_unit(), "\t");
    let stmts = parse_statements("while 0:\n\tpass\n", &indent).unwrap();
    unit.edit(|m| m.body_mut(&id).unwrap().insert_stmts(1, stmts));
    assert_eq!(unit.render(), "def f():\n\tif x:\n\t\treturn 1\n\t\twhile 0:\n\t\t\tpass\n");
    unit.reparse().unwrap();
}

#[test]
fn comment_insertion() {
    let mut unit = parse("def f():\n    return 1\n").unwrap();
    let id = BodyId(vec![(0, 0)]);
    unit.edit(|m| {
        let b = m.body_mut(&id).unwrap();
        b.insert_comment_lines(0, "    # first\n");
        b.insert_comment_lines(1, "    # last\n");
    });
    assert_eq!(unit.render(), "def f():\n    # first\n    return 1\n    # last\n");
    assert_eq!(unit.reparse().unwrap().render(), unit.render());
}

#[test]
fn fstring_tokens_are_visible() {
    let unit = parse("v = 1\ns = f'{v + 1:{v}}'\n").unwrap();
    let mut names = Vec::new();
    unit.module().for_each_token(&mut |t| {
        if t.is_name() {
            names.push(t.text.clone());
        }
        if let TokenKind::FStr(_) = t.kind {
            names.push("<f>".into());
        }
    });
    assert_eq!(names, ["v", "s", "<f>", "v", "v"]);
}

#[test]
fn exec_with_explicit_namespace_is_isolated() {
    let t = parse("def run(code, flag):\n    scope = {'secret': flag}\n    exec(code, scope)\n").unwrap().analyze_bindings();
    assert_eq!(t.renameable().count(), 4);
    let t = parse("def run(code):\n    exec(code)\n").unwrap().analyze_bindings();
    assert_eq!(t.renameable().count(), 0);
}
