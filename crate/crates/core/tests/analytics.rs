use std::collections::BTreeMap;

use ctfam_core::analytics::*;
use ctfam_core::{AnalyticsError, TransformChain};
use proptest::prelude::*;

fn rec(model: &str, family: &str, chain: &str, repeat: u32, solved: bool) -> EvalRecord {
    EvalRecord {
        schema_version: LOG_SCHEMA_VERSION,
        model: model.into(),
        family: family.into(),
        chain: chain.parse().unwrap(),
        repeat,
        solved,
        total_tokens: 0,
        failure_reason: if solved { FailureReason::None } else { FailureReason::TokenLimit },
        tool_calls: BTreeMap::new(),
    }
}

/// Wilson bounds as the roots of (1 + z²/n)p² − (2p̂ + z²/n)p + p̂² = 0.
fn wilson_oracle(k: u64, n: u64, z: f64) -> (f64, f64) {
    let n = n as f64;
    let ph = k as f64 / n;
    let a = 1.0 + z * z / n;
    let b = -(2.0 * ph + z * z / n);
    let c = ph * ph;
    let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
    ((-b - disc) / (2.0 * a), (-b + disc) / (2.0 * a))
}

#[test]
fn wilson_matches_quadratic_roots() {
    let (lo, hi) = wilson_interval(50, 100, Z90);
    let (olo, ohi) = wilson_oracle(50, 100, Z90);
    assert!((lo - olo).abs() < 1e-12 && (hi - ohi).abs() < 1e-12, "{lo} {hi} vs {olo} {ohi}");
    for n in 1..60 {
        for k in 0..=n {
            let (lo, hi) = wilson_interval(k, n, Z90);
            let (olo, ohi) = wilson_oracle(k, n, Z90);
            assert!((lo - olo).abs() < 1e-9 && (hi - ohi).abs() < 1e-9, "k={k} n={n}");
            let p = k as f64 / n as f64;
            assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
        }
        let (lo, hi) = wilson_interval(n, n, Z90);
        assert_eq!(hi, 1.0);
        assert!(lo < 1.0);
    }
}

#[test]
fn load_rejects_solved_with_failure_reason() {
    let line = r#"{"model":"m","family":"f","chain":"Orig","repeat":0,"solved":true,"total_tokens":5,"failure_reason":"token_limit"}"#;
    let text = format!("\n{}\n", line);
    match parse_logs(&text) {
        Err(AnalyticsError::Schema { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn load_reports_field_errors_with_line() {
    let ok = r#"{"model":"m","family":"f","chain":"Orig","repeat":0,"solved":false,"total_tokens":5}"#;
    let bad = r#"{"model":"m","family":"f","chain":"T3;T1;T2","repeat":0,"solved":false,"total_tokens":5}"#;
    let missing = r#"{"model":"m","family":"f","chain":"R","repeat":0,"total_tokens":5}"#;
    let err = parse_logs(&format!("{ok}\n{bad}\n")).unwrap_err().to_string();
    assert!(err.starts_with("line 2:"), "{err}");
    let err = parse_logs(&format!("{ok}\n{ok}\n")).unwrap_err().to_string();
    assert!(err.contains("duplicate"), "{err}");
    let err = parse_logs(&format!("{missing}\n")).unwrap_err().to_string();
    assert!(err.contains("solved"), "{err}");
    let neg = r#"{"model":"m","family":"f","chain":"R","repeat":-1,"solved":false,"total_tokens":5}"#;
    assert!(parse_logs(neg).is_err());
}

#[test]
fn load_empty_and_ten_line_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("e.jsonl");
    std::fs::write(&empty, "").unwrap();
    assert!(load_logs(&empty).unwrap().is_empty());
    let fixture = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/runs10.jsonl");
    assert_eq!(load_logs(&fixture).unwrap().len(), 10);
}

#[test]
fn all_failed_cell_and_half_cell() {
    let mut rs: Vec<EvalRecord> = (0..65).map(|i| rec(&format!("m{}", i % 13), "f", "O", i / 13, false)).collect();
    rs.push(rec("a", "g", "R", 0, true));
    rs.push(rec("a", "g", "R", 1, false));
    let m = solvability_matrix(&rs);
    let c = m.cell(&"O".parse().unwrap(), "f").unwrap();
    assert_eq!((c.count, c.mean, c.sd), (65, Some(0.0), Some(0.0)));
    let c = m.cell(&"R".parse().unwrap(), "g").unwrap();
    assert_eq!((c.mean, c.sd), (Some(0.5), Some(0.5)));
    let c = m.cell(&"T1".parse().unwrap(), "g").unwrap();
    assert_eq!((c.count, c.mean), (0, None));
    assert_eq!(m.chains.len(), 24);
    let csv = m.mean_csv();
    assert!(csv.starts_with("chain,f,g\nOrig,,\nR,,0.5000\n"), "{csv}");
}

#[test]
fn difficulty_boundaries() {
    let rs: Vec<EvalRecord> = (0..8).map(|i| rec("m", "f", "T2", i, true)).collect();
    let d = difficulty_ranking(&rs);
    assert_eq!(d.entries.len(), 1);
    assert_eq!(d.entries[0].score, 1.0);
    assert_eq!(d.entries[0].ci_hi, 1.0);
    assert_eq!(d.excluded.len(), 23);

    let rs: Vec<EvalRecord> = (0..100).map(|i| rec(&format!("m{}", i % 4), "f", "R", i / 4, i % 2 == 0)).collect();
    let e = &difficulty_ranking(&rs).entries[0];
    let (olo, ohi) = wilson_oracle(50, 100, 1.645);
    assert_eq!(e.score, 0.5);
    assert!((e.ci_lo - olo).abs() < 1e-12 && (e.ci_hi - ohi).abs() < 1e-12);
}

#[test]
fn adding_solves_never_makes_a_chain_harder() {
    // Two chains, 10 attempts each; T1 starts harder than T2.
    let base = |k1: u32| -> Vec<EvalRecord> {
        let mut rs: Vec<EvalRecord> = (0..10).map(|i| rec("m", "f", "T1", i, i < k1)).collect();
        rs.extend((0..10).map(|i| rec("m", "f", "T2", i, i < 5)));
        rs
    };
    let mut prev = 0;
    for k1 in 0..=10 {
        let r = difficulty_ranking(&base(k1)).rank_of(&"T1".parse().unwrap()).unwrap();
        assert!(r >= prev, "k1={k1}: rank {r} < {prev}");
        prev = r;
    }
    assert_eq!(prev, 2);
}

#[test]
fn o_chains_rank_hardest_when_engineered() {
    let mut rs = Vec::new();
    for (ci, chain) in TransformChain::canonical().iter().enumerate() {
        let k = if chain.contains(ctfam_core::TransformTag::O) { ci % 7 } else { 10 + ci % 9 };
        for i in 0..20u32 {
            rs.push(EvalRecord {
                chain: chain.clone(),
                ..rec("m", "f", "Orig", i, (i as usize) < k)
            });
        }
    }
    let d = difficulty_ranking(&rs);
    for e in &d.entries {
        assert_eq!(e.chain.contains(ctfam_core::TransformTag::O), e.rank <= 12, "{} at {}", e.chain, e.rank);
    }
}

fn hand_fixture() -> Vec<EvalRecord> {
    let mut rs = Vec::new();
    // Experiment (fam, Orig): A 1,1  B 1,0  C 0,1
    for (m, a, b) in [("A", true, true), ("B", true, false), ("C", false, true)] {
        rs.push(rec(m, "fam", "Orig", 0, a));
        rs.push(rec(m, "fam", "Orig", 1, b));
    }
    // Experiment (fam, T1): A 0,0  B 1,1  C 1,0
    for (m, a, b) in [("A", false, false), ("B", true, true), ("C", true, false)] {
        rs.push(rec(m, "fam", "T1", 0, a));
        rs.push(rec(m, "fam", "T1", 1, b));
    }
    rs
}

#[test]
fn three_model_hand_table() {
    // Orig: A beats B and C -> 1; B loses to A, ties C -> 0.25; C the same.
    // T1:   A loses both -> 0; B wins both -> 1; C beats A, loses to B -> 0.5.
    let r = model_ranking(&hand_fixture(), 2000, 7).unwrap();
    assert_eq!(r.score_of("A"), Some(0.5));
    assert_eq!(r.score_of("B"), Some(0.625));
    assert_eq!(r.score_of("C"), Some(0.375));
    let order: Vec<&str> = r.entries.iter().map(|e| e.model.as_str()).collect();
    assert_eq!(order, ["B", "A", "C"]);
    let rel = relative_scores(&hand_fixture());
    assert_eq!(rel.rel[0], [Some(1.0), Some(0.25), Some(0.25)]);
    assert_eq!(rel.rel[1], [Some(0.0), Some(1.0), Some(0.5)]);
}

#[test]
fn dominance_and_all_ties() {
    let mut rs = Vec::new();
    for c in ["Orig", "R", "O"] {
        for f in ["f1", "f2"] {
            rs.push(rec("A", f, c, 0, true));
            rs.push(rec("B", f, c, 0, false));
        }
    }
    let r = model_ranking(&rs, BOOTSTRAP_DRAWS, 0).unwrap();
    assert_eq!(r.score_of("A"), Some(1.0));
    assert_eq!(r.score_of("B"), Some(0.0));
    assert_eq!((r.entries[0].ci_lo, r.entries[0].ci_hi), (1.0, 1.0));
    let ties: Vec<EvalRecord> = rs.iter().map(|r| EvalRecord { solved: r.chain.is_orig(), failure_reason: if r.chain.is_orig() { FailureReason::None } else { FailureReason::TokenLimit }, ..r.clone() }).collect();
    let r = model_ranking(&ties, 500, 0).unwrap();
    assert!(r.entries.iter().all(|e| e.score == 0.5));
}

#[test]
fn ranking_needs_two_models() {
    let rs = vec![rec("A", "f", "R", 0, true)];
    assert!(matches!(model_ranking(&rs, 10, 0), Err(AnalyticsError::TooFewModels(1))));
}

#[test]
fn incomplete_experiments_are_skipped_pairwise() {
    let rs = vec![rec("A", "f", "R", 0, true), rec("B", "f", "R", 0, false), rec("A", "f", "T1", 0, false)];
    let r = model_ranking(&rs, 100, 0).unwrap();
    assert_eq!(r.score_of("A"), Some(1.0));
    assert_eq!(r.entries.iter().find(|e| e.model == "A").unwrap().experiments, 1);
}

#[test]
fn tools_single_record_and_linearity() {
    let mut r = rec("m", "f", "Orig", 0, true);
    r.tool_calls = [("python3".to_string(), 2), ("cat".to_string(), 1)].into();
    let t = tool_usage_summary(std::slice::from_ref(&r), ToolGrouping::Chain, DEFAULT_TOP_K);
    let g = t.group("Orig").unwrap();
    assert_eq!(g.all, 3);
    assert_eq!(g.top, [("python3".to_string(), 2), ("cat".to_string(), 1)]);

    let mut t5 = r.clone();
    t5.chain = "T5".parse().unwrap();
    t5.tool_calls.values_mut().for_each(|v| *v *= 2);
    let t = tool_usage_summary(&[r, t5], ToolGrouping::Chain, DEFAULT_TOP_K);
    assert_eq!(t.group("T5").unwrap().all, 2 * t.group("Orig").unwrap().all);
    assert!(t.csv().contains("Orig,All tools,3\n"));
}

#[test]
fn tokens_single_and_absent() {
    let mut r = rec("m", "f", "T3", 0, true);
    r.total_tokens = 1234;
    let mut f = rec("m", "f", "T4", 0, false);
    f.total_tokens = 99;
    let t = token_summary(&[r, f], true);
    assert_eq!(t.mean(&"T3".parse().unwrap(), "f"), Some(1234.0));
    assert_eq!(t.mean(&"T4".parse().unwrap(), "f"), None);
    assert!(t.csv().contains("T4,never_solved\n"));
    let t = token_summary(&[rec("m", "f", "T4", 0, false)], false);
    assert_eq!(t.mean(&"T4".parse().unwrap(), "f"), Some(0.0));
}

#[test]
fn failure_fixture_979_11_10() {
    let mut rs = Vec::new();
    let mut i = 0u32;
    for (reason, n) in [(FailureReason::TokenLimit, 979), (FailureReason::WrongFlagLimit, 11), (FailureReason::MessageLimit, 10)] {
        for _ in 0..n {
            let mut r = rec("m", "f", "Orig", i, false);
            r.failure_reason = reason;
            rs.push(r);
            i += 1;
        }
    }
    rs.push(rec("m", "f", "Orig", i, true));
    let b = failure_breakdown(&rs);
    assert_eq!(b.failed, 1000);
    assert_eq!(
        b.render(),
        "token_limit: 97.9% (979 of 1000)\nwrong_flag_limit: 1.1% (11 of 1000)\nmessage_limit: 1.0% (10 of 1000)\n"
    );
    let one: Vec<EvalRecord> = rs[..5].to_vec();
    assert_eq!(failure_breakdown(&one).percent(FailureReason::TokenLimit), 100.0);
    assert!(failure_breakdown(&rs[1000..]).shares.is_empty());
}

/// Random evaluation grid: up to 5 models, 4 families, 24 chains and 5
/// repeats, optionally with holes.
fn fixture() -> impl Strategy<Value = (Vec<EvalRecord>, bool)> {
    (1usize..=5, 1usize..=4, proptest::sample::subsequence((0..24).collect::<Vec<_>>(), 1..=24), 1u32..=5, any::<bool>(), any::<u64>()).prop_map(
        |(nm, nf, chains, reps, complete, seed)| {
            let canon = TransformChain::canonical();
            let mut rng = ctfam_core::rng::Stream::derive(seed, &["fixture"]);
            let tools = ["python3", "cat", "ls", "grep", "strings", "file", "gdb", "nc", "sed", "awk", "xxd", "base64"];
            let reasons = [FailureReason::None, FailureReason::TokenLimit, FailureReason::WrongFlagLimit, FailureReason::MessageLimit];
            let mut out = Vec::new();
            for m in 0..nm {
                for f in 0..nf {
                    for &c in &chains {
                        for rep in 0..reps {
                            if !complete && rng.below(4) == 0 {
                                continue;
                            }
                            let solved = rng.below(2) == 0;
                            let mut calls = BTreeMap::new();
                            for _ in 0..rng.below(6) {
                                *calls.entry(rng.pick(&tools).to_string()).or_insert(0) += rng.below(7);
                            }
                            out.push(EvalRecord {
                                schema_version: 1,
                                model: format!("model{m}"),
                                family: format!("fam{f}"),
                                chain: canon[c].clone(),
                                repeat: rep,
                                solved,
                                total_tokens: rng.below(200_000),
                                failure_reason: if solved { FailureReason::None } else { *rng.pick(&reasons) },
                                tool_calls: calls,
                            });
                        }
                    }
                }
            }
            (out, complete)
        },
    )
}

const EPS: f64 = 1e-12;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matrix_matches_brute_force((rs, _) in fixture()) {
        let m = solvability_matrix(&rs);
        for (ci, chain) in m.chains.iter().enumerate() {
            for (fi, fam) in m.families.iter().enumerate() {
                let xs: Vec<f64> = rs.iter().filter(|r| &r.chain == chain && &r.family == fam).map(|r| if r.solved { 1.0 } else { 0.0 }).collect();
                let cell = m.cells[ci][fi];
                prop_assert_eq!(cell.count as usize, xs.len());
                if xs.is_empty() {
                    prop_assert!(cell.mean.is_none());
                    continue;
                }
                let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
                prop_assert!((cell.mean.unwrap() - mean).abs() < EPS);
                prop_assert!((cell.sd.unwrap() - var.sqrt()).abs() < EPS);
                prop_assert!(cell.sd.unwrap() <= 0.5 + EPS);
            }
        }
    }

    #[test]
    fn tools_match_brute_force((rs, _) in fixture()) {
        let t = tool_usage_summary(&rs, ToolGrouping::ChainFamily, 3);
        for g in &t.groups {
            let (chain, fam) = g.key.split_once('/').unwrap();
            let mut want: BTreeMap<String, u64> = BTreeMap::new();
            for r in rs.iter().filter(|r| r.chain.to_string() == chain && r.family == fam) {
                for (k, v) in &r.tool_calls {
                    *want.entry(k.clone()).or_default() += v;
                }
            }
            prop_assert_eq!(&g.totals, &want);
            prop_assert_eq!(g.all, want.values().sum::<u64>());
            prop_assert!(g.top.len() <= 3);
            prop_assert!(g.top.windows(2).all(|w| w[0].1 >= w[1].1));
        }
        let by_model = tool_usage_summary(&rs, ToolGrouping::Model, DEFAULT_TOP_K);
        let total: u64 = rs.iter().flat_map(|r| r.tool_calls.values()).sum();
        prop_assert_eq!(by_model.groups.iter().map(|g| g.all).sum::<u64>(), total);
    }

    #[test]
    fn tokens_match_brute_force((rs, _) in fixture(), solved_only in any::<bool>()) {
        let t = token_summary(&rs, solved_only);
        for chain in &t.chains {
            for fam in &t.families {
                let xs: Vec<f64> = rs.iter().filter(|r| &r.chain == chain && &r.family == fam && (r.solved || !solved_only)).map(|r| r.total_tokens as f64).collect();
                match t.mean(chain, fam) {
                    None => prop_assert!(xs.is_empty()),
                    Some(m) => {
                        let want = xs.iter().sum::<f64>() / xs.len() as f64;
                        prop_assert!((m - want).abs() <= EPS * want.max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn failures_match_brute_force((rs, _) in fixture()) {
        let b = failure_breakdown(&rs);
        let failed = rs.iter().filter(|r| !r.solved).count() as u64;
        prop_assert_eq!(b.failed, failed);
        for s in &b.shares {
            let n = rs.iter().filter(|r| !r.solved && r.failure_reason == s.reason).count() as f64;
            prop_assert!((s.percent - 100.0 * n / failed as f64).abs() < EPS);
        }
        if failed > 0 {
            let total: f64 = b.shares.iter().map(|s| s.percent).sum();
            prop_assert!((total - 100.0).abs() < 1e-9);
        }
    }

    #[test]
    fn tie_symmetry_on_complete_fixtures((rs, complete) in fixture()) {
        let rel = relative_scores(&rs);
        if complete && rel.models.len() >= 2 {
            for row in &rel.rel {
                let mean = row.iter().map(|v| v.unwrap()).sum::<f64>() / row.len() as f64;
                prop_assert!((mean - 0.5).abs() < EPS);
            }
        }
    }

    #[test]
    fn intervals_bracket_points((rs, _) in fixture()) {
        for e in difficulty_ranking(&rs).entries {
            prop_assert!(0.0 <= e.ci_lo && e.ci_lo <= e.score && e.score <= e.ci_hi && e.ci_hi <= 1.0);
        }
        if let Ok(r) = model_ranking(&rs, 200, 1) {
            for e in r.entries {
                prop_assert!(0.0 <= e.ci_lo && e.ci_lo <= e.score && e.score <= e.ci_hi && e.ci_hi <= 1.0);
            }
        }
    }

    #[test]
    fn pooled_score_is_weighted_row_mean((rs, _) in fixture()) {
        let m = solvability_matrix(&rs);
        for e in difficulty_ranking(&rs).entries {
            let row = &m.cells[e.chain.canonical_index().unwrap()];
            let n: u64 = row.iter().map(|c| c.count).sum();
            let weighted: f64 = row.iter().filter_map(|c| c.mean.map(|x| x * c.count as f64)).sum::<f64>() / n as f64;
            prop_assert!((weighted - e.score).abs() < EPS);
        }
    }

    #[test]
    fn record_order_does_not_matter((rs, _) in fixture(), seed in any::<u64>()) {
        let mut shuffled = rs.clone();
        ctfam_core::rng::Stream::derive(seed, &["shuffle"]).shuffle(&mut shuffled);
        prop_assert_eq!(solvability_matrix(&rs), solvability_matrix(&shuffled));
        prop_assert_eq!(difficulty_ranking(&rs), difficulty_ranking(&shuffled));
        prop_assert_eq!(token_summary(&rs, true), token_summary(&shuffled, true));
        prop_assert_eq!(failure_breakdown(&rs), failure_breakdown(&shuffled));
        prop_assert_eq!(tool_usage_summary(&rs, ToolGrouping::Model, 10), tool_usage_summary(&shuffled, ToolGrouping::Model, 10));
        prop_assert_eq!(model_ranking(&rs, 100, 3).ok(), model_ranking(&shuffled, 100, 3).ok());
    }
}
