use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ctfam"))
}

fn toy(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/toys").join(name)
}

fn python() -> String {
    std::env::var("CTFAM_PYTHON").unwrap_or_else(|_| "python3".into())
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tree_hash(dir: &Path) -> String {
    let mut files: Vec<PathBuf> = walkdir::WalkDir::new(dir)
        .into_iter()
        .map(Result::unwrap)
        .filter(|e| e.file_type().is_file())
        .map(|e| e.path().to_path_buf())
        .collect();
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        h.update(f.strip_prefix(dir).unwrap().to_string_lossy().as_bytes());
        h.update([0]);
        h.update(std::fs::read(&f).unwrap());
    }
    format!("{:x}", h.finalize())
}

fn generate(toy_name: &str, out: &Path, extra: &[&str]) -> Output {
    let dir = toy(toy_name);
    let mut args = vec!["generate", "--challenge", dir.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn generate_writes_24_instances() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("fam");
    let o = generate("toy_exec", &out, &["--seed", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dirs = std::fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().path().is_dir()).count();
    assert_eq!(dirs, 24);
    assert_eq!(manifest(&out)["instances"].as_array().unwrap().len(), 24);
}

#[test]
fn generate_twice_is_identical() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    assert!(generate("toy_modify", &a, &["--seed", "7"]).status.success());
    assert!(generate("toy_modify", &b, &["--seed", "7", "--jobs", "1"]).status.success());
    assert_eq!(tree_hash(&a), tree_hash(&b));
    // Running again over an existing family overwrites it identically.
    assert!(generate("toy_modify", &a, &["--seed", "7"]).status.success());
    assert_eq!(tree_hash(&a), tree_hash(&b));
}

#[test]
fn only_chains_adds_ancestors() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("fam");
    let o = generate("toy_decrypt", &out, &["--only-chains", "R,T5;O,R;T2;O"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let chains: Vec<String> = manifest(&out)["instances"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["chain"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(chains, ["Orig", "R", "T5", "R;T2", "T5;O", "R;T2;O"]);
    let o = run(&["verify", "--family", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn bad_chain_is_a_usage_error() {
    let t = tempfile::tempdir().unwrap();
    let o = generate("toy_exec", &t.path().join("f"), &["--only-chains", "T3;T1;T2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_exit_codes() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("fam");
    let o = generate("toy_decrypt", &out, &["--seed", "3", "--verify", "--interpreter", &python()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("24/24"));

    // Corrupt one instance by emptying its cipher source.
    let victim = out.join("T3_O/source.py");
    std::fs::write(&victim, "").unwrap();
    let o = run(&["verify", "--family", out.to_str().unwrap(), "--interpreter", &python()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("FAIL T3;O"), "{}", stderr(&o));
    let m = manifest(&out);
    let bad: Vec<&str> = m["instances"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|i| i["verification"]["status"] != "flag_captured")
        .map(|i| i["chain"].as_str().unwrap())
        .collect();
    assert_eq!(bad, ["T3;O"]);

    let o = run(&["verify", "--family", out.to_str().unwrap(), "--only-failed"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("(1 run now)"), "{}", stderr(&o));
}

#[test]
fn verify_timeout_and_missing_interpreter() {
    let t = tempfile::tempdir().unwrap();
    let ch = t.path().join("slow");
    std::fs::create_dir(&ch).unwrap();
    std::fs::write(ch.join("app.py"), "x = 1\n").unwrap();
    std::fs::write(ch.join("solve.py"), "import time\ntime.sleep(30)\nprint('HTB{x}')\n").unwrap();
    std::fs::write(
        ch.join("challenge.toml"),
        "id = \"slow\"\nflag = \"HTB{x}\"\ngolden = \"{interpreter} {instance_dir}/solve.py\"\nexclude = [\"solve.py\"]\ntimeout_secs = 0.5\n",
    )
    .unwrap();
    let out = t.path().join("fam");
    let o = run(&["generate", "--challenge", ch.to_str().unwrap(), "--out", out.to_str().unwrap(), "--only-chains", "R"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let start = std::time::Instant::now();
    let o = run(&["verify", "--family", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(start.elapsed().as_secs() < 20);
    assert!(stderr(&o).contains("Timeout"), "{}", stderr(&o));

    let o = run(&["verify", "--family", out.to_str().unwrap(), "--interpreter", "/no/such/python"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("SpawnError"), "{}", stderr(&o));
}

#[test]
fn verify_without_manifest_is_a_usage_error() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(run(&["verify", "--family", t.path().to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["verify"]).status.code(), Some(2));
}

#[test]
fn unknown_flags_and_help() {
    assert_eq!(run(&["generate", "--frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["launch"]).status.code(), Some(2));
    let help = String::from_utf8(run(&["generate", "--help"]).stdout).unwrap();
    for flag in ["--challenge", "--out", "--seed", "--only-chains", "--verify", "--insertion-fraction", "--interpreter", "--timeout", "--jobs", "--config"] {
        assert!(help.contains(flag), "{flag} missing from help");
    }
    let help = String::from_utf8(run(&["analyze", "--help"]).stdout).unwrap();
    for flag in ["--logs", "--report", "--out", "--stdout", "--top-k", "--group-by", "--all-runs", "--bootstrap-seed"] {
        assert!(help.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn config_file_and_precedence() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "seed = 7\nchallenge = {:?}\nonly_chains = [\"T1\"]\n[pass]\ninsertion_fraction = \"1/2\"\n",
            toy("toy_exec").to_str().unwrap()
        ),
    )
    .unwrap();
    let a = t.path().join("a");
    let o = run(&["--config", cfg.to_str().unwrap(), "generate", "--out", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&a);
    assert_eq!(m["master_seed"], 7);
    assert_eq!(m["pass_config"]["insertion_fraction"], "1/2");

    let b = t.path().join("b");
    let o = run(&["--config", cfg.to_str().unwrap(), "generate", "--out", b.to_str().unwrap(), "--seed", "8", "--insertion-fraction", "0.25"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&b);
    assert_eq!(m["master_seed"], 8);
    assert_eq!(m["pass_config"]["insertion_fraction"], "25/100");

    std::fs::write(&cfg, "sed = 7\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "generate", "--out", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(&cfg, "[pass]\ninsertion_fraction = \"3/2\"\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "generate", "--challenge", toy("toy_exec").to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

fn jsonl(records: &[serde_json::Value]) -> String {
    records.iter().map(|r| r.to_string() + "\n").collect()
}

fn record(model: &str, chain: &str, repeat: u32, solved: bool, reason: &str) -> serde_json::Value {
    serde_json::json!({
        "schema_version": 1, "model": model, "family": "toy", "chain": chain, "repeat": repeat,
        "solved": solved, "total_tokens": 1000 + repeat, "failure_reason": reason,
        "tool_calls": {"python3": 2, "cat": 1}
    })
}

#[test]
fn analyze_solvability_writes_csvs() {
    let t = tempfile::tempdir().unwrap();
    let logs = t.path().join("runs.jsonl");
    std::fs::write(&logs, jsonl(&[record("a", "Orig", 0, true, "none"), record("a", "Orig", 1, false, "token_limit")])).unwrap();
    let out = t.path().join("rep");
    let o = run(&["analyze", "--logs", logs.to_str().unwrap(), "--report", "solvability", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mean = std::fs::read_to_string(out.join("solvability_mean.csv")).unwrap();
    let sd = std::fs::read_to_string(out.join("solvability_sd.csv")).unwrap();
    assert!(mean.starts_with("chain,toy\nOrig,0.5000\n"), "{mean}");
    assert!(sd.starts_with("chain,toy\nOrig,0.5000\n"), "{sd}");
    assert_eq!(mean.lines().count(), 25);
}

#[test]
fn analyze_model_ranking_dominance() {
    let t = tempfile::tempdir().unwrap();
    let logs = t.path().join("runs.jsonl");
    let mut rs = Vec::new();
    for c in ["Orig", "R", "T1", "O"] {
        rs.push(record("A", c, 0, true, "none"));
        rs.push(record("B", c, 0, false, "token_limit"));
    }
    std::fs::write(&logs, jsonl(&rs)).unwrap();
    let o = run(&["analyze", "--logs", logs.to_str().unwrap(), "--report", "model-ranking", "--stdout"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("1,A,1.0000,1.0000,1.0000,4\n"), "{text}");
    assert!(text.contains("2,B,0.0000,0.0000,0.0000,4\n"), "{text}");
}

#[test]
fn analyze_failure_breakdown_fixture() {
    let t = tempfile::tempdir().unwrap();
    let logs = t.path().join("runs.jsonl");
    let mut rs = Vec::new();
    let mut i = 0;
    for (reason, n) in [("token_limit", 979), ("wrong_flag_limit", 11), ("message_limit", 10)] {
        for _ in 0..n {
            rs.push(record("m", "Orig", i, false, reason));
            i += 1;
        }
    }
    std::fs::write(&logs, jsonl(&rs)).unwrap();
    let o = run(&["analyze", "--logs", logs.to_str().unwrap(), "--report", "failure-breakdown", "--stdout"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("token_limit: 97.9%"), "{text}");
    assert!(text.contains("wrong_flag_limit: 1.1%"));
    assert!(text.contains("message_limit: 1.0%"));
}

#[test]
fn analyze_schema_error_exits_1_with_line() {
    let t = tempfile::tempdir().unwrap();
    let logs = t.path().join("runs.jsonl");
    std::fs::write(&logs, jsonl(&[record("a", "Orig", 0, true, "none"), record("a", "R", 0, true, "token_limit")])).unwrap();
    let o = run(&["analyze", "--logs", logs.to_str().unwrap(), "--report", "all", "--stdout"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn analyze_all_reports_to_files() {
    let t = tempfile::tempdir().unwrap();
    let logs = t.path().join("runs.jsonl");
    std::fs::write(&logs, jsonl(&[record("a", "Orig", 0, true, "none"), record("b", "Orig", 0, false, "message_limit")])).unwrap();
    let out = t.path().join("rep");
    let o = run(&["analyze", "--logs", logs.to_str().unwrap(), "--report", "all", "--out", out.to_str().unwrap(), "--group-by", "model"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["solvability_mean.csv", "difficulty.csv", "difficulty.json", "model_ranking.json", "tools.csv", "tokens.csv", "failure_breakdown.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let tools = std::fs::read_to_string(out.join("tools.csv")).unwrap();
    assert!(tools.contains("a,All tools,3\n"), "{tools}");
    assert_eq!(run(&["analyze", "--logs", logs.to_str().unwrap(), "--report", "all"]).status.code(), Some(2));
}
