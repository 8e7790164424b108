use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ctfam_core::analytics::{self, ToolGrouping};
use ctfam_core::family::{self, BuildOptions, Challenge, MANIFEST_FILE};
use ctfam_core::verify::{self, VerifyOptions, DEFAULT_TIMEOUT_SECS};
use ctfam_core::{GoldenSpec, PassConfig, Ratio, TransformChain};

mod config;

use config::{FileConfig, PassOverrides};

const DEFAULT_INTERPRETER: &str = "python3";

#[derive(Parser, Debug)]
#[command(name = "ctfam", version, about = "Generate, verify and analyze families of transformed CTF challenges")]
struct Cli {
    /// TOML run configuration; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// More logging on stderr (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the 24-instance family of a challenge.
    Generate(GenerateArgs),
    /// Run the golden solution against every instance of a family.
    Verify(VerifyArgs),
    /// Compute statistics from an evaluation log.
    Analyze(AnalyzeArgs),
}

#[derive(Args, Debug, Default)]
struct PassFlags {
    /// Fraction of eligible locations that receive an insertion, e.g. 3/10 or 0.3.
    #[arg(long, value_name = "RATIO")]
    insertion_fraction: Option<Ratio>,
    #[arg(long, value_name = "N")]
    max_loop_depth: Option<usize>,
    #[arg(long, value_name = "N")]
    max_func_depth: Option<usize>,
    #[arg(long, value_name = "N")]
    max_params: Option<usize>,
    /// Probability that an inserted comment comes from the English pool.
    #[arg(long, value_name = "RATIO")]
    english_comment_prob: Option<Ratio>,
    /// Probability that a fresh name is built from vocabulary words.
    #[arg(long, value_name = "RATIO")]
    vocab_name_prob: Option<Ratio>,
    /// Probability that a dead conditional is an `if` rather than a `try` wrapper.
    #[arg(long, value_name = "RATIO")]
    if_vs_try_prob: Option<Ratio>,
    /// Probability that an inserted variable reuses an existing name.
    #[arg(long, value_name = "RATIO")]
    reuse_original_name_prob: Option<Ratio>,
}

impl PassFlags {
    fn overrides(&self) -> PassOverrides {
        PassOverrides {
            insertion_fraction: self.insertion_fraction,
            max_loop_depth: self.max_loop_depth,
            max_func_depth: self.max_func_depth,
            max_params: self.max_params,
            english_comment_prob: self.english_comment_prob,
            vocab_name_prob: self.vocab_name_prob,
            if_vs_try_prob: self.if_vs_try_prob,
            reuse_original_name_prob: self.reuse_original_name_prob,
            multilingual_len_range: None,
        }
    }
}

#[derive(Args, Debug, Default)]
struct GoldenFlags {
    /// Golden command template; must contain {instance_dir} and may use {interpreter}.
    #[arg(long, value_name = "TEMPLATE")]
    golden: Option<String>,
    /// Interpreter command substituted for {interpreter} [default: python3].
    #[arg(long, value_name = "CMD")]
    interpreter: Option<String>,
    /// Per-instance timeout in seconds [default: 60].
    #[arg(long, value_name = "SECS")]
    timeout: Option<f64>,
    /// Worker threads [default: number of cores].
    #[arg(long, short = 'j', value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Challenge directory containing challenge.toml.
    #[arg(long, value_name = "DIR")]
    challenge: Option<PathBuf>,
    /// Output directory for the family.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated chains to build (ancestors are added), e.g. R,T5;O.
    #[arg(long, value_name = "CHAINS", value_delimiter = ',')]
    only_chains: Option<Vec<String>>,
    /// Verify the family right after generating it.
    #[arg(long)]
    verify: bool,
    #[command(flatten)]
    pass: PassFlags,
    #[command(flatten)]
    golden: GoldenFlags,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Family directory containing manifest.json.
    #[arg(long, value_name = "DIR")]
    family: Option<PathBuf>,
    /// Re-run only instances not yet verified as captured.
    #[arg(long)]
    only_failed: bool,
    #[command(flatten)]
    golden: GoldenFlags,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Report {
    Solvability,
    Difficulty,
    ModelRanking,
    Tools,
    Tokens,
    FailureBreakdown,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GroupBy {
    Chain,
    Model,
    ChainFamily,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Evaluation log (JSONL).
    #[arg(long, value_name = "FILE")]
    logs: Option<PathBuf>,
    /// Which report to compute.
    #[arg(long, value_enum)]
    report: Option<Report>,
    /// Directory for report files.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Print reports to stdout instead of writing files.
    #[arg(long)]
    stdout: bool,
    /// Tools listed per group [default: 10].
    #[arg(long, value_name = "K")]
    top_k: Option<usize>,
    /// Grouping for the tools report [default: chain].
    #[arg(long, value_enum)]
    group_by: Option<GroupBy>,
    /// Token means over all runs instead of solved runs only.
    #[arg(long)]
    all_runs: bool,
    /// Seed for the model-ranking bootstrap [default: 0].
    #[arg(long)]
    bootstrap_seed: Option<u64>,
    /// Bootstrap draws [default: 10000].
    #[arg(long)]
    bootstrap_draws: Option<usize>,
}

/// Operational failures exit 1, configuration mistakes exit 2.
enum Failure {
    Usage(String),
    Op(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Op(e)
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Op(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p).map_err(|e| Failure::Usage(format!("{e:#}")))?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Generate(a) => generate(a, file),
        Command::Verify(a) => verify_cmd(a, file),
        Command::Analyze(a) => analyze(a, file),
    }
}

fn jobs(flag: Option<usize>, file: &FileConfig) -> Result<usize, Failure> {
    match flag.or(file.jobs) {
        Some(0) => usage("--jobs must be at least 1"),
        Some(n) => Ok(n),
        None => Ok(verify::default_jobs()),
    }
}

fn parse_chains(items: &[String]) -> Result<Vec<TransformChain>, Failure> {
    let chains = items
        .iter()
        .map(|s| s.parse::<TransformChain>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    family::ancestor_closure(&chains).map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(chains)
}

fn golden_spec(flags: &GoldenFlags, file: &FileConfig, template: &str, flag: &str, timeout: Option<f64>) -> Result<GoldenSpec, Failure> {
    let command = flags.golden.clone().or_else(|| file.golden.clone()).unwrap_or_else(|| template.to_string());
    let interpreter = flags
        .interpreter
        .clone()
        .or_else(|| file.interpreter.clone())
        .unwrap_or_else(|| DEFAULT_INTERPRETER.to_string());
    let timeout = flags.timeout.or(file.timeout_secs).or(timeout).unwrap_or(DEFAULT_TIMEOUT_SECS);
    GoldenSpec::new(command, flag, timeout, interpreter).map_err(|e| Failure::Usage(e.to_string()))
}

fn report_verification(summary: &verify::VerifySummary) {
    for r in &summary.executed {
        if !r.status.is_captured() {
            eprintln!("FAIL {}: {:?}", r.chain, r.status);
            let tail = r.stderr_tail.trim_end();
            if !tail.is_empty() {
                eprintln!("{}", tail.lines().rev().take(5).collect::<Vec<_>>().into_iter().rev().collect::<Vec<_>>().join("\n"));
            }
        }
    }
    eprintln!(
        "{}/{} instances captured the flag ({} run now)",
        summary.captured,
        summary.total,
        summary.executed.len()
    );
}

fn generate(a: GenerateArgs, file: FileConfig) -> Result<ExitCode, Failure> {
    let Some(challenge_dir) = a.challenge.clone().or_else(|| file.challenge.clone()) else {
        return usage("generate needs --challenge");
    };
    let Some(out) = a.out.clone().or_else(|| file.out.clone()) else {
        return usage("generate needs --out");
    };
    if !challenge_dir.join(family::CHALLENGE_FILE).is_file() {
        return usage(format!("{} has no {}", challenge_dir.display(), family::CHALLENGE_FILE));
    }
    let challenge = Challenge::load(&challenge_dir).map_err(|e| Failure::Usage(e.to_string()))?;
    let pass_config = a.pass.overrides().or(file.pass.clone()).apply(PassConfig::default());
    pass_config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let only = match a.only_chains.as_ref().or(file.only_chains.as_ref()) {
        Some(list) => Some(parse_chains(list)?),
        None => None,
    };
    let jobs = jobs(a.golden.jobs, &file)?;
    let golden = if a.verify {
        Some(golden_spec(&a.golden, &file, &challenge.golden, &challenge.flag, challenge.timeout_secs)?)
    } else {
        None
    };
    let opts = BuildOptions {
        challenge,
        pass_config,
        master_seed: a.seed.or(file.seed).unwrap_or(0),
        only,
        jobs,
    };
    let mut manifest = family::build_family(&challenge_dir, &out, &opts).context("generating family")?;
    eprintln!("wrote {} instances to {}", manifest.instances.len(), out.display());
    let Some(golden) = golden else {
        return Ok(ExitCode::SUCCESS);
    };
    let summary = verify::verify_family(&mut manifest, &out, &golden, &VerifyOptions { jobs, only_failed: false })
        .context("verifying family")?;
    report_verification(&summary);
    Ok(if summary.success() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn verify_cmd(a: VerifyArgs, file: FileConfig) -> Result<ExitCode, Failure> {
    let Some(dir) = a.family.clone().or_else(|| file.family.clone()).or_else(|| file.out.clone()) else {
        return usage("verify needs --family");
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return usage(format!("{} does not exist", manifest_path.display()));
    }
    let mut manifest = family::load_manifest(&manifest_path).context("loading manifest")?;
    let golden = golden_spec(&a.golden, &file, &manifest.golden.clone(), &manifest.flag.clone(), manifest.timeout_secs)?;
    let opts = VerifyOptions {
        jobs: jobs(a.golden.jobs, &file)?,
        only_failed: a.only_failed,
    };
    let summary = verify::verify_family(&mut manifest, &dir, &golden, &opts).context("verifying family")?;
    report_verification(&summary);
    Ok(if summary.success() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    fn emit(&self, name: &str, content: &str) -> anyhow::Result<()> {
        match &self.dir {
            None => {
                use std::io::Write;
                match std::io::stdout().lock().write_all(content.as_bytes()) {
                    Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                    _ => Ok(()),
                }
            }
            Some(dir) => {
                let path = dir.join(name);
                std::fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
                eprintln!("wrote {}", path.display());
                Ok(())
            }
        }
    }

    fn emit_json(&self, name: &str, value: &impl serde::Serialize) -> anyhow::Result<()> {
        if self.dir.is_none() {
            return Ok(());
        }
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.emit(name, &text)
    }
}

fn parse_report(s: &str) -> Result<Report, Failure> {
    Report::from_str(s, true).map_err(|_| Failure::Usage(format!("unknown report {s:?}")))
}

fn parse_group(s: &str) -> Result<GroupBy, Failure> {
    GroupBy::from_str(s, true).map_err(|_| Failure::Usage(format!("unknown grouping {s:?}")))
}

fn analyze(a: AnalyzeArgs, file: FileConfig) -> Result<ExitCode, Failure> {
    let Some(logs) = a.logs.clone().or_else(|| file.logs.clone()) else {
        return usage("analyze needs --logs");
    };
    let cfg = &file.analyze;
    let report = match (a.report, &cfg.report) {
        (Some(r), _) => r,
        (None, Some(s)) => parse_report(s)?,
        (None, None) => return usage("analyze needs --report"),
    };
    let group = match (a.group_by, &cfg.group_by) {
        (Some(g), _) => g,
        (None, Some(s)) => parse_group(s)?,
        (None, None) => GroupBy::Chain,
    };
    let out = if a.stdout {
        Output { dir: None }
    } else {
        let Some(dir) = a.out.clone().or_else(|| file.out.clone()) else {
            return usage("analyze needs --out or --stdout");
        };
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Output { dir: Some(dir) }
    };
    let records = analytics::load_logs(&logs).map_err(|e| anyhow!("{}: {e}", logs.display()))?;
    let want = |r: Report| report == r || report == Report::All;

    if want(Report::Solvability) {
        let m = analytics::solvability_matrix(&records);
        out.emit("solvability_mean.csv", &m.mean_csv())?;
        out.emit("solvability_sd.csv", &m.sd_csv())?;
        out.emit("solvability_count.csv", &m.count_csv())?;
    }
    if want(Report::Difficulty) {
        let d = analytics::difficulty_ranking(&records);
        for c in &d.excluded {
            log::info!("chain {c} has no attempts and is left out of the ranking");
        }
        out.emit("difficulty.csv", &d.csv())?;
        out.emit_json("difficulty.json", &d)?;
    }
    if want(Report::ModelRanking) {
        let draws = a.bootstrap_draws.or(cfg.bootstrap_draws).unwrap_or(analytics::BOOTSTRAP_DRAWS);
        if draws == 0 {
            return usage("--bootstrap-draws must be at least 1");
        }
        let seed = a.bootstrap_seed.or(cfg.bootstrap_seed).unwrap_or(0);
        match analytics::model_ranking(&records, draws, seed) {
            Ok(r) => {
                out.emit("model_ranking.csv", &r.csv())?;
                out.emit_json("model_ranking.json", &r)?;
            }
            Err(e) if report == Report::All => log::warn!("skipping model ranking: {e}"),
            Err(e) => return Err(Failure::Op(e.into())),
        }
    }
    if want(Report::Tools) {
        let grouping = match group {
            GroupBy::Chain => ToolGrouping::Chain,
            GroupBy::Model => ToolGrouping::Model,
            GroupBy::ChainFamily => ToolGrouping::ChainFamily,
        };
        let k = a.top_k.or(cfg.top_k).unwrap_or(analytics::DEFAULT_TOP_K);
        out.emit("tools.csv", &analytics::tool_usage_summary(&records, grouping, k).csv())?;
    }
    if want(Report::Tokens) {
        let all_runs = a.all_runs || cfg.all_runs.unwrap_or(false);
        out.emit("tokens.csv", &analytics::token_summary(&records, !all_runs).csv())?;
    }
    if want(Report::FailureBreakdown) {
        let b = analytics::failure_breakdown(&records);
        if out.dir.is_none() {
            out.emit("", &b.render())?;
        } else {
            out.emit("failure_breakdown.csv", &b.csv())?;
            out.emit("failure_breakdown.txt", &b.render())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
