//! Differential verification: run a challenge's golden solution against
//! each family instance and check that it still prints the flag.
//!
//! Each run happens in a private copy of the instance, which is also the
//! working directory, so a solver that edits challenge files cannot affect
//! another instance.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use crate::error::{io_err, FamilyError, VerifyError};
use crate::family::{write_manifest, FamilyManifest, TransformChain};

pub const DEFAULT_TIMEOUT_SECS: f64 = 60.0;
const TAIL_BYTES: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenSpec {
    /// Template with `{instance_dir}` and optionally `{interpreter}`.
    pub command: String,
    pub flag: String,
    pub timeout: Duration,
    pub interpreter: String,
}

impl GoldenSpec {
    pub fn new(command: impl Into<String>, flag: impl Into<String>, timeout_secs: f64, interpreter: impl Into<String>) -> Result<Self, VerifyError> {
        if !(timeout_secs.is_finite() && timeout_secs > 0.0) {
            return Err(VerifyError::Golden(format!("timeout must be positive, got {timeout_secs}")));
        }
        let spec = GoldenSpec {
            command: command.into(),
            flag: flag.into(),
            timeout: Duration::from_secs_f64(timeout_secs),
            interpreter: interpreter.into(),
        };
        if !spec.command.contains("{instance_dir}") {
            return Err(VerifyError::Golden("command template lacks {instance_dir}".into()));
        }
        spec.argv(Path::new("."))?;
        Ok(spec)
    }

    /// Expands the template for one instance directory. The template is
    /// split into words first, so paths with spaces stay one argument. A
    /// word that is exactly `{interpreter}` expands to the interpreter's
    /// own words (`python3 -I` works).
    pub fn argv(&self, instance_dir: &Path) -> Result<Vec<String>, VerifyError> {
        let words = shell_words::split(&self.command)
            .map_err(|e| VerifyError::Golden(format!("cannot split command template: {e}")))?;
        let interp = shell_words::split(&self.interpreter)
            .map_err(|e| VerifyError::Golden(format!("cannot split interpreter: {e}")))?;
        let dir = instance_dir.to_string_lossy();
        let mut argv = Vec::new();
        for w in words {
            if w == "{interpreter}" {
                argv.extend(interp.iter().cloned());
            } else {
                argv.push(w.replace("{instance_dir}", &dir).replace("{interpreter}", &self.interpreter));
            }
        }
        if argv.is_empty() {
            return Err(VerifyError::Golden("empty command".into()));
        }
        Ok(argv)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum VerificationStatus {
    FlagCaptured,
    FlagMismatch { got: Option<String> },
    Timeout,
    NonzeroExit { code: Option<i32> },
    SpawnError { message: String },
}

impl VerificationStatus {
    pub fn is_captured(&self) -> bool {
        matches!(self, VerificationStatus::FlagCaptured)
    }

    pub fn label(&self) -> &'static str {
        match self {
            VerificationStatus::FlagCaptured => "flag_captured",
            VerificationStatus::FlagMismatch { .. } => "flag_mismatch",
            VerificationStatus::Timeout => "timeout",
            VerificationStatus::NonzeroExit { .. } => "nonzero_exit",
            VerificationStatus::SpawnError { .. } => "spawn_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub chain: TransformChain,
    #[serde(flatten)]
    pub status: VerificationStatus,
    pub duration_secs: f64,
    pub stdout_tail: String,
    #[serde(default)]
    pub stderr_tail: String,
}

/// Last non-empty line with trailing whitespace removed.
pub fn extract_flag(stdout: &str) -> Option<&str> {
    stdout.lines().rev().map(str::trim_end).find(|l| !l.is_empty())
}

fn tail(bytes: &[u8]) -> String {
    let start = bytes.len().saturating_sub(TAIL_BYTES);
    String::from_utf8_lossy(&bytes[start..]).into_owned()
}

fn copy_tree(from: &Path, to: &Path) -> Result<(), FamilyError> {
    for entry in walkdir::WalkDir::new(from).sort_by_file_name() {
        let entry = entry.map_err(|e| FamilyError::Io {
            path: from.to_path_buf(),
            source: e.into(),
        })?;
        let rel = entry.path().strip_prefix(from).expect("walk stays below root");
        let dest = to.join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&dest).map_err(io_err(&dest))?;
        } else if entry.file_type().is_file() {
            std::fs::copy(entry.path(), &dest).map_err(io_err(&dest))?;
        }
    }
    Ok(())
}

fn spawn_error(chain: &TransformChain, message: String, started: Instant) -> VerificationResult {
    VerificationResult {
        chain: chain.clone(),
        status: VerificationStatus::SpawnError { message },
        duration_secs: started.elapsed().as_secs_f64(),
        stdout_tail: String::new(),
        stderr_tail: String::new(),
    }
}

#[cfg(unix)]
fn isolate(cmd: &mut Command) {
    use std::os::unix::process::CommandExt;
    cmd.process_group(0);
}

#[cfg(not(unix))]
fn isolate(_cmd: &mut Command) {}

/// Kills the whole process group so grandchildren holding the output
/// pipes cannot keep the readers alive.
#[cfg(unix)]
fn kill_group(child: &mut std::process::Child) {
    // SAFETY: killpg has no memory-safety preconditions. The group id is the
    // child's pid because the child was spawned with process_group(0).
    unsafe {
        libc::killpg(child.id() as libc::pid_t, libc::SIGKILL);
    }
    let _ = child.kill();
}

#[cfg(not(unix))]
fn kill_group(child: &mut std::process::Child) {
    let _ = child.kill();
}

/// Runs the golden solution against the instance stored in `instance_dir`.
pub fn verify_instance(chain: &TransformChain, instance_dir: &Path, golden: &GoldenSpec) -> VerificationResult {
    let started = Instant::now();
    let work = match tempfile::Builder::new().prefix("ctfam-verify-").tempdir() {
        Ok(d) => d,
        Err(e) => return spawn_error(chain, format!("cannot create working directory: {e}"), started),
    };
    if let Err(e) = copy_tree(instance_dir, work.path()) {
        return spawn_error(chain, format!("cannot copy instance: {e}"), started);
    }
    let argv = match golden.argv(work.path()) {
        Ok(a) => a,
        Err(e) => return spawn_error(chain, e.to_string(), started),
    };
    let mut cmd = Command::new(&argv[0]);
    cmd.args(&argv[1..])
        .current_dir(work.path())
        .env("CHALLENGE_DIR", work.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    isolate(&mut cmd);
    let mut child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) => return spawn_error(chain, format!("cannot run {:?}: {e}", argv[0]), started),
    };
    let mut out = child.stdout.take().expect("piped stdout");
    let mut err = child.stderr.take().expect("piped stderr");
    let out_reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = out.read_to_end(&mut buf);
        buf
    });
    let err_reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = err.read_to_end(&mut buf);
        buf
    });
    let waited = child.wait_timeout(golden.timeout);
    let exit = match waited {
        Ok(Some(status)) => Some(status),
        Ok(None) => None,
        Err(e) => {
            kill_group(&mut child);
            let _ = child.wait();
            return spawn_error(chain, format!("wait failed: {e}"), started);
        }
    };
    // Clean up leftovers either way: on timeout this is the kill, after a
    // normal exit it reaps stray background processes.
    kill_group(&mut child);
    if exit.is_none() {
        let _ = child.wait();
    }
    let stdout = out_reader.join().unwrap_or_default();
    let stderr = err_reader.join().unwrap_or_default();
    let duration_secs = started.elapsed().as_secs_f64();

    let status = match exit {
        None => VerificationStatus::Timeout,
        Some(s) if !s.success() => VerificationStatus::NonzeroExit { code: s.code() },
        Some(_) => {
            let text = String::from_utf8_lossy(&stdout);
            match extract_flag(&text) {
                Some(got) if got == golden.flag => VerificationStatus::FlagCaptured,
                got => VerificationStatus::FlagMismatch { got: got.map(str::to_string) },
            }
        }
    };
    log::info!("{chain}: {} in {duration_secs:.2}s", status.label());
    VerificationResult {
        chain: chain.clone(),
        status,
        duration_secs,
        stdout_tail: tail(&stdout),
        stderr_tail: tail(&stderr),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySummary {
    /// Results of the instances run this time, in manifest order.
    pub executed: Vec<VerificationResult>,
    pub captured: usize,
    pub total: usize,
}

impl VerifySummary {
    pub fn success(&self) -> bool {
        self.captured == self.total
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub jobs: usize,
    /// Re-run only instances whose stored result is missing or not
    /// captured.
    pub only_failed: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            jobs: default_jobs(),
            only_failed: false,
        }
    }
}

pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(16)
}

/// Verifies the instances of `manifest` stored under `family_dir`, stores
/// the results in the manifest and rewrites `manifest.json`.
pub fn verify_family(manifest: &mut FamilyManifest, family_dir: &Path, golden: &GoldenSpec, opts: &VerifyOptions) -> Result<VerifySummary, VerifyError> {
    let todo: Vec<(usize, TransformChain, PathBuf)> = manifest
        .instances
        .iter()
        .enumerate()
        .filter(|(_, i)| !opts.only_failed || !i.verification.as_ref().is_some_and(|v| v.status.is_captured()))
        .map(|(k, i)| (k, i.chain.clone(), family_dir.join(&i.directory)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| VerifyError::Pool(e.to_string()))?;
    let results: Vec<(usize, VerificationResult)> = pool.install(|| {
        todo.par_iter()
            .map(|(k, chain, dir)| (*k, verify_instance(chain, dir, golden)))
            .collect()
    });
    let mut executed = Vec::with_capacity(results.len());
    for (k, r) in results {
        manifest.instances[k].verification = Some(r.clone());
        executed.push(r);
    }
    // Instances skipped under only_failed keep their earlier result; any
    // that never had one are still unverified and count as failures.
    let captured = manifest
        .instances
        .iter()
        .filter(|i| i.verification.as_ref().is_some_and(|v| v.status.is_captured()))
        .count();
    write_manifest(manifest, family_dir)?;
    Ok(VerifySummary {
        executed,
        captured,
        total: manifest.instances.len(),
    })
}
