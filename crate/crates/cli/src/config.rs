//! Optional TOML run configuration. Every key mirrors a command-line flag;
//! flags win over the file, and the file wins over challenge.toml and the
//! built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::Context;
use ctfam_core::{PassConfig, Ratio};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub interpreter: Option<String>,
    pub golden: Option<String>,
    pub timeout_secs: Option<f64>,
    pub challenge: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub family: Option<PathBuf>,
    pub logs: Option<PathBuf>,
    pub only_chains: Option<Vec<String>>,
    #[serde(default)]
    pub pass: PassOverrides,
    #[serde(default)]
    pub analyze: AnalyzeConfig,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PassOverrides {
    pub insertion_fraction: Option<Ratio>,
    pub max_loop_depth: Option<usize>,
    pub max_func_depth: Option<usize>,
    pub max_params: Option<usize>,
    pub english_comment_prob: Option<Ratio>,
    pub vocab_name_prob: Option<Ratio>,
    pub if_vs_try_prob: Option<Ratio>,
    pub reuse_original_name_prob: Option<Ratio>,
    pub multilingual_len_range: Option<(usize, usize)>,
}

impl PassOverrides {
    /// Fields set in `self` win over those in `other`.
    pub fn or(self, other: PassOverrides) -> PassOverrides {
        PassOverrides {
            insertion_fraction: self.insertion_fraction.or(other.insertion_fraction),
            max_loop_depth: self.max_loop_depth.or(other.max_loop_depth),
            max_func_depth: self.max_func_depth.or(other.max_func_depth),
            max_params: self.max_params.or(other.max_params),
            english_comment_prob: self.english_comment_prob.or(other.english_comment_prob),
            vocab_name_prob: self.vocab_name_prob.or(other.vocab_name_prob),
            if_vs_try_prob: self.if_vs_try_prob.or(other.if_vs_try_prob),
            reuse_original_name_prob: self.reuse_original_name_prob.or(other.reuse_original_name_prob),
            multilingual_len_range: self.multilingual_len_range.or(other.multilingual_len_range),
        }
    }

    pub fn apply(&self, base: PassConfig) -> PassConfig {
        let d = base;
        PassConfig {
            insertion_fraction: self.insertion_fraction.unwrap_or(d.insertion_fraction),
            max_loop_depth: self.max_loop_depth.unwrap_or(d.max_loop_depth),
            max_func_depth: self.max_func_depth.unwrap_or(d.max_func_depth),
            max_params: self.max_params.unwrap_or(d.max_params),
            english_comment_prob: self.english_comment_prob.unwrap_or(d.english_comment_prob),
            vocab_name_prob: self.vocab_name_prob.unwrap_or(d.vocab_name_prob),
            if_vs_try_prob: self.if_vs_try_prob.unwrap_or(d.if_vs_try_prob),
            reuse_original_name_prob: self.reuse_original_name_prob.unwrap_or(d.reuse_original_name_prob),
            multilingual_len_range: self.multilingual_len_range.unwrap_or(d.multilingual_len_range),
            ..d
        }
    }
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub report: Option<String>,
    pub top_k: Option<usize>,
    pub group_by: Option<String>,
    pub all_runs: Option<bool>,
    pub bootstrap_seed: Option<u64>,
    pub bootstrap_draws: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<FileConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}
