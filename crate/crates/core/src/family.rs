//! The 24-instance family tree and its manifest.
//!
//! Instances are derived level by level: Orig, then every one-tag chain,
//! then the two-tag chains (`R;Ti`, `R;O`, `Ti;O`), then `R;Ti;O`. Each
//! level depends only on the one before it, so chains within a level are
//! built in parallel.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ctfam_syntax::SourceUnit;
use globset::{Glob, GlobSet, GlobSetBuilder};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{InsertionReport, PassConfig, TransformTag};
use crate::error::{io_err, FamilyError, TransformError};
use crate::rng::derive_seed;
use crate::transforms;
use crate::verify::VerificationResult;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHALLENGE_FILE: &str = "challenge.toml";
pub const GENERATOR_VERSION: &str = concat!("ctfam ", env!("CARGO_PKG_VERSION"));

/// An ordered list of tags naming one instance. The empty chain is the
/// original challenge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TransformChain(pub Vec<TransformTag>);

impl TransformChain {
    pub fn orig() -> Self {
        TransformChain(Vec::new())
    }

    pub fn is_orig(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<TransformTag> {
        self.0.last().copied()
    }

    /// The chain minus its last tag; `None` for Orig.
    pub fn parent(&self) -> Option<TransformChain> {
        let (_, rest) = self.0.split_last()?;
        Some(TransformChain(rest.to_vec()))
    }

    /// Every chain from Orig down to this one, this one included.
    pub fn ancestry(&self) -> Vec<TransformChain> {
        (0..=self.0.len()).map(|n| TransformChain(self.0[..n].to_vec())).collect()
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    /// Directory name inside a family: `;` becomes `_`.
    pub fn dir_name(&self) -> String {
        self.to_string().replace(';', "_")
    }

    /// The 24 chains in display order: Orig, R, T1..T5, R;T1..R;T5, O,
    /// R;O, T1;O..T5;O, R;T1;O..R;T5;O.
    pub fn canonical() -> Vec<TransformChain> {
        use TransformTag::*;
        let ts = [T1, T2, T3, T4, T5];
        let mut out = vec![TransformChain::orig(), TransformChain(vec![R])];
        out.extend(ts.iter().map(|&t| TransformChain(vec![t])));
        out.extend(ts.iter().map(|&t| TransformChain(vec![R, t])));
        out.push(TransformChain(vec![O]));
        out.push(TransformChain(vec![R, O]));
        out.extend(ts.iter().map(|&t| TransformChain(vec![t, O])));
        out.extend(ts.iter().map(|&t| TransformChain(vec![R, t, O])));
        out
    }

    pub fn is_canonical(&self) -> bool {
        Self::canonical().contains(self)
    }

    /// Position in the canonical order.
    pub fn canonical_index(&self) -> Option<usize> {
        Self::canonical().iter().position(|c| c == self)
    }

    pub fn contains(&self, tag: TransformTag) -> bool {
        self.0.contains(&tag)
    }
}

impl fmt::Display for TransformChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("Orig");
        }
        let parts: Vec<&str> = self.0.iter().map(|t| t.as_str()).collect();
        f.write_str(&parts.join(";"))
    }
}

impl FromStr for TransformChain {
    type Err = FamilyError;

    fn from_str(s: &str) -> Result<Self, FamilyError> {
        let s = s.trim();
        if s.is_empty() || s.eq_ignore_ascii_case("orig") {
            return Ok(TransformChain::orig());
        }
        let tags = s
            .split(';')
            .map(|t| t.trim().parse::<TransformTag>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| FamilyError::Chain(format!("unknown tag in chain {s:?}")))?;
        Ok(TransformChain(tags))
    }
}

impl Serialize for TransformChain {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TransformChain {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `chains` plus every ancestor, in canonical order. Fails on a chain that
/// is not one of the 24.
pub fn ancestor_closure(chains: &[TransformChain]) -> Result<Vec<TransformChain>, FamilyError> {
    let mut set = BTreeSet::new();
    for c in chains {
        if !c.is_canonical() {
            return Err(FamilyError::Chain(format!("{c} is not one of the 24 family chains")));
        }
        set.extend(c.ancestry());
    }
    Ok(TransformChain::canonical().into_iter().filter(|c| set.contains(c)).collect())
}

/// Author-provided metadata, read from `challenge.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Challenge {
    pub id: String,
    pub flag: String,
    /// Golden command template with `{interpreter}` and `{instance_dir}`.
    pub golden: String,
    /// Globs (relative to the challenge directory) copied verbatim.
    #[serde(default)]
    pub exclude: Vec<String>,
    #[serde(default)]
    pub timeout_secs: Option<f64>,
}

impl Challenge {
    pub fn load(dir: &Path) -> Result<Challenge, FamilyError> {
        let path = dir.join(CHALLENGE_FILE);
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        toml::from_str(&text).map_err(|e| FamilyError::Manifest { path, message: e.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyInstance {
    pub chain: TransformChain,
    pub parent: Option<TransformChain>,
    pub seed: u64,
    /// Relative to the family directory.
    pub directory: String,
    /// Transformed source files, relative to the instance directory.
    pub files: Vec<String>,
    pub report: InsertionReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyManifest {
    pub schema_version: u32,
    pub challenge_id: String,
    pub flag: String,
    pub golden: String,
    /// Verification timeout declared by the challenge, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_secs: Option<f64>,
    pub generator_version: String,
    pub master_seed: u64,
    pub pass_config: PassConfig,
    /// Set when only part of the family was generated; the instances are
    /// then exactly the ancestor closure of these chains.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_chains: Option<Vec<TransformChain>>,
    pub instances: Vec<FamilyInstance>,
}

impl FamilyManifest {
    pub fn instance(&self, chain: &TransformChain) -> Option<&FamilyInstance> {
        self.instances.iter().find(|i| &i.chain == chain)
    }

    /// Checks the structural invariants a loaded manifest must satisfy.
    pub fn validate(&self) -> Result<(), String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!("unsupported schema_version {}", self.schema_version));
        }
        let expected = match &self.selected_chains {
            None => TransformChain::canonical(),
            Some(sel) => ancestor_closure(sel).map_err(|e| e.to_string())?,
        };
        if self.instances.len() != expected.len() {
            return Err(format!("expected {} instances, found {}", expected.len(), self.instances.len()));
        }
        let chains: BTreeSet<&TransformChain> = self.instances.iter().map(|i| &i.chain).collect();
        if chains.len() != self.instances.len() {
            return Err("duplicate chains".into());
        }
        for c in &expected {
            if !chains.contains(c) {
                return Err(format!("missing instance {c}"));
            }
        }
        for inst in &self.instances {
            if inst.parent != inst.chain.parent() {
                return Err(format!("instance {} has wrong parent", inst.chain));
            }
            if inst.directory != inst.chain.dir_name() {
                return Err(format!("instance {} has wrong directory {:?}", inst.chain, inst.directory));
            }
        }
        let verified = self.instances.iter().filter(|i| i.verification.is_some()).count();
        if verified != 0 && verified != self.instances.len() {
            return Err("verification results cover only some instances".into());
        }
        Ok(())
    }

    pub fn all_captured(&self) -> bool {
        self.instances
            .iter()
            .all(|i| i.verification.as_ref().is_some_and(|v| v.status.is_captured()))
    }
}

pub fn write_manifest(manifest: &FamilyManifest, out_dir: &Path) -> Result<PathBuf, FamilyError> {
    let path = out_dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

pub fn load_manifest(path: &Path) -> Result<FamilyManifest, FamilyError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let manifest: FamilyManifest = serde_json::from_str(&text).map_err(|e| FamilyError::Manifest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    manifest.validate().map_err(|message| FamilyError::Manifest {
        path: path.to_path_buf(),
        message,
    })?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub challenge: Challenge,
    /// Knobs for every pass; the seed is replaced per instance.
    pub pass_config: PassConfig,
    pub master_seed: u64,
    /// Generate only these chains and their ancestors.
    pub only: Option<Vec<TransformChain>>,
    pub jobs: usize,
}

/// Files of the original challenge, split into sources and assets.
struct Inputs {
    sources: Vec<(String, SourceUnit)>,
    assets: Vec<String>,
}

fn collect_inputs(dir: &Path, exclude: &GlobSet) -> Result<Inputs, FamilyError> {
    let mut sources = Vec::new();
    let mut assets = Vec::new();
    let walker = walkdir::WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| !(e.file_type().is_dir() && e.file_name() == "__pycache__"));
    for entry in walker {
        let entry = entry.map_err(|e| FamilyError::Io {
            path: e.path().map(Path::to_path_buf).unwrap_or_else(|| dir.to_path_buf()),
            source: e.into(),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel_path = entry.path().strip_prefix(dir).expect("walk stays below root");
        let rel = rel_path.to_string_lossy().replace('\\', "/");
        if rel == CHALLENGE_FILE || rel == MANIFEST_FILE {
            continue;
        }
        if rel.ends_with(".py") && !exclude.is_match(rel_path) {
            let bytes = std::fs::read(entry.path()).map_err(io_err(entry.path()))?;
            let text = String::from_utf8(bytes).map_err(|_| FamilyError::Io {
                path: entry.path().to_path_buf(),
                source: std::io::Error::new(std::io::ErrorKind::InvalidData, "source is not valid UTF-8"),
            })?;
            let unit = SourceUnit::parse(rel.clone(), &text)
                .map_err(|source| TransformError::Parse { path: rel.clone(), source })?;
            sources.push((rel, unit));
        } else {
            assets.push(rel);
        }
    }
    Ok(Inputs { sources, assets })
}

fn exclude_set(patterns: &[String]) -> Result<GlobSet, FamilyError> {
    let mut b = GlobSetBuilder::new();
    for p in patterns {
        let glob = Glob::new(p).map_err(|e| FamilyError::Pattern {
            pattern: p.clone(),
            message: e.to_string(),
        })?;
        b.add(glob);
    }
    b.build().map_err(|e| FamilyError::Pattern {
        pattern: patterns.join(", "),
        message: e.to_string(),
    })
}

type Files = Vec<(String, SourceUnit)>;

/// Applies `tag` to every file of the parent instance.
fn derive_instance(parent: &Files, tag: TransformTag, cfg: &PassConfig) -> Result<(Files, InsertionReport), FamilyError> {
    let mut reserved = BTreeSet::new();
    let mut protected = BTreeSet::new();
    for (_, unit) in parent {
        let table = unit.analyze_bindings();
        reserved.extend(table.facts.identifiers.iter().cloned());
        protected.extend(table.facts.exported_names());
    }
    let cfg = PassConfig {
        reserved_names: reserved,
        protected_names: protected,
        ..cfg.clone()
    };
    let mut report = InsertionReport::default();
    let mut files = Vec::with_capacity(parent.len());
    for (path, unit) in parent {
        let (out, r) = transforms::apply(tag, unit, &cfg)?;
        report.merge(r);
        files.push((path.clone(), out));
    }
    Ok((files, report))
}

/// Generates the family (or the requested part of it) under `out_dir` and
/// writes its manifest.
pub fn build_family(challenge_dir: &Path, out_dir: &Path, opts: &BuildOptions) -> Result<FamilyManifest, FamilyError> {
    opts.pass_config.validate()?;
    let exclude = exclude_set(&opts.challenge.exclude)?;
    let inputs = collect_inputs(challenge_dir, &exclude)?;
    let chains = match &opts.only {
        Some(sel) => ancestor_closure(sel)?,
        None => TransformChain::canonical(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| FamilyError::Chain(format!("worker pool: {e}")))?;

    let mut built: BTreeMap<TransformChain, (Files, InsertionReport)> = BTreeMap::new();
    built.insert(TransformChain::orig(), (inputs.sources.clone(), InsertionReport::default()));
    let max_depth = chains.iter().map(|c| c.depth()).max().unwrap_or(0);
    for depth in 1..=max_depth {
        let level: Vec<&TransformChain> = chains.iter().filter(|c| c.depth() == depth).collect();
        let results: Vec<Result<(TransformChain, Files, InsertionReport), FamilyError>> = pool.install(|| {
            level
                .par_iter()
                .map(|chain| {
                    let parent = chain.parent().expect("depth >= 1");
                    let tag = chain.last().expect("depth >= 1");
                    let seed = derive_seed(opts.master_seed, &chain.to_string());
                    let cfg = opts.pass_config.with_seed(seed);
                    log::debug!("deriving {chain} from {parent} with seed {seed}");
                    let (files, report) = derive_instance(&built[&parent].0, tag, &cfg)?;
                    Ok(((*chain).clone(), files, report))
                })
                .collect()
        });
        for r in results {
            let (chain, files, report) = r?;
            built.insert(chain, (files, report));
        }
    }

    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut instances = Vec::with_capacity(chains.len());
    for chain in &chains {
        let (files, report) = &built[chain];
        let dir = out_dir.join(chain.dir_name());
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
        }
        for (rel, unit) in files {
            let path = dir.join(rel);
            write_file(&path, unit.render().as_bytes())?;
        }
        for rel in &inputs.assets {
            let from = challenge_dir.join(rel);
            let bytes = std::fs::read(&from).map_err(io_err(&from))?;
            write_file(&dir.join(rel), &bytes)?;
        }
        instances.push(FamilyInstance {
            chain: chain.clone(),
            parent: chain.parent(),
            seed: if chain.is_orig() { opts.master_seed } else { derive_seed(opts.master_seed, &chain.to_string()) },
            directory: chain.dir_name(),
            files: files.iter().map(|(p, _)| p.clone()).collect(),
            report: report.clone(),
            verification: None,
        });
    }
    let manifest = FamilyManifest {
        schema_version: SCHEMA_VERSION,
        challenge_id: opts.challenge.id.clone(),
        flag: opts.challenge.flag.clone(),
        golden: opts.challenge.golden.clone(),
        timeout_secs: opts.challenge.timeout_secs,
        generator_version: GENERATOR_VERSION.to_string(),
        master_seed: opts.master_seed,
        pass_config: opts.pass_config.with_seed(0),
        selected_chains: opts.only.clone(),
        instances,
    };
    write_manifest(&manifest, out_dir)?;
    Ok(manifest)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), FamilyError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    std::fs::write(path, bytes).map_err(io_err(path))
}
