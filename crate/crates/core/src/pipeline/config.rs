use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coverage::Strategy;
use crate::groundtruth::{AgentConfig, Schedule};
use crate::hashing;
use crate::index::ComponentKind;
use crate::mutator::DEFAULT_TEMPERATURE;
use crate::profile::LanguageProfile;
use crate::provider::ProviderConfig;
use crate::sandbox::{ExecutorKind, GatherMode};

#[derive(Debug, thiserror::Error)]
#[error("invalid configuration: {0}")]
pub struct ConfigError(pub String);

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// One document describing a whole run. Only `output_dir` is excluded from
/// the run hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 uses one per core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "yes")]
    pub parallel: bool,
    pub repos: Vec<RepoSpec>,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub mutate: MutateConfig,
    #[serde(default)]
    pub extract: ExtractConfig,
    pub provider: ProviderConfig,
    #[serde(default)]
    pub executor: ExecutorConfig,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepoSpec {
    pub name: String,
    /// Local checkout. Either this or `url` is required.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Cloned into the output directory when no `path` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    /// Revisions exported with `git archive`; empty means the working tree
    /// as it is.
    #[serde(default)]
    pub commits: Vec<String>,
    pub profile: ProfileSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSource {
    Path(PathBuf),
    Inline(LanguageProfile),
}

impl ProfileSource {
    pub fn resolve(&self) -> Result<LanguageProfile, ConfigError> {
        match self {
            ProfileSource::Path(p) => LanguageProfile::load(p).map_err(|e| invalid(format!("profile {}: {e}", p.display()))),
            ProfileSource::Inline(p) => {
                p.validate().map_err(|e| invalid(format!("profile {}: {e}", p.id)))?;
                Ok(p.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// Functions and methods.
    Function,
    Class,
}

impl Granularity {
    pub fn admits(self, kind: ComponentKind) -> bool {
        match self {
            Granularity::Function => matches!(kind, ComponentKind::Function | ComponentKind::Method),
            Granularity::Class => kind == ComponentKind::Class,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub strategy: Strategy,
    pub granularity: Vec<Granularity>,
    pub gather: GatherMode,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            strategy: Strategy::CoverageWeighted,
            granularity: vec![Granularity::Function, Granularity::Class],
            gather: GatherMode::Covering,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MutateConfig {
    /// Provider calls per snapshot.
    pub budget: usize,
    pub temperature: f64,
    pub max_prompt_tokens: usize,
    pub max_output_tokens: usize,
}

impl Default for MutateConfig {
    fn default() -> Self {
        MutateConfig { budget: 10, temperature: DEFAULT_TEMPERATURE, max_prompt_tokens: 32_768, max_output_tokens: 4_096 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractMode {
    ReverseDiff,
    Rollout,
    #[default]
    Both,
}

impl ExtractMode {
    pub fn reverse(self) -> bool {
        self != ExtractMode::Rollout
    }

    pub fn rollout(self) -> bool {
        self != ExtractMode::ReverseDiff
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    pub mode: ExtractMode,
    /// Accepted trajectories kept per variant.
    pub cap: usize,
    pub schedule: Schedule,
    pub agent: AgentConfig,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig { mode: ExtractMode::Both, cap: 3, schedule: Schedule::default(), agent: AgentConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutorConfig {
    #[serde(flatten)]
    pub kind: ExecutorKind,
    #[serde(default = "default_max_concurrent")]
    pub max_concurrent: usize,
}

fn default_max_concurrent() -> usize {
    4
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        ExecutorConfig { kind: ExecutorKind::LocalProcess, max_concurrent: default_max_concurrent() }
    }
}

fn anchor(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    /// Parse a config file, anchor relative paths at its directory, inline
    /// profile files and validate.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = std::path::absolute(&base).unwrap_or(base);
        cfg.anchor_paths(&base);
        cfg.resolve()?;
        Ok(cfg)
    }

    pub fn anchor_paths(&mut self, base: &Path) {
        if let Some(o) = &self.output_dir {
            self.output_dir = Some(anchor(base, o));
        }
        for r in &mut self.repos {
            if let Some(p) = &r.path {
                r.path = Some(anchor(base, p));
            }
            if let ProfileSource::Path(p) = &r.profile {
                r.profile = ProfileSource::Path(anchor(base, p));
            }
        }
        if let ProviderConfig::Mock { dir: Some(d), .. } = &mut self.provider {
            *d = anchor(base, d);
        }
    }

    /// Inline every profile and validate.
    pub fn resolve(&mut self) -> Result<(), ConfigError> {
        for r in &mut self.repos {
            r.profile = ProfileSource::Inline(r.profile.resolve()?);
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.repos.is_empty() {
            return Err(invalid("at least one repo is required"));
        }
        let mut names = BTreeSet::new();
        for r in &self.repos {
            let safe = !r.name.is_empty()
                && r.name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
                && !r.name.starts_with('.');
            if !safe {
                return Err(invalid(format!("repo name {:?} must be [A-Za-z0-9._-] and not start with '.'", r.name)));
            }
            if !names.insert(&r.name) {
                return Err(invalid(format!("duplicate repo name {}", r.name)));
            }
            match (&r.path, &r.url) {
                (Some(p), None) if !p.is_dir() => return Err(invalid(format!("repo {}: {} is not a directory", r.name, p.display()))),
                (Some(_), None) | (None, Some(_)) => {}
                _ => return Err(invalid(format!("repo {}: exactly one of path and url is required", r.name))),
            }
            if r.url.is_some() && r.commits.is_empty() {
                return Err(invalid(format!("repo {}: a url needs at least one commit", r.name)));
            }
            r.profile.resolve()?;
        }
        if self.selection.granularity.is_empty() {
            return Err(invalid("selection.granularity is empty"));
        }
        if !(0.0..=2.0).contains(&self.mutate.temperature) {
            return Err(invalid("mutate.temperature must be within [0, 2]"));
        }
        if self.extract.cap == 0 {
            return Err(invalid("extract.cap must be at least 1"));
        }
        if self.extract.mode.rollout() && self.extract.schedule.rounds().is_empty() {
            return Err(invalid("extract.schedule has no rounds"));
        }
        if self.extract.schedule.0.iter().any(|(t, _)| !(0.0..=2.0).contains(t)) {
            return Err(invalid("schedule temperatures must be within [0, 2]"));
        }
        if self.executor.max_concurrent == 0 {
            return Err(invalid("executor.max_concurrent must be at least 1"));
        }
        Ok(())
    }

    /// Identifies the run: sha256 of the canonical JSON form without
    /// `output_dir`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        hashing::sha256_hex(serde_json::to_vec(&c).expect("serializable"))
    }
}
