//! Language profiles bind a target ecosystem to the pipeline: which files are
//! source, which grammar parses them, and how tests and coverage are run.

use std::collections::BTreeMap;
use std::path::Path;

use globset::{Glob, GlobSet, GlobSetBuilder};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error("reading profile {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing profile: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid glob {glob:?}: {source}")]
    Glob {
        glob: String,
        source: globset::Error,
    },
    #[error("unsupported grammar {0:?}")]
    UnknownGrammar(String),
    #[error("{0}")]
    Invalid(String),
}

/// Placeholder tokens understood in command templates.
pub const WORKDIR: &str = "{workdir}";
pub const REPORT_PATH: &str = "{report_path}";
/// A whole-argument token expanding to `--tests id1,id2` (or nothing when the
/// full suite is requested).
pub const TEST_IDS: &str = "{test_ids}";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanguageProfile {
    pub id: String,
    #[serde(default = "default_grammar")]
    pub grammar: String,
    #[serde(default = "default_source_globs")]
    pub source_globs: Vec<String>,
    #[serde(default)]
    pub exclude_globs: Vec<String>,
    /// Argument vector for a plain test run.
    pub test_command: Vec<String>,
    /// Argument vector for a coverage run.
    pub coverage_command: Vec<String>,
    #[serde(default = "default_adapter_version")]
    pub adapter_version: String,
    #[serde(default = "default_per_test_timeout")]
    pub per_test_timeout_s: u64,
    #[serde(default = "default_suite_timeout")]
    pub suite_timeout_s: u64,
    #[serde(default = "default_max_file_bytes")]
    pub max_file_bytes: u64,
    /// Index functions nested inside other functions.
    #[serde(default)]
    pub index_nested: bool,
    #[serde(default)]
    pub env: BTreeMap<String, String>,
}

fn default_grammar() -> String {
    "python".into()
}
fn default_source_globs() -> Vec<String> {
    vec!["**/*.py".into()]
}
fn default_adapter_version() -> String {
    "1".into()
}
fn default_per_test_timeout() -> u64 {
    60
}
fn default_suite_timeout() -> u64 {
    1800
}
fn default_max_file_bytes() -> u64 {
    200 * 1024
}

impl LanguageProfile {
    pub fn load(path: &Path) -> Result<Self, ProfileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ProfileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let profile: LanguageProfile = toml::from_str(&text)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        if self.grammar != "python" {
            return Err(ProfileError::UnknownGrammar(self.grammar.clone()));
        }
        if self.test_command.is_empty() || self.coverage_command.is_empty() {
            return Err(ProfileError::Invalid(
                "test_command and coverage_command must be non-empty".into(),
            ));
        }
        for (name, cmd) in [("test_command", &self.test_command), ("coverage_command", &self.coverage_command)] {
            if !cmd.iter().any(|a| a.contains(REPORT_PATH)) {
                return Err(ProfileError::Invalid(format!("{name} lacks {REPORT_PATH}")));
            }
        }
        self.matcher()?;
        Ok(())
    }

    pub fn matcher(&self) -> Result<SourceMatcher, ProfileError> {
        Ok(SourceMatcher {
            include: build_globs(&self.source_globs)?,
            exclude: build_globs(&self.exclude_globs)?,
        })
    }
}

fn build_globs(globs: &[String]) -> Result<GlobSet, ProfileError> {
    let mut b = GlobSetBuilder::new();
    for g in globs {
        b.add(Glob::new(g).map_err(|source| ProfileError::Glob {
            glob: g.clone(),
            source,
        })?);
    }
    b.build().map_err(|source| ProfileError::Glob {
        glob: globs.join(","),
        source,
    })
}

#[derive(Debug, Clone)]
pub struct SourceMatcher {
    include: GlobSet,
    exclude: GlobSet,
}

impl SourceMatcher {
    /// `rel` is a forward-slash relative path.
    pub fn is_source(&self, rel: &str) -> bool {
        self.include.is_match(rel) && !self.exclude.is_match(rel)
    }
}

/// Expand a command template. `tests = None` runs the whole suite.
pub fn expand_command(
    template: &[String],
    workdir: &str,
    report_path: &str,
    tests: Option<&[String]>,
) -> Vec<String> {
    let mut out = Vec::with_capacity(template.len() + 1);
    for arg in template {
        if arg == TEST_IDS {
            if let Some(ids) = tests {
                out.push("--tests".to_string());
                out.push(ids.join(","));
            }
            continue;
        }
        out.push(arg.replace(WORKDIR, workdir).replace(REPORT_PATH, report_path));
    }
    out
}
