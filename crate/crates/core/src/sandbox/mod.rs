//! Isolated working copies, test execution and variant classification.

mod classify;
mod executor;
mod log;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::coverage::report::{NormalizedReport, Outcome};
use crate::coverage::CoverageGraph;
use crate::index::{Component, ComponentKind, RepoSnapshot};
use crate::patch::{Patch, PatchError};
use crate::profile::{self, LanguageProfile};
use crate::tokens;

pub use classify::{classify_variant, Classification};
pub use executor::{Executor, ExecutorKind};
pub use log::{truncate_log, DEFAULT_LOG_TOKENS, ELISION_MARKER};

#[derive(Debug, thiserror::Error)]
pub enum SandboxError {
    #[error("patch does not apply: {0}")]
    PatchApplyFailure(#[from] PatchError),
    #[error("environment setup failed: {0}")]
    EnvSetupFailure(String),
    #[error("adapter failure: {0}")]
    AdapterFailure(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    /// Collection or import failed before tests ran (adapter exit code 2).
    CollectionError,
    /// The run was killed at its time limit; outcomes are partial.
    TimedOut,
}

/// Outcome of running a set of tests once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub test_outcomes: BTreeMap<String, Outcome>,
    /// Failing or erroring tests in run order.
    pub failing: Vec<String>,
    pub log: String,
    pub log_tokens: usize,
    pub status: RunStatus,
    #[serde(skip)]
    pub duration: f64,
}

impl VerificationResult {
    pub fn passed(&self) -> bool {
        self.status == RunStatus::Complete && self.failing.is_empty()
    }
}

/// Which tests a run covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TestSelection {
    All,
    Only(Vec<String>),
}

impl TestSelection {
    fn ids(&self) -> Option<&[String]> {
        match self {
            TestSelection::All => None,
            TestSelection::Only(ids) => Some(ids),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatherMode {
    #[default]
    Covering,
    Full,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GatherError {
    #[error("no tests cover {0}")]
    EmptyTestSet(String),
    #[error("covering mode needs a coverage graph")]
    NoGraph,
}

/// Tests relevant to a mutated component. Covering mode uses adjacency in the
/// graph, adding the enclosing class's tests for methods; full mode uses the
/// whole suite. Tests known to fail on pristine code are dropped.
pub fn gather_tests(
    component: &Component,
    graph: Option<&CoverageGraph>,
    mode: GatherMode,
    full_suite: &[String],
    excluded: &BTreeSet<String>,
) -> Result<Vec<String>, GatherError> {
    let mut set: BTreeSet<&str> = BTreeSet::new();
    match mode {
        GatherMode::Full => set.extend(full_suite.iter().map(String::as_str)),
        GatherMode::Covering => {
            let graph = graph.ok_or(GatherError::NoGraph)?;
            set.extend(graph.tests_covering(&component.id));
            if component.kind == ComponentKind::Method {
                if let Some(parent) = &component.enclosing {
                    set.extend(graph.tests_covering(parent));
                }
            }
        }
    }
    let tests: Vec<String> = set
        .into_iter()
        .filter(|t| !excluded.contains(*t))
        .map(str::to_string)
        .collect();
    if tests.is_empty() && mode == GatherMode::Covering {
        return Err(GatherError::EmptyTestSet(component.id.clone()));
    }
    Ok(tests)
}

/// Covering tests, falling back to the full suite when none cover the
/// component.
pub fn gather_with_fallback(
    component: &Component,
    graph: Option<&CoverageGraph>,
    mode: GatherMode,
    full_suite: &[String],
    excluded: &BTreeSet<String>,
) -> Vec<String> {
    gather_tests(component, graph, mode, full_suite, excluded)
        .or_else(|_| gather_tests(component, graph, GatherMode::Full, full_suite, excluded))
        .unwrap_or_default()
}

/// A disposable copy of a snapshot. Dropping the handle deletes it.
pub struct SandboxHandle {
    _dir: tempfile::TempDir,
    workdir: PathBuf,
    scratch: PathBuf,
    profile: LanguageProfile,
    executor: Arc<Executor>,
    runs: AtomicUsize,
}

impl std::fmt::Debug for SandboxHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SandboxHandle").field("workdir", &self.workdir).finish()
    }
}

/// Directories never copied into a sandbox.
const SKIP_DIRS: &[&str] = &[".git", "__pycache__", ".pytest_cache"];

/// Copy `snapshot` into a fresh sandbox and apply `patches` in order.
pub fn provision(snapshot: &RepoSnapshot, patches: &[&Patch], executor: Arc<Executor>) -> Result<SandboxHandle, SandboxError> {
    let env_err = |e: std::io::Error| SandboxError::EnvSetupFailure(e.to_string());
    let dir = tempfile::Builder::new().prefix("bugsynth-").tempdir().map_err(env_err)?;
    let base = dir.path().canonicalize().map_err(env_err)?;
    let workdir = base.join("work");
    let scratch = base.join("scratch");
    std::fs::create_dir_all(&scratch).map_err(env_err)?;
    copy_tree(&snapshot.root, &workdir).map_err(env_err)?;
    for p in patches {
        p.apply_to_dir(&workdir)?;
    }
    Ok(SandboxHandle {
        _dir: dir,
        workdir,
        scratch,
        profile: snapshot.profile.clone(),
        executor,
        runs: AtomicUsize::new(0),
    })
}

pub(crate) fn copy_tree(from: &Path, to: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(to)?;
    let walker = WalkDir::new(from).sort_by_file_name().into_iter().filter_entry(|e| {
        e.depth() == 0 || !SKIP_DIRS.iter().any(|s| e.file_name() == *s)
    });
    for entry in walker {
        let entry = entry.map_err(std::io::Error::other)?;
        let rel = entry.path().strip_prefix(from).expect("child of root");
        if rel.as_os_str().is_empty() {
            continue;
        }
        let dest = to.join(rel);
        let ft = entry.file_type();
        if ft.is_dir() {
            std::fs::create_dir_all(&dest)?;
        } else if ft.is_symlink() {
            let target = std::fs::read_link(entry.path())?;
            #[cfg(unix)]
            std::os::unix::fs::symlink(target, &dest)?;
            #[cfg(not(unix))]
            let _ = target;
        } else {
            std::fs::copy(entry.path(), &dest)?;
        }
    }
    Ok(())
}

impl SandboxHandle {
    pub fn workdir(&self) -> &Path {
        &self.workdir
    }

    pub fn read(&self, rel: &str) -> std::io::Result<String> {
        std::fs::read_to_string(self.workdir.join(rel))
    }

    pub fn write(&self, rel: &str, text: &str) -> std::io::Result<()> {
        std::fs::write(self.workdir.join(rel), text)
    }

    pub fn apply(&self, patch: &Patch) -> Result<(), SandboxError> {
        Ok(patch.apply_to_dir(&self.workdir)?)
    }

    fn next_report_path(&self) -> PathBuf {
        let n = self.runs.fetch_add(1, Ordering::SeqCst);
        self.scratch.join(format!("report-{n}.json"))
    }

    fn timeout_for(&self, selection: &TestSelection) -> Duration {
        let suite = self.profile.suite_timeout_s;
        let secs = match selection.ids() {
            Some(ids) => suite.min(self.profile.per_test_timeout_s.saturating_mul(ids.len().max(1) as u64)),
            None => suite,
        };
        Duration::from_secs(secs.max(1))
    }

    /// Strip sandbox-specific absolute paths so logs are reproducible.
    fn scrub(&self, text: &str) -> String {
        let mut out = text.to_string();
        for (root, repl) in self.executor.path_aliases(&self.workdir) {
            out = out.replace(&format!("{root}/"), "").replace(&root, repl);
        }
        out
    }

    fn execute(&self, template: &[String], selection: &TestSelection) -> Result<(RunStatus, NormalizedReport), SandboxError> {
        let report_path = self.next_report_path();
        let timeout = self.timeout_for(selection);
        let outcome = self.executor.run(
            template,
            &self.workdir,
            &self.scratch,
            &report_path,
            selection.ids(),
            &self.profile.env,
            timeout,
        )?;
        let stderr = self.scrub(&outcome.stderr);
        let read_report = || -> Result<NormalizedReport, SandboxError> {
            let text = std::fs::read_to_string(&report_path)
                .map_err(|e| SandboxError::AdapterFailure(format!("no report written ({e}); stderr:\n{stderr}")))?;
            NormalizedReport::parse(&text).map_err(|e| SandboxError::AdapterFailure(format!("invalid report: {e}")))
        };
        let (status, mut report) = if outcome.timed_out {
            let partial = read_report().unwrap_or(NormalizedReport {
                schema_version: crate::coverage::report::SCHEMA_VERSION,
                tests: Vec::new(),
                log: String::new(),
            });
            (RunStatus::TimedOut, partial)
        } else {
            match outcome.exit_code {
                Some(0) => (RunStatus::Complete, read_report()?),
                Some(2) => {
                    let stub = read_report().unwrap_or(NormalizedReport {
                        schema_version: crate::coverage::report::SCHEMA_VERSION,
                        tests: Vec::new(),
                        log: String::new(),
                    });
                    (RunStatus::CollectionError, stub)
                }
                code => {
                    return Err(SandboxError::AdapterFailure(format!(
                        "adapter exited with {code:?}; stderr:\n{stderr}"
                    )))
                }
            }
        };
        report.log = self.scrub(&report.log);
        if !stderr.trim().is_empty() {
            report.log.push_str("--- stderr ---\n");
            report.log.push_str(&stderr);
        }
        if status == RunStatus::TimedOut {
            report.log.push_str(&format!("--- run killed after {}s ---\n", timeout.as_secs()));
        }
        Ok((status, report))
    }

    /// Run the profile's test command for `selection`.
    pub fn run_tests(&self, selection: &TestSelection) -> Result<VerificationResult, SandboxError> {
        let started = Instant::now();
        let (status, report) = self.execute(&self.profile.test_command, selection)?;
        let mut outcomes: BTreeMap<String, Outcome> = BTreeMap::new();
        let mut order: Vec<String> = Vec::new();
        for t in &report.tests {
            outcomes.insert(t.id.clone(), t.outcome);
            order.push(t.id.clone());
        }
        let mut log = report.log;
        if status == RunStatus::Complete {
            if let Some(ids) = selection.ids() {
                for id in ids {
                    if !outcomes.contains_key(id) {
                        outcomes.insert(id.clone(), Outcome::Error);
                        order.push(id.clone());
                        log.push_str(&format!("ERROR {id}: missing from adapter report\n"));
                    }
                }
            }
        }
        let failing = order
            .into_iter()
            .filter(|id| outcomes.get(id).is_some_and(|o| o.is_failure()))
            .collect();
        Ok(VerificationResult {
            log_tokens: tokens::count(&log),
            test_outcomes: outcomes,
            failing,
            log,
            status,
            duration: started.elapsed().as_secs_f64(),
        })
    }

    /// Run the profile's coverage command over the whole suite.
    pub fn run_coverage(&self) -> Result<(RunStatus, NormalizedReport), SandboxError> {
        self.execute(&self.profile.coverage_command, &TestSelection::All)
    }

    /// Expanded argument vector for a test run; exposed for diagnostics.
    pub fn command_line(&self, selection: &TestSelection) -> Vec<String> {
        profile::expand_command(
            &self.profile.test_command,
            &self.workdir.to_string_lossy(),
            &self.scratch.join("report.json").to_string_lossy(),
            selection.ids(),
        )
    }
}

/// Result of running the whole suite on pristine code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub full_suite: Vec<String>,
    /// Tests failing on pristine code; excluded from every gathered set.
    pub excluded: BTreeSet<String>,
    pub result: VerificationResult,
}

pub fn run_baseline(snapshot: &RepoSnapshot, executor: Arc<Executor>) -> Result<Baseline, SandboxError> {
    let handle = provision(snapshot, &[], executor)?;
    let result = handle.run_tests(&TestSelection::All)?;
    if result.status != RunStatus::Complete {
        return Err(SandboxError::AdapterFailure(format!(
            "baseline run did not complete ({:?}):\n{}",
            result.status, result.log
        )));
    }
    Ok(Baseline {
        full_suite: result.test_outcomes.keys().cloned().collect(),
        excluded: result.failing.iter().cloned().collect(),
        result,
    })
}
