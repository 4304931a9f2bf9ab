use std::path::PathBuf;
use std::sync::Arc;

use crate::index::RepoSnapshot;
use crate::profile::LanguageProfile;
use crate::sandbox::Executor;

pub(crate) fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub(crate) fn fixture_root() -> PathBuf {
    fixtures().join("repo")
}

pub(crate) fn fixture_profile() -> LanguageProfile {
    let adapter = fixtures().join("adapter_stub.py").to_string_lossy().into_owned();
    let mut p: LanguageProfile = toml::from_str(
        r#"
        id = "python-fixture"
        exclude_globs = ["tests/**"]
        test_command = ["python3", "ADAPTER", "--workdir", "{workdir}", "--report", "{report_path}", "{test_ids}"]
        coverage_command = ["python3", "ADAPTER", "--workdir", "{workdir}", "--report", "{report_path}", "--coverage"]
        per_test_timeout_s = 20
        suite_timeout_s = 120

        [env]
        PYTHONHASHSEED = "0"
        PYTHONDONTWRITEBYTECODE = "1"
        "#,
    )
    .unwrap();
    for cmd in [&mut p.test_command, &mut p.coverage_command] {
        for arg in cmd.iter_mut() {
            if arg == "ADAPTER" {
                *arg = adapter.clone();
            }
        }
    }
    p
}

/// A private copy of the fixture repository.
pub(crate) fn fixture_copy() -> (tempfile::TempDir, RepoSnapshot) {
    let dir = tempfile::tempdir().unwrap();
    crate::sandbox::copy_tree(&fixture_root(), dir.path()).unwrap();
    let snap = RepoSnapshot::new(dir.path(), "fixture", fixture_profile()).unwrap();
    (dir, snap)
}

pub(crate) fn executor() -> Arc<Executor> {
    Arc::new(Executor::local(4))
}

/// Indexed fixture with its baseline and coverage graph.
pub(crate) struct FixtureWorld {
    pub snapshot: RepoSnapshot,
    pub index: crate::index::ComponentIndex,
    pub graph: crate::coverage::CoverageGraph,
    pub baseline: crate::sandbox::Baseline,
    pub executor: Arc<Executor>,
}

pub(crate) fn fixture_world() -> FixtureWorld {
    let snapshot = RepoSnapshot::new(fixture_root(), "fixture", fixture_profile()).unwrap();
    let index = crate::index::index_repository(&snapshot).unwrap();
    let executor = executor();
    let baseline = crate::sandbox::run_baseline(&snapshot, executor.clone()).unwrap();
    let handle = crate::sandbox::provision(&snapshot, &[], executor.clone()).unwrap();
    let report = crate::coverage::collect_coverage(&handle, &baseline.excluded).unwrap();
    let graph = crate::coverage::build_coverage_graph(&report, &index, &snapshot.commit_id);
    FixtureWorld { snapshot, index, graph, baseline, executor }
}

impl FixtureWorld {
    pub fn ctx(&self) -> crate::mutator::SnapshotContext<'_> {
        crate::mutator::SnapshotContext {
            repo: "fixture",
            snapshot: &self.snapshot,
            index: &self.index,
            graph: Some(&self.graph),
            baseline: &self.baseline,
            executor: self.executor.clone(),
            mode: crate::exec::Mode::Parallel,
        }
    }

    pub fn component(&self, name: &str) -> &crate::index::Component {
        self.index.components().iter().find(|c| c.short_name() == name).unwrap()
    }
}

pub(crate) fn fenced(code: &str) -> String {
    format!("Here is the implementation.\n```python\n{code}```\n")
}

pub(crate) const WINDOW_IDENTITY: &str = "def window_sums(values, width):\n    \"\"\"Sums of every contiguous window of the given width.\"\"\"\n    return [sum(values[i:i + width]) for i in range(len(values) - width + 1)]\n";
pub(crate) const WINDOW_SYNTAX_ERROR: &str = "def window_sums(values, width):\n    return [sum(values[i:i + width] for i in range(len(values) - width + 1)]\n";
pub(crate) const WINDOW_OFF_BY_ONE: &str = "def window_sums(values, width):\n    return [sum(values[i:i + width]) for i in range(len(values) - width)]\n";
pub(crate) const ENCODE_ALTERNATE: &str = "@classmethod\ndef encode(cls, value: bytes) -> bytes:\n    \"\"\"Encode bytes as base64 with a newline every 76 characters.\"\"\"\n    return base64.b64encode(value)\n";
