#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use bugsynth_core::coverage::{build_coverage_graph, collect_coverage, CoverageGraph};
use bugsynth_core::exec::Mode;
use bugsynth_core::index::{index_repository, Component, ComponentIndex, RepoSnapshot};
use bugsynth_core::mutator::SnapshotContext;
use bugsynth_core::pipeline::{
    ExecutorConfig, ExtractConfig, Granularity, MutateConfig, ProfileSource, RepoSpec, RunConfig, SelectionConfig,
};
use bugsynth_core::profile::LanguageProfile;
use bugsynth_core::provider::{ProviderConfig, Rule};
use bugsynth_core::sandbox::{provision, run_baseline, Baseline, Executor};

pub const WINDOW_IDENTITY: &str = "def window_sums(values, width):\n    \"\"\"Sums of every contiguous window of the given width.\"\"\"\n    return [sum(values[i:i + width]) for i in range(len(values) - width + 1)]\n";
pub const WINDOW_SYNTAX_ERROR: &str = "def window_sums(values, width):\n    return [sum(values[i:i + width] for i in range(len(values) - width + 1)]\n";
pub const WINDOW_OFF_BY_ONE: &str = "def window_sums(values, width):\n    return [sum(values[i:i + width]) for i in range(len(values) - width)]\n";
pub const FIX_EDIT: &str = r#"{"action": "edit", "path": "pkg/mathutil.py", "old": "range(len(values) - width)]", "new": "range(len(values) - width + 1)]"}"#;
pub const WRONG_EDIT: &str = r#"{"action": "edit", "path": "pkg/mathutil.py", "old": "range(len(values) - width)]", "new": "range(len(values) - width - 1)]"}"#;
pub const FINISH: &str = r#"{"action": "finish"}"#;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

pub fn profile() -> LanguageProfile {
    let adapter = fixtures().join("adapter_stub.py").canonicalize().unwrap().to_string_lossy().into_owned();
    let text = r#"
        id = "python-fixture"
        exclude_globs = ["tests/**"]
        test_command = ["python3", "ADAPTER", "--workdir", "{workdir}", "--report", "{report_path}", "{test_ids}"]
        coverage_command = ["python3", "ADAPTER", "--workdir", "{workdir}", "--report", "{report_path}", "--coverage"]
        per_test_timeout_s = 20
        suite_timeout_s = 120

        [env]
        PYTHONHASHSEED = "0"
        PYTHONDONTWRITEBYTECODE = "1"
    "#
    .replace("ADAPTER", &adapter);
    toml::from_str(&text).unwrap()
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        let name = e.file_name();
        if name == "__pycache__" || name == ".pytest_cache" {
            continue;
        }
        if e.file_type().unwrap().is_dir() {
            copy_dir(&e.path(), &to.join(&name));
        } else {
            std::fs::copy(e.path(), to.join(&name)).unwrap();
        }
    }
}

/// A private copy of the fixture repository.
pub fn fixture_copy() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixtures().join("repo"), dir.path());
    dir
}

pub fn fenced(code: &str) -> String {
    format!("Here is the implementation.\n```python\n{code}```\n")
}

pub fn action(json: &str) -> String {
    format!("```json\n{json}\n```\n")
}

pub struct World {
    pub _dir: tempfile::TempDir,
    pub snapshot: RepoSnapshot,
    pub index: ComponentIndex,
    pub graph: CoverageGraph,
    pub baseline: Baseline,
    pub executor: Arc<Executor>,
}

pub fn world() -> World {
    let dir = fixture_copy();
    let snapshot = RepoSnapshot::new(dir.path(), "fixture", profile()).unwrap();
    let index = index_repository(&snapshot).unwrap();
    let executor = Arc::new(Executor::local(4));
    let baseline = run_baseline(&snapshot, executor.clone()).unwrap();
    let handle = provision(&snapshot, &[], executor.clone()).unwrap();
    let report = collect_coverage(&handle, &baseline.excluded).unwrap();
    let graph = build_coverage_graph(&report, &index, &snapshot.commit_id);
    World { _dir: dir, snapshot, index, graph, baseline, executor }
}

impl World {
    pub fn ctx<'a>(&'a self, index: &'a ComponentIndex) -> SnapshotContext<'a> {
        SnapshotContext {
            repo: "fixture",
            snapshot: &self.snapshot,
            index,
            graph: Some(&self.graph),
            baseline: &self.baseline,
            executor: self.executor.clone(),
            mode: Mode::Parallel,
        }
    }

    pub fn component(&self, name: &str) -> &Component {
        self.index.components().iter().find(|c| c.short_name() == name).unwrap()
    }

    /// The index restricted to one component.
    pub fn only(&self, name: &str) -> ComponentIndex {
        let id = self.component(name).id.clone();
        self.index.filtered(|c| c.id == id)
    }
}

pub fn mock_rules() -> Vec<Rule> {
    vec![
        Rule {
            key: Some("mutate/pkg/mathutil.py::window_sums#function".into()),
            replies: vec![fenced(WINDOW_OFF_BY_ONE)],
            repeat_last: true,
            ..Default::default()
        },
        Rule { key: Some("mutate/".into()), replies: vec![fenced("raise NotImplementedError\n")], repeat_last: true, ..Default::default() },
        Rule { key: Some("rollout/".into()), replies: vec![action(FIX_EDIT), action(FINISH)], ..Default::default() },
    ]
}

pub fn run_config(repo: &Path, out: &Path, budget: usize) -> RunConfig {
    RunConfig {
        output_dir: Some(out.to_path_buf()),
        seed: 11,
        workers: 2,
        parallel: true,
        repos: vec![RepoSpec {
            name: "fixture".into(),
            path: Some(repo.to_path_buf()),
            url: None,
            commits: vec![],
            profile: ProfileSource::Inline(profile()),
        }],
        selection: SelectionConfig { granularity: vec![Granularity::Function], ..Default::default() },
        mutate: MutateConfig { budget, ..Default::default() },
        extract: ExtractConfig::default(),
        provider: ProviderConfig::Mock { dir: None, rules: mock_rules() },
        executor: ExecutorConfig::default(),
    }
}

/// Write `cfg` (without its output dir) as TOML into `dir/run.toml`.
pub fn write_config(dir: &Path, cfg: &RunConfig) -> PathBuf {
    let mut c = cfg.clone();
    c.output_dir = None;
    let path = dir.join("run.toml");
    std::fs::write(&path, toml::to_string(&c).unwrap()).unwrap();
    path
}

pub fn bugsynth(args: &[&str]) -> std::process::Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_bugsynth")).args(args).output().unwrap()
}
