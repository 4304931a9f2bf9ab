//! Drives the sandbox with throwaway shell adapters to pin down the
//! adapter side of the contract: exit 0 with a valid report, exit 2 for
//! collection failure, anything else is an adapter failure.

use std::path::Path;
use std::sync::Arc;

use bugsynth_core::coverage::report::SCHEMA_VERSION;
use bugsynth_core::coverage::{NormalizedReport, Outcome, SchemaError};
use bugsynth_core::sandbox::{
    classify_variant, provision, Classification, Executor, RunStatus, SandboxError, TestSelection,
};
use bugsynth_core::{LanguageProfile, RepoSnapshot};

const GOOD_REPORT: &str = r#"{"schema_version": 1, "log": "2 tests\n", "tests": [
  {"id": "tests/test_a.py::test_ok", "file": "tests/test_a.py", "outcome": "pass", "duration_s": 0.1},
  {"id": "tests/test_a.py::test_bad", "file": "tests/test_a.py", "outcome": "fail", "duration_s": 0.2}
]}"#;

fn snapshot_with_adapter(script: &str) -> (tempfile::TempDir, RepoSnapshot) {
    let dir = tempfile::tempdir().unwrap();
    let repo = dir.path().join("repo");
    std::fs::create_dir_all(&repo).unwrap();
    std::fs::write(repo.join("lib.py"), "def f():\n    return 1\n").unwrap();
    let adapter = dir.path().join("adapter.sh");
    std::fs::write(&adapter, script).unwrap();
    let profile = profile_for(&adapter);
    let snap = RepoSnapshot::new(&repo, "c0", profile).unwrap();
    (dir, snap)
}

fn profile_for(adapter: &Path) -> LanguageProfile {
    let a = adapter.to_string_lossy();
    toml::from_str(&format!(
        r#"
id = "sh-adapter"
test_command = ["sh", "{a}", "{{report_path}}"]
coverage_command = ["sh", "{a}", "{{report_path}}"]
per_test_timeout_s = 10
suite_timeout_s = 10
"#
    ))
    .unwrap()
}

fn run(script: &str) -> Result<bugsynth_core::sandbox::VerificationResult, SandboxError> {
    let (_dir, snap) = snapshot_with_adapter(script);
    let handle = provision(&snap, &[], Arc::new(Executor::local(1))).unwrap();
    handle.run_tests(&TestSelection::All)
}

fn writing(report: &str, code: i32) -> String {
    format!("cat > \"$1\" <<'EOF'\n{report}\nEOF\nexit {code}\n")
}

#[test]
fn exit_zero_with_valid_report_is_complete() {
    let result = run(&writing(GOOD_REPORT, 0)).unwrap();
    assert_eq!(result.status, RunStatus::Complete);
    assert_eq!(result.test_outcomes["tests/test_a.py::test_ok"], Outcome::Pass);
    assert_eq!(result.failing, vec!["tests/test_a.py::test_bad".to_string()]);
    assert_eq!(classify_variant(&result, true), Classification::Buggy);
}

#[test]
fn exit_two_is_collection_error_even_without_report() {
    let result = run("echo 'ImportError: boom' >&2\nexit 2\n").unwrap();
    assert_eq!(result.status, RunStatus::CollectionError);
    assert!(result.test_outcomes.is_empty());
    assert!(result.log.contains("ImportError: boom"));
    assert_eq!(classify_variant(&result, true), Classification::CompileFail);
}

#[test]
fn other_exit_codes_are_adapter_failures() {
    for code in [1, 3, 127] {
        let err = run(&writing(GOOD_REPORT, code)).unwrap_err();
        assert!(matches!(err, SandboxError::AdapterFailure(_)), "exit {code}: {err}");
    }
}

#[test]
fn exit_zero_without_a_valid_report_is_an_adapter_failure() {
    assert!(matches!(run("exit 0\n").unwrap_err(), SandboxError::AdapterFailure(_)));
    let wrong_version = GOOD_REPORT.replacen("\"schema_version\": 1", "\"schema_version\": 7", 1);
    assert!(matches!(run(&writing(&wrong_version, 0)).unwrap_err(), SandboxError::AdapterFailure(_)));
}

#[test]
fn schema_rejects_malformed_documents() {
    assert_eq!(SCHEMA_VERSION, 1);
    assert!(NormalizedReport::parse(GOOD_REPORT).is_ok());
    let dup = GOOD_REPORT.replace("test_bad", "test_ok");
    assert!(matches!(NormalizedReport::parse(&dup), Err(SchemaError::DuplicateTest(_))));
    let lines = r#"{"schema_version": 1, "tests": [{"id": "t", "file": "f", "outcome": "pass",
        "covered": [{"file": "lib.py", "lines": [3, 2]}]}]}"#;
    assert!(matches!(NormalizedReport::parse(lines), Err(SchemaError::Lines { .. })));
    let zero = lines.replace("[3, 2]", "[0, 2]");
    assert!(matches!(NormalizedReport::parse(&zero), Err(SchemaError::Lines { .. })));
    assert!(matches!(NormalizedReport::parse("[]"), Err(SchemaError::Json(_))));
}
