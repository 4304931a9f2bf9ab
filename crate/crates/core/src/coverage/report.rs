//! The normalized test report exchanged with the in-environment adapter.
//!
//! ```json
//! {"schema_version": 1,
//!  "tests": [{"id": "tests/test_a.py::test_x", "file": "tests/test_a.py",
//!             "outcome": "pass", "duration_s": 0.01,
//!             "covered": [{"file": "pkg/a.py", "lines": [3, 4, 9]}]}],
//!  "log": "raw runner output"}
//! ```
//!
//! `covered` is omitted when the run was not a coverage run.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Error,
    Skip,
}

impl Outcome {
    pub fn is_failure(self) -> bool {
        matches!(self, Outcome::Fail | Outcome::Error)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveredFile {
    pub file: String,
    pub lines: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestEntry {
    pub id: String,
    pub file: String,
    pub outcome: Outcome,
    #[serde(default)]
    pub duration_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covered: Option<Vec<CoveredFile>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedReport {
    pub schema_version: u32,
    pub tests: Vec<TestEntry>,
    #[serde(default)]
    pub log: String,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SchemaError {
    #[error("unsupported schema version {0}")]
    Version(u32),
    #[error("duplicate test id {0}")]
    DuplicateTest(String),
    #[error("lines for {file} in {test} are not strictly ascending 1-based integers")]
    Lines { test: String, file: String },
    #[error("invalid report document: {0}")]
    Json(String),
}

impl NormalizedReport {
    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        let report: NormalizedReport =
            serde_json::from_str(text).map_err(|e| SchemaError::Json(e.to_string()))?;
        report.validate()?;
        Ok(report)
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(SchemaError::Version(self.schema_version));
        }
        let mut seen = HashSet::new();
        for t in &self.tests {
            if !seen.insert(t.id.as_str()) {
                return Err(SchemaError::DuplicateTest(t.id.clone()));
            }
            for cf in t.covered.iter().flatten() {
                let ascending = cf.lines.windows(2).all(|w| w[0] < w[1]);
                if !ascending || cf.lines.first() == Some(&0) {
                    return Err(SchemaError::Lines {
                        test: t.id.clone(),
                        file: cf.file.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// The run-independent part of a coverage report: timings and raw log
    /// dropped, tests ordered by id.
    pub fn normalized(&self) -> NormalizedReport {
        let mut tests: Vec<TestEntry> = self
            .tests
            .iter()
            .map(|t| TestEntry {
                duration_s: 0.0,
                ..t.clone()
            })
            .collect();
        tests.sort_by(|a, b| a.id.cmp(&b.id));
        NormalizedReport {
            schema_version: self.schema_version,
            tests,
            log: String::new(),
        }
    }

    pub fn failing(&self) -> impl Iterator<Item = &TestEntry> {
        self.tests.iter().filter(|t| t.outcome.is_failure())
    }
}
