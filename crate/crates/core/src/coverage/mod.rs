//! Per-commit coverage graph, selection distributions and the coverage cache.

mod cache;
mod graph;
pub mod report;
mod select;

use std::collections::BTreeSet;

pub use cache::{CacheError, CacheKey, CoverageCache, Lookup};
pub use graph::{build_coverage_graph, build_coverage_graph_with, CoverageGraph, TestCase};
pub use report::{NormalizedReport, Outcome, SchemaError};
pub use select::{make_distribution, sample_component, Sampler, SelectionDistribution, SelectionError, Strategy};

use crate::sandbox::{RunStatus, SandboxError, SandboxHandle};

#[derive(Debug, thiserror::Error)]
pub enum CoverageError {
    #[error("coverage adapter failed: {0}")]
    AdapterFailure(String),
    #[error("pristine suite has failing tests: {0:?}")]
    FlakyBaseline(Vec<String>),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

impl From<SandboxError> for CoverageError {
    fn from(e: SandboxError) -> Self {
        CoverageError::AdapterFailure(e.to_string())
    }
}

/// Run the coverage command on a pristine sandbox. Tests in `excluded`
/// (known failures on pristine code) may fail; any other failure aborts.
pub fn collect_coverage(handle: &SandboxHandle, excluded: &BTreeSet<String>) -> Result<NormalizedReport, CoverageError> {
    let (status, report) = handle.run_coverage()?;
    match status {
        RunStatus::Complete => {}
        RunStatus::CollectionError => {
            return Err(CoverageError::AdapterFailure(format!("collection error:\n{}", report.log)))
        }
        RunStatus::TimedOut => return Err(CoverageError::AdapterFailure("coverage run timed out".into())),
    }
    let unexpected: Vec<String> = report
        .failing()
        .map(|t| t.id.clone())
        .filter(|id| !excluded.contains(id))
        .collect();
    if !unexpected.is_empty() {
        return Err(CoverageError::FlakyBaseline(unexpected));
    }
    Ok(report)
}

#[cfg(test)]
mod tests;
