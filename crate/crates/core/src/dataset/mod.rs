//! Dataset records, statistics and export.

mod export;
mod stats;

use serde::{Deserialize, Serialize};

use crate::coverage::Strategy;
use crate::groundtruth::{verify_fix, Trajectory};
use crate::index::ComponentKind;
use crate::mutator::{SnapshotContext, Variant};
use crate::patch::Patch;
use crate::provider::ProviderMeta;
use crate::sandbox::{truncate_log, Classification, SandboxError, DEFAULT_LOG_TOKENS};

pub use export::{export, import_records, write_manifest, ExportFormat, Manifest};
pub use stats::{compute_statistics, lower_median, StatsReport, StatsRow, TABLE_COLUMNS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixSource {
    ReverseDiff,
    Rollout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub selection_strategy: Strategy,
    pub granularity: ComponentKind,
    pub component_id: String,
    pub provider_meta: ProviderMeta,
    /// Rollout rounds scheduled per variant.
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub variant_id: String,
    pub repo: String,
    pub base_commit: String,
    pub mutation_patch: Patch,
    pub gathered_tests: Vec<String>,
    pub failing_tests: Vec<String>,
    pub error_log: String,
    pub error_log_tokens: usize,
    pub error_log_truncated: String,
    pub fix_source: FixSource,
    pub fix_patch: Patch,
    /// Present for rollout records; its final patch is `fix_patch`.
    pub trajectory: Option<Trajectory>,
    pub provenance: Provenance,
}

impl DatasetRecord {
    /// Sort key for export: repo, variant, fix kind, round.
    pub fn order_key(&self) -> (&str, &str, FixSource, usize) {
        (&self.repo, &self.variant_id, self.fix_source, self.trajectory.as_ref().map_or(0, |t| t.round))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AssemblyError {
    #[error("variant {0} is not buggy")]
    NotBuggy(String),
    #[error("fix for {variant} leaves failing tests: {failing:?}")]
    UnverifiedFix { variant: String, failing: Vec<String> },
    #[error("trajectory for {0} does not end in the given fix")]
    TrajectoryMismatch(String),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
}

/// Build a record after re-running the gathered tests on variant ⊕ fix in a
/// fresh sandbox.
pub fn assemble_record(
    ctx: &SnapshotContext<'_>,
    variant: &Variant,
    fix_patch: &Patch,
    trajectory: Option<&Trajectory>,
    rounds: usize,
) -> Result<DatasetRecord, AssemblyError> {
    if variant.classification != Classification::Buggy || variant.failing_tests.is_empty() {
        return Err(AssemblyError::NotBuggy(variant.id.clone()));
    }
    if trajectory.is_some_and(|t| &t.final_patch != fix_patch) {
        return Err(AssemblyError::TrajectoryMismatch(variant.id.clone()));
    }
    let check = verify_fix(ctx, variant, fix_patch)?;
    if !check.passed() || fix_patch.is_empty() {
        return Err(AssemblyError::UnverifiedFix { variant: variant.id.clone(), failing: check.failing });
    }
    Ok(DatasetRecord {
        variant_id: variant.id.clone(),
        repo: variant.repo.clone(),
        base_commit: variant.base_commit.clone(),
        mutation_patch: variant.mutation_patch.clone(),
        gathered_tests: variant.gathered_tests.clone(),
        failing_tests: variant.failing_tests.clone(),
        error_log: variant.error_log.clone(),
        error_log_tokens: variant.log_tokens,
        error_log_truncated: truncate_log(&variant.error_log, DEFAULT_LOG_TOKENS),
        fix_source: if trajectory.is_some() { FixSource::Rollout } else { FixSource::ReverseDiff },
        fix_patch: fix_patch.clone(),
        trajectory: trajectory.cloned(),
        provenance: Provenance {
            selection_strategy: variant.selection_strategy,
            granularity: variant.component_kind,
            component_id: variant.component_id.clone(),
            provider_meta: variant.generated_body.provider_meta.clone(),
            rounds,
        },
    })
}
