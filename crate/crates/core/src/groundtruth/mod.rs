//! Verified fixes for buggy variants: reverse diffs, agent rollouts,
//! rejection sampling and per-bug capping.

mod actions;
mod agent;
mod store;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::index::RepoSnapshot;
use crate::mutator::{SnapshotContext, Variant};
use crate::patch::{FileChange, Patch, PatchError};
use crate::sandbox::{self, SandboxError, TestSelection, VerificationResult};

pub use actions::{execute_action, parse_action, Action, ActionEnv, ActionError, StepParseFailure};
pub use agent::{rejection_sample, rollout, run_schedule, task_prompt, AgentConfig, Schedule};
pub use store::{read_trajectories, write_trajectories, ManifestEntry};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub index: usize,
    pub action: Action,
    pub observation: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Finished,
    StepCap,
    MalformedReplies,
    ProviderError,
    SandboxFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub variant_id: String,
    /// 1-based position in the rollout schedule.
    pub round: usize,
    pub temperature: f64,
    pub seed: u64,
    pub steps: Vec<TrajectoryStep>,
    /// Replies that did not parse as an action.
    pub malformed_replies: usize,
    pub stop_reason: StopReason,
    #[serde(skip)]
    pub final_patch: Patch,
    pub verified: bool,
}

/// Diff from the variant back to the pristine snapshot.
pub fn reverse_patch(snapshot: &RepoSnapshot, variant: &Variant) -> Result<Patch, PatchError> {
    let original = |p: &str| snapshot.read(p).ok();
    let mutated = variant.mutation_patch.apply_with(original)?;
    let pristine: BTreeMap<&str, Option<String>> = mutated.keys().map(|p| (p.as_str(), original(p))).collect();
    let changes: Vec<FileChange<'_>> = mutated
        .iter()
        .map(|(p, now)| FileChange { path: p, old: now.as_deref(), new: pristine[p.as_str()].as_deref() })
        .collect();
    Ok(Patch::from_changes(&changes))
}

/// Run the variant's gathered tests on a fresh copy of variant ⊕ `fix`.
pub fn verify_fix(ctx: &SnapshotContext<'_>, variant: &Variant, fix: &Patch) -> Result<VerificationResult, SandboxError> {
    let handle = sandbox::provision(ctx.snapshot, &[&variant.mutation_patch, fix], ctx.executor.clone())?;
    handle.run_tests(&TestSelection::Only(variant.gathered_tests.clone()))
}

/// Keep at most `cap` trajectories per variant, preferring earlier rounds
/// and then fewer steps.
pub fn cap_per_bug(accepted: &BTreeMap<String, Vec<Trajectory>>, cap: usize) -> BTreeMap<String, Vec<Trajectory>> {
    accepted
        .iter()
        .map(|(id, ts)| {
            let mut ts = ts.clone();
            ts.sort_by_key(|t| (t.round, t.steps.len()));
            ts.truncate(cap);
            (id.clone(), ts)
        })
        .collect()
}
