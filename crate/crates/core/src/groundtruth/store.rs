use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{StopReason, Trajectory, TrajectoryStep};
use crate::patch::{Patch, PatchStats};

/// One line of `manifest.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub variant_id: String,
    pub round: usize,
    pub temperature: f64,
    pub seed: u64,
    pub verified: bool,
    pub steps: usize,
    pub malformed_replies: usize,
    pub stop_reason: StopReason,
    pub patch_stats: PatchStats,
}

fn invalid(e: impl std::fmt::Display) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e.to_string())
}

fn stem(t: &Trajectory) -> String {
    format!("{}/round-{}", t.variant_id, t.round)
}

/// `<variant>/round-<n>.jsonl` step records, `<variant>/round-<n>.patch`
/// and a `manifest.jsonl` ordered by (variant, round).
pub fn write_trajectories(dir: &Path, trajectories: &[Trajectory]) -> io::Result<()> {
    let mut sorted: Vec<&Trajectory> = trajectories.iter().collect();
    sorted.sort_by(|a, b| (&a.variant_id, a.round).cmp(&(&b.variant_id, b.round)));
    std::fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    for t in sorted {
        std::fs::create_dir_all(dir.join(&t.variant_id))?;
        let mut steps = String::new();
        for s in &t.steps {
            steps.push_str(&serde_json::to_string(s).expect("serializable"));
            steps.push('\n');
        }
        std::fs::write(dir.join(format!("{}.jsonl", stem(t))), steps)?;
        std::fs::write(dir.join(format!("{}.patch", stem(t))), &t.final_patch.text)?;
        let entry = ManifestEntry {
            variant_id: t.variant_id.clone(),
            round: t.round,
            temperature: t.temperature,
            seed: t.seed,
            verified: t.verified,
            steps: t.steps.len(),
            malformed_replies: t.malformed_replies,
            stop_reason: t.stop_reason,
            patch_stats: t.final_patch.stats,
        };
        manifest.push_str(&serde_json::to_string(&entry).expect("serializable"));
        manifest.push('\n');
    }
    std::fs::write(dir.join("manifest.jsonl"), manifest)
}

pub fn read_trajectories(dir: &Path) -> io::Result<Vec<Trajectory>> {
    let path = dir.join("manifest.jsonl");
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for line in std::fs::read_to_string(path)?.lines() {
        let e: ManifestEntry = serde_json::from_str(line).map_err(invalid)?;
        let base = format!("{}/round-{}", e.variant_id, e.round);
        let steps = std::fs::read_to_string(dir.join(format!("{base}.jsonl")))?
            .lines()
            .map(serde_json::from_str::<TrajectoryStep>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(invalid)?;
        let final_patch = Patch::from_text(std::fs::read_to_string(dir.join(format!("{base}.patch")))?).map_err(invalid)?;
        out.push(Trajectory {
            variant_id: e.variant_id,
            round: e.round,
            temperature: e.temperature,
            seed: e.seed,
            steps,
            malformed_replies: e.malformed_replies,
            stop_reason: e.stop_reason,
            final_patch,
            verified: e.verified,
        });
    }
    Ok(out)
}
