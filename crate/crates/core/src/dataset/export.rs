use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{DatasetRecord, FixSource};
use crate::hashing::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    JsonlRecords,
    SftPairs,
}

impl ExportFormat {
    pub fn file_name(self) -> &'static str {
        match self {
            ExportFormat::JsonlRecords => "records.jsonl",
            ExportFormat::SftPairs => "sft_pairs.jsonl",
        }
    }
}


fn sft_pair(r: &DatasetRecord) -> serde_json::Value {
    let mut input = format!("Repository: {} @ {}\nFailing tests:\n", r.repo, r.base_commit);
    for t in &r.failing_tests {
        input.push_str(&format!("- {t}\n"));
    }
    input.push_str("\nTest log:\n");
    input.push_str(&r.error_log_truncated);
    let source = match r.fix_source {
        FixSource::ReverseDiff => "reverse_diff",
        FixSource::Rollout => "rollout",
    };
    json!({
        "variant_id": r.variant_id,
        "repo": r.repo,
        "base_commit": r.base_commit,
        "fix_source": source,
        "input": input,
        "target": r.fix_patch.text,
        "trajectory": r.trajectory.as_ref().map(|t| &t.steps),
    })
}

/// Write `records` to `dir/<format file>`, ordered by repo and variant.
pub fn export(records: &[DatasetRecord], format: ExportFormat, dir: &Path) -> io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut lines: Vec<_> = records
        .iter()
        .map(|r| {
            let line = match format {
                ExportFormat::JsonlRecords => serde_json::to_string(r),
                ExportFormat::SftPairs => serde_json::to_string(&sft_pair(r)),
            }
            .expect("serializable");
            (r.order_key(), line)
        })
        .collect();
    lines.sort();
    let mut out = String::new();
    for (_, line) in lines {
        out.push_str(&line);
        out.push('\n');
    }
    let path = dir.join(format.file_name());
    std::fs::write(&path, out)?;
    Ok(path)
}

pub fn import_records(path: &Path) -> io::Result<Vec<DatasetRecord>> {
    let mut out = Vec::new();
    for line in std::fs::read_to_string(path)?.lines() {
        let mut r: DatasetRecord =
            serde_json::from_str(line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
        if let Some(t) = r.trajectory.as_mut() {
            t.final_patch = r.fix_patch.clone();
        }
        out.push(r);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub pipeline_version: String,
    pub config_hash: String,
    pub records: usize,
    pub variants: usize,
    pub per_repo: BTreeMap<String, usize>,
    /// sha256 of every other file in the dataset directory.
    pub files: BTreeMap<String, String>,
}

/// Summarize `dir` into `dir/manifest.json`.
pub fn write_manifest(dir: &Path, records: &[DatasetRecord], config_hash: &str) -> io::Result<Manifest> {
    let mut files = BTreeMap::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let name = e.file_name().to_string_lossy().into_owned();
        if name != "manifest.json" && e.file_type()?.is_file() {
            files.insert(name, sha256_hex(std::fs::read(e.path())?));
        }
    }
    let mut per_repo: BTreeMap<String, usize> = BTreeMap::new();
    for r in records {
        *per_repo.entry(r.repo.clone()).or_default() += 1;
    }
    let variants = records.iter().map(|r| (&r.repo, &r.variant_id)).collect::<std::collections::BTreeSet<_>>().len();
    let m = Manifest {
        pipeline_version: crate::PIPELINE_VERSION.to_string(),
        config_hash: config_hash.to_string(),
        records: records.len(),
        variants,
        per_repo,
        files,
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&m).expect("serializable") + "\n")?;
    Ok(m)
}
