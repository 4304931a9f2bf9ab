//! On-disk coverage cache: one content-addressed file per
//! (commit, language profile, adapter version) key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::graph::{build_coverage_graph, CoverageGraph};
use super::report::NormalizedReport;
use crate::hashing;
use crate::index::ComponentIndex;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CacheKey {
    pub commit_id: String,
    pub profile_id: String,
    pub adapter_version: String,
}

impl CacheKey {
    pub fn digest(&self) -> String {
        hashing::hash_parts([&self.commit_id, &self.profile_id, &self.adapter_version])
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    key: CacheKey,
    checksum: String,
    report: NormalizedReport,
}

#[derive(Debug, PartialEq)]
pub enum Lookup {
    Hit(NormalizedReport),
    Miss,
    /// Entry failed its checksum or did not parse; it has been evicted.
    Corrupt,
}

#[derive(Debug, thiserror::Error)]
#[error("coverage cache io error at {path}: {source}")]
pub struct CacheError {
    pub path: PathBuf,
    pub source: std::io::Error,
}

#[derive(Debug, Clone)]
pub struct CoverageCache {
    dir: PathBuf,
}

fn checksum(report: &NormalizedReport) -> String {
    hashing::sha256_hex(serde_json::to_vec(report).expect("serializable"))
}

impl CoverageCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        CoverageCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(format!("{}.json", key.digest()))
    }

    pub fn lookup(&self, key: &CacheKey) -> Lookup {
        let path = self.path_for(key);
        let Ok(bytes) = std::fs::read(&path) else {
            return Lookup::Miss;
        };
        match serde_json::from_slice::<CacheEntry>(&bytes) {
            Ok(entry) if &entry.key != key => Lookup::Miss,
            Ok(entry) if entry.checksum == checksum(&entry.report) && entry.report.validate().is_ok() => {
                Lookup::Hit(entry.report)
            }
            _ => {
                log::warn!("evicting corrupt coverage cache entry {}", path.display());
                let _ = std::fs::remove_file(&path);
                Lookup::Corrupt
            }
        }
    }

    /// Store the normalized form of `report`. Writers race benignly: the
    /// content for a key is identical, and the rename is atomic.
    pub fn store(&self, key: &CacheKey, report: &NormalizedReport) -> Result<PathBuf, CacheError> {
        let err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CacheError { path, source }
        };
        std::fs::create_dir_all(&self.dir).map_err(err(&self.dir))?;
        let report = report.normalized();
        let entry = CacheEntry {
            key: key.clone(),
            checksum: checksum(&report),
            report,
        };
        let path = self.path_for(key);
        let tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(err(&self.dir))?;
        std::fs::write(tmp.path(), serde_json::to_vec_pretty(&entry).expect("serializable")).map_err(err(tmp.path()))?;
        tmp.persist(&path).map_err(|e| CacheError {
            path: path.clone(),
            source: e.error,
        })?;
        Ok(path)
    }

    /// Graph for `key`, collecting and storing the report on a miss.
    pub fn cached_graph<E>(
        &self,
        key: &CacheKey,
        index: &ComponentIndex,
        collect: impl FnOnce() -> Result<NormalizedReport, E>,
    ) -> Result<CoverageGraph, E>
    where
        E: From<CacheError>,
    {
        let report = match self.lookup(key) {
            Lookup::Hit(r) => r,
            Lookup::Miss | Lookup::Corrupt => {
                let r = collect()?.normalized();
                self.store(key, &r)?;
                r
            }
        };
        Ok(build_coverage_graph(&report, index, &key.commit_id))
    }
}
