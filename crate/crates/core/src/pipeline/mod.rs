//! Run configuration and resumable stage orchestration.
//!
//! Every stage writes into its own directory and finishes by writing a
//! `stage.key` marker holding a hash of everything the stage read: the
//! relevant config sections and the keys of the stages before it. A later
//! run skips any stage whose marker matches and redoes any stage whose
//! marker is missing or stale.
//!
//! Output layout:
//!
//! ```text
//! <out>/run.json
//! <out>/cache/coverage/<digest>.json
//! <out>/work/snapshots/<repo>/<sha12>/           exported commits
//! <out>/stages/<repo>/<commit>/index/            components.jsonl, report.jsonl
//! <out>/stages/<repo>/<commit>/coverage/         baseline.json, graph.json
//! <out>/stages/<repo>/<commit>/mutate/           variants/, ledger.json, attempts.jsonl
//! <out>/stages/<repo>/<commit>/extract/          reverse/, trajectories/, accepted.json
//! <out>/dataset/                                 records, pairs, stats, manifest
//! ```

mod config;
mod snapshots;

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::Serialize;

pub use config::{
    ConfigError, ExecutorConfig, ExtractConfig, ExtractMode, Granularity, MutateConfig, ProfileSource, RepoSpec, RunConfig,
    SelectionConfig,
};

use crate::coverage::{
    collect_coverage, make_distribution, CacheKey, CoverageCache, CoverageError, CoverageGraph, SelectionError, Strategy,
};
use crate::dataset::{self, assemble_record, compute_statistics, AssemblyError, DatasetRecord, ExportFormat};
use crate::exec::{self, Mode};
use crate::groundtruth::{cap_per_bug, read_trajectories, reverse_patch, run_schedule, write_trajectories, Trajectory};
use crate::hashing::{self, derive_seed, hash_parts};
use crate::index::{index_repository_with, ComponentIndex, RepoSnapshot};
use crate::mutator::{synthesize_variants, DiscardLedger, SnapshotContext, SynthesisConfig, SynthesisOutcome};
use crate::patch::Patch;
use crate::provider::{Provider, ProviderConfig};
use crate::sandbox::{provision, run_baseline, Baseline, Executor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Index,
    Coverage,
    Mutate,
    Extract,
    Assemble,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Index => "index",
            Stage::Coverage => "coverage",
            Stage::Mutate => "mutate",
            Stage::Extract => "extract",
            Stage::Assemble => "assemble",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Index => 10,
            Stage::Coverage => 11,
            Stage::Mutate => 12,
            Stage::Extract => 13,
            Stage::Assemble => 14,
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage} stage failed for {scope}: {message}")]
    Stage { stage: Stage, scope: String, message: String },
    #[error("io error at {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Stage { stage, .. } => stage.exit_code(),
            PipelineError::Io { .. } => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

/// One line of the machine-readable progress log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProgressEvent {
    pub event: &'static str,
    pub stage: Stage,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repo: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub commit: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

pub type ProgressSink = Arc<dyn Fn(&ProgressEvent) + Send + Sync>;

/// Writes each event as a JSON line on stderr.
pub fn stderr_progress() -> ProgressSink {
    Arc::new(|e: &ProgressEvent| eprintln!("{}", serde_json::to_string(e).expect("serializable")))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub stages_run: usize,
    pub stages_skipped: usize,
    pub variants: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub records: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats_table: Option<String>,
}

const MARKER: &str = "stage.key";

struct Target {
    repo: String,
    snapshot: RepoSnapshot,
    dir: PathBuf,
}

impl Target {
    fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.dir.join(stage.as_str())
    }
}

struct Loaded {
    index: ComponentIndex,
    baseline: Baseline,
    graph: CoverageGraph,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        source: io::Error::new(io::ErrorKind::InvalidData, e),
    })
}

fn compact<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("serializable")
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn write(path: &Path, text: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(io_err(path))
}

pub struct Pipeline {
    cfg: RunConfig,
    out: PathBuf,
    hash: String,
    executor: Arc<Executor>,
    provider: Mutex<Option<Arc<dyn Provider>>>,
    progress: ProgressSink,
    mode: Mode,
}

impl Pipeline {
    /// Validates `cfg` (inlining profile files) and fixes the output
    /// directory. No work is done until a stage is run.
    pub fn new(mut cfg: RunConfig) -> Result<Self, PipelineError> {
        cfg.resolve()?;
        let out = cfg
            .output_dir
            .clone()
            .ok_or_else(|| ConfigError("output_dir is required".into()))?;
        Ok(Pipeline {
            hash: cfg.hash(),
            executor: Arc::new(Executor::new(cfg.executor.kind.clone(), cfg.executor.max_concurrent)),
            mode: if cfg.parallel { Mode::Parallel } else { Mode::Sequential },
            cfg,
            out,
            provider: Mutex::new(None),
            progress: stderr_progress(),
        })
    }

    /// Use `provider` instead of building one from the config.
    pub fn with_provider(self, provider: Arc<dyn Provider>) -> Self {
        *self.provider.lock().unwrap_or_else(|e| e.into_inner()) = Some(provider);
        self
    }

    pub fn with_progress(mut self, sink: ProgressSink) -> Self {
        self.progress = sink;
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn output_dir(&self) -> &Path {
        &self.out
    }

    fn provider(&self, stage: Stage) -> Result<Arc<dyn Provider>, PipelineError> {
        let mut slot = self.provider.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(p) = slot.as_ref() {
            return Ok(p.clone());
        }
        let p = self.cfg.provider.build().map_err(|e| PipelineError::Stage {
            stage,
            scope: "provider".into(),
            message: e.to_string(),
        })?;
        *slot = Some(p.clone());
        Ok(p)
    }

    /// The provider section plus the content of any fixture directory, so
    /// edited fixtures invalidate downstream stages.
    fn provider_fingerprint(&self) -> String {
        let mut parts = vec![compact(&self.cfg.provider)];
        if let ProviderConfig::Mock { dir: Some(d), .. } = &self.cfg.provider {
            parts.push(hashing::dir_hash(d).unwrap_or_default());
        }
        hash_parts(parts)
    }

    fn emit(&self, event: &'static str, stage: Stage, target: Option<&Target>, key: Option<&str>, detail: Option<String>) {
        (self.progress)(&ProgressEvent {
            event,
            stage,
            repo: target.map(|t| t.repo.clone()),
            commit: target.map(|t| t.snapshot.commit_id.clone()),
            key: key.map(str::to_string),
            detail,
        });
    }

    /// Run `build` into a fresh `dir` unless its marker already holds `key`.
    fn stage(
        &self,
        stage: Stage,
        target: Option<&Target>,
        dir: &Path,
        key: &str,
        summary: &mut RunSummary,
        build: impl FnOnce(&Path) -> Result<Option<String>, PipelineError>,
    ) -> Result<(), PipelineError> {
        let marker = dir.join(MARKER);
        if std::fs::read_to_string(&marker).is_ok_and(|k| k.trim() == key) {
            summary.stages_skipped += 1;
            self.emit("skipped", stage, target, Some(key), None);
            return Ok(());
        }
        self.emit("started", stage, target, Some(key), None);
        if dir.exists() {
            std::fs::remove_dir_all(dir).map_err(io_err(dir))?;
        }
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        match build(dir) {
            Ok(detail) => {
                write(&marker, format!("{key}\n"))?;
                summary.stages_run += 1;
                self.emit("finished", stage, target, Some(key), detail);
                Ok(())
            }
            Err(e) => {
                self.emit("failed", stage, target, Some(key), Some(e.to_string()));
                Err(e)
            }
        }
    }

    fn fail(stage: Stage, target: &Target, message: impl std::fmt::Display) -> PipelineError {
        PipelineError::Stage {
            stage,
            scope: format!("{}@{}", target.repo, target.snapshot.commit_id),
            message: message.to_string(),
        }
    }

    fn targets(&self) -> Result<Vec<Target>, PipelineError> {
        let work = self.out.join("work");
        let mut out = Vec::new();
        for spec in &self.cfg.repos {
            let profile = spec.profile.resolve()?;
            let snaps = snapshots::materialize(spec, &profile, &work).map_err(|message| PipelineError::Stage {
                stage: Stage::Index,
                scope: spec.name.clone(),
                message,
            })?;
            for snapshot in snaps {
                let dir = self.out.join("stages").join(&spec.name).join(snapshots::commit_dir(&snapshot.commit_id));
                out.push(Target { repo: spec.name.clone(), snapshot, dir });
            }
        }
        Ok(out)
    }

    /// Run every stage up to and including `last`, skipping completed ones.
    pub fn run_until(&self, last: Stage) -> Result<RunSummary, PipelineError> {
        exec::with_workers(self.cfg.workers, || self.run_stages(last))
    }

    fn run_stages(&self, last: Stage) -> Result<RunSummary, PipelineError> {
        std::fs::create_dir_all(&self.out).map_err(io_err(&self.out))?;
        let mut summary = RunSummary { config_hash: self.hash.clone(), ..Default::default() };
        let mut public = self.cfg.clone();
        public.output_dir = None;
        write(
            &self.out.join("run.json"),
            to_json(&serde_json::json!({
                "config_hash": self.hash,
                "pipeline_version": crate::PIPELINE_VERSION,
                "config": public,
            })),
        )?;

        let targets = self.targets()?;
        let mut extract_keys = Vec::new();
        for t in &targets {
            let key = self.run_target(t, last, &mut summary)?;
            extract_keys.push(key);
        }
        if last >= Stage::Assemble {
            self.assemble(&targets, &extract_keys, &mut summary)?;
        }
        Ok(summary)
    }

    fn load(&self, t: &Target) -> Result<Loaded, PipelineError> {
        let idx = t.stage_dir(Stage::Index);
        let cov = t.stage_dir(Stage::Coverage);
        let read = |p: PathBuf| std::fs::read_to_string(&p).map_err(io_err(&p));
        let index = ComponentIndex::from_jsonl(
            &read(idx.join("components.jsonl"))?,
            &read(idx.join("report.jsonl"))?,
        )
        .map_err(|e| Self::fail(Stage::Index, t, e))?;
        Ok(Loaded {
            index,
            baseline: read_json(&cov.join("baseline.json"))?,
            graph: read_json(&cov.join("graph.json"))?,
        })
    }

    fn ctx<'a>(&self, t: &'a Target, loaded: &'a Loaded, index: &'a ComponentIndex) -> SnapshotContext<'a> {
        SnapshotContext {
            repo: &t.repo,
            snapshot: &t.snapshot,
            index,
            graph: Some(&loaded.graph),
            baseline: &loaded.baseline,
            executor: self.executor.clone(),
            mode: self.mode,
        }
    }

    /// Per-snapshot stages; returns the last key computed.
    fn run_target(&self, t: &Target, last: Stage, summary: &mut RunSummary) -> Result<String, PipelineError> {
        let cfg = &self.cfg;
        let profile_json = compact(&t.snapshot.profile);
        let index_key = hash_parts(["index", crate::PIPELINE_VERSION, &t.snapshot.commit_id, &profile_json]);
        self.stage(Stage::Index, Some(t), &t.stage_dir(Stage::Index), &index_key, summary, |dir| {
            let index = index_repository_with(&t.snapshot, self.mode).map_err(|e| Self::fail(Stage::Index, t, e))?;
            write(&dir.join("components.jsonl"), index.to_jsonl())?;
            write(&dir.join("report.jsonl"), index.report_jsonl())?;
            Ok(Some(format!("{} components", index.len())))
        })?;
        if last == Stage::Index {
            return Ok(index_key);
        }

        let executor_json = compact(&cfg.executor.kind);
        let coverage_key = hash_parts(["coverage", &index_key, &executor_json]);
        self.stage(Stage::Coverage, Some(t), &t.stage_dir(Stage::Coverage), &coverage_key, summary, |dir| {
            let idx = t.stage_dir(Stage::Index);
            let read = |p: PathBuf| std::fs::read_to_string(&p).map_err(io_err(&p));
            let index = ComponentIndex::from_jsonl(&read(idx.join("components.jsonl"))?, &read(idx.join("report.jsonl"))?)
                .map_err(|e| Self::fail(Stage::Coverage, t, e))?;
            let baseline = run_baseline(&t.snapshot, self.executor.clone()).map_err(|e| Self::fail(Stage::Coverage, t, e))?;
            let cache = CoverageCache::new(self.out.join("cache").join("coverage"));
            let key = CacheKey {
                commit_id: t.snapshot.commit_id.clone(),
                profile_id: t.snapshot.profile.id.clone(),
                adapter_version: t.snapshot.profile.adapter_version.clone(),
            };
            let graph = cache
                .cached_graph(&key, &index, || {
                    let handle = provision(&t.snapshot, &[], self.executor.clone())?;
                    collect_coverage(&handle, &baseline.excluded)
                })
                .map_err(|e: CoverageError| Self::fail(Stage::Coverage, t, e))?;
            write(&dir.join("baseline.json"), to_json(&baseline))?;
            write(&dir.join("graph.json"), graph.to_json())?;
            Ok(Some(format!(
                "{} tests, {} excluded, {} edges",
                baseline.full_suite.len(),
                baseline.excluded.len(),
                graph.edges.len()
            )))
        })?;
        if last == Stage::Coverage {
            return Ok(coverage_key);
        }

        let mutate_key = hash_parts([
            "mutate".to_string(),
            coverage_key,
            compact(&cfg.selection),
            compact(&cfg.mutate),
            self.provider_fingerprint(),
            cfg.seed.to_string(),
        ]);
        let mutate_dir = t.stage_dir(Stage::Mutate);
        self.stage(Stage::Mutate, Some(t), &mutate_dir, &mutate_key, summary, |dir| {
            let loaded = self.load(t)?;
            let index = loaded
                .index
                .filtered(|c| cfg.selection.granularity.iter().any(|g| g.admits(c.kind)));
            let ctx = self.ctx(t, &loaded, &index);
            let mut detail = None;
            let outcome = if cfg.mutate.budget == 0 {
                SynthesisOutcome { variants: vec![], ledger: DiscardLedger::default(), attempts: vec![] }
            } else {
                let dist = match make_distribution(&index, Some(&loaded.graph), cfg.selection.strategy) {
                    Ok(d) => Some(d),
                    Err(SelectionError::Empty) => {
                        detail = Some("no components at the configured granularity".to_string());
                        None
                    }
                    Err(SelectionError::DegenerateGraph) => {
                        detail = Some("no component is covered; falling back to uniform selection".to_string());
                        Some(make_distribution(&index, None, Strategy::Uniform).map_err(|e| Self::fail(Stage::Mutate, t, e))?)
                    }
                    Err(e) => return Err(Self::fail(Stage::Mutate, t, e)),
                };
                match dist {
                    None => SynthesisOutcome { variants: vec![], ledger: DiscardLedger::default(), attempts: vec![] },
                    Some(dist) => {
                        let provider = self.provider(Stage::Mutate)?;
                        let scfg = SynthesisConfig {
                            budget: cfg.mutate.budget,
                            temperature: cfg.mutate.temperature,
                            seed: derive_seed(cfg.seed, &format!("mutate/{}/{}", t.repo, t.snapshot.commit_id)),
                            max_prompt_tokens: cfg.mutate.max_prompt_tokens,
                            max_output_tokens: cfg.mutate.max_output_tokens,
                            gather: cfg.selection.gather,
                        };
                        synthesize_variants(&ctx, &dist, provider.as_ref(), &scfg)
                    }
                }
            };
            outcome.write(dir).map_err(io_err(dir))?;
            Ok(Some(detail.unwrap_or_else(|| {
                format!("{} attempts, {} retained", outcome.ledger.attempts, outcome.ledger.retained)
            })))
        })?;
        summary.variants += SynthesisOutcome::read(&mutate_dir).map_err(io_err(&mutate_dir))?.variants.len();
        if last == Stage::Mutate {
            return Ok(mutate_key);
        }

        let extract_key = hash_parts([
            "extract".to_string(),
            mutate_key,
            compact(&cfg.extract),
            self.provider_fingerprint(),
            cfg.seed.to_string(),
        ]);
        self.stage(Stage::Extract, Some(t), &t.stage_dir(Stage::Extract), &extract_key, summary, |dir| {
            let loaded = self.load(t)?;
            let ctx = self.ctx(t, &loaded, &loaded.index);
            let variants = SynthesisOutcome::read(&mutate_dir).map_err(io_err(&mutate_dir))?.variants;
            if cfg.extract.mode.reverse() {
                let rdir = dir.join("reverse");
                std::fs::create_dir_all(&rdir).map_err(io_err(&rdir))?;
                for v in &variants {
                    let fix = reverse_patch(&t.snapshot, v).map_err(|e| Self::fail(Stage::Extract, t, e))?;
                    write(&rdir.join(format!("{}.patch", v.id)), &fix.text)?;
                }
            }
            let mut accepted_total = 0;
            if cfg.extract.mode.rollout() {
                let provider = self.provider(Stage::Extract)?;
                let base = derive_seed(cfg.seed, &format!("extract/{}/{}", t.repo, t.snapshot.commit_id));
                let all: Vec<Trajectory> = exec::map(self.mode, &variants, |v| {
                    run_schedule(&ctx, v, provider.as_ref(), &cfg.extract.schedule, &cfg.extract.agent, base)
                })
                .into_iter()
                .flatten()
                .collect();
                let tdir = dir.join("trajectories");
                std::fs::create_dir_all(&tdir).map_err(io_err(&tdir))?;
                write_trajectories(&tdir, &all).map_err(io_err(&tdir))?;
                let mut verified: BTreeMap<String, Vec<Trajectory>> = BTreeMap::new();
                for tr in all.into_iter().filter(|tr| tr.verified) {
                    verified.entry(tr.variant_id.clone()).or_default().push(tr);
                }
                let capped: BTreeMap<String, Vec<usize>> = cap_per_bug(&verified, cfg.extract.cap)
                    .into_iter()
                    .map(|(k, ts)| (k, ts.iter().map(|tr| tr.round).collect()))
                    .collect();
                accepted_total = capped.values().map(Vec::len).sum();
                write(&dir.join("accepted.json"), to_json(&capped))?;
            }
            Ok(Some(format!("{} variants, {} accepted trajectories", variants.len(), accepted_total)))
        })?;
        Ok(extract_key)
    }

    fn assemble(&self, targets: &[Target], keys: &[String], summary: &mut RunSummary) -> Result<(), PipelineError> {
        let cfg = &self.cfg;
        let mut parts = vec!["assemble".to_string(), compact(&cfg.extract)];
        parts.extend(keys.iter().cloned());
        let key = hash_parts(parts);
        let dir = self.out.join("dataset");
        self.stage(Stage::Assemble, None, &dir, &key, summary, |dir| {
            let rounds = if cfg.extract.mode.rollout() { cfg.extract.schedule.rounds().len() } else { 0 };
            let loaded: Vec<Loaded> = targets.iter().map(|t| self.load(t)).collect::<Result<_, _>>()?;
            let contexts: Vec<SnapshotContext<'_>> =
                targets.iter().zip(&loaded).map(|(t, l)| self.ctx(t, l, &l.index)).collect();

            let mut ledger = DiscardLedger::default();
            let mut per_snapshot = BTreeMap::new();
            let mut items: Vec<(usize, crate::mutator::Variant, Patch, Option<Trajectory>)> = Vec::new();
            for (i, t) in targets.iter().enumerate() {
                let mdir = t.stage_dir(Stage::Mutate);
                let outcome = SynthesisOutcome::read(&mdir).map_err(io_err(&mdir))?;
                ledger.merge(&outcome.ledger);
                per_snapshot.insert(format!("{}@{}", t.repo, t.snapshot.commit_id), outcome.ledger.clone());
                let edir = t.stage_dir(Stage::Extract);
                let trajectories = if cfg.extract.mode.rollout() {
                    let accepted: BTreeMap<String, Vec<usize>> = read_json(&edir.join("accepted.json"))?;
                    let tdir = edir.join("trajectories");
                    let all = read_trajectories(&tdir).map_err(io_err(&tdir))?;
                    all.into_iter()
                        .filter(|tr| accepted.get(&tr.variant_id).is_some_and(|r| r.contains(&tr.round)))
                        .collect()
                } else {
                    Vec::new()
                };
                for v in outcome.variants {
                    if cfg.extract.mode.reverse() {
                        let p = edir.join("reverse").join(format!("{}.patch", v.id));
                        let text = std::fs::read_to_string(&p).map_err(io_err(&p))?;
                        let fix = Patch::from_text(text).map_err(|e| Self::fail(Stage::Assemble, t, e))?;
                        items.push((i, v.clone(), fix, None));
                    }
                    for tr in trajectories.iter().filter(|tr| tr.variant_id == v.id) {
                        items.push((i, v.clone(), tr.final_patch.clone(), Some(tr.clone())));
                    }
                }
            }

            let results = exec::map(self.mode, &items, |(i, v, fix, tr)| assemble_record(&contexts[*i], v, fix, tr.as_ref(), rounds));
            let mut records: Vec<DatasetRecord> = Vec::new();
            let mut refused = String::new();
            for ((i, v, _, tr), r) in items.iter().zip(results) {
                match r {
                    Ok(rec) => records.push(rec),
                    Err(AssemblyError::Sandbox(e)) => return Err(Self::fail(Stage::Assemble, &targets[*i], e)),
                    Err(e) => {
                        let line = serde_json::json!({
                            "variant_id": v.id,
                            "round": tr.as_ref().map(|t| t.round),
                            "reason": e.to_string(),
                        });
                        refused.push_str(&line.to_string());
                        refused.push('\n');
                    }
                }
            }

            dataset::export(&records, ExportFormat::JsonlRecords, dir).map_err(io_err(dir))?;
            dataset::export(&records, ExportFormat::SftPairs, dir).map_err(io_err(dir))?;
            let stats = compute_statistics(&records);
            write(&dir.join("stats.json"), to_json(&stats))?;
            write(&dir.join("stats.txt"), stats.to_table())?;
            write(&dir.join("discard_ledger.json"), to_json(&serde_json::json!({ "total": ledger, "per_snapshot": per_snapshot })))?;
            write(&dir.join("refused.jsonl"), refused)?;
            dataset::write_manifest(dir, &records, &self.hash).map_err(io_err(dir))?;
            Ok(Some(format!("{} records", records.len())))
        })?;
        let records = dataset::import_records(&dir.join(ExportFormat::JsonlRecords.file_name())).map_err(io_err(&dir))?;
        summary.records = Some(records.len());
        summary.stats_table = Some(std::fs::read_to_string(dir.join("stats.txt")).map_err(io_err(&dir))?);
        Ok(())
    }
}

pub fn cmd_index(cfg: RunConfig) -> Result<RunSummary, PipelineError> {
    Pipeline::new(cfg)?.run_until(Stage::Index)
}

pub fn cmd_coverage(cfg: RunConfig) -> Result<RunSummary, PipelineError> {
    Pipeline::new(cfg)?.run_until(Stage::Coverage)
}

pub fn cmd_mutate(cfg: RunConfig) -> Result<RunSummary, PipelineError> {
    Pipeline::new(cfg)?.run_until(Stage::Mutate)
}

pub fn cmd_extract(mut cfg: RunConfig, mode: ExtractMode) -> Result<RunSummary, PipelineError> {
    cfg.extract.mode = mode;
    Pipeline::new(cfg)?.run_until(Stage::Extract)
}

pub fn cmd_assemble(cfg: RunConfig) -> Result<RunSummary, PipelineError> {
    Pipeline::new(cfg)?.run_until(Stage::Assemble)
}

pub fn cmd_run(cfg: RunConfig) -> Result<RunSummary, PipelineError> {
    cmd_assemble(cfg)
}
