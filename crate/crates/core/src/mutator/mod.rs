//! Variant synthesis: sample a component, mask it, ask a provider for a new
//! body, splice it in and keep the result only if it parses and fails at
//! least one relevant test.

mod prompt;
mod reply;
mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coverage::{CoverageGraph, SelectionDistribution, Strategy};
use crate::exec::{self, Mode};
use crate::hashing::{self, derive_seed};
use crate::index::{self, python, Component, ComponentIndex, ComponentKind, RepoSnapshot};
use crate::patch::Patch;
use crate::provider::{Provider, ProviderMeta, Request};
use crate::sandbox::{self, Baseline, Classification, Executor, GatherMode, TestSelection};

pub use prompt::{build_prompt, Prompt, PromptTooLarge, TemplateId};
pub use reply::{first_fenced_block, parse_reply, GeneratedBody, MalformedReply};
pub use store::{read_variants, write_variants};

/// Sampling temperature for re-implementation requests.
pub const DEFAULT_TEMPERATURE: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub id: String,
    pub repo: String,
    pub base_commit: String,
    pub component_id: String,
    pub component_kind: ComponentKind,
    pub file: String,
    pub generated_body: GeneratedBody,
    #[serde(skip)]
    pub mutation_patch: Patch,
    pub classification: Classification,
    pub selection_strategy: Strategy,
    /// Tests run against the variant, baseline failures excluded.
    pub gathered_tests: Vec<String>,
    pub failing_tests: Vec<String>,
    #[serde(skip)]
    pub error_log: String,
    pub log_tokens: usize,
    /// Position of the attempt in the synthesis plan.
    pub attempt: usize,
}

/// Counts of attempts by fate. Every attempt lands in exactly one bucket.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscardLedger {
    pub attempts: usize,
    pub retained: usize,
    pub compile_fail: usize,
    pub all_pass: usize,
    pub malformed: usize,
    pub duplicate: usize,
    pub unusable: usize,
    pub prompt_too_large: usize,
    pub provider_error: usize,
    pub sandbox_error: usize,
}

impl DiscardLedger {
    pub fn discarded(&self) -> usize {
        self.compile_fail + self.all_pass + self.malformed + self.duplicate + self.unusable
    }

    pub fn errored(&self) -> usize {
        self.prompt_too_large + self.provider_error + self.sandbox_error
    }

    pub fn is_balanced(&self) -> bool {
        self.attempts == self.retained + self.discarded() + self.errored()
    }

    pub fn merge(&mut self, other: &DiscardLedger) {
        self.attempts += other.attempts;
        self.retained += other.retained;
        self.compile_fail += other.compile_fail;
        self.all_pass += other.all_pass;
        self.malformed += other.malformed;
        self.duplicate += other.duplicate;
        self.unusable += other.unusable;
        self.prompt_too_large += other.prompt_too_large;
        self.provider_error += other.provider_error;
        self.sandbox_error += other.sandbox_error;
    }
}

/// One line of the attempt log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt: usize,
    pub component_id: String,
    pub turn: usize,
    pub outcome: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    /// Provider calls allowed for this snapshot.
    pub budget: usize,
    pub temperature: f64,
    pub seed: u64,
    pub max_prompt_tokens: usize,
    pub max_output_tokens: usize,
    pub gather: GatherMode,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            budget: 10,
            temperature: DEFAULT_TEMPERATURE,
            seed: 0,
            max_prompt_tokens: 32_768,
            max_output_tokens: 4_096,
            gather: GatherMode::Covering,
        }
    }
}

/// Everything about a snapshot the loop reads but never changes.
pub struct SnapshotContext<'a> {
    pub repo: &'a str,
    pub snapshot: &'a RepoSnapshot,
    pub index: &'a ComponentIndex,
    pub graph: Option<&'a CoverageGraph>,
    pub baseline: &'a Baseline,
    pub executor: Arc<Executor>,
    pub mode: Mode,
}

impl SnapshotContext<'_> {
    pub fn gather(&self, component: &Component, mode: GatherMode) -> Vec<String> {
        sandbox::gather_with_fallback(component, self.graph, mode, &self.baseline.full_suite, &self.baseline.excluded)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOutcome {
    pub variants: Vec<Variant>,
    pub ledger: DiscardLedger,
    pub attempts: Vec<AttemptRecord>,
}

struct Planned<'a> {
    attempt: usize,
    component: &'a Component,
    turn: usize,
    seed: u64,
}

enum Generated {
    Candidate { body: GeneratedBody, original: String, mutated: String },
    TooLarge(String),
    ProviderError(String),
    Malformed(String),
    MaskError(String),
}

fn generate_one(ctx: &SnapshotContext<'_>, plan: &Planned<'_>, provider: &dyn Provider, cfg: &SynthesisConfig) -> Generated {
    let c = plan.component;
    let original = match ctx.snapshot.read(&c.file) {
        Ok(t) => t,
        Err(e) => return Generated::MaskError(e.to_string()),
    };
    let masked = match index::mask_source(&original, c, ctx.snapshot.profile.index_nested) {
        Ok(m) => m,
        Err(e) => return Generated::MaskError(e.to_string()),
    };
    let prompt = match build_prompt(&masked, c, cfg.max_prompt_tokens) {
        Ok(p) => p,
        Err(e) => return Generated::TooLarge(e.to_string()),
    };
    let request = Request {
        key: format!("mutate/{}", c.id),
        turn: plan.turn,
        prompt: prompt.text,
        temperature: cfg.temperature,
        max_output_tokens: cfg.max_output_tokens,
        seed: plan.seed,
    };
    let reply = match provider.complete(&request) {
        Ok(r) => r,
        Err(e) => return Generated::ProviderError(e.to_string()),
    };
    let (text, explanation) = match parse_reply(&reply.text, c) {
        Ok(parsed) => parsed,
        Err(e) => return Generated::Malformed(e.to_string()),
    };
    let mutated = index::splice(&masked, &text);
    Generated::Candidate {
        body: GeneratedBody { text, explanation, provider_meta: ProviderMeta::new(provider, &request, &reply) },
        original,
        mutated,
    }
}

fn variant_id(base_commit: &str, component_id: &str, patch: &Patch) -> String {
    let h = hashing::hash_parts([base_commit, component_id, &patch.text]);
    format!("v-{}", &h[..16])
}

/// Run the synthesis loop for one snapshot. Component draws are made up
/// front from `seed`, so the set of attempts is fixed before any provider
/// call; generation and verification then run in parallel per `ctx.mode`.
pub fn synthesize_variants(
    ctx: &SnapshotContext<'_>,
    dist: &SelectionDistribution,
    provider: &dyn Provider,
    cfg: &SynthesisConfig,
) -> SynthesisOutcome {
    let mut plan = Vec::with_capacity(cfg.budget);
    if cfg.budget > 0 && !dist.weights.is_empty() {
        let sampler = dist.sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut turns: BTreeMap<&str, usize> = BTreeMap::new();
        for attempt in 0..cfg.budget {
            let id = sampler.draw(&mut rng);
            let component = ctx.index.get(id).expect("distribution built from this index");
            let turn = turns.entry(id).or_default();
            plan.push(Planned {
                attempt,
                component,
                turn: *turn,
                seed: derive_seed(cfg.seed, &format!("attempt-{attempt}")),
            });
            *turn += 1;
        }
    }

    let generated = exec::map(ctx.mode, &plan, |p| generate_one(ctx, p, provider, cfg));

    let mut ledger = DiscardLedger { attempts: plan.len(), ..Default::default() };
    let mut records = Vec::with_capacity(plan.len());
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    let mut candidates = Vec::new();
    for (p, g) in plan.iter().zip(generated) {
        let record = |outcome: &str, detail: Option<String>| AttemptRecord {
            attempt: p.attempt,
            component_id: p.component.id.clone(),
            turn: p.turn,
            outcome: outcome.to_string(),
            variant_id: None,
            detail,
        };
        match g {
            Generated::TooLarge(e) => {
                ledger.prompt_too_large += 1;
                log::info!("attempt {}: {e}", p.attempt);
                records.push(record("prompt_too_large", Some(e)));
            }
            Generated::ProviderError(e) => {
                ledger.provider_error += 1;
                records.push(record("provider_error", Some(e)));
            }
            Generated::Malformed(e) => {
                ledger.malformed += 1;
                records.push(record("malformed", Some(e)));
            }
            Generated::MaskError(e) => {
                ledger.sandbox_error += 1;
                records.push(record("mask_error", Some(e)));
            }
            Generated::Candidate { body, original, mutated } => {
                if !seen.insert((p.component.id.clone(), hashing::sha256_hex(&body.text))) {
                    ledger.duplicate += 1;
                    records.push(record("duplicate", None));
                    continue;
                }
                records.push(record("pending", None));
                candidates.push((records.len() - 1, p, body, original, mutated));
            }
        }
    }

    let verified = exec::map(ctx.mode, &candidates, |(_, p, body, original, mutated)| {
        verify_candidate(ctx, p, body, original, mutated, dist.strategy, cfg.gather)
    });

    let mut variants = Vec::new();
    for ((slot, ..), result) in candidates.iter().zip(verified) {
        let rec = &mut records[*slot];
        match result {
            Ok(v) => {
                rec.outcome = v.classification.as_str().to_string();
                rec.variant_id = Some(v.id.clone());
                match v.classification {
                    Classification::Buggy => {
                        ledger.retained += 1;
                        variants.push(v);
                    }
                    Classification::CompileFail => ledger.compile_fail += 1,
                    Classification::AllPass => ledger.all_pass += 1,
                    Classification::Unusable | Classification::Pending => ledger.unusable += 1,
                }
            }
            Err(e) => {
                ledger.sandbox_error += 1;
                rec.outcome = "sandbox_error".into();
                rec.detail = Some(e.to_string());
            }
        }
    }
    debug_assert!(ledger.is_balanced());
    SynthesisOutcome { variants, ledger, attempts: records }
}

fn verify_candidate(
    ctx: &SnapshotContext<'_>,
    plan: &Planned<'_>,
    body: &GeneratedBody,
    original: &str,
    mutated: &str,
    strategy: Strategy,
    gather: GatherMode,
) -> Result<Variant, sandbox::SandboxError> {
    let c = plan.component;
    let patch = Patch::between(&c.file, original, mutated);
    let mut variant = Variant {
        id: variant_id(&ctx.snapshot.commit_id, &c.id, &patch),
        repo: ctx.repo.to_string(),
        base_commit: ctx.snapshot.commit_id.clone(),
        component_id: c.id.clone(),
        component_kind: c.kind,
        file: c.file.clone(),
        generated_body: body.clone(),
        mutation_patch: patch,
        classification: Classification::Pending,
        selection_strategy: strategy,
        gathered_tests: Vec::new(),
        failing_tests: Vec::new(),
        error_log: String::new(),
        log_tokens: 0,
        attempt: plan.attempt,
    };
    if !python::parses(mutated) {
        variant.classification = Classification::CompileFail;
        return Ok(variant);
    }
    let tests = ctx.gather(c, gather);
    let handle = sandbox::provision(ctx.snapshot, &[&variant.mutation_patch], ctx.executor.clone())?;
    let result = handle.run_tests(&TestSelection::Only(tests.clone()))?;
    variant.classification = sandbox::classify_variant(&result, true);
    variant.gathered_tests = tests;
    variant.failing_tests = result.failing.clone();
    variant.log_tokens = result.log_tokens;
    variant.error_log = result.log;
    Ok(variant)
}
