use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::actions::{execute_action, parse_action, Action, ActionEnv, ActionError};
use super::{verify_fix, StopReason, Trajectory, TrajectoryStep};
use crate::hashing::derive_seed;
use crate::mutator::{SnapshotContext, Variant};
use crate::patch::{FileChange, Patch};
use crate::provider::{Provider, Request};
use crate::sandbox::{self, truncate_log, DEFAULT_LOG_TOKENS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub max_steps: usize,
    /// Consecutive unparsable replies tolerated for one step.
    pub retry_cap: usize,
    /// Token budget for the task log and each observation.
    pub log_tokens: usize,
    pub max_output_tokens: usize,
    pub search_limit: usize,
    pub view_lines: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            max_steps: 20,
            retry_cap: 2,
            log_tokens: DEFAULT_LOG_TOKENS,
            max_output_tokens: 2048,
            search_limit: 20,
            view_lines: 200,
        }
    }
}

/// Ordered `(temperature, rounds)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule(pub Vec<(f64, usize)>);

impl Default for Schedule {
    fn default() -> Self {
        Schedule(vec![(0.0, 1), (1.0, 2)])
    }
}

impl Schedule {
    /// `(round, temperature)` for every rollout, rounds numbered from 1.
    pub fn rounds(&self) -> Vec<(usize, f64)> {
        self.0
            .iter()
            .flat_map(|&(t, n)| std::iter::repeat_n(t, n))
            .enumerate()
            .map(|(i, t)| (i + 1, t))
            .collect()
    }
}

const ACTIONS_HELP: &str = r#"Reply with exactly one action per message: a JSON object inside a fenced code block. Actions:
{"action": "search", "query": "text to find", "regex": false}
{"action": "view", "path": "relative/file.py", "start_line": 1, "end_line": 60}
{"action": "edit", "path": "relative/file.py", "old": "exact existing text", "new": "replacement text"}
{"action": "run_tests"}
{"action": "finish"}
"#;

/// Task statement: the failing tests and their truncated log. Nothing about
/// where the bug was introduced is included.
pub fn task_prompt(variant: &Variant, cfg: &AgentConfig) -> String {
    let mut s = String::from(
        "The repository in your working directory has a bug. The tests listed below fail. \
         Locate the cause and edit the source code so that they pass. Do not modify the tests.\n\nFailing tests:\n",
    );
    for t in &variant.failing_tests {
        let _ = writeln!(s, "- {t}");
    }
    let _ = write!(s, "\nTest log:\n{}\n\n{ACTIONS_HELP}", truncate_log(&variant.error_log, cfg.log_tokens));
    s
}

fn render(task: &str, steps: &[TrajectoryStep], parse_error: Option<&str>) -> String {
    let mut s = task.to_string();
    for st in steps {
        let action = serde_json::to_string(&st.action).expect("serializable");
        let _ = write!(s, "\n## Step {}\n```json\n{action}\n```\nObservation:\n{}\n", st.index + 1, st.observation);
    }
    if let Some(e) = parse_error {
        let _ = write!(s, "\nYour last reply was not a valid action ({e}). Send one action in a fenced JSON block.\n");
    }
    s.push_str("\nNext action:\n");
    s
}

/// One repair attempt on `variant`. The final patch is the diff of every
/// file the agent edited, against its content before the first edit.
pub fn rollout(
    ctx: &SnapshotContext<'_>,
    variant: &Variant,
    provider: &dyn Provider,
    cfg: &AgentConfig,
    round: usize,
    temperature: f64,
    seed: u64,
) -> Trajectory {
    let mut t = Trajectory {
        variant_id: variant.id.clone(),
        round,
        temperature,
        seed,
        steps: Vec::new(),
        malformed_replies: 0,
        stop_reason: StopReason::StepCap,
        final_patch: Patch::empty(),
        verified: false,
    };
    let handle = match sandbox::provision(ctx.snapshot, &[&variant.mutation_patch], ctx.executor.clone()) {
        Ok(h) => h,
        Err(e) => {
            log::warn!("rollout {} round {round}: {e}", variant.id);
            t.stop_reason = StopReason::SandboxFailure;
            return t;
        }
    };
    let env = ActionEnv {
        gathered_tests: &variant.gathered_tests,
        log_tokens: cfg.log_tokens,
        search_limit: cfg.search_limit,
        view_lines: cfg.view_lines.max(1),
    };
    let task = task_prompt(variant, cfg);
    let mut before_edit: BTreeMap<String, String> = BTreeMap::new();
    let mut calls = 0;
    let mut retries = 0;
    let mut parse_error: Option<String> = None;

    while t.steps.len() < cfg.max_steps {
        let request = Request {
            key: format!("rollout/{}/round-{round}", variant.id),
            turn: calls,
            prompt: render(&task, &t.steps, parse_error.as_deref()),
            temperature,
            max_output_tokens: cfg.max_output_tokens,
            seed: derive_seed(seed, &format!("call-{calls}")),
        };
        calls += 1;
        let reply = match provider.complete(&request) {
            Ok(r) => r,
            Err(e) => {
                log::info!("rollout {} round {round}: {e}", variant.id);
                t.stop_reason = StopReason::ProviderError;
                break;
            }
        };
        let action = match parse_action(&reply.text) {
            Ok(a) => a,
            Err(e) => {
                t.malformed_replies += 1;
                retries += 1;
                if retries > cfg.retry_cap {
                    t.stop_reason = StopReason::MalformedReplies;
                    break;
                }
                parse_error = Some(e.0);
                continue;
            }
        };
        retries = 0;
        parse_error = None;
        if let Action::Edit { path, .. } = &action {
            if !before_edit.contains_key(path) {
                if let Ok(text) = handle.read(path) {
                    before_edit.insert(path.clone(), text);
                }
            }
        }
        let observation = match execute_action(&handle, &action, &env) {
            Ok(o) => o,
            Err(ActionError::Sandbox(e)) => {
                log::warn!("rollout {} round {round}: {e}", variant.id);
                t.stop_reason = StopReason::SandboxFailure;
                break;
            }
            Err(e) => format!("error: {e}\n"),
        };
        let finished = action == Action::Finish;
        t.steps.push(TrajectoryStep {
            index: t.steps.len(),
            action,
            observation: truncate_log(&observation, cfg.log_tokens),
        });
        if finished {
            t.stop_reason = StopReason::Finished;
            break;
        }
    }

    let after: Vec<(String, Option<String>)> = before_edit.keys().map(|p| (p.clone(), handle.read(p).ok())).collect();
    let changes: Vec<FileChange<'_>> = after
        .iter()
        .map(|(p, now)| FileChange { path: p, old: Some(before_edit[p].as_str()), new: now.as_deref() })
        .collect();
    t.final_patch = Patch::from_changes(&changes);
    drop(handle);

    if t.stop_reason != StopReason::SandboxFailure && !t.final_patch.is_empty() {
        t.verified = match verify_fix(ctx, variant, &t.final_patch) {
            Ok(r) => r.passed(),
            Err(e) => {
                log::warn!("verifying rollout {} round {round}: {e}", variant.id);
                false
            }
        };
    }
    t
}

/// Every rollout in `schedule` for `variant`, verified or not. The
/// zero-temperature round uses `base_seed`; others derive their seed from
/// the variant id and round.
pub fn run_schedule(
    ctx: &SnapshotContext<'_>,
    variant: &Variant,
    provider: &dyn Provider,
    schedule: &Schedule,
    cfg: &AgentConfig,
    base_seed: u64,
) -> Vec<Trajectory> {
    schedule
        .rounds()
        .into_iter()
        .map(|(round, temperature)| {
            let seed = if temperature == 0.0 {
                base_seed
            } else {
                derive_seed(base_seed, &format!("{}/round-{round}", variant.id))
            };
            rollout(ctx, variant, provider, cfg, round, temperature, seed)
        })
        .collect()
}

/// Verified trajectories only.
pub fn rejection_sample(
    ctx: &SnapshotContext<'_>,
    variant: &Variant,
    provider: &dyn Provider,
    schedule: &Schedule,
    cfg: &AgentConfig,
    base_seed: u64,
) -> Vec<Trajectory> {
    run_schedule(ctx, variant, provider, schedule, cfg, base_seed)
        .into_iter()
        .filter(|t| t.verified)
        .collect()
}
