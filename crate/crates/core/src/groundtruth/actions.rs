use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::mutator::first_fenced_block;
use crate::patch::{check_path, mini_diff};
use crate::sandbox::{truncate_log, SandboxError, SandboxHandle, TestSelection};

/// One agent action, as sent by the provider inside a fenced JSON block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    Search {
        query: String,
        #[serde(default)]
        regex: bool,
    },
    View {
        path: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start_line: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        end_line: Option<usize>,
    },
    Edit {
        path: String,
        old: String,
        new: String,
    },
    RunTests,
    Finish,
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Search { .. } => "search",
            Action::View { .. } => "view",
            Action::Edit { .. } => "edit",
            Action::RunTests => "run_tests",
            Action::Finish => "finish",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct StepParseFailure(pub String);

pub fn parse_action(reply: &str) -> Result<Action, StepParseFailure> {
    let (_, block) = first_fenced_block(reply).ok_or_else(|| StepParseFailure("no fenced action block".into()))?;
    serde_json::from_str(block.trim()).map_err(|e| StepParseFailure(format!("invalid action: {e}")))
}

#[derive(Debug, thiserror::Error)]
pub enum ActionError {
    #[error("edit anchor not found in {0}")]
    EditAnchorNotFound(String),
    #[error("edit anchor occurs {count} times in {path}; include more context")]
    AmbiguousAnchor { path: String, count: usize },
    #[error("line {line} is out of range for {path} ({len} lines)")]
    ViewOutOfRange { path: String, line: usize, len: usize },
    #[error("cannot read {path}: {reason}")]
    Unreadable { path: String, reason: String },
    #[error("invalid path {0}")]
    BadPath(String),
    #[error("invalid search pattern: {0}")]
    BadPattern(String),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
}

/// What an action may touch beyond the workdir.
pub struct ActionEnv<'a> {
    pub gathered_tests: &'a [String],
    pub log_tokens: usize,
    pub search_limit: usize,
    pub view_lines: usize,
}

const SKIP_DIRS: &[&str] = &[".git", "__pycache__", ".pytest_cache"];

/// Run `action` in `handle`. Recoverable failures are errors the caller
/// turns into observations; only [`ActionError::Sandbox`] is fatal.
pub fn execute_action(handle: &SandboxHandle, action: &Action, env: &ActionEnv<'_>) -> Result<String, ActionError> {
    match action {
        Action::Search { query, regex } => search(handle, query, *regex, env.search_limit),
        Action::View { path, start_line, end_line } => {
            let text = read(handle, path)?;
            let lines: Vec<&str> = text.lines().collect();
            let start = start_line.unwrap_or(1).max(1);
            if start > lines.len().max(1) {
                return Err(ActionError::ViewOutOfRange { path: path.clone(), line: start, len: lines.len() });
            }
            let end = end_line.unwrap_or(start + env.view_lines - 1).min(lines.len());
            let mut out = String::new();
            for (n, line) in lines.iter().enumerate().take(end).skip(start - 1) {
                let _ = writeln!(out, "{:>5} | {line}", n + 1);
            }
            Ok(out)
        }
        Action::Edit { path, old, new } => {
            let before = read(handle, path)?;
            let count = if old.is_empty() { 0 } else { before.matches(old.as_str()).count() };
            match count {
                0 => Err(ActionError::EditAnchorNotFound(path.clone())),
                1 => {
                    let after = before.replacen(old.as_str(), new, 1);
                    handle.write(path, &after).map_err(|e| ActionError::Unreadable { path: path.clone(), reason: e.to_string() })?;
                    Ok(mini_diff(path, &before, &after))
                }
                n => Err(ActionError::AmbiguousAnchor { path: path.clone(), count: n }),
            }
        }
        Action::RunTests => {
            let result = handle.run_tests(&TestSelection::Only(env.gathered_tests.to_vec()))?;
            let mut out = format!("{} of {} tests failing", result.failing.len(), env.gathered_tests.len());
            for t in &result.failing {
                let _ = write!(out, "\n  {t}");
            }
            out.push('\n');
            out.push_str(&truncate_log(&result.log, env.log_tokens));
            Ok(out)
        }
        Action::Finish => Ok(String::new()),
    }
}

fn read(handle: &SandboxHandle, path: &str) -> Result<String, ActionError> {
    check_path(path).map_err(|_| ActionError::BadPath(path.to_string()))?;
    handle.read(path).map_err(|e| ActionError::Unreadable { path: path.to_string(), reason: e.to_string() })
}

/// Lexical search ranked by matches per file, then path.
fn search(handle: &SandboxHandle, query: &str, is_regex: bool, limit: usize) -> Result<String, ActionError> {
    let pattern = if is_regex { query.to_string() } else { regex::escape(query) };
    let re = regex::Regex::new(&pattern).map_err(|e| ActionError::BadPattern(e.to_string()))?;
    let root = handle.workdir();
    let mut hits: BTreeMap<String, Vec<(usize, String)>> = BTreeMap::new();
    let walker = WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !SKIP_DIRS.iter().any(|s| e.file_name() == *s));
    for entry in walker.filter_map(Result::ok).filter(|e| e.file_type().is_file()) {
        let Ok(text) = std::fs::read_to_string(entry.path()) else { continue };
        let rel = entry.path().strip_prefix(root).expect("under root").to_string_lossy().replace('\\', "/");
        for (i, line) in text.lines().enumerate() {
            if re.is_match(line) {
                let snippet: String = line.trim().chars().take(160).collect();
                hits.entry(rel.clone()).or_default().push((i + 1, snippet));
            }
        }
    }
    if hits.is_empty() {
        return Ok(format!("no matches for {query:?}\n"));
    }
    let mut ranked: Vec<(String, Vec<(usize, String)>)> = hits.into_iter().collect();
    ranked.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(&b.0)));
    let mut out = String::new();
    let mut shown = 0;
    'files: for (file, lines) in &ranked {
        for (n, snippet) in lines {
            if shown == limit {
                let total: usize = ranked.iter().map(|r| r.1.len()).sum();
                let _ = writeln!(out, "... {} more matches", total - shown);
                break 'files;
            }
            let _ = writeln!(out, "{file}:{n}: {snippet}");
            shown += 1;
        }
    }
    Ok(out)
}
