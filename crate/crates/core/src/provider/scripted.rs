use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::{Provider, ProviderError, Reply, Request};
use crate::hashing::sha256_hex;

/// Canned replies for requests matching every given condition.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    /// Substring of the request key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    /// Substring of the prompt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_sha256: Option<String>,
    /// Reply for turn `i` is `replies[i]`; later turns repeat the last one
    /// when `repeat_last` is set and fail otherwise.
    pub replies: Vec<String>,
    #[serde(default)]
    pub repeat_last: bool,
}

impl Rule {
    fn matches(&self, req: &Request, prompt_hash: &str) -> bool {
        self.key.as_ref().is_none_or(|k| req.key.contains(k.as_str()))
            && self.contains.as_ref().is_none_or(|c| req.prompt.contains(c.as_str()))
            && self.prompt_sha256.as_ref().is_none_or(|h| h == prompt_hash)
    }

    fn reply(&self, turn: usize) -> Option<&String> {
        self.replies
            .get(turn)
            .or_else(|| if self.repeat_last { self.replies.last() } else { None })
    }
}

/// Deterministic provider for tests and offline runs. Replies depend only on
/// the request, never on call order.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    by_hash: BTreeMap<String, Vec<String>>,
    rules: Vec<Rule>,
    calls: AtomicUsize,
}

impl ScriptedProvider {
    pub fn new(rules: Vec<Rule>) -> Self {
        ScriptedProvider { rules, ..Default::default() }
    }

    /// Load `<prompt sha256>.txt` (one reply for every turn),
    /// `<prompt sha256>.json` (array of replies by turn) and an optional
    /// `rules.json` (array of [`Rule`]).
    pub fn from_dir(dir: &Path) -> Result<Self, ProviderError> {
        let cfg = |e: String| ProviderError::Config(format!("{}: {e}", dir.display()));
        let mut p = ScriptedProvider::default();
        let entries = std::fs::read_dir(dir).map_err(|e| cfg(e.to_string()))?;
        let mut paths: Vec<_> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for path in paths {
            let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let text = || std::fs::read_to_string(&path).map_err(|e| cfg(e.to_string()));
            if name == "rules.json" {
                let rules: Vec<Rule> = serde_json::from_str(&text()?).map_err(|e| cfg(e.to_string()))?;
                p.rules.extend(rules);
            } else if let Some(hash) = name.strip_suffix(".txt") {
                p.by_hash.insert(hash.to_string(), vec![text()?]);
            } else if let Some(hash) = name.strip_suffix(".json") {
                let replies: Vec<String> = serde_json::from_str(&text()?).map_err(|e| cfg(e.to_string()))?;
                p.by_hash.insert(hash.to_string(), replies);
            }
        }
        Ok(p)
    }

    pub fn extend(&mut self, rules: impl IntoIterator<Item = Rule>) {
        self.rules.extend(rules);
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Provider for ScriptedProvider {
    fn id(&self) -> String {
        "scripted".into()
    }

    fn complete(&self, req: &Request) -> Result<Reply, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let hash = sha256_hex(&req.prompt);
        let text = match self.by_hash.get(&hash) {
            Some(replies) if replies.len() == 1 => Some(&replies[0]),
            Some(replies) => replies.get(req.turn),
            None => self.rules.iter().find(|r| r.matches(req, &hash)).and_then(|r| r.reply(req.turn)),
        };
        match text {
            Some(t) => Ok(Reply { text: t.clone(), request_id: None }),
            None => Err(ProviderError::Unscripted { key: req.key.clone(), turn: req.turn, prompt_hash: hash }),
        }
    }
}
