//! Pluggable text-completion providers.
//!
//! A request carries the prompt text, sampling parameters and a routing key
//! (`mutate/<component_id>` or `rollout/<variant_id>/round-<n>`) plus a turn
//! number. Real providers ignore the key; the scripted provider uses it to
//! select canned replies, so replies never depend on scheduling order.

#[cfg(feature = "http")]
mod http;
mod scripted;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

#[cfg(feature = "http")]
pub use http::{HttpConfig, HttpProvider};
pub use scripted::{Rule, ScriptedProvider};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub key: String,
    /// Call index within the key (attempt number or agent step).
    pub turn: usize,
    pub prompt: String,
    pub temperature: f64,
    pub max_output_tokens: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reply {
    pub text: String,
    /// Provider-assigned identifier, when one is returned.
    pub request_id: Option<String>,
}

/// Who produced a reply and how; recorded with every generated body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderMeta {
    pub provider: String,
    pub temperature: f64,
    pub seed: u64,
    pub request_id: Option<String>,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("invalid response: {0}")]
    Invalid(String),
    #[error("no scripted reply for {key} turn {turn} (prompt sha256 {prompt_hash})")]
    Unscripted { key: String, turn: usize, prompt_hash: String },
    #[error("provider configuration: {0}")]
    Config(String),
}

pub trait Provider: Send + Sync {
    /// Stable identifier recorded in provenance.
    fn id(&self) -> String;
    fn complete(&self, request: &Request) -> Result<Reply, ProviderError>;
}

impl ProviderMeta {
    pub fn new(provider: &dyn Provider, request: &Request, reply: &Reply) -> Self {
        ProviderMeta {
            provider: provider.id(),
            temperature: request.temperature,
            seed: request.seed,
            request_id: reply.request_id.clone(),
        }
    }
}

/// Provider section of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderConfig {
    Mock {
        /// Directory of reply fixtures (`<sha256>.txt`, `<sha256>.json`,
        /// `rules.json`).
        #[serde(default)]
        dir: Option<PathBuf>,
        #[serde(default)]
        rules: Vec<Rule>,
    },
    #[cfg(feature = "http")]
    Http(HttpConfig),
}

impl ProviderConfig {
    pub fn build(&self) -> Result<Arc<dyn Provider>, ProviderError> {
        match self {
            ProviderConfig::Mock { dir, rules } => {
                let mut p = match dir {
                    Some(d) => ScriptedProvider::from_dir(d)?,
                    None => ScriptedProvider::new(Vec::new()),
                };
                p.extend(rules.iter().cloned());
                Ok(Arc::new(p))
            }
            #[cfg(feature = "http")]
            ProviderConfig::Http(cfg) => Ok(Arc::new(HttpProvider::new(cfg.clone())?)),
        }
    }
}
