//! Synthesis of test-verifiable bug variants and verified repair data.
//!
//! The pipeline indexes a well-tested repository into components, masks one
//! component at a time, asks a language model to re-implement it, and keeps
//! only the variants that still parse but fail at least one test. For every
//! retained variant it extracts a verified fix, either as the reverse diff
//! back to the pristine code or as an agent rollout whose final patch passes
//! the gathered tests, and assembles the result into a dataset.
//!
//! Modules follow the pipeline order:
//!
//! - [`index`]: parse a snapshot into components, mask and splice them.
//! - [`coverage`]: test/component coverage graph, selection distributions, cache.
//! - [`mutator`]: prompts, reply parsing and the variant synthesis loop.
//! - [`sandbox`]: isolated working copies, test execution and classification.
//! - [`groundtruth`]: reverse patches, agent rollouts, rejection sampling, capping.
//! - [`dataset`]: records, statistics and export.
//! - [`pipeline`]: run configuration and resumable stage orchestration.

pub mod coverage;
pub mod dataset;
pub mod exec;
pub mod groundtruth;
pub mod hashing;
pub mod index;
pub mod mutator;
pub mod patch;
pub mod pipeline;
pub mod profile;
pub mod provider;
pub mod sandbox;
pub mod tokens;

#[cfg(test)]
mod testutil;

pub use coverage::{CoverageGraph, SelectionDistribution, Strategy};
pub use index::{Component, ComponentIndex, ComponentKind, MaskedSource, RepoSnapshot};
pub use patch::Patch;
pub use profile::LanguageProfile;

/// Version string recorded in dataset manifests.
pub const PIPELINE_VERSION: &str = env!("CARGO_PKG_VERSION");
