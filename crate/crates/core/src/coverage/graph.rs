//! Bipartite test/component coverage graph.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::report::NormalizedReport;
use crate::exec::{self, Mode};
use crate::index::{Component, ComponentIndex};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub file: String,
}

/// Edge `(t, c)` means test `t` executed at least one line of component `c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageGraph {
    pub commit_id: String,
    pub tests: Vec<TestCase>,
    pub components: Vec<String>,
    pub edges: BTreeSet<(String, String)>,
}

impl CoverageGraph {
    pub fn new(commit_id: impl Into<String>, tests: Vec<TestCase>, components: Vec<String>, edges: BTreeSet<(String, String)>) -> Self {
        let mut tests = tests;
        tests.sort();
        tests.dedup();
        let mut components = components;
        components.sort();
        components.dedup();
        debug_assert!(edges.iter().all(|(t, c)| {
            tests.iter().any(|x| &x.id == t) && components.binary_search(c).is_ok()
        }));
        CoverageGraph {
            commit_id: commit_id.into(),
            tests,
            components,
            edges,
        }
    }

    /// Number of distinct tests adjacent to `component`.
    pub fn degree(&self, component: &str) -> usize {
        self.edges.iter().filter(|(_, c)| c == component).count()
    }

    pub fn degrees(&self) -> BTreeMap<&str, usize> {
        let mut d: BTreeMap<&str, usize> = self.components.iter().map(|c| (c.as_str(), 0)).collect();
        for (_, c) in &self.edges {
            *d.entry(c.as_str()).or_default() += 1;
        }
        d
    }

    /// Tests covering `component`, sorted by id.
    pub fn tests_covering(&self, component: &str) -> Vec<&str> {
        self.edges
            .iter()
            .filter(|(_, c)| c == component)
            .map(|(t, _)| t.as_str())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Attribute every covered line to the components whose full span contains
/// it. A line inside a method also lies inside its class, so both gain the
/// edge.
pub fn build_coverage_graph(report: &NormalizedReport, index: &ComponentIndex, commit_id: &str) -> CoverageGraph {
    build_coverage_graph_with(report, index, commit_id, Mode::default())
}

pub fn build_coverage_graph_with(
    report: &NormalizedReport,
    index: &ComponentIndex,
    commit_id: &str,
    mode: Mode,
) -> CoverageGraph {
    let mut by_file: HashMap<&str, Vec<&Component>> = HashMap::new();
    for c in index.components() {
        by_file.entry(c.file.as_str()).or_default().push(c);
    }
    let per_test: Vec<Vec<(String, String)>> = exec::map(mode, &report.tests, |t| {
        let mut hits = BTreeSet::new();
        for cf in t.covered.iter().flatten() {
            let Some(comps) = by_file.get(cf.file.as_str()) else {
                continue;
            };
            for c in comps {
                let lo = c.start_line as u32;
                let hi = c.end_line as u32;
                let i = cf.lines.partition_point(|&l| l < lo);
                if cf.lines.get(i).is_some_and(|&l| l <= hi) {
                    hits.insert(c.id.clone());
                }
            }
        }
        hits.into_iter().map(|c| (t.id.clone(), c)).collect()
    });
    let tests = report
        .tests
        .iter()
        .map(|t| TestCase {
            id: t.id.clone(),
            file: t.file.clone(),
        })
        .collect();
    let components = index.components().iter().map(|c| c.id.clone()).collect();
    CoverageGraph::new(commit_id, tests, components, per_test.into_iter().flatten().collect())
}
