use std::collections::BTreeMap;

use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::report::{CoveredFile, TestEntry, SCHEMA_VERSION};
use super::*;
use crate::index::{components_in_source, index_repository, ComponentIndex, RepoSnapshot};
use crate::sandbox::provision;
use crate::testutil::{executor, fixture_profile, fixture_root};

const MODULE: &str = "import os\n\ndef f1():\n    return 1\n\ndef f2():\n    return 2\n\nclass K:\n    def m(self):\n        return 3\n";

fn module_index() -> ComponentIndex {
    ComponentIndex::from_components(components_in_source("m.py", MODULE, false).unwrap(), vec![])
}

fn id_of(index: &ComponentIndex, name: &str) -> String {
    index.components().iter().find(|c| c.short_name() == name).unwrap().id.clone()
}

fn entry(id: &str, lines: &[u32]) -> TestEntry {
    TestEntry {
        id: id.into(),
        file: "tests/test_m.py".into(),
        outcome: Outcome::Pass,
        duration_s: 0.0,
        covered: Some(vec![CoveredFile { file: "m.py".into(), lines: lines.to_vec() }]),
    }
}

fn report(tests: Vec<TestEntry>) -> NormalizedReport {
    NormalizedReport { schema_version: SCHEMA_VERSION, tests, log: String::new() }
}

/// Index over `n` functions named `c0..c{n-1}`, one per line pair.
fn flat_index(n: usize) -> ComponentIndex {
    let src: String = (0..n).map(|i| format!("def c{i}():\n    return {i}\n")).collect();
    ComponentIndex::from_components(components_in_source("m.py", &src, false).unwrap(), vec![])
}

/// Graph giving component `ci` exactly `degrees[i]` covering tests.
fn graph_with_degrees(index: &ComponentIndex, degrees: &[usize]) -> CoverageGraph {
    let mut tests = Vec::new();
    let mut edges = std::collections::BTreeSet::new();
    for (i, d) in degrees.iter().enumerate() {
        for k in 0..*d {
            let t = format!("t{k}");
            edges.insert((t.clone(), index.components()[i].id.clone()));
            tests.push(t);
        }
    }
    tests.sort();
    tests.dedup();
    CoverageGraph::new(
        "c",
        tests.into_iter().map(|id| TestCase { id, file: "t.py".into() }).collect(),
        index.components().iter().map(|c| c.id.clone()).collect(),
        edges,
    )
}

#[test]
fn disjoint_coverage() {
    let index = module_index();
    let g = build_coverage_graph(&report(vec![entry("t1", &[4]), entry("t2", &[7])]), &index, "c");
    let (f1, f2) = (id_of(&index, "f1"), id_of(&index, "f2"));
    let expected: std::collections::BTreeSet<(String, String)> =
        [("t1".to_string(), f1.clone()), ("t2".to_string(), f2.clone())].into();
    assert_eq!(g.edges, expected);
    assert_eq!((g.degree(&f1), g.degree(&f2)), (1, 1));
}

#[test]
fn shared_coverage_degrees() {
    let index = module_index();
    let g = build_coverage_graph(&report(vec![entry("t1", &[4, 7]), entry("t2", &[7])]), &index, "c");
    assert_eq!(g.degree(&id_of(&index, "f1")), 1);
    assert_eq!(g.degree(&id_of(&index, "f2")), 2);
}

#[test]
fn module_level_lines_add_no_edges() {
    let index = module_index();
    let g = build_coverage_graph(&report(vec![entry("t3", &[1, 2, 5, 8])]), &index, "c");
    assert!(g.edges.is_empty());
    assert_eq!(g.tests.len(), 1);
}

#[test]
fn def_lines_and_methods_credit_their_spans() {
    let index = module_index();
    let g = build_coverage_graph(&report(vec![entry("t1", &[3]), entry("t2", &[11])]), &index, "c");
    assert_eq!(g.degree(&id_of(&index, "f1")), 1);
    assert_eq!(g.degree(&id_of(&index, "m")), 1);
    assert_eq!(g.degree(&id_of(&index, "K")), 1);
    assert_eq!(g.tests_covering(&id_of(&index, "K")), vec!["t2"]);
}

#[test]
fn graph_build_is_deterministic_across_modes() {
    let index = module_index();
    let r = report(vec![entry("t1", &[4, 7, 11]), entry("t2", &[7]), entry("t3", &[1])]);
    let a = build_coverage_graph_with(&r, &index, "c", crate::exec::Mode::Sequential);
    let b = build_coverage_graph_with(&r, &index, "c", crate::exec::Mode::Parallel);
    assert_eq!(a, b);
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn weighted_normalization_is_exact() {
    let index = flat_index(3);
    let g = graph_with_degrees(&index, &[3, 1, 0]);
    let d = make_distribution(&index, Some(&g), Strategy::CoverageWeighted).unwrap();
    let w: Vec<f64> = d.weights.iter().map(|(_, w)| *w).collect();
    assert_eq!(w, vec![0.75, 0.25, 0.0]);
}

#[test]
fn uniform_and_symmetric_weights() {
    let index = flat_index(4);
    let u = make_distribution(&index, None, Strategy::Uniform).unwrap();
    assert!(u.weights.iter().all(|(_, w)| *w == 0.25));
    let g = graph_with_degrees(&index, &[2, 2, 2, 2]);
    let c = make_distribution(&index, Some(&g), Strategy::CoverageWeighted).unwrap();
    assert_eq!(c.weights, u.weights);
}

#[test]
fn degenerate_and_missing_graphs() {
    let index = flat_index(2);
    let g = graph_with_degrees(&index, &[0, 0]);
    assert_eq!(make_distribution(&index, Some(&g), Strategy::CoverageWeighted), Err(SelectionError::DegenerateGraph));
    assert_eq!(make_distribution(&index, None, Strategy::CoverageWeighted), Err(SelectionError::MissingGraph));
    assert!(make_distribution(&index, Some(&g), Strategy::Uniform).is_ok());
}

#[test]
fn point_mass_always_wins() {
    let index = flat_index(1);
    let d = make_distribution(&index, None, Strategy::Uniform).unwrap();
    for seed in 0..100 {
        assert_eq!(sample_component(&d, seed), index.components()[0].id);
    }
}

#[test]
fn sampling_is_reproducible() {
    let index = flat_index(5);
    let d = make_distribution(&index, None, Strategy::Uniform).unwrap();
    let draws = |seed: u64| (0..20u64).map(|i| sample_component(&d, seed + i).to_string()).collect::<Vec<_>>();
    assert_eq!(draws(7), draws(7));
}

#[test]
fn draws_fit_the_weights() {
    let index = flat_index(3);
    let g = graph_with_degrees(&index, &[3, 1, 0]);
    let d = make_distribution(&index, Some(&g), Strategy::CoverageWeighted).unwrap();
    let sampler = d.sampler();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 10_000;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for _ in 0..n {
        *counts.entry(sampler.draw(&mut rng)).or_default() += 1;
    }
    let ids: Vec<&str> = index.components().iter().map(|c| c.id.as_str()).collect();
    assert_eq!(counts.get(ids[2]), None, "zero-weight component drawn");
    let freq_a = counts[ids[0]] as f64 / n as f64;
    assert!((freq_a - 0.75).abs() <= 0.02, "{freq_a}");

    let expected = [0.75 * n as f64, 0.25 * n as f64];
    let stat: f64 = [counts[ids[0]], counts[ids[1]]]
        .iter()
        .zip(expected)
        .map(|(&o, e)| (o as f64 - e).powi(2) / e)
        .sum();
    let critical = ChiSquared::new(1.0).unwrap().inverse_cdf(0.99);
    assert!(stat < critical, "chi2 {stat} >= {critical}");
}

fn key(commit: &str) -> CacheKey {
    CacheKey { commit_id: commit.into(), profile_id: "p".into(), adapter_version: "1".into() }
}

#[test]
fn cache_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cache = CoverageCache::new(dir.path());
    let r = report(vec![entry("t2", &[7]), entry("t1", &[4])]);
    assert_eq!(cache.lookup(&key("a")), Lookup::Miss);
    cache.store(&key("a"), &r).unwrap();
    assert_eq!(cache.lookup(&key("a")), Lookup::Hit(r.normalized()));
    assert_eq!(cache.lookup(&key("b")), Lookup::Miss);
    let other_adapter = CacheKey { adapter_version: "2".into(), ..key("a") };
    assert_eq!(cache.lookup(&other_adapter), Lookup::Miss);
}

#[test]
fn corrupt_entries_are_evicted() {
    let dir = tempfile::tempdir().unwrap();
    let cache = CoverageCache::new(dir.path());
    let path = cache.store(&key("a"), &report(vec![entry("t1", &[4])])).unwrap();
    let text = std::fs::read_to_string(&path).unwrap().replace("\"t1\"", "\"tX\"");
    std::fs::write(&path, text).unwrap();
    assert_eq!(cache.lookup(&key("a")), Lookup::Corrupt);
    assert!(!path.exists());
    assert_eq!(cache.lookup(&key("a")), Lookup::Miss);
}

#[test]
fn cached_graph_collects_once() {
    let dir = tempfile::tempdir().unwrap();
    let cache = CoverageCache::new(dir.path());
    let index = module_index();
    let calls = std::cell::Cell::new(0);
    let collect = || {
        calls.set(calls.get() + 1);
        Ok::<_, CoverageError>(report(vec![entry("t1", &[4, 7]), entry("t2", &[7])]))
    };
    let first = cache.cached_graph(&key("a"), &index, collect).unwrap();
    let second = cache.cached_graph(&key("a"), &index, collect).unwrap();
    assert_eq!(calls.get(), 1);
    assert_eq!(first.to_json(), second.to_json());
}

#[test]
fn fixture_coverage_matches_hand_enumeration() {
    let snap = RepoSnapshot::new(fixture_root(), "fixture", fixture_profile()).unwrap();
    let index = index_repository(&snap).unwrap();
    let handle = provision(&snap, &[], executor()).unwrap();
    let report = collect_coverage(&handle, &Default::default()).unwrap();
    let g = build_coverage_graph(&report, &index, "fixture");
    let deg = |name: &str| g.degree(&id_of(&index, name));
    assert_eq!(g.tests.len(), 7);
    assert_eq!(deg("decode"), 2);
    assert_eq!(deg("encode"), 2);
    assert_eq!(deg("get_json_format"), 1);
    assert_eq!(deg("Base64Encoder"), 4);
    assert_eq!(deg("DecodeError"), 0);
    assert_eq!((deg("clamp"), deg("window_sums"), deg("mean")), (1, 1, 1));
    assert_eq!(
        g.tests_covering(&id_of(&index, "encode")),
        vec!["tests/test_codec.py::test_construct_nested", "tests/test_codec.py::test_roundtrip"]
    );
}

#[test]
fn failing_baseline_is_rejected() {
    let snap = RepoSnapshot::new(fixture_root(), "fixture", fixture_profile()).unwrap();
    let old = snap.read("pkg/mathutil.py").unwrap();
    let patch = crate::Patch::between("pkg/mathutil.py", &old, &old.replace("sum(values) / len(values)", "0"));
    let handle = provision(&snap, &[&patch], executor()).unwrap();
    let failing = "tests/test_mathutil.py::test_mean".to_string();
    assert!(matches!(collect_coverage(&handle, &Default::default()), Err(CoverageError::FlakyBaseline(v)) if v == vec![failing.clone()]));
    assert!(collect_coverage(&handle, &[failing].into()).is_ok());
}

proptest! {
    #[test]
    fn weights_sum_to_one(degrees in prop::collection::vec(0usize..50, 1..40)) {
        let index = flat_index(degrees.len());
        let uniform = make_distribution(&index, None, Strategy::Uniform).unwrap();
        let s: f64 = uniform.weights.iter().map(|(_, w)| w).sum();
        prop_assert!((s - 1.0).abs() <= 1e-12);
        let g = graph_with_degrees(&index, &degrees);
        match make_distribution(&index, Some(&g), Strategy::CoverageWeighted) {
            Ok(d) => {
                let s: f64 = d.weights.iter().map(|(_, w)| w).sum();
                prop_assert!((s - 1.0).abs() <= 1e-12);
                for (i, a) in degrees.iter().enumerate() {
                    for (j, b) in degrees.iter().enumerate() {
                        if a > b {
                            prop_assert!(d.weights[i].1 > d.weights[j].1);
                        }
                    }
                    prop_assert_eq!(d.weights[i].1 == 0.0, *a == 0);
                }
            }
            Err(e) => {
                prop_assert_eq!(e, SelectionError::DegenerateGraph);
                prop_assert!(degrees.iter().all(|d| *d == 0));
            }
        }
    }

    #[test]
    fn graph_build_is_pure(lines in prop::collection::vec(prop::collection::vec(1u32..12, 0..6), 0..5)) {
        let index = module_index();
        let tests: Vec<TestEntry> = lines.iter().enumerate().map(|(i, l)| {
            let mut l = l.clone();
            l.sort();
            l.dedup();
            entry(&format!("t{i}"), &l)
        }).collect();
        let r = report(tests);
        prop_assert_eq!(build_coverage_graph(&r, &index, "c"), build_coverage_graph(&r, &index, "c"));
    }
}
