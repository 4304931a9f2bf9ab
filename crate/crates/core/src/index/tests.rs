use super::*;
use crate::testutil::{fixture_profile, fixture_root};

fn snapshot_of(files: &[(&str, &str)]) -> (tempfile::TempDir, RepoSnapshot) {
    let dir = tempfile::tempdir().unwrap();
    for (rel, text) in files {
        let p = dir.path().join(rel);
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(p, text).unwrap();
    }
    let snap = RepoSnapshot::new(dir.path(), "test", fixture_profile()).unwrap();
    (dir, snap)
}

fn components(src: &str) -> Vec<Component> {
    components_in_source("m.py", src, false).expect("parses")
}

#[test]
fn class_with_three_methods_yields_four_components() {
    let snap = RepoSnapshot::new(fixture_root(), "fixture", fixture_profile()).unwrap();
    let index = index_repository(&snap).unwrap();
    let codec: Vec<&Component> = index.in_file("pkg/codec.py").collect();
    let kinds: Vec<(&str, ComponentKind)> = codec.iter().map(|c| (c.name.as_str(), c.kind)).collect();
    assert_eq!(
        kinds,
        [
            ("DecodeError", ComponentKind::Class),
            ("Base64Encoder", ComponentKind::Class),
            ("Base64Encoder.decode", ComponentKind::Method),
            ("Base64Encoder.encode", ComponentKind::Method),
            ("Base64Encoder.get_json_format", ComponentKind::Method),
        ]
    );
    let encoder = index.get("pkg/codec.py::Base64Encoder#class").unwrap();
    let methods: Vec<_> = codec.iter().filter(|c| c.enclosing.as_deref() == Some(encoder.id.as_str())).collect();
    assert_eq!(methods.len(), 3);
    assert!(methods.iter().all(|m| m.kind == ComponentKind::Method));
}

#[test]
fn single_class_file_indexes_class_and_methods() {
    let src = "class Base64Encoder:\n    \"\"\"Doc.\"\"\"\n\n    @classmethod\n    def decode(cls, data):\n        return data\n\n    @classmethod\n    def encode(cls, value):\n        return value\n\n    @classmethod\n    def get_json_format(cls):\n        return 'base64'\n";
    let (_d, snap) = snapshot_of(&[("codec.py", src)]);
    let index = index_repository(&snap).unwrap();
    assert_eq!(index.len(), 4);
    assert_eq!(index.components().iter().filter(|c| c.kind == ComponentKind::Class).count(), 1);
    assert_eq!(index.components().iter().filter(|c| c.kind == ComponentKind::Method).count(), 3);
}

#[test]
fn empty_directory_is_empty_index() {
    let dir = tempfile::tempdir().unwrap();
    let snap = RepoSnapshot::new(dir.path(), "x", fixture_profile()).unwrap();
    assert!(matches!(index_repository(&snap), Err(IndexError::EmptyIndex(_))));
}

#[test]
fn broken_file_is_skipped_and_reported() {
    let (_d, snap) = snapshot_of(&[
        ("bad.py", "def broken(:\n    pass\n"),
        ("good.py", "def f(x):\n    return x\n\n\ndef g(y):\n    return y * 2\n"),
    ]);
    let index = index_repository(&snap).unwrap();
    assert_eq!(index.len(), 2);
    assert_eq!(
        index.report,
        vec![
            IndexReportEntry {
                file: "bad.py".into(),
                component_count: None,
                skip_reason: Some("unparsable: syntax error".into()),
            },
            IndexReportEntry {
                file: "good.py".into(),
                component_count: Some(2),
                skip_reason: None,
            },
        ]
    );
    assert_eq!(
        index.report_jsonl(),
        "{\"file\":\"bad.py\",\"skip_reason\":\"unparsable: syntax error\"}\n{\"file\":\"good.py\",\"component_count\":2}\n"
    );
}

#[test]
fn oversized_files_are_excluded() {
    let big = format!("def f():\n    return 1\n{}", "# pad\n".repeat(40_000));
    let (_d, snap) = snapshot_of(&[("big.py", &big), ("small.py", "def g():\n    return 2\n")]);
    let index = index_repository(&snap).unwrap();
    assert_eq!(index.len(), 1);
    assert!(index.report[0].skip_reason.as_deref().unwrap().contains("exceeds cap"));
}

#[test]
fn reindexing_is_deterministic() {
    let snap = RepoSnapshot::new(fixture_root(), "fixture", fixture_profile()).unwrap();
    let a = index_repository_with(&snap, crate::exec::Mode::Parallel).unwrap();
    let b = index_repository_with(&snap, crate::exec::Mode::Sequential).unwrap();
    assert_eq!(a.to_jsonl(), b.to_jsonl());
    assert_eq!(a.report_jsonl(), b.report_jsonl());
    let back = ComponentIndex::from_jsonl(&a.to_jsonl(), &a.report_jsonl()).unwrap();
    assert_eq!(back, a);
}

#[test]
fn spans_and_signatures() {
    let src = "@decorate\ndef f(a,\n      b):  # note\n    \"\"\"Doc.\"\"\"\n    x = a + b\n    return x\n";
    let cs = components(src);
    assert_eq!(cs.len(), 1);
    let f = &cs[0];
    assert_eq!(f.signature, "@decorate\ndef f(a,\n      b):");
    assert_eq!(f.docstring, "\"\"\"Doc.\"\"\"");
    assert_eq!(f.original_body(src), "    x = a + b\n    return x");
    assert!(f.span.contains(&f.body_span));
    assert_eq!((f.start_line, f.end_line), (1, 6));
}

#[test]
fn nested_functions_follow_profile_flag() {
    let src = "def outer():\n    def inner():\n        return 1\n    return inner()\n\nclass A:\n    class B:\n        def m(self):\n            return 2\n";
    let off = components_in_source("m.py", src, false).unwrap();
    let names: Vec<_> = off.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["outer", "A"]);
    let on = components_in_source("m.py", src, true).unwrap();
    let names: Vec<_> = on.iter().map(|c| (c.name.as_str(), c.kind)).collect();
    assert_eq!(
        names,
        [
            ("outer", ComponentKind::Function),
            ("outer.inner", ComponentKind::Function),
            ("A", ComponentKind::Class),
            ("A.B", ComponentKind::Class),
            ("A.B.m", ComponentKind::Method),
        ]
    );
    assert_eq!(on[1].enclosing.as_deref(), Some("m.py::outer#function"));
}

#[test]
fn duplicate_names_get_distinct_ids() {
    let src = "class A:\n    @property\n    def x(self):\n        return self._x\n\n    @x.setter\n    def x(self, v):\n        self._x = v\n";
    let cs = components(src);
    let ids: Vec<_> = cs.iter().map(|c| c.id.as_str()).collect();
    assert_eq!(ids, ["m.py::A#class", "m.py::A.x#method", "m.py::A.x#method@2"]);
}

#[test]
fn definitions_under_module_level_blocks_are_top_level() {
    let src = "import sys\nif sys.version_info >= (3,):\n    def f():\n        return 1\nelse:\n    def f():\n        return 2\n";
    let cs = components(src);
    assert_eq!(cs.len(), 2);
    assert!(cs.iter().all(|c| c.kind == ComponentKind::Function && c.enclosing.is_none()));
}

fn mask_in(src: &str, id: &str) -> (Component, MaskedSource) {
    let cs = components(src);
    let c = cs.into_iter().find(|c| c.id == id).unwrap();
    let m = mask_source(src, &c, false).unwrap();
    (c, m)
}

const CODEC: &str = include_str!("../../tests/fixtures/repo/pkg/codec.py");

#[test]
fn masking_a_method_keeps_interface_and_siblings() {
    let (c, m) = mask_in(CODEC, "m.py::Base64Encoder.encode#method");
    assert!(python::parses(&m.text));
    assert!(m.text.contains(&c.signature));
    assert!(m.text.contains(&c.docstring));
    assert!(!m.text.contains("base64.encodebytes(value)"));
    assert!(m.text.contains(&format!("{PLACEHOLDER_TAG} {}", c.id)));
    // bytes before and after the masked region are the original ones
    assert_eq!(&m.text[..c.replace_span.start], &CODEC[..c.replace_span.start]);
    let tail = &CODEC[c.replace_span.end..];
    assert!(m.text.ends_with(tail));
    assert!(m.text.contains("return base64.decodebytes(data)"));
    assert!(m.text.contains("return 'base64'"));
}

#[test]
fn masking_a_class_clears_every_method() {
    let cs = components(CODEC);
    let (class, m) = mask_in(CODEC, "m.py::Base64Encoder#class");
    assert!(python::parses(&m.text));
    for member in cs.iter().filter(|x| x.enclosing.as_deref() == Some(class.id.as_str())) {
        assert!(m.text.contains(&member.signature), "{}", member.signature);
        assert!(m.text.contains(&member.docstring));
        assert!(!m.text.contains(member.original_body(CODEC)));
    }
    assert!(m.text.contains(&class.docstring));
    assert!(m.text.contains("format_name = 'base64'"));
    assert_eq!(m.text.matches(PLACEHOLDER_TAG).count(), 3);
    // class body span is the hull of member bodies
    assert!(class.body_span.start > CODEC.find("format_name").unwrap());
    assert_eq!(class.body_span.end, class.replace_span.end);
}

#[test]
fn minimal_body_masks_to_placeholder() {
    let src = "def f():\n    return 1\n";
    let (c, m) = mask_in(src, "m.py::f#function");
    assert_eq!(m.text, format!("def f():\n    pass  # {PLACEHOLDER_TAG} {}\n", c.id));
    assert!(python::parses(&m.text));
}

#[test]
fn component_without_docstring_keeps_signature_only() {
    let (c, m) = mask_in("def f(a):\n    return a\n", "m.py::f#function");
    assert!(c.docstring.is_empty());
    assert_eq!(m.preserved.docstring, "");
    assert!(m.text.starts_with("def f(a):\n"));
}

#[test]
fn identity_splice_reproduces_source() {
    for c in components(CODEC) {
        let m = mask_source(CODEC, &c, false).unwrap();
        assert_eq!(splice(&m, c.original_body(CODEC)), CODEC, "{}", c.id);
    }
    let math = include_str!("../../tests/fixtures/repo/pkg/mathutil.py");
    for c in components(math) {
        let m = mask_source(math, &c, false).unwrap();
        assert_eq!(splice(&m, c.original_body(math)), math, "{}", c.id);
    }
}

#[test]
fn inline_and_docstring_only_bodies() {
    let src = "def f(): return 1\n\n\ndef g():\n    \"\"\"Only doc.\"\"\"\n\n\ndef h(): \"\"\"d\"\"\"; return 3\n";
    let cs = components(src);
    let f = &cs[0];
    assert_eq!(f.original_body(src), "return 1");
    let mf = mask_source(src, f, false).unwrap();
    assert!(python::parses(&mf.text));
    assert_eq!(splice(&mf, "return 1"), src);
    let multi = splice(&mf, "    x = 2\n    return x\n");
    assert!(multi.starts_with("def f(): \n    x = 2\n    return x\n"));
    assert!(python::parses(&multi));

    let g = &cs[1];
    assert!(g.replace_span.is_empty());
    let mg = mask_source(src, g, false).unwrap();
    assert!(python::parses(&mg.text));
    assert!(mg.text.contains("\"\"\"Only doc.\"\"\"\n    pass  #"));
    let filled = splice(&mg, "return 7");
    assert!(filled.contains("\"\"\"Only doc.\"\"\"\n    return 7\n"));
    assert!(python::parses(&filled));

    let h = &cs[2];
    assert_eq!(h.docstring, "\"\"\"d\"\"\"");
    assert_eq!(h.original_body(src), "return 3");
    let mh = mask_source(src, h, false).unwrap();
    assert!(python::parses(&mh.text));
    assert_eq!(splice(&mh, "return 3"), src);
}

#[test]
fn splice_changes_only_the_placeholder_region() {
    let math = include_str!("../../tests/fixtures/repo/pkg/mathutil.py");
    let cs = components(math);
    let clamp = cs.iter().find(|c| c.name == "clamp").unwrap();
    let m = mask_source(math, clamp, false).unwrap();
    let out = splice(&m, "return max(low, min(value, high))");
    let diff = similar::TextDiff::from_lines(math, out.as_str());
    let changed_old: Vec<usize> = diff
        .ops()
        .iter()
        .filter(|op| !matches!(op, similar::DiffOp::Equal { .. }))
        .flat_map(|op| op.old_range())
        .collect();
    // lines 6..=10 hold the original body (1-based), 0-based 5..=9
    assert_eq!(changed_old, (5..10).collect::<Vec<_>>());
    assert!(out.contains("    return max(low, min(value, high))\n"));
}

#[test]
fn splicing_fig1_v1_omits_try_block() {
    let (_c, m) = mask_in(CODEC, "m.py::Base64Encoder.decode#method");
    let out = splice(&m, "return base64.decodebytes(data)");
    assert!(python::parses(&out));
    let v1 = "    @classmethod\n    def decode(cls, data: bytes) -> bytes:\n        \"\"\"Decode base64 data, raising DecodeError on malformed input.\"\"\"\n        return base64.decodebytes(data)\n\n    @classmethod\n    def encode";
    assert!(out.contains(v1), "{out}");
    assert!(!out.contains("try:"));
}

#[test]
fn reindent_replaces_reference_indent() {
    assert_eq!(mask::reindent("x = 1\nif x:\n    y = 2", "        "), "        x = 1\n        if x:\n            y = 2");
    assert_eq!(mask::reindent("  a\n\n  b", "    "), "    a\n\n    b");
    // less-indented continuation lines stay verbatim
    assert_eq!(mask::reindent("    s = '''\nraw\n'''", "  "), "  s = '''\nraw\n'''");
}

#[test]
fn drifted_file_is_rejected() {
    let (_d, snap) = snapshot_of(&[("m.py", "def f():\n    return 1\n")]);
    let index = index_repository(&snap).unwrap();
    let c = index.components()[0].clone();
    std::fs::write(snap.root.join("m.py"), "# header\ndef f():\n    return 1\n").unwrap();
    assert!(matches!(mask_component(&snap, &c), Err(MaskError::SpanDrift { .. })));
}

mod props {
    use super::*;
    use proptest::prelude::*;

    fn statement() -> impl Strategy<Value = String> {
        prop_oneof![
            "[a-z]{1,6}".prop_map(|v| format!("v_{v} = 1")),
            "[a-z]{1,6}".prop_map(|v| format!("return v_{v}")),
            Just("pass".to_string()),
            "[a-z]{1,4}".prop_map(|v| format!("if v_{v}:\n    v_{v} += 1")),
            Just("s = '''\ntext\n'''".to_string()),
            Just("# comment".to_string()),
        ]
    }

    fn body() -> impl Strategy<Value = String> {
        prop::collection::vec(statement(), 1..5).prop_map(|stmts| {
            let mut lines: Vec<String> = stmts;
            // comments alone do not form a body
            lines.push("return None".into());
            lines.join("\n")
        })
    }

    fn indent(body: &str, by: &str) -> String {
        body.split('\n')
            .map(|l| if l.is_empty() || l == "text" || l == "'''" { l.to_string() } else { format!("{by}{l}") })
            .collect::<Vec<_>>()
            .join("\n")
    }

    proptest! {
        #[test]
        fn mask_then_identity_splice(b1 in body(), b2 in body(), doc in any::<bool>(), class in any::<bool>()) {
            let docline = if doc { "    \"\"\"Doc.\"\"\"\n" } else { "" };
            let src = if class {
                format!(
                    "class K:\n    \"\"\"K doc.\"\"\"\n    attr = 3\n\n    def a(self):\n{}{}\n\n    def b(self):\n{}\n",
                    docline.replace("    ", "        "),
                    indent(&b1, "        "),
                    indent(&b2, "        "),
                )
            } else {
                format!("def a():\n{docline}{}\n\n\ndef b():\n{}\n", indent(&b1, "    "), indent(&b2, "    "))
            };
            let cs = components_in_source("p.py", &src, false).expect("generated source parses");
            prop_assert!(!cs.is_empty());
            for c in &cs {
                let m = mask_source(&src, c, false).unwrap();
                prop_assert!(python::parses(&m.text), "masked text must parse:\n{}", m.text);
                prop_assert!(m.text.contains(&c.signature));
                prop_assert!(m.text.contains(&c.docstring));
                if !c.replace_span.is_empty() {
                    prop_assert_eq!(splice(&m, c.original_body(&src)), src.clone());
                }
            }
        }
    }
}
