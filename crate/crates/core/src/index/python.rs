//! Definition discovery over the tree-sitter Python grammar.

use tree_sitter::{Node, Parser, Tree};

use super::{ByteSpan, ComponentKind};

pub(crate) fn parse(source: &str) -> Option<Tree> {
    let mut parser = Parser::new();
    parser
        .set_language(&tree_sitter_python::LANGUAGE.into())
        .expect("python grammar is ABI compatible");
    parser.parse(source, None)
}

/// True when `source` parses without error or missing nodes.
pub fn parses(source: &str) -> bool {
    parse(source).is_some_and(|t| !t.root_node().has_error())
}

/// How the replaceable body of a definition sits in its file.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BodyLayout {
    /// Body occupies whole lines starting at `span.start`; `indent` is the
    /// leading whitespace of its first non-blank line.
    Block { indent: String },
    /// Body shares a line with the header or docstring: `def f(): return 1`.
    /// `span` starts at the first statement; `block_indent` is what a
    /// multi-line replacement is indented with.
    Inline { block_indent: String },
    /// Only a docstring: `span` is empty, located at the docstring's end.
    Empty { indent: String },
}

#[derive(Debug, Clone)]
pub(crate) struct Definition {
    pub id: String,
    pub name: String,
    pub kind: ComponentKind,
    pub span: ByteSpan,
    pub start_line: usize,
    pub end_line: usize,
    pub signature: String,
    pub docstring: String,
    pub enclosing: Option<String>,
    /// Region a re-implementation replaces: the statements after the
    /// docstring for functions, the whole suite for classes.
    pub replace: ByteSpan,
    pub layout: BodyLayout,
    /// Direct method members (indices into the definition list); classes only.
    pub members: Vec<usize>,
}

impl Definition {
    /// Byte range reported as the component's body: the replace region for
    /// functions, the hull of member bodies for classes.
    pub fn body_span(&self, defs: &[Definition]) -> ByteSpan {
        if self.kind != ComponentKind::Class {
            return self.replace;
        }
        let mut it = self.members.iter().map(|&i| defs[i].replace);
        match it.next() {
            None => ByteSpan::new(self.replace.start, self.replace.start),
            Some(first) => it.fold(first, |acc, s| {
                ByteSpan::new(acc.start.min(s.start), acc.end.max(s.end))
            }),
        }
    }
}

#[derive(Clone)]
struct Scope {
    qual: Vec<String>,
    context: Context,
}

#[derive(Clone, Copy)]
enum Context {
    Module,
    ClassBody { parent: usize, nested: bool },
    FunctionBody { parent: usize },
}

pub(crate) fn definitions(file: &str, source: &str, tree: &Tree, index_nested: bool) -> Vec<Definition> {
    let mut out = Vec::new();
    let root = Scope {
        qual: Vec::new(),
        context: Context::Module,
    };
    visit(tree.root_node(), source, &root, index_nested, &mut out);
    assign_ids(file, &mut out);
    out
}

fn visit(node: Node, src: &str, scope: &Scope, nested_ok: bool, out: &mut Vec<Definition>) {
    let mut cursor = node.walk();
    for child in node.named_children(&mut cursor) {
        match child.kind() {
            "decorated_definition" => {
                if let Some(def) = child.child_by_field_name("definition") {
                    handle_def(def, child, src, scope, nested_ok, out);
                }
            }
            "function_definition" | "class_definition" => {
                handle_def(child, child, src, scope, nested_ok, out)
            }
            _ => visit(child, src, scope, nested_ok, out),
        }
    }
}

fn handle_def(def: Node, outer: Node, src: &str, scope: &Scope, nested_ok: bool, out: &mut Vec<Definition>) {
    let is_class = def.kind() == "class_definition";
    let (kind, nested, parent) = match (scope.context, is_class) {
        (Context::Module, false) => (ComponentKind::Function, false, None),
        (Context::Module, true) => (ComponentKind::Class, false, None),
        (Context::ClassBody { parent, nested }, false) => (ComponentKind::Method, nested, Some(parent)),
        (Context::ClassBody { parent, .. }, true) => (ComponentKind::Class, true, Some(parent)),
        (Context::FunctionBody { parent }, false) => (ComponentKind::Function, true, Some(parent)),
        (Context::FunctionBody { parent }, true) => (ComponentKind::Class, true, Some(parent)),
    };
    if nested && !nested_ok {
        return;
    }
    let name = def
        .child_by_field_name("name")
        .map(|n| src[n.byte_range()].to_string())
        .unwrap_or_default();
    let mut qual = scope.qual.clone();
    qual.push(name);

    let Some(def_info) = analyze(def, outer, src, kind, &qual, parent) else {
        return;
    };
    out.push(def_info);
    let index = out.len() - 1;
    if kind == ComponentKind::Method {
        if let Some(p) = parent {
            out[p].members.push(index);
        }
    }

    let context = if is_class {
        Context::ClassBody { parent: index, nested }
    } else if nested_ok {
        Context::FunctionBody { parent: index }
    } else {
        return;
    };
    if let Some(body) = def.child_by_field_name("body") {
        visit(body, src, &Scope { qual, context }, nested_ok, out);
    }
}

fn analyze(
    def: Node,
    outer: Node,
    src: &str,
    kind: ComponentKind,
    qual: &[String],
    parent: Option<usize>,
) -> Option<Definition> {
    let body = def.child_by_field_name("body")?;
    let colon = {
        let mut cursor = def.walk();
        def.children(&mut cursor)
            .filter(|c| c.kind() == ":" && c.end_byte() <= body.start_byte())
            .last()?
    };
    let span = ByteSpan::new(outer.start_byte(), outer.end_byte());
    let signature = src[span.start..colon.end_byte()].to_string();

    let statements: Vec<Node> = {
        let mut cursor = body.walk();
        body.named_children(&mut cursor)
            .filter(|n| n.kind() != "comment")
            .collect()
    };
    let doc_node = statements.first().copied().filter(|n| is_docstring(*n));
    let docstring = doc_node.map(|n| src[n.byte_range()].to_string()).unwrap_or_default();
    let body_end = trim_end(src, body.end_byte());
    let header_row = colon.end_position().row;
    let header_indent = line_indent(src, span.start);

    let is_class = kind == ComponentKind::Class;
    let after_doc = statements.get(usize::from(doc_node.is_some() && !is_class));

    let (replace, layout) = if body.start_position().row == header_row {
        let block_indent = format!("{header_indent}    ");
        match after_doc {
            Some(first) => (
                ByteSpan::new(first.start_byte(), body_end),
                BodyLayout::Inline { block_indent },
            ),
            None => {
                let at = doc_node.map_or(body_end, |d| d.end_byte());
                (ByteSpan::new(at, at), BodyLayout::Empty { indent: block_indent })
            }
        }
    } else if is_class {
        let start = next_line_start(src, colon.end_byte());
        (
            ByteSpan::new(start, body_end),
            BodyLayout::Block {
                indent: first_indent(src, start, body_end),
            },
        )
    } else {
        match (doc_node, after_doc) {
            (Some(doc), None) => (
                ByteSpan::new(doc.end_byte(), doc.end_byte()),
                BodyLayout::Empty {
                    indent: line_indent(src, doc.start_byte()),
                },
            ),
            (Some(doc), Some(first)) if first.start_position().row == doc.end_position().row => (
                ByteSpan::new(first.start_byte(), body_end),
                BodyLayout::Inline {
                    block_indent: line_indent(src, doc.start_byte()),
                },
            ),
            (doc, _) => {
                let from = doc.map_or(colon.end_byte(), |d| d.end_byte());
                let start = next_line_start(src, from);
                (
                    ByteSpan::new(start, body_end),
                    BodyLayout::Block {
                        indent: first_indent(src, start, body_end),
                    },
                )
            }
        }
    };

    Some(Definition {
        id: String::new(),
        name: qual.join("."),
        kind,
        span,
        start_line: outer.start_position().row + 1,
        end_line: outer.end_position().row + 1,
        signature,
        docstring,
        enclosing: parent.map(|p| p.to_string()),
        replace,
        layout,
        members: Vec::new(),
    })
}

fn is_docstring(n: Node) -> bool {
    if n.kind() != "expression_statement" || n.named_child_count() != 1 {
        return false;
    }
    matches!(
        n.named_child(0).map(|c| c.kind()),
        Some("string") | Some("concatenated_string")
    )
}

fn trim_end(src: &str, end: usize) -> usize {
    src[..end].trim_end().len()
}

fn line_start(src: &str, at: usize) -> usize {
    src[..at].rfind('\n').map_or(0, |i| i + 1)
}

fn line_indent(src: &str, at: usize) -> String {
    let start = line_start(src, at);
    src[start..]
        .chars()
        .take_while(|c| *c == ' ' || *c == '\t')
        .collect()
}

fn next_line_start(src: &str, at: usize) -> usize {
    src[at..].find('\n').map_or(src.len(), |i| at + i + 1)
}

fn first_indent(src: &str, start: usize, end: usize) -> String {
    src[start..end]
        .lines()
        .find(|l| !l.trim().is_empty())
        .map(|l| l.chars().take_while(|c| *c == ' ' || *c == '\t').collect())
        .unwrap_or_default()
}

/// Replace provisional parent indices with ids and build stable ids of the
/// form `file::Qual.name#kind`, suffixed `@n` for repeated definitions.
fn assign_ids(file: &str, defs: &mut [Definition]) {
    let mut seen = std::collections::HashMap::<String, usize>::new();
    for i in 0..defs.len() {
        let base = format!("{file}::{}#{}", defs[i].name, defs[i].kind.as_str());
        let n = seen.entry(base.clone()).or_insert(0);
        *n += 1;
        defs[i].id = if *n == 1 { base } else { format!("{base}@{n}") };
    }
    for i in 0..defs.len() {
        if let Some(p) = defs[i].enclosing.take() {
            let p: usize = p.parse().expect("provisional parent index");
            defs[i].enclosing = defs.get(p).map(|d| d.id.clone());
        }
    }
}
