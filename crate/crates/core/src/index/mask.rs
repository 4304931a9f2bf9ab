//! Masking a component's implementation and splicing a replacement back in.

use serde::{Deserialize, Serialize};

use super::python::{self, BodyLayout, Definition};
use super::{ByteSpan, Component, ComponentKind, RepoSnapshot};

/// Tag carried by the placeholder comment so masked regions can be located.
pub const PLACEHOLDER_TAG: &str = "bugsynth:masked";

#[derive(Debug, thiserror::Error)]
pub enum MaskError {
    #[error("{file} changed since indexing: {component} no longer matches its recorded span")]
    SpanDrift { file: String, component: String },
    #[error("reading {file}: {source}")]
    Io {
        file: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preserved {
    pub signature: String,
    pub docstring: String,
}

/// A file with one component's implementation replaced by placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedSource {
    pub component_id: String,
    pub file: String,
    pub text: String,
    pub preserved: Preserved,
    /// Region of `text` that [`splice`] replaces.
    pub region: ByteSpan,
    pub layout: BodyLayout,
}

pub fn placeholder(component_id: &str) -> String {
    format!("pass  # {PLACEHOLDER_TAG} {component_id}")
}

fn placeholder_text(layout: &BodyLayout, component_id: &str) -> String {
    match layout {
        BodyLayout::Block { indent } => format!("{indent}{}", placeholder(component_id)),
        BodyLayout::Inline { .. } => placeholder(component_id),
        BodyLayout::Empty { indent } => format!("\n{indent}{}", placeholder(component_id)),
    }
}

/// Mask `component` in its file under `snapshot`.
pub fn mask_component(snapshot: &RepoSnapshot, component: &Component) -> Result<MaskedSource, MaskError> {
    let source = snapshot.read(&component.file).map_err(|source| MaskError::Io {
        file: component.file.clone(),
        source,
    })?;
    mask_source(&source, component, snapshot.profile.index_nested)
}

/// Mask `component` given the current text of its file.
pub fn mask_source(source: &str, component: &Component, index_nested: bool) -> Result<MaskedSource, MaskError> {
    let drift = || MaskError::SpanDrift {
        file: component.file.clone(),
        component: component.id.clone(),
    };
    let tree = python::parse(source).ok_or_else(drift)?;
    let defs = python::definitions(&component.file, source, &tree, index_nested);
    let def = defs.iter().find(|d| d.id == component.id).ok_or_else(drift)?;
    if def.span != component.span
        || def.replace != component.replace_span
        || source.get(component.span.start..).is_none_or(|s| !s.starts_with(&component.signature))
    {
        return Err(drift());
    }

    let (text, region) = match def.kind {
        ComponentKind::Function | ComponentKind::Method => {
            let ph = placeholder_text(&def.layout, &def.id);
            let mut text = String::with_capacity(source.len() + ph.len());
            text.push_str(&source[..def.replace.start]);
            text.push_str(&ph);
            text.push_str(&source[def.replace.end..]);
            (text, ByteSpan::new(def.replace.start, def.replace.start + ph.len()))
        }
        ComponentKind::Class => mask_class(source, def, &defs),
    };

    Ok(MaskedSource {
        component_id: component.id.clone(),
        file: component.file.clone(),
        text,
        preserved: Preserved {
            signature: def.signature.clone(),
            docstring: def.docstring.clone(),
        },
        region,
        layout: def.layout.clone(),
    })
}

/// Replace every member body with a placeholder. The splice region is the
/// class suite, shifted by the size change of the members inside it.
fn mask_class(source: &str, class: &Definition, defs: &[Definition]) -> (String, ByteSpan) {
    let mut members: Vec<&Definition> = class.members.iter().map(|&i| &defs[i]).collect();
    members.sort_by_key(|d| d.replace.start);
    let mut text = String::with_capacity(source.len());
    let mut cursor = 0;
    let mut delta: isize = 0;
    for m in members {
        let ph = placeholder_text(&m.layout, &m.id);
        text.push_str(&source[cursor..m.replace.start]);
        text.push_str(&ph);
        cursor = m.replace.end;
        delta += ph.len() as isize - m.replace.len() as isize;
    }
    text.push_str(&source[cursor..]);
    let end = (class.replace.end as isize + delta) as usize;
    (text, ByteSpan::new(class.replace.start, end))
}

/// Insert `generated_body` in place of the masked region, re-indented to the
/// region's indentation. Bytes outside the region are untouched.
pub fn splice(masked: &MaskedSource, generated_body: &str) -> String {
    let body = generated_body.trim_end();
    let replacement = match &masked.layout {
        BodyLayout::Block { indent } => reindent(body, indent),
        BodyLayout::Inline { block_indent } => {
            let trimmed = body.trim_start_matches(['\n', '\r']);
            let first = trimmed.lines().next().unwrap_or("");
            if trimmed.lines().count() <= 1 {
                trimmed.trim().to_string()
            } else if !first.starts_with([' ', '\t']) {
                trimmed.to_string()
            } else {
                format!("\n{}", reindent(trimmed, block_indent))
            }
        }
        BodyLayout::Empty { indent } => {
            format!("\n{}", reindent(body.trim_start_matches(['\n', '\r']), indent))
        }
    };
    let text = &masked.text;
    let mut out = String::with_capacity(text.len() + replacement.len());
    out.push_str(&text[..masked.region.start]);
    out.push_str(&replacement);
    out.push_str(&text[masked.region.end..]);
    out
}

fn leading_ws(line: &str) -> &str {
    &line[..line.len() - line.trim_start_matches([' ', '\t']).len()]
}

/// Swap the indentation of the first non-blank line for `target` on every
/// line that shares it. Blank lines and less-indented lines (string
/// continuations) are left verbatim.
pub fn reindent(body: &str, target: &str) -> String {
    let reference = body
        .split('\n')
        .find(|l| !l.trim().is_empty())
        .map(leading_ws)
        .unwrap_or("");
    let lines: Vec<String> = body
        .split('\n')
        .map(|line| {
            if line.trim().is_empty() {
                line.to_string()
            } else if let Some(rest) = line.strip_prefix(reference) {
                format!("{target}{rest}")
            } else {
                line.to_string()
            }
        })
        .collect();
    lines.join("\n")
}
