//! Repository indexing: parse a snapshot into addressable components and
//! produce masked versions of any of them.

mod mask;
pub mod python;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::exec::{self, Mode};
use crate::hashing;
use crate::profile::{LanguageProfile, ProfileError};

pub use mask::{mask_component, mask_source, splice, MaskError, MaskedSource, Preserved, PLACEHOLDER_TAG};

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("snapshot root {0} does not exist")]
    MissingRoot(PathBuf),
    #[error("no components found under {0}")]
    EmptyIndex(PathBuf),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("io error under {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Half-open byte range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ByteSpan {
    pub start: usize,
    pub end: usize,
}

impl ByteSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        ByteSpan { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, other: &ByteSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Function,
    Method,
    Class,
}

impl ComponentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ComponentKind::Function => "function",
            ComponentKind::Method => "method",
            ComponentKind::Class => "class",
        }
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A function, method or class definition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub id: String,
    pub kind: ComponentKind,
    /// Qualified name, e.g. `Base64Encoder.encode`.
    pub name: String,
    /// Forward-slash path relative to the snapshot root.
    pub file: String,
    /// Whole definition including decorators.
    pub span: ByteSpan,
    /// For functions and methods, the statements after the docstring. For
    /// classes, the hull of all member bodies.
    pub body_span: ByteSpan,
    /// Region a re-implementation replaces. Equal to `body_span` except for
    /// classes, where it is the whole class suite.
    pub replace_span: ByteSpan,
    /// 1-based inclusive line range of `span`.
    pub start_line: usize,
    pub end_line: usize,
    pub signature: String,
    pub docstring: String,
    pub enclosing: Option<String>,
}

impl Component {
    /// Short name without qualification, used in prompts.
    pub fn short_name(&self) -> &str {
        self.name.rsplit('.').next().unwrap_or(&self.name)
    }

    /// Text currently in the replace region of `source`.
    pub fn original_body<'a>(&self, source: &'a str) -> &'a str {
        &source[self.replace_span.range()]
    }

    pub fn covers_line(&self, line: usize) -> bool {
        self.start_line <= line && line <= self.end_line
    }
}

/// Root directory plus the revision and profile it is read under.
#[derive(Debug, Clone)]
pub struct RepoSnapshot {
    pub root: PathBuf,
    pub commit_id: String,
    pub profile: LanguageProfile,
}

impl RepoSnapshot {
    pub fn new(root: impl Into<PathBuf>, commit_id: impl Into<String>, profile: LanguageProfile) -> Result<Self, IndexError> {
        let root = root.into();
        if !root.is_dir() {
            return Err(IndexError::MissingRoot(root));
        }
        profile.validate()?;
        Ok(RepoSnapshot {
            root,
            commit_id: commit_id.into(),
            profile,
        })
    }

    /// Snapshot of a plain directory; the revision is a content hash.
    pub fn from_dir(root: impl Into<PathBuf>, profile: LanguageProfile) -> Result<Self, IndexError> {
        let root = root.into();
        if !root.is_dir() {
            return Err(IndexError::MissingRoot(root));
        }
        let hash = hashing::dir_hash(&root).map_err(|source| IndexError::Io {
            path: root.clone(),
            source,
        })?;
        Self::new(root, format!("tree-{}", &hash[..16]), profile)
    }

    pub fn language_profile_id(&self) -> &str {
        &self.profile.id
    }

    /// Source files matched by the profile, sorted by relative path.
    pub fn source_files(&self) -> Result<Vec<String>, IndexError> {
        let matcher = self.profile.matcher()?;
        let mut files = Vec::new();
        for entry in WalkDir::new(&self.root).sort_by_file_name() {
            let entry = entry.map_err(|e| IndexError::Io {
                path: self.root.clone(),
                source: std::io::Error::other(e),
            })?;
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = relative(&self.root, entry.path());
            if matcher.is_source(&rel) {
                files.push(rel);
            }
        }
        files.sort();
        Ok(files)
    }

    pub fn read(&self, rel: &str) -> std::io::Result<String> {
        std::fs::read_to_string(self.root.join(rel))
    }
}

pub(crate) fn relative(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .to_string_lossy()
        .replace('\\', "/")
}

/// One line of the index report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexReportEntry {
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skip_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentIndex {
    components: Vec<Component>,
    by_id: HashMap<String, usize>,
    pub report: Vec<IndexReportEntry>,
}

impl ComponentIndex {
    pub fn from_components(mut components: Vec<Component>, report: Vec<IndexReportEntry>) -> Self {
        components.sort_by(|a, b| (&a.file, a.span.start, &a.id).cmp(&(&b.file, b.span.start, &b.id)));
        let by_id = components
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.clone(), i))
            .collect();
        ComponentIndex {
            components,
            by_id,
            report,
        }
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Component> {
        self.by_id.get(id).map(|&i| &self.components[i])
    }

    pub fn in_file<'a>(&'a self, file: &'a str) -> impl Iterator<Item = &'a Component> + 'a {
        self.components.iter().filter(move |c| c.file == file)
    }

    /// Components restricted to one mutation granularity.
    pub fn filtered(&self, keep: impl Fn(&Component) -> bool) -> ComponentIndex {
        ComponentIndex::from_components(
            self.components.iter().filter(|c| keep(c)).cloned().collect(),
            self.report.clone(),
        )
    }

    /// Line-delimited JSON, one component per line.
    pub fn to_jsonl(&self) -> String {
        jsonl(&self.components)
    }

    pub fn report_jsonl(&self) -> String {
        jsonl(&self.report)
    }

    pub fn from_jsonl(components: &str, report: &str) -> serde_json::Result<Self> {
        let comps = components
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<Component>, _>>()?;
        let rep = report
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<IndexReportEntry>, _>>()?;
        Ok(ComponentIndex::from_components(comps, rep))
    }
}

pub(crate) fn jsonl<T: Serialize>(items: &[T]) -> String {
    let mut s = String::new();
    for it in items {
        s.push_str(&serde_json::to_string(it).expect("serializable"));
        s.push('\n');
    }
    s
}

/// Outcome of indexing one file.
enum FileIndex {
    Ok(Vec<Component>),
    Skipped(String),
}

/// Index every function, method and class in the snapshot. Files that fail to
/// parse, are not UTF-8, or exceed the profile's size cap are skipped and
/// recorded in the report.
pub fn index_repository(snapshot: &RepoSnapshot) -> Result<ComponentIndex, IndexError> {
    index_repository_with(snapshot, Mode::default())
}

pub fn index_repository_with(snapshot: &RepoSnapshot, mode: Mode) -> Result<ComponentIndex, IndexError> {
    let files = snapshot.source_files()?;
    let results = exec::map(mode, &files, |rel| index_file(snapshot, rel));
    let mut components = Vec::new();
    let mut report = Vec::with_capacity(files.len());
    for (rel, res) in files.iter().zip(results) {
        match res {
            FileIndex::Ok(cs) => {
                report.push(IndexReportEntry {
                    file: rel.clone(),
                    component_count: Some(cs.len()),
                    skip_reason: None,
                });
                components.extend(cs);
            }
            FileIndex::Skipped(reason) => {
                log::warn!("skipping {rel}: {reason}");
                report.push(IndexReportEntry {
                    file: rel.clone(),
                    component_count: None,
                    skip_reason: Some(reason),
                });
            }
        }
    }
    if components.is_empty() {
        return Err(IndexError::EmptyIndex(snapshot.root.clone()));
    }
    Ok(ComponentIndex::from_components(components, report))
}

fn index_file(snapshot: &RepoSnapshot, rel: &str) -> FileIndex {
    let path = snapshot.root.join(rel);
    match std::fs::metadata(&path) {
        Ok(m) if m.len() > snapshot.profile.max_file_bytes => {
            return FileIndex::Skipped(format!(
                "file size {} exceeds cap {}",
                m.len(),
                snapshot.profile.max_file_bytes
            ))
        }
        Err(e) => return FileIndex::Skipped(format!("unreadable: {e}")),
        _ => {}
    }
    let source = match std::fs::read(&path).map(String::from_utf8) {
        Ok(Ok(s)) => s,
        Ok(Err(_)) => return FileIndex::Skipped("not valid UTF-8".into()),
        Err(e) => return FileIndex::Skipped(format!("unreadable: {e}")),
    };
    match components_in_source(rel, &source, snapshot.profile.index_nested) {
        Some(cs) => FileIndex::Ok(cs),
        None => FileIndex::Skipped("unparsable: syntax error".into()),
    }
}

/// Components defined in one file's source, or `None` when it does not parse.
pub fn components_in_source(file: &str, source: &str, index_nested: bool) -> Option<Vec<Component>> {
    let tree = python::parse(source)?;
    if tree.root_node().has_error() {
        return None;
    }
    let defs = python::definitions(file, source, &tree, index_nested);
    Some(
        defs.iter()
            .map(|d| Component {
                id: d.id.clone(),
                kind: d.kind,
                name: d.name.clone(),
                file: file.to_string(),
                span: d.span,
                body_span: d.body_span(&defs),
                replace_span: d.replace,
                start_line: d.start_line,
                end_line: d.end_line,
                signature: d.signature.clone(),
                docstring: d.docstring.clone(),
                enclosing: d.enclosing.clone(),
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests;
