//! Multi-file unified diffs: generation, parsing, strict application and
//! the statistics reported for fix patches.
//!
//! Diffs are generated with `similar` (Myers, three lines of context) using
//! `a/` and `b/` path prefixes. Application is exact: every hunk must match
//! the target at its recorded position, so applying a patch either
//! reproduces the intended file byte for byte or fails.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Component as PathComponent, Path};

use serde::{Deserialize, Serialize};
use similar::TextDiff;

pub const CONTEXT_LINES: usize = 3;
const NO_NEWLINE: &str = "\\ No newline at end of file";
const DEV_NULL: &str = "/dev/null";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PatchError {
    #[error("malformed patch at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("hunk {hunk} of {path} does not apply at line {at}")]
    Mismatch { path: String, hunk: usize, at: usize },
    #[error("patch targets {0}, which is missing")]
    MissingFile(String),
    #[error("patch creates {0}, which already exists")]
    FileExists(String),
    #[error("unsafe path in patch: {0}")]
    UnsafePath(String),
    #[error("io error on {path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchStats {
    pub lines_edited: usize,
    pub hunks: usize,
    pub files_edited: usize,
}

/// A unified diff and its statistics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    pub text: String,
    pub stats: PatchStats,
}

/// One file's before/after content. `None` means the file does not exist on
/// that side.
#[derive(Debug, Clone)]
pub struct FileChange<'a> {
    pub path: &'a str,
    pub old: Option<&'a str>,
    pub new: Option<&'a str>,
}

impl Patch {
    pub fn empty() -> Self {
        Patch::default()
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }

    /// Diff a set of files. Unchanged files contribute nothing; output is
    /// ordered by path.
    pub fn from_changes(changes: &[FileChange<'_>]) -> Patch {
        let mut sorted: Vec<&FileChange<'_>> = changes.iter().collect();
        sorted.sort_by_key(|c| c.path);
        let mut text = String::new();
        for c in sorted {
            if c.old == c.new {
                continue;
            }
            let old_header = if c.old.is_some() { format!("a/{}", c.path) } else { DEV_NULL.to_string() };
            let new_header = if c.new.is_some() { format!("b/{}", c.path) } else { DEV_NULL.to_string() };
            let old = c.old.unwrap_or("");
            let new = c.new.unwrap_or("");
            let diff = TextDiff::from_lines(old, new);
            let rendered = diff
                .unified_diff()
                .context_radius(CONTEXT_LINES)
                .header(&old_header, &new_header)
                .to_string();
            text.push_str(&rendered);
            if !text.ends_with('\n') {
                text.push('\n');
            }
        }
        Patch::from_text(text).expect("generated diffs parse")
    }

    /// Diff of one file.
    pub fn between(path: &str, old: &str, new: &str) -> Patch {
        Patch::from_changes(&[FileChange {
            path,
            old: Some(old),
            new: Some(new),
        }])
    }

    /// Wrap diff text, computing its statistics.
    pub fn from_text(text: String) -> Result<Patch, PatchError> {
        let files = parse(&text)?;
        let stats = stats_of(&files);
        Ok(Patch { text, stats })
    }

    pub fn files(&self) -> Result<Vec<FileDiff>, PatchError> {
        parse(&self.text)
    }

    /// Apply to in-memory files. `read` returns current content; the result
    /// maps each touched path to its new content (`None` = deleted).
    pub fn apply_with(
        &self,
        read: impl Fn(&str) -> Option<String>,
    ) -> Result<BTreeMap<String, Option<String>>, PatchError> {
        let mut out: BTreeMap<String, Option<String>> = BTreeMap::new();
        for fd in parse(&self.text)? {
            let path = fd.path().to_string();
            check_path(&path)?;
            let current = match out.get(&path) {
                Some(c) => c.clone(),
                None => read(&path),
            };
            let result = match (fd.old_path.is_some(), fd.new_path.is_some(), current) {
                (false, _, Some(_)) => return Err(PatchError::FileExists(path)),
                (false, _, None) => Some(fd.apply("")?),
                (true, false, Some(cur)) => {
                    fd.apply(&cur)?;
                    None
                }
                (true, true, Some(cur)) => Some(fd.apply(&cur)?),
                (true, _, None) => return Err(PatchError::MissingFile(path)),
            };
            out.insert(path, result);
        }
        Ok(out)
    }

    /// Apply to files under `root`, writing results in place.
    pub fn apply_to_dir(&self, root: &Path) -> Result<(), PatchError> {
        let updates = self.apply_with(|p| std::fs::read_to_string(root.join(p)).ok())?;
        for (path, content) in updates {
            let full = root.join(&path);
            let io = |e: std::io::Error| PatchError::Io {
                path: path.clone(),
                reason: e.to_string(),
            };
            match content {
                Some(text) => {
                    if let Some(parent) = full.parent() {
                        std::fs::create_dir_all(parent).map_err(io)?;
                    }
                    std::fs::write(&full, text).map_err(io)?
                }
                None => std::fs::remove_file(&full).map_err(io)?,
            }
        }
        Ok(())
    }

    /// Apply to one file's text.
    pub fn apply_to_text(&self, path: &str, text: &str) -> Result<String, PatchError> {
        let out = self.apply_with(|p| (p == path).then(|| text.to_string()))?;
        Ok(match out.get(path) {
            Some(Some(t)) => t.clone(),
            Some(None) => String::new(),
            None => text.to_string(),
        })
    }
}

pub(crate) fn check_path(path: &str) -> Result<(), PatchError> {
    let p = Path::new(path);
    let ok = !path.is_empty()
        && p.components()
            .all(|c| matches!(c, PathComponent::Normal(_) | PathComponent::CurDir));
    if ok {
        Ok(())
    } else {
        Err(PatchError::UnsafePath(path.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HunkLine {
    Context(String),
    Removed(String),
    Added(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hunk {
    pub old_start: usize,
    pub old_len: usize,
    pub new_start: usize,
    pub new_len: usize,
    /// Line contents including their terminator; the last line of a file
    /// without a trailing newline has none.
    pub lines: Vec<HunkLine>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileDiff {
    pub old_path: Option<String>,
    pub new_path: Option<String>,
    pub hunks: Vec<Hunk>,
}

impl FileDiff {
    pub fn path(&self) -> &str {
        self.new_path
            .as_deref()
            .or(self.old_path.as_deref())
            .unwrap_or_default()
    }

    fn apply(&self, original: &str) -> Result<String, PatchError> {
        let lines: Vec<&str> = original.split_inclusive('\n').collect();
        let mut out = String::with_capacity(original.len());
        let mut pos = 0usize;
        for (hi, h) in self.hunks.iter().enumerate() {
            let start = if h.old_len == 0 { h.old_start } else { h.old_start.saturating_sub(1) };
            let mismatch = || PatchError::Mismatch {
                path: self.path().to_string(),
                hunk: hi + 1,
                at: start + 1,
            };
            if start < pos || start > lines.len() {
                return Err(mismatch());
            }
            for l in &lines[pos..start] {
                out.push_str(l);
            }
            let mut cursor = start;
            for line in &h.lines {
                match line {
                    HunkLine::Context(t) | HunkLine::Removed(t) => {
                        if lines.get(cursor) != Some(&t.as_str()) {
                            return Err(mismatch());
                        }
                        cursor += 1;
                        if let HunkLine::Context(t) = line {
                            out.push_str(t);
                        }
                    }
                    HunkLine::Added(t) => out.push_str(t),
                }
            }
            pos = cursor;
        }
        for l in &lines[pos..] {
            out.push_str(l);
        }
        Ok(out)
    }
}

fn strip_prefix_path(raw: &str) -> Option<String> {
    let raw = raw.split('\t').next().unwrap_or(raw).trim_end();
    if raw == DEV_NULL {
        return None;
    }
    let p = raw
        .strip_prefix("a/")
        .or_else(|| raw.strip_prefix("b/"))
        .unwrap_or(raw);
    Some(p.to_string())
}

fn parse_range(s: &str) -> Option<(usize, usize)> {
    match s.split_once(',') {
        Some((a, b)) => Some((a.parse().ok()?, b.parse().ok()?)),
        None => Some((s.parse().ok()?, 1)),
    }
}

fn parse(text: &str) -> Result<Vec<FileDiff>, PatchError> {
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    let mut files = Vec::new();
    let mut i = 0;
    let malformed = |line: usize, reason: &str| PatchError::Malformed {
        line: line + 1,
        reason: reason.to_string(),
    };
    while i < lines.len() {
        let line = lines[i];
        if !line.starts_with("--- ") {
            // tolerate preamble such as `diff --git` lines
            i += 1;
            continue;
        }
        let old_path = strip_prefix_path(line[4..].trim_end_matches('\n'));
        let next = lines.get(i + 1).ok_or_else(|| malformed(i, "missing +++ header"))?;
        let new_raw = next
            .strip_prefix("+++ ")
            .ok_or_else(|| malformed(i + 1, "expected +++ header"))?;
        let new_path = strip_prefix_path(new_raw.trim_end_matches('\n'));
        if old_path.is_none() && new_path.is_none() {
            return Err(malformed(i, "both sides are /dev/null"));
        }
        i += 2;
        let mut hunks = Vec::new();
        while i < lines.len() && lines[i].starts_with("@@ ") {
            let header = lines[i].trim_end();
            let inner = header
                .strip_prefix("@@ -")
                .and_then(|s| s.split_once(" @@"))
                .map(|(r, _)| r)
                .ok_or_else(|| malformed(i, "bad hunk header"))?;
            let (old_r, new_r) = inner
                .split_once(" +")
                .ok_or_else(|| malformed(i, "bad hunk header"))?;
            let (old_start, old_len) = parse_range(old_r).ok_or_else(|| malformed(i, "bad old range"))?;
            let (new_start, new_len) = parse_range(new_r).ok_or_else(|| malformed(i, "bad new range"))?;
            i += 1;
            let (mut seen_old, mut seen_new) = (0, 0);
            let mut body: Vec<HunkLine> = Vec::new();
            while i < lines.len() && (seen_old < old_len || seen_new < new_len || lines[i].starts_with('\\')) {
                let l = lines[i];
                if l.starts_with('\\') {
                    if l.trim_end() != NO_NEWLINE {
                        return Err(malformed(i, "unknown marker"));
                    }
                    match body.last_mut() {
                        Some(HunkLine::Context(t)) | Some(HunkLine::Removed(t)) | Some(HunkLine::Added(t)) => {
                            if t.ends_with('\n') {
                                t.pop();
                            }
                        }
                        None => return Err(malformed(i, "marker before any line")),
                    }
                    i += 1;
                    continue;
                }
                let (tag, rest) = l.split_at(l.chars().next().map_or(0, |c| c.len_utf8()));
                let content = if l == "\n" { "\n".to_string() } else { rest.to_string() };
                match (tag, l) {
                    (" ", _) | (_, "\n") => {
                        seen_old += 1;
                        seen_new += 1;
                        body.push(HunkLine::Context(content));
                    }
                    ("-", _) => {
                        seen_old += 1;
                        body.push(HunkLine::Removed(content));
                    }
                    ("+", _) => {
                        seen_new += 1;
                        body.push(HunkLine::Added(content));
                    }
                    _ => return Err(malformed(i, "unexpected line in hunk")),
                }
                i += 1;
            }
            if seen_old != old_len || seen_new != new_len {
                return Err(malformed(i.saturating_sub(1), "hunk length mismatch"));
            }
            hunks.push(Hunk {
                old_start,
                old_len,
                new_start,
                new_len,
                lines: body,
            });
        }
        files.push(FileDiff {
            old_path,
            new_path,
            hunks,
        });
    }
    Ok(files)
}

fn stats_of(files: &[FileDiff]) -> PatchStats {
    let mut s = PatchStats {
        files_edited: {
            let mut paths: Vec<&str> = files.iter().map(|f| f.path()).collect();
            paths.sort();
            paths.dedup();
            paths.len()
        },
        ..PatchStats::default()
    };
    for f in files {
        s.hunks += f.hunks.len();
        for h in &f.hunks {
            s.lines_edited += h
                .lines
                .iter()
                .filter(|l| !matches!(l, HunkLine::Context(_)))
                .count();
        }
    }
    s
}

/// Compact rendering used as an edit observation.
pub fn mini_diff(path: &str, old: &str, new: &str) -> String {
    let p = Patch::between(path, old, new);
    let mut s = String::new();
    for line in p.text.lines().skip(2) {
        let _ = writeln!(s, "{line}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_hunk_stats() {
        let old = "a\nb\nc\nd\ne\nf\ng\nh\n";
        let new = "a\nb\nc\nD\ne\nf\ng\nh\n";
        let p = Patch::between("x.py", old, new);
        assert_eq!(
            p.stats,
            PatchStats {
                lines_edited: 2,
                hunks: 1,
                files_edited: 1
            }
        );
        assert!(p.text.starts_with("--- a/x.py\n+++ b/x.py\n@@ -1,7 +1,7 @@\n"));
        assert_eq!(p.apply_to_text("x.py", old).unwrap(), new);
    }

    #[test]
    fn identical_files_give_empty_patch() {
        let p = Patch::between("x.py", "same\n", "same\n");
        assert!(p.is_empty());
        assert_eq!(p.stats, PatchStats::default());
        assert_eq!(p.apply_to_text("x.py", "same\n").unwrap(), "same\n");
    }

    #[test]
    fn missing_trailing_newline_round_trips() {
        let old = "a\nb\nc";
        let new = "a\nB\nc\nd";
        let p = Patch::between("x", old, new);
        assert!(p.text.contains(NO_NEWLINE));
        assert_eq!(p.apply_to_text("x", old).unwrap(), new);
        let back = Patch::between("x", new, old);
        assert_eq!(back.apply_to_text("x", new).unwrap(), old);
    }

    #[test]
    fn multi_file_create_and_delete() {
        let p = Patch::from_changes(&[
            FileChange { path: "b.py", old: Some("x\n"), new: None },
            FileChange { path: "a.py", old: None, new: Some("new\n") },
            FileChange { path: "c.py", old: Some("1\n2\n"), new: Some("1\n3\n") },
        ]);
        assert_eq!(p.stats.files_edited, 3);
        assert_eq!(p.stats.hunks, 3);
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b.py"), "x\n").unwrap();
        std::fs::write(dir.path().join("c.py"), "1\n2\n").unwrap();
        p.apply_to_dir(dir.path()).unwrap();
        assert!(!dir.path().join("b.py").exists());
        assert_eq!(std::fs::read_to_string(dir.path().join("a.py")).unwrap(), "new\n");
        assert_eq!(std::fs::read_to_string(dir.path().join("c.py")).unwrap(), "1\n3\n");
    }

    #[test]
    fn stale_target_is_rejected() {
        let p = Patch::between("x", "a\nb\nc\n", "a\nB\nc\n");
        let err = p.apply_to_text("x", "a\nz\nc\n").unwrap_err();
        assert!(matches!(err, PatchError::Mismatch { hunk: 1, .. }));
    }

    #[test]
    fn unsafe_paths_are_rejected() {
        let text = "--- a/../etc/passwd\n+++ b/../etc/passwd\n@@ -1 +1 @@\n-a\n+b\n".to_string();
        let p = Patch::from_text(text).unwrap();
        assert!(matches!(p.apply_with(|_| Some("a\n".into())), Err(PatchError::UnsafePath(_))));
    }

    #[test]
    fn stats_count_headers_and_lines() {
        let text = "--- a/f\n+++ b/f\n@@ -1,2 +1,2 @@\n-x\n+y\n z\n@@ -10,1 +10,2 @@\n q\n+r\n--- a/g\n+++ b/g\n@@ -1 +1 @@\n-1\n+2\n".to_string();
        let p = Patch::from_text(text).unwrap();
        assert_eq!(
            p.stats,
            PatchStats {
                lines_edited: 5,
                hunks: 3,
                files_edited: 2
            }
        );
    }

    #[test]
    fn malformed_hunk_is_reported() {
        let text = "--- a/f\n+++ b/f\n@@ -1,2 +1,2 @@\n-x\n".to_string();
        assert!(matches!(Patch::from_text(text), Err(PatchError::Malformed { .. })));
    }

    fn text_lines() -> impl Strategy<Value = String> {
        prop::collection::vec(prop_oneof!["[a-c]{0,3}", Just(String::new())], 0..12).prop_flat_map(|ls| {
            let joined = ls.join("\n");
            prop_oneof![Just(joined.clone()), Just(format!("{joined}\n"))]
        })
    }

    proptest! {
        #[test]
        fn diff_then_apply_is_exact(old in text_lines(), new in text_lines()) {
            let p = Patch::between("f.txt", &old, &new);
            prop_assert_eq!(p.apply_to_text("f.txt", &old).unwrap(), new.clone());
            let reparsed = Patch::from_text(p.text.clone()).unwrap();
            prop_assert_eq!(reparsed.stats, p.stats);
        }
    }
}
