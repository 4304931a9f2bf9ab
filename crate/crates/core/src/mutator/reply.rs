use serde::{Deserialize, Serialize};

use crate::index::{Component, ComponentKind};
use crate::provider::ProviderMeta;

/// A re-implementation extracted from a provider reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedBody {
    pub text: String,
    pub explanation: String,
    pub provider_meta: ProviderMeta,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed reply: {0}")]
pub struct MalformedReply(pub String);

/// Byte offset of the first fence line and the contents of its block. An
/// unclosed block runs to the end of the reply.
pub fn first_fenced_block(reply: &str) -> Option<(usize, &str)> {
    let mut offset = 0;
    let mut open: Option<(usize, usize)> = None;
    for line in reply.split_inclusive('\n') {
        let is_fence = line.trim_start().starts_with("```");
        match open {
            None if is_fence => open = Some((offset, offset + line.len())),
            Some((start, body)) if is_fence => return Some((start, &reply[body..offset])),
            _ => {}
        }
        offset += line.len();
    }
    let (start, body) = open?;
    Some((start, &reply[body..]))
}

/// Body text to splice: the first fenced block minus any restated header
/// (decorators and `def`/`class` line) and, for functions, minus a restated
/// docstring.
pub fn parse_reply(reply: &str, component: &Component) -> Result<(String, String), MalformedReply> {
    let (fence_at, block) = first_fenced_block(reply).ok_or_else(|| MalformedReply("no fenced code block".into()))?;
    let explanation = reply[..fence_at].trim().to_string();

    let lines: Vec<&str> = block.lines().collect();
    let mut i = 0;
    while i < lines.len() && lines[i].trim().is_empty() {
        i += 1;
    }
    let mut body: Vec<String> = Vec::new();
    let header_start = i;
    while i < lines.len() && lines[i].trim_start().starts_with('@') {
        i = skip_balanced(&lines, i);
    }
    let head = lines.get(i).map(|l| l.trim_start()).unwrap_or("");
    let is_header = head.starts_with("def ") || head.starts_with("async def ") || head.starts_with("class ");
    if is_header {
        let (end, inline) = header_end(&lines, i);
        if let Some(rest) = inline {
            body.push(rest);
        }
        i = end;
    } else {
        i = header_start;
    }
    body.extend(lines[i..].iter().map(|l| l.to_string()));

    if component.kind != ComponentKind::Class && !component.docstring.is_empty() {
        strip_docstring(&mut body, &component.docstring);
    }
    while body.first().is_some_and(|l| l.trim().is_empty()) {
        body.remove(0);
    }
    while body.last().is_some_and(|l| l.trim().is_empty()) {
        body.pop();
    }
    if body.is_empty() {
        return Err(MalformedReply("code block has no body".into()));
    }
    Ok((body.join("\n") + "\n", explanation))
}

/// Index after the statement starting at `start`, following open brackets
/// across lines.
fn skip_balanced(lines: &[&str], start: usize) -> usize {
    let mut depth = 0i32;
    let mut i = start;
    while i < lines.len() {
        depth += bracket_delta(lines[i]);
        i += 1;
        if depth <= 0 {
            break;
        }
    }
    i
}

fn bracket_delta(line: &str) -> i32 {
    let mut depth = 0;
    let mut quote: Option<char> = None;
    for c in line.chars() {
        match (quote, c) {
            (Some(q), c) if c == q => quote = None,
            (Some(_), _) => {}
            (None, '\'' | '"') => quote = Some(c),
            (None, '#') => break,
            (None, '(' | '[' | '{') => depth += 1,
            (None, ')' | ']' | '}') => depth -= 1,
            _ => {}
        }
    }
    depth
}

/// End of a `def`/`class` header starting at `start` and any statement that
/// follows its colon on the same line.
fn header_end(lines: &[&str], start: usize) -> (usize, Option<String>) {
    let mut depth = 0i32;
    let mut quote: Option<char> = None;
    for (i, line) in lines.iter().enumerate().skip(start) {
        for (at, c) in line.char_indices() {
            match (quote, c) {
                (Some(q), c) if c == q => quote = None,
                (Some(_), _) => {}
                (None, '\'' | '"') => quote = Some(c),
                (None, '#') => break,
                (None, '(' | '[' | '{') => depth += 1,
                (None, ')' | ']' | '}') => depth -= 1,
                (None, ':') if depth == 0 => {
                    let rest = line[at + 1..].trim();
                    let inline = (!rest.is_empty() && !rest.starts_with('#')).then(|| rest.to_string());
                    return (i + 1, inline);
                }
                _ => {}
            }
        }
        quote = None;
    }
    (start + 1, None)
}

fn strip_docstring(body: &mut Vec<String>, docstring: &str) {
    let first = match body.iter().position(|l| !l.trim().is_empty()) {
        Some(i) => i,
        None => return,
    };
    let doc: Vec<&str> = docstring.lines().map(str::trim).collect();
    if body.len() < first + doc.len() {
        return;
    }
    let matches = body[first..first + doc.len()]
        .iter()
        .zip(&doc)
        .all(|(a, b)| a.trim() == *b);
    if matches {
        body.drain(first..first + doc.len());
    }
}
