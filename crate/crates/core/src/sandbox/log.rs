use crate::tokens;

pub const DEFAULT_LOG_TOKENS: usize = 16_384;
pub const ELISION_MARKER: &str = "[... earlier log output truncated ...]";

/// Keep the last `max_tokens` worth of bytes, preceded by a marker line.
/// Logs within budget are returned unchanged.
pub fn truncate_log(log: &str, max_tokens: usize) -> String {
    if tokens::count(log) <= max_tokens {
        return log.to_string();
    }
    let mut start = log.len().saturating_sub(max_tokens * tokens::BYTES_PER_TOKEN);
    while !log.is_char_boundary(start) {
        start += 1;
    }
    format!("{ELISION_MARKER}\n{}", &log[start..])
}
