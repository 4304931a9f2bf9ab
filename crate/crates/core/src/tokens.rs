//! Deterministic token estimate shared by prompt and log budgets.
//!
//! A token is counted as four bytes of UTF-8, rounded up. This is an
//! approximation of sub-word tokenizers that keeps budgets bit-stable and
//! independent of any model vocabulary.

pub const BYTES_PER_TOKEN: usize = 4;

pub fn count(text: &str) -> usize {
    text.len().div_ceil(BYTES_PER_TOKEN)
}
