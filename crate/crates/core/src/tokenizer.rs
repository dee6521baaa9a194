//! Token counting for context budgets.

/// Measures and cuts text in tokens. Any implementation works as long as
/// `count` is subadditive over concatenation, which keeps window budgets
/// computed from per-file counts safe for the joined text.
pub trait Tokenizer: Send + Sync {
    fn name(&self) -> &str;
    fn count(&self, text: &str) -> usize;
    /// Longest prefix of `text` (on a char boundary) within `limit` tokens.
    fn truncate<'t>(&self, text: &'t str, limit: usize) -> &'t str;
}

/// `ceil(bytes / 4)`. A byte-level stand-in for a BPE vocabulary.
#[derive(Clone, Copy, Debug, Default)]
pub struct ApproxTokenizer;

impl Tokenizer for ApproxTokenizer {
    fn name(&self) -> &str {
        "approx-bytes/4"
    }

    fn count(&self, text: &str) -> usize {
        text.len().div_ceil(4)
    }

    fn truncate<'t>(&self, text: &'t str, limit: usize) -> &'t str {
        let mut cut = text.len().min(limit.saturating_mul(4));
        while !text.is_char_boundary(cut) {
            cut -= 1;
        }
        &text[..cut]
    }
}
