//! Shared text normalization and tokenization.
//!
//! Every place that compares diagnosis names or evidence strings goes
//! through [`normalize`], so matching behaves identically across the
//! corpus loader, the vote, the engine's dedup, and the metrics.

/// Normalize a diagnosis or evidence string for comparison: case-fold,
/// strip punctuation except hyphens, collapse whitespace.
pub fn normalize(s: &str) -> String {
    let lowered = s.to_lowercase();
    let stripped: String = lowered
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '-' || c.is_whitespace() {
                c
            } else {
                '\u{0}'
            }
        })
        .filter(|&c| c != '\u{0}')
        .collect();
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Tokenize for unigram metrics: lowercase, whitespace-split, outer
/// punctuation trimmed. Tokens that are pure punctuation are dropped.
pub fn tokenize(s: &str) -> Vec<String> {
    s.to_lowercase()
        .split_whitespace()
        .filter_map(|w| {
            let t = w.trim_matches(|c: char| !c.is_alphanumeric());
            if t.is_empty() {
                None
            } else {
                Some(t.to_string())
            }
        })
        .collect()
}
