//! The structured output grammar and its parser.
//!
//! Canonical form, one block per diagnosis:
//!
//! ```text
//! The patient may suffer from *<name>* because of the following symptoms or evidence:
//! "<evidence 1>", "<evidence 2>", ...
//! ```
//!
//! Evidence items are double-quoted, separated by commas or newlines.
//! Inside quoted evidence, `\"` and `\\` escape a quote and a backslash;
//! inside names, a backslash escapes any wrapper character. The parser is
//! tolerant of list bullets, numbering, straight-vs-curly quotes, and
//! asterisk emphasis around the name. Evidence strings must not contain the
//! header sentence itself.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::text::normalize;

/// Disposition of one predicted diagnosis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionStatus {
    /// Confident: supporting-evidence count reached the threshold.
    Accepted,
    /// Below the evidence threshold.
    LowConfidence,
    /// Dropped: removed by examination or replaced after feedback.
    Filtered,
}

/// One predicted diagnosis with its supporting evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictedDiagnosis {
    pub diagnosis_name: String,
    pub evidence: Vec<String>,
    pub status: PredictionStatus,
    /// Iteration (1-based) in which this diagnosis first appeared.
    pub born_iteration: u32,
}

impl PredictedDiagnosis {
    pub fn new(diagnosis_name: impl Into<String>, evidence: Vec<String>) -> Self {
        PredictedDiagnosis {
            diagnosis_name: diagnosis_name.into(),
            evidence,
            status: PredictionStatus::Accepted,
            born_iteration: 1,
        }
    }
}

/// A model's differential list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DdxPrediction {
    pub entries: Vec<PredictedDiagnosis>,
}

impl DdxPrediction {
    /// Builds a prediction, merging entries whose names collide after
    /// normalization: first occurrence wins, evidence is unioned in order.
    pub fn from_entries(entries: impl IntoIterator<Item = PredictedDiagnosis>) -> Self {
        let mut merged: Vec<PredictedDiagnosis> = Vec::new();
        for entry in entries {
            let key = normalize(&entry.diagnosis_name);
            match merged
                .iter_mut()
                .find(|e| normalize(&e.diagnosis_name) == key)
            {
                Some(existing) => {
                    for ev in entry.evidence {
                        if !existing.evidence.iter().any(|have| have == &ev) {
                            existing.evidence.push(ev);
                        }
                    }
                }
                None => merged.push(entry),
            }
        }
        DdxPrediction { entries: merged }
    }

    pub fn accepted(&self) -> impl Iterator<Item = &PredictedDiagnosis> {
        self.entries
            .iter()
            .filter(|e| e.status == PredictionStatus::Accepted)
    }

    pub fn diagnosis_names(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|e| e.diagnosis_name.clone())
            .collect()
    }

    pub fn find_normalized(&self, normalized_name: &str) -> Option<&PredictedDiagnosis> {
        self.entries
            .iter()
            .find(|e| normalize(&e.diagnosis_name) == normalized_name)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Parse failure; carries the raw text so the caller can decide to retry.
#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("unparseable output: no diagnosis blocks found")]
    NoBlocks { raw: String },
}

static HEADER_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)the\s+patient\s+may\s+suffer\s+from\s+(\S[^\n]*?)\s+because\s+of\s+the\s+following\s+symptoms\s+or\s+evidence\s*[:：]?",
    )
    .expect("header regex compiles")
});

static EVIDENCE_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#""((?:[^"\\]|\\.)*)"|“((?:[^”\\]|\\.)*)”"#).expect("evidence regex compiles")
});

const NAME_WRAPPERS: [(char, char); 6] = [
    ('*', '*'),
    ('"', '"'),
    ('“', '”'),
    ('‘', '’'),
    ('\'', '\''),
    ('_', '_'),
];

/// True when the character at byte offset `idx` is preceded by an odd
/// number of backslashes.
fn is_escaped(s: &str, idx: usize) -> bool {
    s[..idx].chars().rev().take_while(|&c| c == '\\').count() % 2 == 1
}

fn strip_name_wrappers(raw: &str) -> String {
    let mut name = raw.trim();
    loop {
        let mut chars = name.chars();
        let (Some(first), Some(last)) = (chars.next(), chars.next_back()) else {
            break;
        };
        let symmetric = NAME_WRAPPERS
            .iter()
            .any(|&(open, close)| first == open && last == close);
        if !symmetric || name.chars().count() < 2 {
            break;
        }
        let last_idx = name.len() - last.len_utf8();
        if is_escaped(name, last_idx) {
            break;
        }
        name = name[first.len_utf8()..last_idx].trim();
    }
    name.to_string()
}

/// Removes one level of backslash escaping (any escaped character).
fn unescape_name(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some(next) => out.push(next),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// Unescapes `\"` and `\\` inside a quoted evidence item; other backslash
/// sequences are preserved verbatim.
fn unescape_evidence(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.peek() {
                Some(&next @ ('"' | '\\' | '“' | '”')) => {
                    out.push(next);
                    chars.next();
                }
                _ => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn escape_name(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if c == '\\' || NAME_WRAPPERS.iter().any(|&(o, p)| c == o || c == p) {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

fn escape_evidence(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if matches!(c, '\\' | '"' | '“' | '”') {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

/// Extracts every diagnosis block from model output. Diagnosis blocks with
/// colliding normalized names are merged. Returns a typed error when no
/// block is found; never panics on any input.
pub fn parse_ddx_output(text: &str) -> Result<DdxPrediction, ParseError> {
    let headers: Vec<(usize, usize, String)> = HEADER_RE
        .captures_iter(text)
        .map(|cap| {
            let whole = cap.get(0).expect("match 0");
            let name = cap.get(1).expect("name group").as_str().to_string();
            (whole.start(), whole.end(), name)
        })
        .collect();
    if headers.is_empty() {
        return Err(ParseError::NoBlocks {
            raw: text.to_string(),
        });
    }

    let mut entries = Vec::new();
    for (i, (_, body_start, raw_name)) in headers.iter().enumerate() {
        let body_end = headers
            .get(i + 1)
            .map(|(next_start, _, _)| *next_start)
            .unwrap_or(text.len());
        let name = unescape_name(&strip_name_wrappers(raw_name));
        if normalize(&name).is_empty() {
            continue;
        }
        let body = &text[*body_start..body_end];
        let mut evidence: Vec<String> = Vec::new();
        for cap in EVIDENCE_RE.captures_iter(body) {
            let raw = cap
                .get(1)
                .or_else(|| cap.get(2))
                .map(|m| m.as_str())
                .unwrap_or("");
            let item = unescape_evidence(raw).trim().to_string();
            if !item.is_empty() && !evidence.contains(&item) {
                evidence.push(item);
            }
        }
        entries.push(PredictedDiagnosis::new(name, evidence));
    }
    if entries.is_empty() {
        return Err(ParseError::NoBlocks {
            raw: text.to_string(),
        });
    }
    Ok(DdxPrediction::from_entries(entries))
}

/// Renders a prediction in the canonical grammar.
/// `parse_ddx_output(render_prediction(p))` recovers p's names and evidence.
pub fn render_prediction(pred: &DdxPrediction) -> String {
    let mut blocks = Vec::with_capacity(pred.entries.len());
    for entry in &pred.entries {
        let mut block = format!(
            "The patient may suffer from *{}* because of the following symptoms or evidence:",
            escape_name(entry.diagnosis_name.trim())
        );
        if !entry.evidence.is_empty() {
            block.push('\n');
            let items: Vec<String> = entry
                .evidence
                .iter()
                .map(|e| format!("\"{}\"", escape_evidence(e.trim())))
                .collect();
            block.push_str(&items.join(", "));
        }
        blocks.push(block);
    }
    blocks.join("\n\n")
}
