//! Scoring: accuracy with pluggable matchers, METEOR, BERTScore, sentence
//! similarity, agreement measures, error-type classification, and run
//! statistics.
//!
//! Numeric kernels ([`meteor`], [`bertscore`], [`cosine`], [`jaccard`],
//! [`cohen_kappa`], and the mean/std helpers) are generic over the scalar
//! type via `num-traits`; the reporting layer uses the crate-level
//! [`Score`](crate::Score) alias.

mod accuracy;
mod agreement;
mod error_analysis;
mod meteor;
mod similarity;
mod stats;

pub use accuracy::{
    diagnostic_accuracy, interpretation_accuracy, AccuracyReport, MatchCounts, NoteOutcome,
    SpecialtyCounts,
};
pub use agreement::{cohen_kappa, jaccard};
pub use error_analysis::{classify_error, ErrorClassification, ErrorType};
pub use meteor::{meteor, meteor_alignment, MeteorAlignment, MeteorOptions, SynonymTable};
pub use similarity::{bertscore, cosine, BertScore};
pub use stats::{
    aggregate_runs, mean, paired_permutation_test, percentile, population_std, Bootstrap,
    ConfidenceInterval, PermutationTest, RunAggregate,
};

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, ChatBackend, ChatRequest};
use crate::protocol::{parse_judge_token, render_prompt, PromptContext, PromptKind};

/// Errors from metric computation.
#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("vector dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("label sequences have different lengths: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("kappa undefined: expected agreement is 1 but observed agreement is {observed}")]
    DegenerateKappa { observed: f64 },
    #[error("empty denominator: {0}")]
    EmptyDenominator(String),
    #[error("predictions reference unknown note ids: {0:?}")]
    UnknownNoteIds(Vec<String>),
    #[error("judge error: {0}")]
    Judge(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// How gold and predicted strings are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    ExactNormalized,
    Judge,
}

/// Decides diagnosis-level and evidence-level matches.
pub trait Matcher: Sync {
    fn diagnosis_match(&self, gold_name: &str, predicted_name: &str) -> Result<bool, MetricError>;

    /// True when any predicted item covers the gold evidence item.
    fn evidence_match(
        &self,
        gold_item: &str,
        predicted_items: &[String],
    ) -> Result<bool, MetricError>;
}

/// String equality after normalization (case, whitespace, punctuation).
pub struct ExactMatcher;

impl Matcher for ExactMatcher {
    fn diagnosis_match(&self, gold_name: &str, predicted_name: &str) -> Result<bool, MetricError> {
        Ok(crate::text::normalize(gold_name) == crate::text::normalize(predicted_name))
    }

    fn evidence_match(
        &self,
        gold_item: &str,
        predicted_items: &[String],
    ) -> Result<bool, MetricError> {
        let key = crate::text::normalize(gold_item);
        Ok(predicted_items
            .iter()
            .any(|p| crate::text::normalize(p) == key))
    }
}

/// Chat-backend judge answering MATCH / NO_MATCH prompts. A malformed
/// reply is retried once with an appended format reminder, then surfaces
/// as a judge error.
pub struct JudgeMatcher<'a> {
    backend: &'a dyn ChatBackend,
    backend_id: String,
    temperature: f64,
    max_output: u32,
}

impl<'a> JudgeMatcher<'a> {
    pub fn new(backend: &'a dyn ChatBackend, backend_id: impl Into<String>) -> Self {
        JudgeMatcher {
            backend,
            backend_id: backend_id.into(),
            temperature: crate::backend::DEFAULT_TEMPERATURE,
            max_output: 16,
        }
    }

    fn ask(&self, kind: PromptKind, ctx: &PromptContext) -> Result<bool, MetricError> {
        let prompt = render_prompt(kind, ctx).map_err(|e| MetricError::Judge(e.to_string()))?;
        let request = ChatRequest::new(&self.backend_id, &prompt.system_text, &prompt.user_text)
            .with_temperature(self.temperature)
            .with_max_output(self.max_output);
        let first = self.backend.complete(&request)?;
        if let Some(verdict) = parse_judge_token(&first.response_text) {
            return Ok(verdict);
        }
        let retry = ChatRequest::new(
            &self.backend_id,
            &prompt.system_text,
            format!(
                "{}\nReply with exactly one word: MATCH or NO_MATCH.",
                prompt.user_text
            ),
        )
        .with_temperature(self.temperature)
        .with_max_output(self.max_output);
        let second = self.backend.complete(&retry)?;
        parse_judge_token(&second.response_text).ok_or_else(|| {
            MetricError::Judge(format!(
                "judge returned a non-token reply twice: {:?}",
                second.response_text
            ))
        })
    }

    /// Error-classifier probe: true means the facet is satisfied (sound /
    /// relevant), false flags the error.
    pub fn judge_facet(
        &self,
        facet: crate::protocol::ErrorFacet,
        note_text: &str,
        diagnosis_name: &str,
        item: &str,
    ) -> Result<bool, MetricError> {
        let items = [item.to_string()];
        self.ask(
            PromptKind::ErrorClassifier,
            &PromptContext {
                error_facet: Some(facet),
                note_text: Some(note_text),
                diagnosis_name: Some(diagnosis_name),
                predicted_items: Some(&items),
                ..Default::default()
            },
        )
    }
}

impl Matcher for JudgeMatcher<'_> {
    fn diagnosis_match(&self, gold_name: &str, predicted_name: &str) -> Result<bool, MetricError> {
        // Trivial equality never needs a model call.
        if crate::text::normalize(gold_name) == crate::text::normalize(predicted_name) {
            return Ok(true);
        }
        self.ask(
            PromptKind::JudgeDiagnosis,
            &PromptContext {
                gold_name: Some(gold_name),
                predicted_name: Some(predicted_name),
                ..Default::default()
            },
        )
    }

    fn evidence_match(
        &self,
        gold_item: &str,
        predicted_items: &[String],
    ) -> Result<bool, MetricError> {
        if predicted_items.is_empty() {
            return Ok(false);
        }
        let key = crate::text::normalize(gold_item);
        if predicted_items
            .iter()
            .any(|p| crate::text::normalize(p) == key)
        {
            return Ok(true);
        }
        self.ask(
            PromptKind::JudgeInterpretation,
            &PromptContext {
                gold_item: Some(gold_item),
                predicted_items: Some(predicted_items),
                ..Default::default()
            },
        )
    }
}

/// Cosine similarity of two sentence vectors; errors on dimension
/// mismatch or zero norm.
pub fn sentence_similarity<F: num_traits::Float>(a: &[F], b: &[F]) -> Result<F, MetricError> {
    cosine(a, b)
}
