//! Error-type classification of predicted interpretations for a matched
//! diagnosis pair.
//!
//! Three independent flags per examined interpretation:
//! - missing content — at least two gold evidence items unmatched, a
//!   deterministic count from interpretation matching;
//! - factual error — a judge finds a predicted evidence statement
//!   medically unsound;
//! - low relevance — a judge finds a predicted evidence statement not
//!   pertinent to the diagnosis.
//!
//! The primary label is the first flag raised in that order; all flags are
//! kept for multi-label counts.

use serde::{Deserialize, Serialize};

use super::{JudgeMatcher, Matcher, MetricError};
use crate::corpus::DifferentialEntry;
use crate::protocol::{ErrorFacet, PredictedDiagnosis};

/// The three interpretation error categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorType {
    MissingContent,
    FactualError,
    LowRelevance,
}

/// Classification outcome for one gold/predicted diagnosis pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorClassification {
    pub missing_content: bool,
    /// None when no judge is configured or the judge failed.
    pub factual_error: Option<bool>,
    pub low_relevance: Option<bool>,
    pub primary: Option<ErrorType>,
    /// True when a judge failure left a facet undecided.
    pub unclassified: bool,
}

/// Classifies the interpretation errors of a matched diagnosis pair.
/// `matcher` drives the missing-content count; the judge facets run only
/// when a judge is supplied.
pub fn classify_error(
    note_text: &str,
    gold: &DifferentialEntry,
    predicted: &PredictedDiagnosis,
    matcher: &dyn Matcher,
    judge: Option<&JudgeMatcher>,
) -> Result<ErrorClassification, MetricError> {
    let mut unclassified = false;

    let mut unmatched = 0usize;
    for item in &gold.evidence {
        match matcher.evidence_match(item, &predicted.evidence) {
            Ok(true) => {}
            Ok(false) => unmatched += 1,
            Err(MetricError::Backend(e)) if e.is_fatal() => return Err(MetricError::Backend(e)),
            Err(_) => {
                unmatched += 1;
                unclassified = true;
            }
        }
    }
    let missing_content = unmatched >= 2;

    let mut judge_facet = |facet: ErrorFacet| -> Option<bool> {
        let judge = judge?;
        let mut flagged = false;
        for item in &predicted.evidence {
            match judge.judge_facet(facet, note_text, &predicted.diagnosis_name, item) {
                Ok(true) => {}
                Ok(false) => flagged = true,
                Err(_) => {
                    unclassified = true;
                    return None;
                }
            }
        }
        Some(flagged)
    };
    let factual_error = judge_facet(ErrorFacet::Factual);
    let low_relevance = judge_facet(ErrorFacet::Relevance);

    let primary = if missing_content {
        Some(ErrorType::MissingContent)
    } else if factual_error == Some(true) {
        Some(ErrorType::FactualError)
    } else if low_relevance == Some(true) {
        Some(ErrorType::LowRelevance)
    } else {
        None
    };

    Ok(ErrorClassification {
        missing_content,
        factual_error,
        low_relevance,
        primary,
        unclassified,
    })
}
