//! Prompt rendering for every pipeline stage and baseline, plus parsing of
//! model output into structured predictions.
//!
//! Rendering is a pure function of its inputs. Every prompt that expects a
//! structured answer embeds the output grammar (see [`grammar`]) so the
//! parser downstream has one format to deal with.

pub mod grammar;

pub use grammar::{
    parse_ddx_output, render_prediction, DdxPrediction, ParseError, PredictedDiagnosis,
    PredictionStatus,
};

use serde::{Deserialize, Serialize};

/// Every call site in the pipelines maps to exactly one prompt kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Forward,
    Backward,
    Examination,
    Cot,
    DiagnosisCot,
    SelfContrastSymptom,
    SelfContrastRuleOut,
    SelfContrastInspect,
    SelfContrastRevise,
    JudgeInterpretation,
    JudgeDiagnosis,
    ErrorClassifier,
}

/// Which property the error-classifier judge is probing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorFacet {
    /// Medical soundness of the evidence statements.
    Factual,
    /// Pertinence of the evidence to the diagnosis.
    Relevance,
}

/// One rejected diagnosis carried back into the forward prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackItem {
    pub name: String,
    /// Supporting-evidence count at the time of rejection.
    pub evidence_count: usize,
}

/// Context fields for [`render_prompt`]; each kind requires a subset.
#[derive(Debug, Clone, Copy, Default)]
pub struct PromptContext<'a> {
    pub note_text: Option<&'a str>,
    pub diagnoses: Option<&'a [String]>,
    /// Rendered forward prediction (examination input).
    pub forward_text: Option<&'a str>,
    /// Rendered recalled knowledge (examination input; absent in the
    /// forward-plus-examination ablations).
    pub recalled_text: Option<&'a str>,
    pub feedback: Option<&'a [FeedbackItem]>,
    pub answer_a: Option<&'a str>,
    pub answer_b: Option<&'a str>,
    pub checklist: Option<&'a str>,
    pub gold_item: Option<&'a str>,
    pub predicted_items: Option<&'a [String]>,
    pub gold_name: Option<&'a str>,
    pub predicted_name: Option<&'a str>,
    pub diagnosis_name: Option<&'a str>,
    pub error_facet: Option<ErrorFacet>,
}

/// System and user texts ready to wrap in a `ChatRequest`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub system_text: String,
    pub user_text: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("prompt kind {kind:?} requires context field `{field}`")]
    MissingContext {
        kind: PromptKind,
        field: &'static str,
    },
}

/// The format block appended to every prompt that must answer in the
/// structured grammar.
pub const GRAMMAR_INSTRUCTION: &str = "Answer in exactly this format, one block per diagnosis:\n\
The patient may suffer from *<diagnosis>* because of the following symptoms or evidence:\n\
\"<evidence 1>\", \"<evidence 2>\", ...\n\
Put every evidence item in double quotes. Do not add any other commentary.";

/// Reminder appended when a response failed to parse and the call is retried.
pub const FORMAT_REMINDER: &str = "Your previous answer did not follow the required format. \
Answer again, strictly in the format above, with each diagnosis introduced by the sentence \
\"The patient may suffer from *<diagnosis>* because of the following symptoms or evidence:\" \
and every evidence item in double quotes.";

/// Marker sentence introducing rejected diagnoses in a feedback prompt.
pub const FEEDBACK_MARKER: &str =
    "The following diagnoses from your previous answer were rejected as low-confidence";

/// Single-token answers expected from judge prompts.
pub const JUDGE_MATCH: &str = "MATCH";
pub const JUDGE_NO_MATCH: &str = "NO_MATCH";

const JUDGE_INSTRUCTION: &str = "Reply with exactly one word: MATCH or NO_MATCH.";

fn require<'a, T>(
    value: Option<T>,
    kind: PromptKind,
    field: &'static str,
) -> Result<T, ProtocolError>
where
    T: 'a,
{
    value.ok_or(ProtocolError::MissingContext { kind, field })
}

fn bullet_list(items: &[String]) -> String {
    items
        .iter()
        .map(|i| format!("- {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn feedback_section(feedback: &[FeedbackItem]) -> String {
    let mut seen = Vec::new();
    let mut lines = Vec::new();
    for item in feedback {
        let key = crate::text::normalize(&item.name);
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        lines.push(format!(
            "- {} (supporting evidence found so far: {})",
            item.name, item.evidence_count
        ));
    }
    format!(
        "{FEEDBACK_MARKER} because they had too few supporting interpretations:\n{}\n\
         Think twice about each of them: either provide stronger supporting evidence from the \
         note, or replace them with better-supported diagnoses.",
        lines.join("\n")
    )
}

/// Renders the prompt for a kind. Deterministic; fails when a required
/// context field is missing.
pub fn render_prompt(
    kind: PromptKind,
    ctx: &PromptContext,
) -> Result<RenderedPrompt, ProtocolError> {
    let prompt = match kind {
        PromptKind::Forward => {
            let note = require(ctx.note_text, kind, "note_text")?;
            let mut user = format!(
                "Read the patient note below and produce a differential diagnosis: list the \
                 possible diseases and, for each, the symptoms or evidence from the note that \
                 support it.\n\nPatient note:\n{note}\n\n{GRAMMAR_INSTRUCTION}"
            );
            if let Some(feedback) = ctx.feedback {
                if !feedback.is_empty() {
                    user.push_str("\n\n");
                    user.push_str(&feedback_section(feedback));
                }
            }
            RenderedPrompt {
                system_text: "You are an experienced clinician generating differential \
                              diagnoses from patient symptom descriptions."
                    .into(),
                user_text: user,
            }
        }
        PromptKind::Backward => {
            let diagnoses = require(ctx.diagnoses, kind, "diagnoses")?;
            RenderedPrompt {
                system_text: "You are a medical knowledge base. Recall disease presentations \
                              objectively, without reference to any specific patient."
                    .into(),
                user_text: format!(
                    "For each diagnosis below, recall all the representative symptoms of the \
                     disease, including medical examination findings and laboratory test \
                     results.\n\nDiagnoses:\n{}\n\n{GRAMMAR_INSTRUCTION}",
                    bullet_list(diagnoses)
                ),
            }
        }
        PromptKind::Examination => {
            let note = require(ctx.note_text, kind, "note_text")?;
            let forward = require(ctx.forward_text, kind, "forward_text")?;
            let mut user =
                "Examine the candidate differential diagnosis below against the patient note"
                    .to_string();
            if ctx.recalled_text.is_some() {
                user.push_str(" and the recalled disease knowledge");
            }
            user.push_str(
                ". Discard evidence that is erroneous, and supplement each diagnosis with \
                 any missing supporting evidence",
            );
            if ctx.recalled_text.is_some() {
                user.push_str(" drawn from the note or the recalled knowledge");
            } else {
                user.push_str(" drawn from the note");
            }
            user.push_str(". Output the revised differential in full.\n\nPatient note:\n");
            user.push_str(note);
            user.push_str("\n\nCandidate differential:\n");
            user.push_str(forward);
            if let Some(recalled) = ctx.recalled_text {
                user.push_str("\n\nRecalled disease knowledge:\n");
                user.push_str(recalled);
            }
            user.push_str("\n\n");
            user.push_str(GRAMMAR_INSTRUCTION);
            RenderedPrompt {
                system_text: "You are a meticulous clinical reviewer verifying differential \
                              diagnoses and their supporting evidence."
                    .into(),
                user_text: user,
            }
        }
        PromptKind::Cot => {
            let note = require(ctx.note_text, kind, "note_text")?;
            RenderedPrompt {
                system_text: "You are an experienced clinician generating differential \
                              diagnoses from patient symptom descriptions."
                    .into(),
                user_text: format!(
                    "Read the patient note below and produce a differential diagnosis with the \
                     supporting symptoms or evidence for each disease. Let's think step by \
                     step, then give the final answer.\n\nPatient note:\n{note}\n\n\
                     {GRAMMAR_INSTRUCTION}"
                ),
            }
        }
        PromptKind::DiagnosisCot => {
            let note = require(ctx.note_text, kind, "note_text")?;
            RenderedPrompt {
                system_text: "You are an experienced clinician generating differential \
                              diagnoses from patient symptom descriptions."
                    .into(),
                user_text: format!(
                    "Use diagnostic reasoning on the patient note below: first summarize the \
                     key findings, then reason from findings to candidate diseases the way a \
                     physician forms a differential, weighing which findings support or argue \
                     against each disease. Finally give the differential diagnosis with the \
                     supporting symptoms or evidence for each disease.\n\nPatient note:\n\
                     {note}\n\n{GRAMMAR_INSTRUCTION}"
                ),
            }
        }
        PromptKind::SelfContrastSymptom => {
            let note = require(ctx.note_text, kind, "note_text")?;
            RenderedPrompt {
                system_text: "You are an experienced clinician generating differential \
                              diagnoses from patient symptom descriptions."
                    .into(),
                user_text: format!(
                    "Take a symptom-driven perspective: start from the patient's presenting \
                     symptoms and work outward to the diseases that best explain them. Produce \
                     a differential diagnosis with the supporting symptoms or evidence for \
                     each disease.\n\nPatient note:\n{note}\n\n{GRAMMAR_INSTRUCTION}"
                ),
            }
        }
        PromptKind::SelfContrastRuleOut => {
            let note = require(ctx.note_text, kind, "note_text")?;
            RenderedPrompt {
                system_text: "You are an experienced clinician generating differential \
                              diagnoses from patient symptom descriptions."
                    .into(),
                user_text: format!(
                    "Take a rule-out-driven perspective: start from the dangerous or red-flag \
                     conditions that must not be missed for this presentation, and keep the \
                     ones the note cannot exclude. Produce a differential diagnosis with the \
                     supporting symptoms or evidence for each disease.\n\nPatient note:\n\
                     {note}\n\n{GRAMMAR_INSTRUCTION}"
                ),
            }
        }
        PromptKind::SelfContrastInspect => {
            let note = require(ctx.note_text, kind, "note_text")?;
            let answer_a = require(ctx.answer_a, kind, "answer_a")?;
            let answer_b = require(ctx.answer_b, kind, "answer_b")?;
            RenderedPrompt {
                system_text: "You are a careful clinical reviewer comparing two differential \
                              diagnoses."
                    .into(),
                user_text: format!(
                    "Two differential diagnoses were produced for the same patient from \
                     different perspectives. Inspect their discrepancies: list as a checklist \
                     every diagnosis or piece of evidence on which they disagree, and for each \
                     item note which answer the patient note supports.\n\nPatient note:\n\
                     {note}\n\nAnswer A:\n{answer_a}\n\nAnswer B:\n{answer_b}"
                ),
            }
        }
        PromptKind::SelfContrastRevise => {
            let note = require(ctx.note_text, kind, "note_text")?;
            let answer_a = require(ctx.answer_a, kind, "answer_a")?;
            let answer_b = require(ctx.answer_b, kind, "answer_b")?;
            let checklist = require(ctx.checklist, kind, "checklist")?;
            RenderedPrompt {
                system_text: "You are an experienced clinician generating differential \
                              diagnoses from patient symptom descriptions."
                    .into(),
                user_text: format!(
                    "Using the discrepancy checklist below, reconcile the two differential \
                     diagnoses into one revised answer that resolves each disagreement in \
                     favor of what the patient note supports.\n\nPatient note:\n{note}\n\n\
                     Answer A:\n{answer_a}\n\nAnswer B:\n{answer_b}\n\nDiscrepancy \
                     checklist:\n{checklist}\n\n{GRAMMAR_INSTRUCTION}"
                ),
            }
        }
        PromptKind::JudgeInterpretation => {
            let gold_item = require(ctx.gold_item, kind, "gold_item")?;
            let predicted = require(ctx.predicted_items, kind, "predicted_items")?;
            RenderedPrompt {
                system_text: "You are a clinical evaluation judge comparing interpretations."
                    .into(),
                user_text: format!(
                    "Reference evidence item:\n\"{gold_item}\"\n\nPredicted evidence items:\n\
                     {}\n\nDoes any predicted evidence item express the same clinical finding \
                     as the reference item? {JUDGE_INSTRUCTION}",
                    bullet_list(predicted)
                ),
            }
        }
        PromptKind::JudgeDiagnosis => {
            let gold_name = require(ctx.gold_name, kind, "gold_name")?;
            let predicted_name = require(ctx.predicted_name, kind, "predicted_name")?;
            RenderedPrompt {
                system_text: "You are a clinical evaluation judge comparing diagnoses.".into(),
                user_text: format!(
                    "Reference diagnosis: {gold_name}\nPredicted diagnosis: {predicted_name}\n\n\
                     Is the predicted diagnosis the same condition as the reference, or a \
                     synonym or subtype of it? {JUDGE_INSTRUCTION}"
                ),
            }
        }
        PromptKind::ErrorClassifier => {
            let facet = require(ctx.error_facet, kind, "error_facet")?;
            let note = require(ctx.note_text, kind, "note_text")?;
            let diagnosis = require(ctx.diagnosis_name, kind, "diagnosis_name")?;
            let items = require(ctx.predicted_items, kind, "predicted_items")?;
            let question = match facet {
                ErrorFacet::Factual => {
                    "Is the evidence statement medically sound and factually consistent with \
                     the patient note? Reply MATCH if it is sound, NO_MATCH if it contains a \
                     factual error."
                }
                ErrorFacet::Relevance => {
                    "Is the evidence statement highly pertinent to this diagnosis? Reply MATCH \
                     if it is pertinent, NO_MATCH if its relevance is low."
                }
            };
            RenderedPrompt {
                system_text: "You are a clinical evaluation judge examining predicted \
                              interpretations for errors."
                    .into(),
                user_text: format!(
                    "Patient note:\n{note}\n\nDiagnosis: {diagnosis}\nEvidence statement:\n{}\n\n\
                     {question} {JUDGE_INSTRUCTION}",
                    bullet_list(items)
                ),
            }
        }
    };
    Ok(prompt)
}

/// Strictly parses a judge reply into match/no-match. Tolerates
/// whitespace, case, and a trailing period; anything else is `None` and
/// counts as a judge error.
pub fn parse_judge_token(text: &str) -> Option<bool> {
    let cleaned = text.trim().trim_end_matches('.').trim().to_uppercase();
    match cleaned.as_str() {
        JUDGE_MATCH => Some(true),
        JUDGE_NO_MATCH => Some(false),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_prompt_contains_note_and_grammar() {
        let note = "Patient reports fever and productive cough for three days.";
        let p = render_prompt(
            PromptKind::Forward,
            &PromptContext {
                note_text: Some(note),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(p.user_text.contains(note));
        assert!(p.user_text.contains("The patient may suffer from"));
        assert!(!p.user_text.contains(FEEDBACK_MARKER));
    }

    #[test]
    fn forward_prompt_with_feedback_names_rejected_diagnoses() {
        let feedback = [FeedbackItem {
            name: "Pulmonary Contusion".into(),
            evidence_count: 1,
        }];
        let p = render_prompt(
            PromptKind::Forward,
            &PromptContext {
                note_text: Some("note body"),
                feedback: Some(&feedback),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(p.user_text.contains(FEEDBACK_MARKER));
        assert!(p.user_text.contains("Pulmonary Contusion"));
    }

    #[test]
    fn backward_prompt_asks_for_exam_and_lab_findings() {
        let diagnoses = vec!["Pneumothorax".to_string(), "Hemothorax".to_string()];
        let p = render_prompt(
            PromptKind::Backward,
            &PromptContext {
                diagnoses: Some(&diagnoses),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(p.user_text.contains("representative symptoms"));
        assert!(p.user_text.contains("medical examination"));
        assert!(p.user_text.contains("laboratory test"));
        assert!(p.user_text.contains("Pneumothorax"));
        assert!(p.user_text.contains("Hemothorax"));
    }

    #[test]
    fn missing_context_error_names_the_field() {
        let err = render_prompt(PromptKind::Examination, &PromptContext::default()).unwrap_err();
        assert!(err.to_string().contains("note_text"), "{err}");
        let err = render_prompt(
            PromptKind::Examination,
            &PromptContext {
                note_text: Some("n"),
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(err.to_string().contains("forward_text"), "{err}");
    }

    #[test]
    fn rendering_is_deterministic() {
        let ctx = PromptContext {
            note_text: Some("same note"),
            ..Default::default()
        };
        assert_eq!(
            render_prompt(PromptKind::Cot, &ctx).unwrap(),
            render_prompt(PromptKind::Cot, &ctx).unwrap()
        );
    }

    #[test]
    fn judge_token_parsing_is_strict() {
        assert_eq!(parse_judge_token("MATCH"), Some(true));
        assert_eq!(parse_judge_token(" no_match.\n"), Some(false));
        assert_eq!(parse_judge_token("match"), Some(true));
        assert_eq!(parse_judge_token("It matches."), None);
        assert_eq!(parse_judge_token(""), None);
    }
}
