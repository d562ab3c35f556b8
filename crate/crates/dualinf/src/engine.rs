//! The bidirectional-inference control loop and its ablation variants.
//!
//! One iteration of the full pipeline: forward inference proposes
//! diagnoses with evidence, backward inference recalls the representative
//! findings for those diagnoses, and the examination step revises the
//! evidence and flags diagnoses whose supporting-interpretation count is
//! below the threshold as low-confidence. Low-confidence diagnoses are fed
//! back to the forward prompt, for at most `max_iterations` rounds.
//!
//! Ablations reduce the loop: `fi` is forward only; `fi-em-star` adds one
//! examination pass; `fi-em` adds the reflection loop without backward
//! recall; `dual-inf-star` is one full bidirectional pass without
//! reflection.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{BackendError, ChatBackend, ChatExchange, ChatRequest};
use crate::corpus::NoteRecord;
use crate::protocol::{
    parse_ddx_output, render_prediction, render_prompt, DdxPrediction, FeedbackItem,
    PredictedDiagnosis, PredictionStatus, PromptContext, PromptKind, ProtocolError,
    FORMAT_REMINDER,
};
use crate::text::normalize;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
}

/// Pipeline variant; the full method plus the four ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    DualInf,
    Fi,
    FiEmStar,
    FiEm,
    DualInfStar,
}

impl Variant {
    pub fn uses_backward(self) -> bool {
        matches!(self, Variant::DualInf | Variant::DualInfStar)
    }

    pub fn uses_examination(self) -> bool {
        !matches!(self, Variant::Fi)
    }

    pub fn reflects(self) -> bool {
        matches!(self, Variant::DualInf | Variant::FiEm)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::DualInf => "dual-inf",
            Variant::Fi => "fi",
            Variant::FiEmStar => "fi-em-star",
            Variant::FiEm => "fi-em",
            Variant::DualInfStar => "dual-inf-star",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dual-inf" | "dual_inf" => Ok(Variant::DualInf),
            "fi" => Ok(Variant::Fi),
            "fi-em-star" | "fi_em_star" => Ok(Variant::FiEmStar),
            "fi-em" | "fi_em" => Ok(Variant::FiEm),
            "dual-inf-star" | "dual_inf_star" => Ok(Variant::DualInfStar),
            _ => Err(format!("unknown variant: {s:?}")),
        }
    }
}

/// Pipeline parameters. Defaults: β = 3 supporting interpretations,
/// λ = 5 iterations, temperature 0.1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub variant: Variant,
    /// Minimum supporting-interpretation count for a confident diagnosis.
    pub beta: u32,
    /// Maximum self-reflection iterations (λ).
    pub max_iterations: u32,
    pub temperature: f64,
    pub max_output: u32,
    pub forward_backend: String,
    pub backward_backend: String,
    pub examination_backend: String,
}

impl PipelineConfig {
    pub fn new(variant: Variant) -> Self {
        PipelineConfig {
            variant,
            beta: 3,
            max_iterations: 5,
            temperature: crate::backend::DEFAULT_TEMPERATURE,
            max_output: crate::backend::DEFAULT_MAX_OUTPUT,
            forward_backend: "default".into(),
            backward_backend: "default".into(),
            examination_backend: "default".into(),
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.beta < 1 {
            return Err(EngineError::InvalidConfig("beta must be >= 1".into()));
        }
        if self.max_iterations < 1 {
            return Err(EngineError::InvalidConfig(
                "max_iterations must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Iterations the variant actually runs.
    pub fn effective_iterations(&self) -> u32 {
        if self.variant.reflects() {
            self.max_iterations
        } else {
            1
        }
    }
}

/// One backend per pipeline role.
pub struct Backends<'a> {
    pub forward: &'a dyn ChatBackend,
    pub backward: &'a dyn ChatBackend,
    pub examination: &'a dyn ChatBackend,
}

impl<'a> Backends<'a> {
    /// All three roles served by the same backend.
    pub fn uniform(backend: &'a dyn ChatBackend) -> Self {
        Backends {
            forward: backend,
            backward: backend,
            examination: backend,
        }
    }
}

/// Where a surviving evidence string came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceSource {
    /// Present in the forward output.
    Forward,
    /// Supplemented from the recalled knowledge.
    Recalled,
    /// Supplemented from the note itself.
    Note,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExaminedEvidence {
    pub text: String,
    pub source: EvidenceSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExaminedDiagnosis {
    pub diagnosis_name: String,
    pub evidence: Vec<ExaminedEvidence>,
    pub status: PredictionStatus,
}

/// Result of one examination pass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExaminationOutcome {
    pub revised: Vec<ExaminedDiagnosis>,
    /// Names whose supporting-evidence count is strictly below β.
    pub low_confidence: Vec<String>,
    pub warning: Option<String>,
}

/// Recalled findings for one diagnosis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecalledEntry {
    pub diagnosis_name: String,
    pub items: Vec<String>,
}

/// Backward-inference output, covering exactly the submitted diagnoses.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecalledKnowledge {
    pub entries: Vec<RecalledEntry>,
}

impl RecalledKnowledge {
    /// Builds from a parsed prediction, restricted and padded so the
    /// result covers exactly `requested` (missing diagnoses get empty
    /// item lists, unrequested ones are dropped).
    pub fn from_prediction(prediction: &DdxPrediction, requested: &[String]) -> Self {
        let entries = requested
            .iter()
            .map(|name| {
                let items = prediction
                    .find_normalized(&normalize(name))
                    .map(|e| e.evidence.clone())
                    .unwrap_or_default();
                RecalledEntry {
                    diagnosis_name: name.clone(),
                    items,
                }
            })
            .collect();
        RecalledKnowledge { entries }
    }

    pub fn items_for(&self, normalized_name: &str) -> &[String] {
        self.entries
            .iter()
            .find(|e| normalize(&e.diagnosis_name) == normalized_name)
            .map(|e| e.items.as_slice())
            .unwrap_or(&[])
    }

    /// Renders in the output grammar for inclusion in the examination
    /// prompt.
    pub fn render(&self) -> String {
        let pred = DdxPrediction::from_entries(
            self.entries
                .iter()
                .map(|e| PredictedDiagnosis::new(e.diagnosis_name.clone(), e.items.clone())),
        );
        render_prediction(&pred)
    }
}

/// One loop iteration as recorded in the trace. `feedback` is the payload
/// sent into the next iteration; empty when the loop terminated here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: u32,
    pub forward: DdxPrediction,
    pub recalled: Option<RecalledKnowledge>,
    pub examination: Option<ExaminationOutcome>,
    pub feedback: Vec<FeedbackItem>,
}

/// Full per-note execution record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub note_id: String,
    pub variant: Variant,
    pub beta: u32,
    pub max_iterations: u32,
    pub iterations: Vec<IterationRecord>,
    pub iterations_used: u32,
    pub final_prediction: DdxPrediction,
    /// Cache keys of every backend exchange, in call order.
    pub exchange_digests: Vec<String>,
    /// Digest over all response texts, in call order.
    pub responses_digest: String,
    pub failure: Option<String>,
    pub warnings: Vec<String>,
    /// Run-config digest, stamped by the runner.
    pub config_digest: String,
}

/// Collects exchange digests and a rolling hash of response texts.
#[derive(Default)]
pub struct ExchangeLog {
    digests: Vec<String>,
    hasher: Sha256,
}

impl ExchangeLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, exchange: &ChatExchange) {
        self.digests.push(exchange.request.cache_key());
        self.hasher.update(exchange.response_text.as_bytes());
        self.hasher.update([0u8]);
    }

    pub fn digests(&self) -> &[String] {
        &self.digests
    }

    pub fn finish(self) -> (Vec<String>, String) {
        let digest = hex::encode(self.hasher.finalize());
        (self.digests, digest)
    }
}

/// A structured completion: parsed, or unparseable after the one retry.
pub(crate) enum StructuredOutcome {
    Parsed(DdxPrediction),
    Unparseable { raw: String },
}

/// Issues the request, parses the reply against the grammar, and on a
/// parse failure retries once with the format reminder appended.
pub(crate) fn complete_structured(
    backend: &dyn ChatBackend,
    request: &ChatRequest,
    log: &mut ExchangeLog,
) -> Result<StructuredOutcome, BackendError> {
    let first = backend.complete(request)?;
    log.record(&first);
    match parse_ddx_output(&first.response_text) {
        Ok(pred) => Ok(StructuredOutcome::Parsed(pred)),
        Err(_) => {
            let retry = ChatRequest {
                user_text: format!("{}\n\n{FORMAT_REMINDER}", request.user_text),
                ..request.clone()
            };
            let second = backend.complete(&retry)?;
            log.record(&second);
            match parse_ddx_output(&second.response_text) {
                Ok(pred) => Ok(StructuredOutcome::Parsed(pred)),
                Err(_) => Ok(StructuredOutcome::Unparseable {
                    raw: second.response_text,
                }),
            }
        }
    }
}

fn role_request(
    prompt: crate::protocol::RenderedPrompt,
    backend_id: &str,
    config: &PipelineConfig,
) -> ChatRequest {
    ChatRequest::new(backend_id, prompt.system_text, prompt.user_text)
        .with_temperature(config.temperature)
        .with_max_output(config.max_output)
}

/// Runs one examination pass: prompts the examination backend with the
/// note, the forward output, and the recalled knowledge when present;
/// attributes every surviving evidence string to its source; computes the
/// low-confidence set in code (strictly below β). If the examination
/// output stays unparseable after the retry, the forward prediction is
/// kept unchanged and a warning is recorded on the outcome.
pub fn examine(
    note: &NoteRecord,
    forward_pred: &DdxPrediction,
    recalled: Option<&RecalledKnowledge>,
    backend: &dyn ChatBackend,
    config: &PipelineConfig,
    log: &mut ExchangeLog,
) -> Result<ExaminationOutcome, EngineError> {
    let forward_text = render_prediction(forward_pred);
    let recalled_text = recalled.map(|r| r.render());
    let prompt = render_prompt(
        PromptKind::Examination,
        &PromptContext {
            note_text: Some(&note.note_text),
            forward_text: Some(&forward_text),
            recalled_text: recalled_text.as_deref(),
            ..Default::default()
        },
    )?;
    let request = role_request(prompt, &config.examination_backend, config);
    let revised_raw = match complete_structured(backend, &request, log)? {
        StructuredOutcome::Parsed(pred) => pred,
        StructuredOutcome::Unparseable { .. } => {
            let mut outcome = classify_revision(forward_pred, forward_pred, recalled, config.beta);
            outcome.warning =
                Some("examination output unparseable after retry; forward prediction kept".into());
            return Ok(outcome);
        }
    };
    Ok(classify_revision(
        &revised_raw,
        forward_pred,
        recalled,
        config.beta,
    ))
}

/// Attributes evidence sources and statuses for a revised prediction.
fn classify_revision(
    revised: &DdxPrediction,
    forward_pred: &DdxPrediction,
    recalled: Option<&RecalledKnowledge>,
    beta: u32,
) -> ExaminationOutcome {
    let mut out = Vec::new();
    let mut low_confidence = Vec::new();
    for entry in &revised.entries {
        let norm_name = normalize(&entry.diagnosis_name);
        let forward_entry = forward_pred.find_normalized(&norm_name);
        let evidence: Vec<ExaminedEvidence> = entry
            .evidence
            .iter()
            .map(|text| {
                let norm_text = normalize(text);
                let source = if forward_entry
                    .map(|f| f.evidence.iter().any(|ev| normalize(ev) == norm_text))
                    .unwrap_or(false)
                {
                    EvidenceSource::Forward
                } else if recalled
                    .map(|r| {
                        r.items_for(&norm_name)
                            .iter()
                            .any(|item| normalize(item) == norm_text)
                    })
                    .unwrap_or(false)
                {
                    EvidenceSource::Recalled
                } else {
                    EvidenceSource::Note
                };
                ExaminedEvidence {
                    text: text.clone(),
                    source,
                }
            })
            .collect();
        let status = if evidence.len() as u32 >= beta {
            PredictionStatus::Accepted
        } else {
            low_confidence.push(entry.diagnosis_name.clone());
            PredictionStatus::LowConfidence
        };
        out.push(ExaminedDiagnosis {
            diagnosis_name: entry.diagnosis_name.clone(),
            evidence,
            status,
        });
    }
    // Forward diagnoses the examination dropped entirely.
    for fwd in &forward_pred.entries {
        let norm_name = normalize(&fwd.diagnosis_name);
        if revised.find_normalized(&norm_name).is_none() {
            out.push(ExaminedDiagnosis {
                diagnosis_name: fwd.diagnosis_name.clone(),
                evidence: fwd
                    .evidence
                    .iter()
                    .map(|text| ExaminedEvidence {
                        text: text.clone(),
                        source: EvidenceSource::Forward,
                    })
                    .collect(),
                status: PredictionStatus::Filtered,
            });
        }
    }
    ExaminationOutcome {
        revised: out,
        low_confidence,
        warning: None,
    }
}

/// Builds the feedback payload from the low-confidence names of an
/// examination outcome: de-duplicated by normalized name, input order
/// preserved, each carrying its surviving evidence count.
pub fn build_feedback(
    low_confidence: &[String],
    outcome: &ExaminationOutcome,
) -> Vec<FeedbackItem> {
    let mut seen = Vec::new();
    let mut items = Vec::new();
    for name in low_confidence {
        let key = normalize(name);
        if seen.contains(&key) {
            continue;
        }
        seen.push(key.clone());
        let evidence_count = outcome
            .revised
            .iter()
            .find(|d| normalize(&d.diagnosis_name) == key)
            .map(|d| d.evidence.len())
            .unwrap_or(0);
        items.push(FeedbackItem {
            name: name.clone(),
            evidence_count,
        });
    }
    items
}

struct Unresolved {
    surface: String,
    evidence: Vec<String>,
    first_seen: u32,
    last_seen: u32,
    dropped_by_exam: bool,
}

/// Executes the configured pipeline variant over one note.
///
/// Parse failures after retry mark the note failed in the trace and the
/// run continues; only fatal backend errors (authentication) surface as
/// `Err`. With reflection enabled the loop terminates when no diagnosis
/// is low-confidence or λ is exhausted; at exhaustion, still-low-confidence
/// diagnoses are excluded from the accepted set but retained with status
/// `low_confidence`, and diagnoses that were fed back and then dropped
/// keep status `filtered`.
pub fn run_pipeline(
    note: &NoteRecord,
    config: &PipelineConfig,
    backends: &Backends,
) -> Result<PipelineTrace, EngineError> {
    config.validate()?;
    let mut log = ExchangeLog::new();
    let mut trace = PipelineTrace {
        note_id: note.id.clone(),
        variant: config.variant,
        beta: config.beta,
        max_iterations: config.max_iterations,
        iterations: Vec::new(),
        iterations_used: 0,
        final_prediction: DdxPrediction::default(),
        exchange_digests: Vec::new(),
        responses_digest: String::new(),
        failure: None,
        warnings: Vec::new(),
        config_digest: String::new(),
    };

    let lambda = config.effective_iterations();
    let mut accepted: Vec<PredictedDiagnosis> = Vec::new();
    let mut unresolved: IndexMap<String, Unresolved> = IndexMap::new();
    let mut feedback: Vec<FeedbackItem> = Vec::new();

    let loop_result: Result<(), EngineError> = (|| {
        for iteration in 1..=lambda {
            let prompt = render_prompt(
                PromptKind::Forward,
                &PromptContext {
                    note_text: Some(&note.note_text),
                    feedback: Some(&feedback),
                    ..Default::default()
                },
            )?;
            let request = role_request(prompt, &config.forward_backend, config);
            let forward = match complete_structured(backends.forward, &request, &mut log) {
                Ok(StructuredOutcome::Parsed(pred)) => pred,
                Ok(StructuredOutcome::Unparseable { .. }) => {
                    trace.failure = Some(format!(
                        "forward output unparseable after retry at iteration {iteration}"
                    ));
                    return Ok(());
                }
                Err(e) if e.is_fatal() => return Err(e.into()),
                Err(e) => {
                    trace.failure = Some(format!("forward call failed: {e}"));
                    return Ok(());
                }
            };

            let recalled = if config.variant.uses_backward() {
                let names = forward.diagnosis_names();
                if names.is_empty() {
                    Some(RecalledKnowledge::default())
                } else {
                    let prompt = render_prompt(
                        PromptKind::Backward,
                        &PromptContext {
                            diagnoses: Some(&names),
                            ..Default::default()
                        },
                    )?;
                    let request = role_request(prompt, &config.backward_backend, config);
                    match complete_structured(backends.backward, &request, &mut log) {
                        Ok(StructuredOutcome::Parsed(pred)) => {
                            Some(RecalledKnowledge::from_prediction(&pred, &names))
                        }
                        Ok(StructuredOutcome::Unparseable { .. }) => {
                            trace.warnings.push(format!(
                                "backward output unparseable after retry at iteration \
                                 {iteration}; proceeding with empty recalled knowledge"
                            ));
                            Some(RecalledKnowledge::from_prediction(
                                &DdxPrediction::default(),
                                &names,
                            ))
                        }
                        Err(e) if e.is_fatal() => return Err(e.into()),
                        Err(e) => {
                            trace.failure = Some(format!("backward call failed: {e}"));
                            return Ok(());
                        }
                    }
                }
            } else {
                None
            };

            if !config.variant.uses_examination() {
                accepted = forward
                    .entries
                    .iter()
                    .map(|e| PredictedDiagnosis {
                        diagnosis_name: e.diagnosis_name.clone(),
                        evidence: e.evidence.clone(),
                        status: PredictionStatus::Accepted,
                        born_iteration: iteration,
                    })
                    .collect();
                trace.iterations.push(IterationRecord {
                    index: iteration,
                    forward,
                    recalled,
                    examination: None,
                    feedback: Vec::new(),
                });
                return Ok(());
            }

            let exam = match examine(
                note,
                &forward,
                recalled.as_ref(),
                backends.examination,
                config,
                &mut log,
            ) {
                Ok(outcome) => outcome,
                Err(EngineError::Backend(e)) if !e.is_fatal() => {
                    trace.failure = Some(format!("examination call failed: {e}"));
                    return Ok(());
                }
                Err(e) => return Err(e),
            };
            if let Some(warning) = &exam.warning {
                trace
                    .warnings
                    .push(format!("iteration {iteration}: {warning}"));
            }

            for diagnosis in &exam.revised {
                let key = normalize(&diagnosis.diagnosis_name);
                let texts: Vec<String> =
                    diagnosis.evidence.iter().map(|e| e.text.clone()).collect();
                match diagnosis.status {
                    PredictionStatus::Accepted => {
                        if let Some(existing) = accepted
                            .iter_mut()
                            .find(|a| normalize(&a.diagnosis_name) == key)
                        {
                            // First acceptance wins; re-proposals merge evidence.
                            for text in texts {
                                if !existing.evidence.contains(&text) {
                                    existing.evidence.push(text);
                                }
                            }
                        } else {
                            accepted.push(PredictedDiagnosis {
                                diagnosis_name: diagnosis.diagnosis_name.clone(),
                                evidence: texts,
                                status: PredictionStatus::Accepted,
                                born_iteration: iteration,
                            });
                            unresolved.shift_remove(&key);
                        }
                    }
                    PredictionStatus::LowConfidence | PredictionStatus::Filtered => {
                        if accepted.iter().any(|a| normalize(&a.diagnosis_name) == key) {
                            continue;
                        }
                        let dropped = diagnosis.status == PredictionStatus::Filtered;
                        match unresolved.get_mut(&key) {
                            Some(entry) => {
                                entry.evidence = texts;
                                entry.last_seen = iteration;
                                entry.dropped_by_exam = dropped;
                            }
                            None => {
                                unresolved.insert(
                                    key,
                                    Unresolved {
                                        surface: diagnosis.diagnosis_name.clone(),
                                        evidence: texts,
                                        first_seen: iteration,
                                        last_seen: iteration,
                                        dropped_by_exam: dropped,
                                    },
                                );
                            }
                        }
                    }
                }
            }

            let low_effective: Vec<String> = exam
                .low_confidence
                .iter()
                .filter(|name| {
                    let key = normalize(name);
                    !accepted.iter().any(|a| normalize(&a.diagnosis_name) == key)
                })
                .cloned()
                .collect();
            let terminal = low_effective.is_empty() || iteration == lambda;
            let sent = if terminal {
                Vec::new()
            } else {
                build_feedback(&low_effective, &exam)
            };
            trace.iterations.push(IterationRecord {
                index: iteration,
                forward,
                recalled,
                examination: Some(exam),
                feedback: sent.clone(),
            });
            if terminal {
                return Ok(());
            }
            feedback = sent;
        }
        Ok(())
    })();
    loop_result?;

    trace.iterations_used = trace.iterations.len() as u32;
    let final_round = trace.iterations_used;
    let mut entries = accepted;
    for (_, pending) in unresolved {
        let status = if pending.dropped_by_exam || pending.last_seen < final_round {
            PredictionStatus::Filtered
        } else {
            PredictionStatus::LowConfidence
        };
        entries.push(PredictedDiagnosis {
            diagnosis_name: pending.surface,
            evidence: pending.evidence,
            status,
            born_iteration: pending.first_seen,
        });
    }
    trace.final_prediction = DdxPrediction { entries };
    let (digests, responses_digest) = log.finish();
    trace.exchange_digests = digests;
    trace.responses_digest = responses_digest;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{ScriptedBackend, TranscriptBuilder};
    use crate::corpus::Specialty;

    fn note() -> NoteRecord {
        NoteRecord {
            id: "case-1".into(),
            specialty: Specialty::Respiratory,
            note_text: "25-year male with left chest pain and LUQ pain following a motor \
                        vehicle accident. Dyspnea, productive cough, low-grade fever. \
                        Decreased breath sounds over the left lung field, left rib tenderness."
                .into(),
            differentials: vec![crate::corpus::DifferentialEntry {
                diagnosis_name: "Pneumothorax".into(),
                evidence: vec!["Dyspnea".into()],
            }],
        }
    }

    fn grammar(entries: &[(&str, &[&str])]) -> String {
        render_prediction(&DdxPrediction::from_entries(entries.iter().map(
            |(name, evidence)| {
                PredictedDiagnosis::new(
                    *name,
                    evidence.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
                )
            },
        )))
    }

    fn parse(entries: &[(&str, &[&str])]) -> DdxPrediction {
        parse_ddx_output(&grammar(entries)).unwrap()
    }

    fn forward_request(
        note: &NoteRecord,
        feedback: &[FeedbackItem],
        config: &PipelineConfig,
    ) -> ChatRequest {
        let prompt = render_prompt(
            PromptKind::Forward,
            &PromptContext {
                note_text: Some(&note.note_text),
                feedback: Some(feedback),
                ..Default::default()
            },
        )
        .unwrap();
        ChatRequest::new(
            &config.forward_backend,
            prompt.system_text,
            prompt.user_text,
        )
        .with_temperature(config.temperature)
        .with_max_output(config.max_output)
    }

    fn backward_request(names: &[String], config: &PipelineConfig) -> ChatRequest {
        let prompt = render_prompt(
            PromptKind::Backward,
            &PromptContext {
                diagnoses: Some(names),
                ..Default::default()
            },
        )
        .unwrap();
        ChatRequest::new(
            &config.backward_backend,
            prompt.system_text,
            prompt.user_text,
        )
        .with_temperature(config.temperature)
        .with_max_output(config.max_output)
    }

    fn exam_request(
        note: &NoteRecord,
        forward: &DdxPrediction,
        recalled: Option<&RecalledKnowledge>,
        config: &PipelineConfig,
    ) -> ChatRequest {
        let forward_text = render_prediction(forward);
        let recalled_text = recalled.map(|r| r.render());
        let prompt = render_prompt(
            PromptKind::Examination,
            &PromptContext {
                note_text: Some(&note.note_text),
                forward_text: Some(&forward_text),
                recalled_text: recalled_text.as_deref(),
                ..Default::default()
            },
        )
        .unwrap();
        ChatRequest::new(
            &config.examination_backend,
            prompt.system_text,
            prompt.user_text,
        )
        .with_temperature(config.temperature)
        .with_max_output(config.max_output)
    }

    const RIB: (&str, &[&str]) = (
        "Rib Fracture",
        &[
            "Left chest pain after the MVA",
            "Ecchymosis on left chest",
            "Left rib tenderness",
            "Pain worse with deep breath",
        ],
    );
    const PTX: (&str, &[&str]) = (
        "Pneumothorax",
        &[
            "Dyspnea",
            "Decreased breath sounds over left lung",
            "RR 22/minute",
        ],
    );
    const CONTUSION_WEAK: (&str, &[&str]) = ("Pulmonary Contusion", &["Productive cough"]);
    const HEMOTHORAX: (&str, &[&str]) = (
        "Hemothorax",
        &[
            "Left-sided chest pain after the MVA",
            "Decreased breath sounds over left lung",
            "Dyspnea",
        ],
    );

    fn recalled_for(raw: &[(&str, &[&str])], names: &[String]) -> RecalledKnowledge {
        RecalledKnowledge::from_prediction(&parse(raw), names)
    }

    /// The two-iteration scenario: one weak diagnosis is fed back and a
    /// better-supported replacement arrives in iteration 2.
    fn two_iteration_fixture(config: &PipelineConfig) -> (NoteRecord, ScriptedBackend) {
        let note = note();
        let mut builder = TranscriptBuilder::new();

        let fwd1 = parse(&[RIB, PTX, CONTUSION_WEAK]);
        builder.respond(
            &forward_request(&note, &[], config),
            grammar(&[RIB, PTX, CONTUSION_WEAK]),
        );
        let names1 = fwd1.diagnosis_names();
        let recall_raw1: Vec<(&str, &[&str])> = vec![
            ("Rib Fracture", &["Point tenderness", "Crepitus"] as &[&str]),
            ("Pneumothorax", &["Hyperresonance", "Absent breath sounds"]),
            ("Pulmonary Contusion", &["Hypoxemia"]),
        ];
        builder.respond(&backward_request(&names1, config), grammar(&recall_raw1));
        let recalled1 = recalled_for(&recall_raw1, &names1);
        builder.respond(
            &exam_request(&note, &fwd1, Some(&recalled1), config),
            grammar(&[RIB, PTX, CONTUSION_WEAK]),
        );

        let feedback = vec![FeedbackItem {
            name: "Pulmonary Contusion".into(),
            evidence_count: 1,
        }];
        let fwd2 = parse(&[HEMOTHORAX]);
        builder.respond(
            &forward_request(&note, &feedback, config),
            grammar(&[HEMOTHORAX]),
        );
        let names2 = fwd2.diagnosis_names();
        let recall_raw2: Vec<(&str, &[&str])> = vec![(
            "Hemothorax",
            &["Dullness to percussion", "Shock"] as &[&str],
        )];
        builder.respond(&backward_request(&names2, config), grammar(&recall_raw2));
        let recalled2 = recalled_for(&recall_raw2, &names2);
        builder.respond(
            &exam_request(&note, &fwd2, Some(&recalled2), config),
            grammar(&[HEMOTHORAX]),
        );

        (note, ScriptedBackend::new(builder.build().unwrap()))
    }

    #[test]
    fn two_iteration_feedback_scenario() {
        let config = PipelineConfig::new(Variant::DualInf);
        let (note, backend) = two_iteration_fixture(&config);
        let trace = run_pipeline(&note, &config, &Backends::uniform(&backend)).unwrap();

        assert!(trace.failure.is_none(), "{:?}", trace.failure);
        assert_eq!(trace.iterations_used, 2);
        let accepted: Vec<&str> = trace
            .final_prediction
            .accepted()
            .map(|e| e.diagnosis_name.as_str())
            .collect();
        assert_eq!(accepted, vec!["Rib Fracture", "Pneumothorax", "Hemothorax"]);
        // Feedback recorded on iteration 1 equals its low-confidence set.
        assert_eq!(
            trace.iterations[0].feedback,
            vec![FeedbackItem {
                name: "Pulmonary Contusion".into(),
                evidence_count: 1
            }]
        );
        assert_eq!(
            trace.iterations[0]
                .examination
                .as_ref()
                .unwrap()
                .low_confidence,
            vec!["Pulmonary Contusion".to_string()]
        );
        assert!(trace.iterations[1].feedback.is_empty());
        // The fed-back diagnosis was replaced, so it ends filtered.
        let contusion = trace
            .final_prediction
            .find_normalized("pulmonary contusion")
            .unwrap();
        assert_eq!(contusion.status, PredictionStatus::Filtered);
        // Born iterations track acceptance rounds.
        assert_eq!(trace.final_prediction.entries[0].born_iteration, 1);
        assert_eq!(
            trace
                .final_prediction
                .find_normalized("hemothorax")
                .unwrap()
                .born_iteration,
            2
        );
    }

    #[test]
    fn fixed_point_scenario_terminates_in_one_iteration() {
        let config = PipelineConfig::new(Variant::DualInf);
        let note = note();
        let mut builder = TranscriptBuilder::new();
        let fwd = parse(&[RIB, PTX]);
        builder.respond(&forward_request(&note, &[], &config), grammar(&[RIB, PTX]));
        let names = fwd.diagnosis_names();
        let recall_raw: Vec<(&str, &[&str])> = vec![
            ("Rib Fracture", &["Point tenderness"] as &[&str]),
            ("Pneumothorax", &["Hyperresonance"]),
        ];
        builder.respond(&backward_request(&names, &config), grammar(&recall_raw));
        let recalled = recalled_for(&recall_raw, &names);
        builder.respond(
            &exam_request(&note, &fwd, Some(&recalled), &config),
            grammar(&[RIB, PTX]),
        );
        let backend = ScriptedBackend::new(builder.build().unwrap());

        let trace = run_pipeline(&note, &config, &Backends::uniform(&backend)).unwrap();
        assert_eq!(trace.iterations_used, 1);
        assert!(trace.iterations[0].feedback.is_empty());
        assert_eq!(trace.final_prediction.accepted().count(), 2);
        assert!(trace
            .final_prediction
            .entries
            .iter()
            .all(|e| e.status == PredictionStatus::Accepted));
        // Final prediction equals the examined forward output.
        assert_eq!(
            trace.final_prediction.diagnosis_names(),
            vec!["Rib Fracture".to_string(), "Pneumothorax".to_string()]
        );
    }

    /// λ-exhaustion: the weak diagnosis never reaches β and every
    /// iteration repeats the same feedback.
    fn exhaustion_fixture(config: &PipelineConfig) -> (NoteRecord, ScriptedBackend) {
        let note = note();
        let mut builder = TranscriptBuilder::new();
        let weak: (&str, &[&str]) = ("Pleurisy", &["Chest pain", "Pain worse with breathing"]);

        let fwd1 = parse(&[RIB, weak]);
        builder.respond(&forward_request(&note, &[], config), grammar(&[RIB, weak]));
        let names1 = fwd1.diagnosis_names();
        let recall1: Vec<(&str, &[&str])> = vec![
            ("Rib Fracture", &["Point tenderness"] as &[&str]),
            ("Pleurisy", &["Friction rub"]),
        ];
        builder.respond(&backward_request(&names1, config), grammar(&recall1));
        builder.respond(
            &exam_request(&note, &fwd1, Some(&recalled_for(&recall1, &names1)), config),
            grammar(&[RIB, weak]),
        );

        // Iterations 2..λ all see the same feedback, so one entry per
        // request digest serves them all.
        let feedback = vec![FeedbackItem {
            name: "Pleurisy".into(),
            evidence_count: 2,
        }];
        let fwd_n = parse(&[weak]);
        builder.respond(&forward_request(&note, &feedback, config), grammar(&[weak]));
        let names_n = fwd_n.diagnosis_names();
        let recall_n: Vec<(&str, &[&str])> = vec![("Pleurisy", &["Friction rub"] as &[&str])];
        builder.respond(&backward_request(&names_n, config), grammar(&recall_n));
        builder.respond(
            &exam_request(
                &note,
                &fwd_n,
                Some(&recalled_for(&recall_n, &names_n)),
                config,
            ),
            grammar(&[weak]),
        );

        (note, ScriptedBackend::new(builder.build().unwrap()))
    }

    #[test]
    fn lambda_exhaustion_keeps_weak_diagnosis_as_low_confidence() {
        let config = PipelineConfig::new(Variant::DualInf);
        let (note, backend) = exhaustion_fixture(&config);
        let trace = run_pipeline(&note, &config, &Backends::uniform(&backend)).unwrap();

        assert_eq!(trace.iterations_used, 5);
        let accepted: Vec<&str> = trace
            .final_prediction
            .accepted()
            .map(|e| e.diagnosis_name.as_str())
            .collect();
        assert_eq!(accepted, vec!["Rib Fracture"]);
        let weak = trace.final_prediction.find_normalized("pleurisy").unwrap();
        assert_eq!(weak.status, PredictionStatus::LowConfidence);
        assert_eq!(weak.born_iteration, 1);
        // Every non-terminal iteration fed the same diagnosis back.
        for record in &trace.iterations[..4] {
            assert_eq!(record.feedback.len(), 1);
            assert_eq!(record.feedback[0].name, "Pleurisy");
        }
        assert!(trace.iterations[4].feedback.is_empty());
    }

    #[test]
    fn traces_serialize_byte_identically_across_executions() {
        let config = PipelineConfig::new(Variant::DualInf);
        let (note, backend) = two_iteration_fixture(&config);
        let t1 = run_pipeline(&note, &config, &Backends::uniform(&backend)).unwrap();
        let (note2, backend2) = two_iteration_fixture(&config);
        let t2 = run_pipeline(&note2, &config, &Backends::uniform(&backend2)).unwrap();
        assert_eq!(
            serde_json::to_vec(&t1).unwrap(),
            serde_json::to_vec(&t2).unwrap()
        );
    }

    #[test]
    fn invariants_hold_on_all_scenario_traces() {
        let config = PipelineConfig::new(Variant::DualInf);
        let mut traces = Vec::new();
        let (note, backend) = two_iteration_fixture(&config);
        traces.push(run_pipeline(&note, &config, &Backends::uniform(&backend)).unwrap());
        let (note, backend) = exhaustion_fixture(&config);
        traces.push(run_pipeline(&note, &config, &Backends::uniform(&backend)).unwrap());

        for trace in traces {
            assert!(trace.iterations_used <= trace.max_iterations);
            assert_eq!(trace.iterations_used as usize, trace.iterations.len());
            for entry in trace.final_prediction.accepted() {
                assert!(entry.evidence.len() as u32 >= trace.beta);
                assert!(entry.born_iteration <= trace.max_iterations);
            }
            // Feedback soundness: each fed-back name was low-confidence in
            // the same iteration's examination outcome.
            for record in &trace.iterations {
                let exam = record.examination.as_ref().unwrap();
                for item in &record.feedback {
                    assert!(exam.low_confidence.contains(&item.name));
                }
            }
        }
    }

    #[test]
    fn fi_variant_is_forward_only() {
        let note = note();
        let config = PipelineConfig::new(Variant::Fi);
        let mut builder = TranscriptBuilder::new();
        builder.respond(
            &forward_request(&note, &[], &config),
            grammar(&[RIB, CONTUSION_WEAK]),
        );
        let backend = ScriptedBackend::new(builder.build().unwrap());
        let trace = run_pipeline(&note, &config, &Backends::uniform(&backend)).unwrap();
        assert_eq!(trace.iterations_used, 1);
        assert!(trace.iterations[0].examination.is_none());
        assert!(trace.iterations[0].recalled.is_none());
        // No β filtering without the examination module.
        assert_eq!(trace.final_prediction.accepted().count(), 2);
        assert_eq!(backend.call_count(), 1);
    }

    #[test]
    fn variant_lattice_on_shared_transcripts() {
        let dual_cfg = PipelineConfig::new(Variant::DualInf);
        let note = note();

        // Shared transcript covering every variant's requests.
        let mut builder = TranscriptBuilder::new();
        let fwd = parse(&[RIB, PTX, CONTUSION_WEAK]);
        builder.respond(
            &forward_request(&note, &[], &dual_cfg),
            grammar(&[RIB, PTX, CONTUSION_WEAK]),
        );
        let names = fwd.diagnosis_names();
        let recall_raw: Vec<(&str, &[&str])> = vec![
            ("Rib Fracture", &["Point tenderness"] as &[&str]),
            ("Pneumothorax", &["Hyperresonance"]),
            ("Pulmonary Contusion", &["Hypoxemia"]),
        ];
        builder.respond(&backward_request(&names, &dual_cfg), grammar(&recall_raw));
        let recalled = recalled_for(&recall_raw, &names);
        // Examination with recalled knowledge (dual variants).
        builder.respond(
            &exam_request(&note, &fwd, Some(&recalled), &dual_cfg),
            grammar(&[RIB, PTX, CONTUSION_WEAK]),
        );
        // Examination without recalled knowledge (fi-em variants).
        builder.respond(
            &exam_request(&note, &fwd, None, &dual_cfg),
            grammar(&[RIB, PTX, CONTUSION_WEAK]),
        );
        // Reflection rounds for dual-inf and fi-em.
        let feedback = vec![FeedbackItem {
            name: "Pulmonary Contusion".into(),
            evidence_count: 1,
        }];
        let fwd2 = parse(&[HEMOTHORAX]);
        builder.respond(
            &forward_request(&note, &feedback, &dual_cfg),
            grammar(&[HEMOTHORAX]),
        );
        let names2 = fwd2.diagnosis_names();
        let recall2: Vec<(&str, &[&str])> =
            vec![("Hemothorax", &["Dullness to percussion"] as &[&str])];
        builder.respond(&backward_request(&names2, &dual_cfg), grammar(&recall2));
        builder.respond(
            &exam_request(
                &note,
                &fwd2,
                Some(&recalled_for(&recall2, &names2)),
                &dual_cfg,
            ),
            grammar(&[HEMOTHORAX]),
        );
        builder.respond(
            &exam_request(&note, &fwd2, None, &dual_cfg),
            grammar(&[HEMOTHORAX]),
        );
        let backend = ScriptedBackend::new(builder.build().unwrap());
        let backends = Backends::uniform(&backend);

        let run = |variant: Variant| {
            let config = PipelineConfig::new(variant);
            run_pipeline(&note, &config, &backends).unwrap()
        };
        let fi = run(Variant::Fi);
        let fi_em_star = run(Variant::FiEmStar);
        let fi_em = run(Variant::FiEm);
        let dual_star = run(Variant::DualInfStar);
        let dual = run(Variant::DualInf);

        // fi is fi-em-star minus the examination record.
        assert_eq!(fi.iterations[0].forward, fi_em_star.iterations[0].forward);
        assert!(fi.iterations[0].examination.is_none());
        assert!(fi_em_star.iterations[0].examination.is_some());

        // dual-inf-star equals dual-inf truncated to iteration 1.
        assert_eq!(dual_star.iterations_used, 1);
        assert_eq!(dual_star.iterations[0].forward, dual.iterations[0].forward);
        assert_eq!(
            dual_star.iterations[0].recalled,
            dual.iterations[0].recalled
        );
        assert_eq!(
            dual_star.iterations[0].examination,
            dual.iterations[0].examination
        );

        // Reflection variants run the second round; fi-em never recalls.
        assert_eq!(dual.iterations_used, 2);
        assert_eq!(fi_em.iterations_used, 2);
        assert!(fi_em.iterations.iter().all(|r| r.recalled.is_none()));

        // Without reflection the weak diagnosis stays low-confidence.
        assert_eq!(
            dual_star
                .final_prediction
                .find_normalized("pulmonary contusion")
                .unwrap()
                .status,
            PredictionStatus::LowConfidence
        );
    }

    #[test]
    fn examination_boundary_respects_strictly_below_beta() {
        let config = PipelineConfig::new(Variant::DualInf);
        let revised = parse(&[("A", &["e1", "e2"]), ("B", &["e1", "e2", "e3"])]);
        let outcome = classify_revision(&revised, &revised, None, config.beta);
        assert_eq!(outcome.low_confidence, vec!["A".to_string()]);
        assert_eq!(outcome.revised[0].status, PredictionStatus::LowConfidence);
        assert_eq!(outcome.revised[1].status, PredictionStatus::Accepted);
    }

    #[test]
    fn examination_attributes_evidence_sources() {
        let forward = parse(&[("Pneumothorax", &["Dyspnea", "Wrong evidence"])]);
        let names = forward.diagnosis_names();
        let recalled = recalled_for(
            &[("Pneumothorax", &["Hyperresonance", "Absent breath sounds"])],
            &names,
        );
        // Revision drops the erroneous item and supplements two recalled
        // ones and one item from the note.
        let revised = parse(&[(
            "Pneumothorax",
            &[
                "Dyspnea",
                "Hyperresonance",
                "Absent breath sounds",
                "RR 22/minute",
            ],
        )]);
        let outcome = classify_revision(&revised, &forward, Some(&recalled), 3);
        let entry = &outcome.revised[0];
        assert_eq!(entry.status, PredictionStatus::Accepted);
        let sources: Vec<EvidenceSource> = entry.evidence.iter().map(|e| e.source).collect();
        assert_eq!(
            sources,
            vec![
                EvidenceSource::Forward,
                EvidenceSource::Recalled,
                EvidenceSource::Recalled,
                EvidenceSource::Note
            ]
        );
        assert!(outcome.low_confidence.is_empty());
    }

    #[test]
    fn examination_marks_dropped_diagnoses_filtered() {
        let forward = parse(&[("A", &["e1", "e2", "e3"]), ("B", &["e4"])]);
        let revised = parse(&[("A", &["e1", "e2", "e3"])]);
        let outcome = classify_revision(&revised, &forward, None, 3);
        let dropped = outcome
            .revised
            .iter()
            .find(|d| d.diagnosis_name == "B")
            .unwrap();
        assert_eq!(dropped.status, PredictionStatus::Filtered);
        // Dropped diagnoses are not low-confidence; they are not fed back.
        assert!(outcome.low_confidence.is_empty());
    }

    #[test]
    fn build_feedback_dedups_and_preserves_order() {
        let outcome = ExaminationOutcome {
            revised: vec![
                ExaminedDiagnosis {
                    diagnosis_name: "Alpha".into(),
                    evidence: vec![ExaminedEvidence {
                        text: "e".into(),
                        source: EvidenceSource::Forward,
                    }],
                    status: PredictionStatus::LowConfidence,
                },
                ExaminedDiagnosis {
                    diagnosis_name: "Beta".into(),
                    evidence: vec![],
                    status: PredictionStatus::LowConfidence,
                },
            ],
            low_confidence: vec!["Alpha".into(), "Beta".into()],
            warning: None,
        };
        let names = vec!["Alpha".to_string(), "ALPHA".to_string(), "Beta".to_string()];
        let feedback = build_feedback(&names, &outcome);
        assert_eq!(
            feedback,
            vec![
                FeedbackItem {
                    name: "Alpha".into(),
                    evidence_count: 1
                },
                FeedbackItem {
                    name: "Beta".into(),
                    evidence_count: 0
                },
            ]
        );
    }

    #[test]
    fn reproposed_accepted_diagnosis_merges_evidence_union() {
        let config = PipelineConfig::new(Variant::DualInf);
        let note = note();
        let mut builder = TranscriptBuilder::new();

        let strong: (&str, &[&str]) = ("Asthma", &["e1", "e2", "e3"]);
        let weak: (&str, &[&str]) = ("Bronchiolitis", &["w1"]);
        let fwd1 = parse(&[strong, weak]);
        builder.respond(&forward_request(&note, &[], &config), grammar(&[strong, weak]));
        let names1 = fwd1.diagnosis_names();
        let recall1: Vec<(&str, &[&str])> = vec![
            ("Asthma", &["wheeze"] as &[&str]),
            ("Bronchiolitis", &["rsv season"]),
        ];
        builder.respond(&backward_request(&names1, &config), grammar(&recall1));
        builder.respond(
            &exam_request(&note, &fwd1, Some(&recalled_for(&recall1, &names1)), &config),
            grammar(&[strong, weak]),
        );

        // Iteration 2 re-proposes the accepted diagnosis with partly new
        // evidence and drops the weak one.
        let feedback = vec![FeedbackItem { name: "Bronchiolitis".into(), evidence_count: 1 }];
        let reproposal: (&str, &[&str]) = ("Asthma", &["e1", "e4", "e5"]);
        let fwd2 = parse(&[reproposal]);
        builder.respond(&forward_request(&note, &feedback, &config), grammar(&[reproposal]));
        let names2 = fwd2.diagnosis_names();
        let recall2: Vec<(&str, &[&str])> = vec![("Asthma", &["wheeze"] as &[&str])];
        builder.respond(&backward_request(&names2, &config), grammar(&recall2));
        builder.respond(
            &exam_request(&note, &fwd2, Some(&recalled_for(&recall2, &names2)), &config),
            grammar(&[reproposal]),
        );

        let backend = ScriptedBackend::new(builder.build().unwrap());
        let trace = run_pipeline(&note, &config, &Backends::uniform(&backend)).unwrap();
        assert_eq!(trace.iterations_used, 2);
        let asthma = trace.final_prediction.find_normalized("asthma").unwrap();
        assert_eq!(asthma.status, PredictionStatus::Accepted);
        // First acceptance wins the provenance; the evidence is unioned.
        assert_eq!(asthma.born_iteration, 1);
        assert_eq!(asthma.evidence, vec!["e1", "e2", "e3", "e4", "e5"]);
        assert_eq!(
            trace.final_prediction.find_normalized("bronchiolitis").unwrap().status,
            PredictionStatus::Filtered
        );
    }

    #[test]
    fn unparseable_forward_marks_note_failed() {
        let note = note();
        let config = PipelineConfig::new(Variant::DualInf);
        let first = forward_request(&note, &[], &config);
        let retry = ChatRequest {
            user_text: format!("{}\n\n{FORMAT_REMINDER}", first.user_text),
            ..first.clone()
        };
        let mut builder = TranscriptBuilder::new();
        builder.respond(&first, "no structure here");
        builder.respond(&retry, "still refusing to answer in the format");
        let backend = ScriptedBackend::new(builder.build().unwrap());
        let trace = run_pipeline(&note, &config, &Backends::uniform(&backend)).unwrap();
        assert!(trace.failure.as_deref().unwrap().contains("unparseable"));
        assert!(trace.final_prediction.is_empty());
        assert_eq!(backend.call_count(), 2);
        assert_eq!(trace.exchange_digests.len(), 2);
    }

    #[test]
    fn unparseable_examination_keeps_forward_with_warning() {
        let note = note();
        let config = PipelineConfig::new(Variant::FiEmStar);
        let fwd = parse(&[RIB, PTX]);
        let mut builder = TranscriptBuilder::new();
        builder.respond(&forward_request(&note, &[], &config), grammar(&[RIB, PTX]));
        let exam_req = exam_request(&note, &fwd, None, &config);
        let exam_retry = ChatRequest {
            user_text: format!("{}\n\n{FORMAT_REMINDER}", exam_req.user_text),
            ..exam_req.clone()
        };
        builder.respond(&exam_req, "garbage");
        builder.respond(&exam_retry, "more garbage");
        let backend = ScriptedBackend::new(builder.build().unwrap());
        let trace = run_pipeline(&note, &config, &Backends::uniform(&backend)).unwrap();
        assert!(trace.failure.is_none());
        assert_eq!(trace.warnings.len(), 1);
        assert_eq!(trace.final_prediction.accepted().count(), 2);
    }

    #[test]
    fn variant_strings_round_trip() {
        for v in [
            Variant::DualInf,
            Variant::Fi,
            Variant::FiEmStar,
            Variant::FiEm,
            Variant::DualInfStar,
        ] {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(serde_json::from_str::<Variant>(&json).unwrap(), v);
        }
    }
}
