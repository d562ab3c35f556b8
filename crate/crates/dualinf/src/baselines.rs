//! Comparison methods: chain-of-thought, diagnostic-reasoning
//! chain-of-thought, self-consistency over sampled paths, and the
//! two-perspective self-contrast procedure.

use serde::{Deserialize, Serialize};

use crate::backend::{ChatBackend, ChatRequest};
use crate::corpus::NoteRecord;
use crate::engine::{complete_structured, EngineError, ExchangeLog, StructuredOutcome};
use crate::protocol::{
    render_prompt, DdxPrediction, PredictedDiagnosis, PredictionStatus, PromptContext, PromptKind,
};
use crate::text::normalize;

/// The four baseline methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMethod {
    Cot,
    DiagnosisCot,
    ScCot,
    SelfContrast,
}

impl BaselineMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineMethod::Cot => "cot",
            BaselineMethod::DiagnosisCot => "diagnosis-cot",
            BaselineMethod::ScCot => "sc-cot",
            BaselineMethod::SelfContrast => "self-contrast",
        }
    }
}

impl std::fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BaselineMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cot" => Ok(BaselineMethod::Cot),
            "diagnosis-cot" | "diagnosis_cot" => Ok(BaselineMethod::DiagnosisCot),
            "sc-cot" | "sc_cot" => Ok(BaselineMethod::ScCot),
            "self-contrast" | "self_contrast" => Ok(BaselineMethod::SelfContrast),
            _ => Err(format!("unknown baseline method: {s:?}")),
        }
    }
}

/// Baseline parameters. Self-consistency samples `paths` reasoning paths
/// (default 5) at `sample_temperature` (default 0.7, since greedy decoding
/// would collapse the paths) and keeps diagnoses reaching the vote
/// threshold (default majority).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    pub paths: u32,
    /// Defaults to majority, ⌈(paths+1)/2⌉.
    pub vote_threshold: Option<u32>,
    pub temperature: f64,
    pub sample_temperature: f64,
    pub max_output: u32,
    pub backend_id: String,
}

impl BaselineConfig {
    pub fn new(method: BaselineMethod) -> Self {
        BaselineConfig {
            method,
            paths: 5,
            vote_threshold: None,
            temperature: crate::backend::DEFAULT_TEMPERATURE,
            sample_temperature: 0.7,
            max_output: crate::backend::DEFAULT_MAX_OUTPUT,
            backend_id: "default".into(),
        }
    }

    pub fn effective_threshold(&self) -> u32 {
        self.vote_threshold.unwrap_or((self.paths + 1).div_ceil(2))
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.paths < 1 {
            return Err(EngineError::InvalidConfig("paths must be >= 1".into()));
        }
        let threshold = self.effective_threshold();
        if threshold < 1 || threshold > self.paths {
            return Err(EngineError::InvalidConfig(format!(
                "vote threshold {threshold} outside [1, {}]",
                self.paths
            )));
        }
        Ok(())
    }
}

/// One raw model output retained alongside the final answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathOutput {
    pub label: String,
    pub raw_text: String,
    pub parsed: bool,
}

/// Per-note baseline result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineOutcome {
    pub note_id: String,
    pub method: BaselineMethod,
    pub prediction: DdxPrediction,
    pub path_outputs: Vec<PathOutput>,
    pub exchange_digests: Vec<String>,
    pub responses_digest: String,
    pub failure: Option<String>,
    /// Run-config digest, stamped by the runner.
    pub config_digest: String,
}

/// Keeps a diagnosis iff its normalized name appears in at least
/// `threshold` paths. A kept diagnosis carries the evidence strings that
/// appear in at least ⌈threshold/2⌉ of the paths containing it
/// (normalized-string equality, first surface form wins). Output is
/// ordered by vote count, then first appearance.
pub fn consistency_vote(paths: &[DdxPrediction], threshold: u32) -> DdxPrediction {
    struct Tally {
        surface: String,
        votes: usize,
        first_appearance: usize,
        // (normalized, surface, votes, first appearance)
        evidence: Vec<(String, String, usize, usize)>,
    }

    let mut order: Vec<String> = Vec::new();
    let mut tallies: std::collections::HashMap<String, Tally> = std::collections::HashMap::new();
    let mut appearance = 0usize;

    for path in paths {
        for entry in &path.entries {
            let key = normalize(&entry.diagnosis_name);
            if key.is_empty() {
                continue;
            }
            appearance += 1;
            let tally = tallies.entry(key.clone()).or_insert_with(|| {
                order.push(key.clone());
                Tally {
                    surface: entry.diagnosis_name.clone(),
                    votes: 0,
                    first_appearance: appearance,
                    evidence: Vec::new(),
                }
            });
            tally.votes += 1;
            let mut seen_in_path: Vec<String> = Vec::new();
            for item in &entry.evidence {
                let norm_item = normalize(item);
                if norm_item.is_empty() || seen_in_path.contains(&norm_item) {
                    continue;
                }
                seen_in_path.push(norm_item.clone());
                appearance += 1;
                match tally
                    .evidence
                    .iter_mut()
                    .find(|(n, _, _, _)| *n == norm_item)
                {
                    Some(slot) => slot.2 += 1,
                    None => tally
                        .evidence
                        .push((norm_item, item.clone(), 1, appearance)),
                }
            }
        }
    }

    let evidence_threshold = (threshold as usize).div_ceil(2);
    let mut kept: Vec<(&String, &Tally)> = order
        .iter()
        .map(|key| (key, &tallies[key]))
        .filter(|(_, t)| t.votes >= threshold as usize)
        .collect();
    kept.sort_by(|(_, a), (_, b)| {
        b.votes
            .cmp(&a.votes)
            .then(a.first_appearance.cmp(&b.first_appearance))
    });

    let entries = kept
        .into_iter()
        .map(|(_, tally)| {
            let mut evidence: Vec<&(String, String, usize, usize)> = tally
                .evidence
                .iter()
                .filter(|(_, _, votes, _)| *votes >= evidence_threshold)
                .collect();
            evidence.sort_by_key(|(_, _, _, first)| *first);
            PredictedDiagnosis {
                diagnosis_name: tally.surface.clone(),
                evidence: evidence.into_iter().map(|(_, s, _, _)| s.clone()).collect(),
                status: PredictionStatus::Accepted,
                born_iteration: 1,
            }
        })
        .collect();
    DdxPrediction { entries }
}

fn request(
    kind: PromptKind,
    ctx: &PromptContext,
    config: &BaselineConfig,
    temperature: f64,
) -> Result<ChatRequest, EngineError> {
    let prompt = render_prompt(kind, ctx)?;
    Ok(
        ChatRequest::new(&config.backend_id, prompt.system_text, prompt.user_text)
            .with_temperature(temperature)
            .with_max_output(config.max_output),
    )
}

enum CallDisposition {
    Parsed(DdxPrediction, String),
    Unparseable(String),
    NoteFailed(String),
}

fn structured_call(
    backend: &dyn ChatBackend,
    req: &ChatRequest,
    log: &mut ExchangeLog,
) -> Result<CallDisposition, EngineError> {
    match complete_structured(backend, req, log) {
        Ok(StructuredOutcome::Parsed(pred)) => {
            let raw = crate::protocol::render_prediction(&pred);
            Ok(CallDisposition::Parsed(pred, raw))
        }
        Ok(StructuredOutcome::Unparseable { raw }) => Ok(CallDisposition::Unparseable(raw)),
        Err(e) if e.is_fatal() => Err(e.into()),
        Err(e) => Ok(CallDisposition::NoteFailed(e.to_string())),
    }
}

/// Runs one baseline over a note. Unparseable single-shot outputs fail the
/// note after the format-reminder retry; unparseable self-consistency
/// paths are dropped from the vote, and the note fails only when every
/// path drops.
pub fn run_baseline(
    note: &NoteRecord,
    config: &BaselineConfig,
    backend: &dyn ChatBackend,
) -> Result<BaselineOutcome, EngineError> {
    config.validate()?;
    let mut log = ExchangeLog::new();
    let mut outcome = BaselineOutcome {
        note_id: note.id.clone(),
        method: config.method,
        prediction: DdxPrediction::default(),
        path_outputs: Vec::new(),
        exchange_digests: Vec::new(),
        responses_digest: String::new(),
        failure: None,
        config_digest: String::new(),
    };
    let note_ctx = PromptContext {
        note_text: Some(&note.note_text),
        ..Default::default()
    };

    let run = |outcome: &mut BaselineOutcome, log: &mut ExchangeLog| -> Result<(), EngineError> {
        match config.method {
            BaselineMethod::Cot | BaselineMethod::DiagnosisCot => {
                let kind = if config.method == BaselineMethod::Cot {
                    PromptKind::Cot
                } else {
                    PromptKind::DiagnosisCot
                };
                let req = request(kind, &note_ctx, config, config.temperature)?;
                match structured_call(backend, &req, log)? {
                    CallDisposition::Parsed(pred, raw) => {
                        outcome.path_outputs.push(PathOutput {
                            label: "answer".into(),
                            raw_text: raw,
                            parsed: true,
                        });
                        outcome.prediction = pred;
                    }
                    CallDisposition::Unparseable(raw) => {
                        outcome.path_outputs.push(PathOutput {
                            label: "answer".into(),
                            raw_text: raw,
                            parsed: false,
                        });
                        outcome.failure = Some("output unparseable after retry".into());
                    }
                    CallDisposition::NoteFailed(message) => outcome.failure = Some(message),
                }
            }
            BaselineMethod::ScCot => {
                let mut parsed_paths = Vec::new();
                for path_index in 0..config.paths {
                    // 1-based sample indices keep each path's cache entry
                    // distinct and replayable.
                    let req = request(
                        PromptKind::Cot,
                        &note_ctx,
                        config,
                        config.sample_temperature,
                    )?
                    .with_sample_index(path_index + 1);
                    let exchange = match backend.complete(&req) {
                        Ok(ex) => ex,
                        Err(e) if e.is_fatal() => return Err(e.into()),
                        Err(e) => {
                            outcome.failure = Some(format!("path {} failed: {e}", path_index + 1));
                            return Ok(());
                        }
                    };
                    log.record(&exchange);
                    let label = format!("path-{}", path_index + 1);
                    match crate::protocol::parse_ddx_output(&exchange.response_text) {
                        Ok(pred) => {
                            outcome.path_outputs.push(PathOutput {
                                label,
                                raw_text: exchange.response_text,
                                parsed: true,
                            });
                            parsed_paths.push(pred);
                        }
                        Err(_) => {
                            // Dropped from the vote.
                            outcome.path_outputs.push(PathOutput {
                                label,
                                raw_text: exchange.response_text,
                                parsed: false,
                            });
                        }
                    }
                }
                if parsed_paths.is_empty() {
                    outcome.failure = Some("all self-consistency paths unparseable".into());
                } else {
                    outcome.prediction =
                        consistency_vote(&parsed_paths, config.effective_threshold());
                }
            }
            BaselineMethod::SelfContrast => {
                let mut answers = Vec::new();
                for (label, kind) in [
                    ("perspective-a", PromptKind::SelfContrastSymptom),
                    ("perspective-b", PromptKind::SelfContrastRuleOut),
                ] {
                    let req = request(kind, &note_ctx, config, config.temperature)?;
                    let exchange = match backend.complete(&req) {
                        Ok(ex) => ex,
                        Err(e) if e.is_fatal() => return Err(e.into()),
                        Err(e) => {
                            outcome.failure = Some(format!("{label} failed: {e}"));
                            return Ok(());
                        }
                    };
                    log.record(&exchange);
                    outcome.path_outputs.push(PathOutput {
                        label: label.into(),
                        raw_text: exchange.response_text.clone(),
                        parsed: crate::protocol::parse_ddx_output(&exchange.response_text).is_ok(),
                    });
                    answers.push(exchange.response_text);
                }
                let inspect_ctx = PromptContext {
                    note_text: Some(&note.note_text),
                    answer_a: Some(&answers[0]),
                    answer_b: Some(&answers[1]),
                    ..Default::default()
                };
                let req = request(
                    PromptKind::SelfContrastInspect,
                    &inspect_ctx,
                    config,
                    config.temperature,
                )?;
                let checklist = match backend.complete(&req) {
                    Ok(ex) => ex,
                    Err(e) if e.is_fatal() => return Err(e.into()),
                    Err(e) => {
                        outcome.failure = Some(format!("inspection failed: {e}"));
                        return Ok(());
                    }
                };
                log.record(&checklist);
                outcome.path_outputs.push(PathOutput {
                    label: "inspect".into(),
                    raw_text: checklist.response_text.clone(),
                    parsed: false,
                });
                let revise_ctx = PromptContext {
                    note_text: Some(&note.note_text),
                    answer_a: Some(&answers[0]),
                    answer_b: Some(&answers[1]),
                    checklist: Some(&checklist.response_text),
                    ..Default::default()
                };
                let req = request(
                    PromptKind::SelfContrastRevise,
                    &revise_ctx,
                    config,
                    config.temperature,
                )?;
                match structured_call(backend, &req, log)? {
                    CallDisposition::Parsed(pred, raw) => {
                        outcome.path_outputs.push(PathOutput {
                            label: "revise".into(),
                            raw_text: raw,
                            parsed: true,
                        });
                        outcome.prediction = pred;
                    }
                    CallDisposition::Unparseable(raw) => {
                        outcome.path_outputs.push(PathOutput {
                            label: "revise".into(),
                            raw_text: raw,
                            parsed: false,
                        });
                        outcome.failure = Some("revised output unparseable after retry".into());
                    }
                    CallDisposition::NoteFailed(message) => outcome.failure = Some(message),
                }
            }
        }
        Ok(())
    };
    run(&mut outcome, &mut log)?;

    let (digests, responses_digest) = log.finish();
    outcome.exchange_digests = digests;
    outcome.responses_digest = responses_digest;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{ScriptedBackend, TranscriptBuilder};
    use crate::corpus::Specialty;
    use crate::protocol::render_prediction;

    fn note() -> NoteRecord {
        NoteRecord {
            id: "b-1".into(),
            specialty: Specialty::Respiratory,
            note_text: "Adult patient with several days of fever, productive cough, and \
                        pleuritic chest pain. Crackles over the right lower lobe, oxygen \
                        saturation mildly reduced, respiratory rate elevated at rest."
                .into(),
            differentials: vec![crate::corpus::DifferentialEntry {
                diagnosis_name: "Pneumonia".into(),
                evidence: vec!["fever".into()],
            }],
        }
    }

    fn pred(entries: &[(&str, &[&str])]) -> DdxPrediction {
        DdxPrediction::from_entries(entries.iter().map(|(name, evidence)| {
            PredictedDiagnosis::new(
                *name,
                evidence.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
            )
        }))
    }

    fn names(p: &DdxPrediction) -> Vec<&str> {
        p.entries
            .iter()
            .map(|e| e.diagnosis_name.as_str())
            .collect()
    }

    #[test]
    fn unanimous_paths_are_a_fixed_point() {
        let path = pred(&[("A", &["e1", "e2"]), ("B", &["e3"])]);
        let paths = vec![path.clone(); 5];
        let voted = consistency_vote(&paths, 3);
        assert_eq!(names(&voted), names(&path));
        assert_eq!(voted.entries[0].evidence, path.entries[0].evidence);
        assert_eq!(voted.entries[1].evidence, path.entries[1].evidence);
    }

    #[test]
    fn single_path_threshold_one_is_identity() {
        let path = pred(&[("A", &["e1"])]);
        let voted = consistency_vote(std::slice::from_ref(&path), 1);
        assert_eq!(voted, path);
    }

    #[test]
    fn majority_vote_keeps_and_excludes() {
        // D appears in 4 of 5 paths; E in 2 of 5. Majority threshold = 3.
        let with_d = pred(&[("D", &["e1"])]);
        let with_de = pred(&[("D", &["e1"]), ("E", &["e2"])]);
        let other = pred(&[("F", &["e3"])]);
        let paths = vec![with_d.clone(), with_de.clone(), with_d, with_de, other];
        let voted = consistency_vote(&paths, 3);
        assert_eq!(names(&voted), vec!["D"]);
    }

    #[test]
    fn vote_orders_by_count_then_first_appearance() {
        let paths = vec![
            pred(&[("A", &["e"]), ("B", &["e"])]),
            pred(&[("B", &["e"]), ("C", &["e"])]),
            pred(&[("B", &["e"]), ("A", &["e"])]),
        ];
        let voted = consistency_vote(&paths, 2);
        // B has 3 votes, A has 2; C fails the threshold.
        assert_eq!(names(&voted), vec!["B", "A"]);
    }

    #[test]
    fn evidence_votes_are_conditional_on_the_kept_diagnosis() {
        // Threshold 3 → evidence needs ⌈3/2⌉ = 2 of the containing paths.
        let paths = vec![
            pred(&[("A", &["common", "rare"])]),
            pred(&[("A", &["common"])]),
            pred(&[("A", &["common", "other"])]),
        ];
        let voted = consistency_vote(&paths, 3);
        assert_eq!(voted.entries[0].evidence, vec!["common"]);
    }

    #[test]
    fn kept_set_is_permutation_invariant() {
        let paths = vec![
            pred(&[("A", &["e1"])]),
            pred(&[("B", &["e2"])]),
            pred(&[("A", &["e1"]), ("B", &["e2"])]),
            pred(&[("A", &["e3"])]),
        ];
        let mut reversed = paths.clone();
        reversed.reverse();
        let a = consistency_vote(&paths, 2);
        let b = consistency_vote(&reversed, 2);
        let set = |p: &DdxPrediction| {
            p.entries
                .iter()
                .map(|e| normalize(&e.diagnosis_name))
                .collect::<std::collections::BTreeSet<_>>()
        };
        assert_eq!(set(&a), set(&b));
    }

    #[test]
    fn raising_threshold_never_adds_a_diagnosis() {
        let paths = vec![
            pred(&[("A", &["e"]), ("B", &["e"])]),
            pred(&[("A", &["e"])]),
            pred(&[("B", &["e"]), ("C", &["e"])]),
        ];
        let mut previous: Option<std::collections::BTreeSet<String>> = None;
        for threshold in 1..=3 {
            let kept: std::collections::BTreeSet<String> = consistency_vote(&paths, threshold)
                .entries
                .iter()
                .map(|e| normalize(&e.diagnosis_name))
                .collect();
            if let Some(prev) = &previous {
                assert!(
                    kept.is_subset(prev),
                    "threshold {threshold} added diagnoses"
                );
            }
            previous = Some(kept);
        }
    }

    fn cot_request(note: &NoteRecord, config: &BaselineConfig, temperature: f64) -> ChatRequest {
        let prompt = render_prompt(
            PromptKind::Cot,
            &PromptContext {
                note_text: Some(&note.note_text),
                ..Default::default()
            },
        )
        .unwrap();
        ChatRequest::new(&config.backend_id, prompt.system_text, prompt.user_text)
            .with_temperature(temperature)
            .with_max_output(config.max_output)
    }

    #[test]
    fn cot_passes_through_the_parsed_response() {
        let note = note();
        let config = BaselineConfig::new(BaselineMethod::Cot);
        let answer = pred(&[("Pneumonia", &["fever", "cough", "crackles"])]);
        let mut builder = TranscriptBuilder::new();
        builder.respond(
            &cot_request(&note, &config, config.temperature),
            render_prediction(&answer),
        );
        let backend = ScriptedBackend::new(builder.build().unwrap());
        let outcome = run_baseline(&note, &config, &backend).unwrap();
        assert!(outcome.failure.is_none());
        assert_eq!(outcome.prediction, answer);
        assert_eq!(outcome.path_outputs.len(), 1);
    }

    #[test]
    fn sc_cot_votes_across_sampled_paths_and_drops_garbage() {
        let note = note();
        let config = BaselineConfig::new(BaselineMethod::ScCot);
        let strong = render_prediction(&pred(&[("Pneumonia", &["fever", "cough"])]));
        let weak = render_prediction(&pred(&[("Bronchitis", &["cough"])]));
        let base = cot_request(&note, &config, config.sample_temperature);
        let mut builder = TranscriptBuilder::new();
        builder.respond_seq(
            &base,
            [
                strong.as_str(),
                strong.as_str(),
                weak.as_str(),
                strong.as_str(),
                "garbage",
            ],
        );
        let backend = ScriptedBackend::new(builder.build().unwrap());
        let outcome = run_baseline(&note, &config, &backend).unwrap();
        assert!(outcome.failure.is_none());
        // Pneumonia appears in 3 of 4 parsed paths; majority of 5 is 3.
        assert_eq!(names(&outcome.prediction), vec!["Pneumonia"]);
        assert_eq!(outcome.path_outputs.len(), 5);
        assert!(!outcome.path_outputs[4].parsed);
        assert_eq!(backend.call_count(), 5);
    }

    #[test]
    fn sc_cot_fails_when_every_path_is_garbage() {
        let note = note();
        let config = BaselineConfig::new(BaselineMethod::ScCot);
        let base = cot_request(&note, &config, config.sample_temperature);
        let mut builder = TranscriptBuilder::new();
        builder.respond_seq(&base, ["g1", "g2", "g3", "g4", "g5"]);
        let backend = ScriptedBackend::new(builder.build().unwrap());
        let outcome = run_baseline(&note, &config, &backend).unwrap();
        assert!(outcome.failure.is_some());
        assert!(outcome.prediction.is_empty());
    }

    #[test]
    fn self_contrast_runs_the_four_stage_sequence() {
        let note = note();
        let config = BaselineConfig::new(BaselineMethod::SelfContrast);
        let answer_a = render_prediction(&pred(&[("Pneumonia", &["fever", "cough", "crackles"])]));
        let answer_b = render_prediction(&pred(&[(
            "Pulmonary embolism",
            &["pleuritic pain", "tachypnea"],
        )]));
        let final_answer = pred(&[("Pneumonia", &["fever", "cough", "crackles"])]);

        let mk = |kind: PromptKind, ctx: &PromptContext| {
            let prompt = render_prompt(kind, ctx).unwrap();
            ChatRequest::new(&config.backend_id, prompt.system_text, prompt.user_text)
                .with_temperature(config.temperature)
                .with_max_output(config.max_output)
        };
        let note_ctx = PromptContext {
            note_text: Some(&note.note_text),
            ..Default::default()
        };
        let checklist_text = "- disagreement: PE only in answer B; note favors pneumonia";
        let mut builder = TranscriptBuilder::new();
        builder.respond(
            &mk(PromptKind::SelfContrastSymptom, &note_ctx),
            answer_a.clone(),
        );
        builder.respond(
            &mk(PromptKind::SelfContrastRuleOut, &note_ctx),
            answer_b.clone(),
        );
        let inspect_ctx = PromptContext {
            note_text: Some(&note.note_text),
            answer_a: Some(&answer_a),
            answer_b: Some(&answer_b),
            ..Default::default()
        };
        builder.respond(
            &mk(PromptKind::SelfContrastInspect, &inspect_ctx),
            checklist_text,
        );
        let revise_ctx = PromptContext {
            note_text: Some(&note.note_text),
            answer_a: Some(&answer_a),
            answer_b: Some(&answer_b),
            checklist: Some(checklist_text),
            ..Default::default()
        };
        builder.respond(
            &mk(PromptKind::SelfContrastRevise, &revise_ctx),
            render_prediction(&final_answer),
        );
        let backend = ScriptedBackend::new(builder.build().unwrap());
        let outcome = run_baseline(&note, &config, &backend).unwrap();
        assert!(outcome.failure.is_none());
        assert_eq!(outcome.prediction, final_answer);
        let labels: Vec<&str> = outcome
            .path_outputs
            .iter()
            .map(|p| p.label.as_str())
            .collect();
        assert_eq!(
            labels,
            vec!["perspective-a", "perspective-b", "inspect", "revise"]
        );
        assert_eq!(backend.call_count(), 4);
    }

    #[test]
    fn config_validation_bounds_threshold() {
        let mut config = BaselineConfig::new(BaselineMethod::ScCot);
        config.vote_threshold = Some(6);
        assert!(config.validate().is_err());
        config.vote_threshold = Some(5);
        assert!(config.validate().is_ok());
        assert_eq!(
            BaselineConfig::new(BaselineMethod::ScCot).effective_threshold(),
            3
        );
    }
}
