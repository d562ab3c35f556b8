//! Shared fixture authoring for the integration and acceptance suites:
//! small corpora, structured-grammar text, and scripted pipeline sessions
//! that mirror the requests the runner will issue.

#![allow(dead_code)]

use std::path::Path;

use dualinf::backend::{ChatRequest, TranscriptBuilder, DEFAULT_MAX_OUTPUT, DEFAULT_TEMPERATURE};
use dualinf::corpus::{Corpus, DifferentialEntry, NoteRecord, Specialty};
use dualinf::engine::RecalledKnowledge;
use dualinf::protocol::{
    render_prediction, render_prompt, DdxPrediction, FeedbackItem, PredictedDiagnosis,
    PromptContext, PromptKind,
};

pub const BACKEND_ID: &str = "default";

pub fn note(id: &str, specialty: Specialty, diffs: &[(&str, &[&str])]) -> NoteRecord {
    NoteRecord {
        id: id.into(),
        specialty,
        note_text: format!(
            "Synthetic note {id}: the patient presents with a constellation of findings \
             sufficient to support several differentials. History, vitals, physical \
             examination, and laboratory data are described in free text."
        ),
        differentials: diffs
            .iter()
            .map(|(name, evidence)| DifferentialEntry {
                diagnosis_name: (*name).into(),
                evidence: evidence.iter().map(|e| (*e).into()).collect(),
            })
            .collect(),
    }
}

/// A corpus of `n` notes cycling through the specialties; each note has
/// two gold differentials with three evidence strings apiece, so an
/// identity session passes the default β = 3.
pub fn fixture_corpus(n: usize) -> Corpus {
    let notes = (0..n)
        .map(|i| {
            let specialty = Specialty::ALL[i % Specialty::ALL.len()];
            let a = format!("Condition A{i}");
            let b = format!("Condition B{i}");
            note(
                &format!("note-{i:03}"),
                specialty,
                &[
                    (
                        a.as_str(),
                        &[
                            &format!("finding {i} alpha") as &str,
                            &format!("finding {i} beta"),
                            &format!("finding {i} gamma"),
                        ][..],
                    ),
                    (
                        b.as_str(),
                        &[
                            &format!("sign {i} delta") as &str,
                            &format!("sign {i} epsilon"),
                            &format!("sign {i} zeta"),
                        ][..],
                    ),
                ],
            )
        })
        .collect();
    Corpus::new(notes).expect("fixture corpus is valid")
}

pub fn prediction(entries: &[(&str, &[&str])]) -> DdxPrediction {
    DdxPrediction::from_entries(entries.iter().map(|(name, evidence)| {
        PredictedDiagnosis::new(
            *name,
            evidence.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
        )
    }))
}

pub fn grammar(entries: &[(&str, &[&str])]) -> String {
    render_prediction(&prediction(entries))
}

pub fn chat_request(kind: PromptKind, ctx: &PromptContext) -> ChatRequest {
    let prompt = render_prompt(kind, ctx).expect("prompt renders");
    ChatRequest::new(BACKEND_ID, prompt.system_text, prompt.user_text)
        .with_temperature(DEFAULT_TEMPERATURE)
        .with_max_output(DEFAULT_MAX_OUTPUT)
}

pub fn forward_request(note: &NoteRecord, feedback: &[FeedbackItem]) -> ChatRequest {
    chat_request(
        PromptKind::Forward,
        &PromptContext {
            note_text: Some(&note.note_text),
            feedback: Some(feedback),
            ..Default::default()
        },
    )
}

pub fn backward_request(names: &[String]) -> ChatRequest {
    chat_request(
        PromptKind::Backward,
        &PromptContext {
            diagnoses: Some(names),
            ..Default::default()
        },
    )
}

pub fn exam_request(
    note: &NoteRecord,
    forward: &DdxPrediction,
    recalled: Option<&RecalledKnowledge>,
) -> ChatRequest {
    let forward_text = render_prediction(forward);
    let recalled_text = recalled.map(|r| r.render());
    chat_request(
        PromptKind::Examination,
        &PromptContext {
            note_text: Some(&note.note_text),
            forward_text: Some(&forward_text),
            recalled_text: recalled_text.as_deref(),
            ..Default::default()
        },
    )
}

fn recalled_for(pred: &DdxPrediction) -> RecalledKnowledge {
    let names = pred.diagnosis_names();
    let items: Vec<(String, Vec<String>)> = names
        .iter()
        .map(|n| (n.clone(), vec![format!("textbook finding for {n}")]))
        .collect();
    let as_pred = DdxPrediction::from_entries(
        items
            .iter()
            .map(|(n, ev)| PredictedDiagnosis::new(n.clone(), ev.clone())),
    );
    RecalledKnowledge::from_prediction(&as_pred, &names)
}

/// Scripts a one-iteration fixed-point session: forward proposes exactly
/// the gold differentials, backward recalls one finding per diagnosis,
/// and examination confirms everything. The final accepted set equals the
/// gold differentials.
pub fn script_identity_session(builder: &mut TranscriptBuilder, note: &NoteRecord) {
    let entries: Vec<(String, Vec<String>)> = note
        .differentials
        .iter()
        .map(|d| (d.diagnosis_name.clone(), d.evidence.clone()))
        .collect();
    let text = render_prediction(&DdxPrediction::from_entries(
        entries
            .iter()
            .map(|(n, ev)| PredictedDiagnosis::new(n.clone(), ev.clone())),
    ));
    let forward = dualinf::protocol::parse_ddx_output(&text).unwrap();
    builder.respond(&forward_request(note, &[]), text.clone());
    let recalled = recalled_for(&forward);
    builder.respond(
        &backward_request(&forward.diagnosis_names()),
        recalled.render(),
    );
    builder.respond(&exam_request(note, &forward, Some(&recalled)), text);
}

/// Scripts a two-iteration session: the first forward pass includes one
/// weak diagnosis ("Weak Lead <id>") that is fed back and replaced by
/// "Late Arrival <id>" with three evidence strings in iteration 2.
pub fn script_two_iteration_session(builder: &mut TranscriptBuilder, note: &NoteRecord) {
    let strong: Vec<(String, Vec<String>)> = note
        .differentials
        .iter()
        .map(|d| (d.diagnosis_name.clone(), d.evidence.clone()))
        .collect();
    let weak_name = format!("Weak Lead {}", note.id);
    let mut first = strong.clone();
    first.push((weak_name.clone(), vec![format!("thin hint {}", note.id)]));

    let text1 = render_prediction(&DdxPrediction::from_entries(
        first
            .iter()
            .map(|(n, ev)| PredictedDiagnosis::new(n.clone(), ev.clone())),
    ));
    let forward1 = dualinf::protocol::parse_ddx_output(&text1).unwrap();
    builder.respond(&forward_request(note, &[]), text1.clone());
    let recalled1 = recalled_for(&forward1);
    builder.respond(
        &backward_request(&forward1.diagnosis_names()),
        recalled1.render(),
    );
    builder.respond(&exam_request(note, &forward1, Some(&recalled1)), text1);

    let feedback = vec![FeedbackItem {
        name: weak_name,
        evidence_count: 1,
    }];
    let late = format!("Late Arrival {}", note.id);
    let replacement: Vec<(String, Vec<String>)> = vec![(
        late.clone(),
        vec![
            format!("new clue {} one", note.id),
            format!("new clue {} two", note.id),
            format!("new clue {} three", note.id),
        ],
    )];
    let text2 = render_prediction(&DdxPrediction::from_entries(
        replacement
            .iter()
            .map(|(n, ev)| PredictedDiagnosis::new(n.clone(), ev.clone())),
    ));
    let forward2 = dualinf::protocol::parse_ddx_output(&text2).unwrap();
    builder.respond(&forward_request(note, &feedback), text2.clone());
    let recalled2 = recalled_for(&forward2);
    builder.respond(
        &backward_request(&forward2.diagnosis_names()),
        recalled2.render(),
    );
    builder.respond(&exam_request(note, &forward2, Some(&recalled2)), text2);
}

/// Scripts a λ-exhaustion session: "Stubborn Lead <id>" never exceeds two
/// evidence strings, so the loop runs the full five iterations and the
/// diagnosis ends low-confidence.
pub fn script_exhaustion_session(builder: &mut TranscriptBuilder, note: &NoteRecord) {
    let strong: Vec<(String, Vec<String>)> = note
        .differentials
        .iter()
        .map(|d| (d.diagnosis_name.clone(), d.evidence.clone()))
        .collect();
    let weak_name = format!("Stubborn Lead {}", note.id);
    let weak_evidence = vec![
        format!("vague sign {} one", note.id),
        format!("vague sign {} two", note.id),
    ];
    let mut first = strong.clone();
    first.push((weak_name.clone(), weak_evidence.clone()));

    let text1 = render_prediction(&DdxPrediction::from_entries(
        first
            .iter()
            .map(|(n, ev)| PredictedDiagnosis::new(n.clone(), ev.clone())),
    ));
    let forward1 = dualinf::protocol::parse_ddx_output(&text1).unwrap();
    builder.respond(&forward_request(note, &[]), text1.clone());
    let recalled1 = recalled_for(&forward1);
    builder.respond(
        &backward_request(&forward1.diagnosis_names()),
        recalled1.render(),
    );
    builder.respond(&exam_request(note, &forward1, Some(&recalled1)), text1);

    // Iterations 2..λ repeat byte-identical requests, so one entry each
    // suffices.
    let feedback = vec![FeedbackItem {
        name: weak_name.clone(),
        evidence_count: 2,
    }];
    let text_n = render_prediction(&DdxPrediction::from_entries([PredictedDiagnosis::new(
        weak_name,
        weak_evidence,
    )]));
    let forward_n = dualinf::protocol::parse_ddx_output(&text_n).unwrap();
    builder.respond(&forward_request(note, &feedback), text_n.clone());
    let recalled_n = recalled_for(&forward_n);
    builder.respond(
        &backward_request(&forward_n.diagnosis_names()),
        recalled_n.render(),
    );
    builder.respond(&exam_request(note, &forward_n, Some(&recalled_n)), text_n);
}

/// Writes the dataset, transcript, and backend config into `dir`,
/// returning (dataset path, backend-config path).
pub fn write_run_inputs(
    dir: &Path,
    corpus: &Corpus,
    builder: &TranscriptBuilder,
) -> (std::path::PathBuf, std::path::PathBuf) {
    let dataset = dir.join("dataset.jsonl");
    corpus.save(&dataset).unwrap();
    let transcript = dir.join("transcript.json");
    builder.write(&transcript).unwrap();
    let backend_config = dir.join("backends.json");
    std::fs::write(
        &backend_config,
        serde_json::json!({
            "backends": {
                "default": {"kind": "scripted", "transcript": "transcript.json"}
            },
            "roles": {}
        })
        .to_string(),
    )
    .unwrap();
    (dataset, backend_config)
}

/// Digest of every file under a directory, path-keyed, for byte-identity
/// comparisons.
pub fn dir_digest(dir: &Path) -> std::collections::BTreeMap<String, String> {
    use sha2::{Digest, Sha256};
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(current) = stack.pop() {
        for entry in std::fs::read_dir(&current).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n != "LOCK") {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                let bytes = std::fs::read(&path).unwrap();
                out.insert(rel, hex::encode(Sha256::digest(&bytes)));
            }
        }
    }
    out
}
