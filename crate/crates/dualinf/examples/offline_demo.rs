//! Offline demo: author a two-note corpus and a scripted transcript, then
//! drive the full run → evaluate → report chain without any network.
//!
//! ```sh
//! cargo run --example offline_demo -- /tmp/dualinf-demo
//! ```

use std::path::Path;

use dualinf::backend::TranscriptBuilder;
use dualinf::cli::{
    cmd_evaluate, cmd_report, cmd_run, EvaluateConfig, Method, ReportConfig, RunConfig,
};
use dualinf::corpus::{Corpus, DifferentialEntry, NoteRecord, Specialty};
use dualinf::engine::{RecalledKnowledge, Variant};
use dualinf::protocol::{
    parse_ddx_output, render_prediction, render_prompt, DdxPrediction, PredictedDiagnosis,
    PromptContext, PromptKind,
};

fn note(id: &str, specialty: Specialty, diffs: &[(&str, &[&str])]) -> NoteRecord {
    NoteRecord {
        id: id.into(),
        specialty,
        note_text: format!(
            "Demo note {id}: adult patient presenting with a cluster of findings described \
             at length here so the record clears the minimum note size enforced by the \
             corpus loader. History, examination, and laboratory results follow."
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

/// Scripts a fixed-point session: forward proposes the gold differentials,
/// backward recalls one finding each, examination confirms.
fn script_session(builder: &mut TranscriptBuilder, note: &NoteRecord) {
    let request = |kind: PromptKind, ctx: &PromptContext| {
        let prompt = render_prompt(kind, ctx).unwrap();
        dualinf::backend::ChatRequest::new("default", prompt.system_text, prompt.user_text)
    };
    let answer = render_prediction(&DdxPrediction::from_entries(
        note.differentials
            .iter()
            .map(|d| PredictedDiagnosis::new(d.diagnosis_name.clone(), d.evidence.clone())),
    ));
    let forward = parse_ddx_output(&answer).unwrap();
    builder.respond(
        &request(
            PromptKind::Forward,
            &PromptContext {
                note_text: Some(&note.note_text),
                feedback: Some(&[]),
                ..Default::default()
            },
        ),
        answer.clone(),
    );

    let names = forward.diagnosis_names();
    let recalled_pred = DdxPrediction::from_entries(names.iter().map(|n| {
        PredictedDiagnosis::new(n.clone(), vec![format!("classic presentation of {n}")])
    }));
    let recalled = RecalledKnowledge::from_prediction(&recalled_pred, &names);
    builder.respond(
        &request(
            PromptKind::Backward,
            &PromptContext {
                diagnoses: Some(&names),
                ..Default::default()
            },
        ),
        recalled.render(),
    );

    let forward_text = render_prediction(&forward);
    let recalled_text = recalled.render();
    builder.respond(
        &request(
            PromptKind::Examination,
            &PromptContext {
                note_text: Some(&note.note_text),
                forward_text: Some(&forward_text),
                recalled_text: Some(&recalled_text),
                ..Default::default()
            },
        ),
        answer,
    );
}

fn main() -> anyhow::Result<()> {
    let base = std::env::args().nth(1).unwrap_or_else(|| "demo-out".into());
    let base = Path::new(&base);
    std::fs::create_dir_all(base)?;

    let corpus = Corpus::new(vec![
        note(
            "demo-1",
            Specialty::Respiratory,
            &[(
                "Pneumothorax",
                &["Dyspnea", "Decreased breath sounds", "Pleuritic chest pain"],
            )],
        ),
        note(
            "demo-2",
            Specialty::Digestive,
            &[(
                "Acute pancreatitis",
                &["Epigastric pain", "Elevated lipase", "Nausea and vomiting"],
            )],
        ),
    ])?;
    let dataset = base.join("dataset.jsonl");
    corpus.save(&dataset)?;

    let mut builder = TranscriptBuilder::new();
    for n in corpus.notes() {
        script_session(&mut builder, n);
    }
    let transcript = base.join("transcript.json");
    builder.write(&transcript)?;
    let backend_config = base.join("backends.json");
    std::fs::write(
        &backend_config,
        serde_json::json!({
            "backends": {"default": {"kind": "scripted", "transcript": "transcript.json"}}
        })
        .to_string(),
    )?;

    let mut run_config = RunConfig::new(
        dataset.clone(),
        Method::Pipeline {
            variant: Variant::DualInf,
        },
        backend_config,
        base.join("run"),
    );
    run_config.runs = 2;
    run_config.cache_dir = Some(base.join("cache"));
    let run = cmd_run(&run_config)?;
    println!(
        "run: {} backend calls, {} cache hits, {} failed notes",
        run.backend_calls,
        run.cache_hits,
        run.failed_notes.len()
    );

    let eval_config = EvaluateConfig::new(run_config.out.clone(), dataset, base.join("eval"));
    let eval = cmd_evaluate(&eval_config)?;
    println!("eval: judge coverage {}", eval.judge_coverage);

    cmd_report(&ReportConfig::new(
        vec![eval_config.out.clone()],
        base.join("report"),
    ))?;
    println!("artifacts under {}", base.display());
    Ok(())
}
