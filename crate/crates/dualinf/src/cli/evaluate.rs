//! The `evaluate` stage: score a run directory against the gold corpus
//! into per-note, per-specialty, and corpus-level reports, plus the
//! human-evaluation worksheet.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use super::run::load_run_artifacts;
use super::{
    read_json, sha256_hex, write_json, BackendConfigFile, BackendSet, DirLock, Method, RunManifest,
};
use crate::backend::EmbeddingBackend;
use crate::corpus::{Corpus, NoteRecord, Specialty};
use crate::metrics::{
    aggregate_runs, bertscore, classify_error, cosine, diagnostic_accuracy, ErrorType,
    interpretation_accuracy, mean, meteor, ExactMatcher, JudgeMatcher, MatchCounts, MatchMode,
    Matcher, MeteorOptions, MetricError, RunAggregate, SynonymTable,
};
use crate::protocol::{render_prediction, DdxPrediction, PredictedDiagnosis};
use crate::text::tokenize;
use crate::Score;

/// Parameters of the evaluate stage.
#[derive(Debug, Clone)]
pub struct EvaluateConfig {
    pub run_dir: PathBuf,
    pub dataset: PathBuf,
    pub match_mode: MatchMode,
    /// Backend id for judge mode; defaults to the `judge` role.
    pub judge_backend: Option<String>,
    pub backend_config: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub bootstrap_resamples: u32,
    pub ci_level: Score,
    pub synonym_table: Option<PathBuf>,
    /// Dimension of the builtin hashing embedder used when no embedding
    /// backend is configured.
    pub embedding_dim: usize,
}

impl EvaluateConfig {
    pub fn new(run_dir: PathBuf, dataset: PathBuf, out: PathBuf) -> Self {
        EvaluateConfig {
            run_dir,
            dataset,
            match_mode: MatchMode::ExactNormalized,
            judge_backend: None,
            backend_config: None,
            cache_dir: None,
            out,
            seed: 0,
            bootstrap_resamples: 10_000,
            ci_level: 0.95,
            synonym_table: None,
            embedding_dim: 256,
        }
    }
}

/// Interpretation error counts over the matched pairs of one scope. The
/// three flag counts are multi-label (a pair can raise several); the
/// `primary_*` counts assign each pair at most one label, in the order
/// missing content, factual error, low relevance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub pairs: u32,
    pub missing_content: u32,
    pub factual_error: u32,
    pub low_relevance: u32,
    pub primary_missing_content: u32,
    pub primary_factual_error: u32,
    pub primary_low_relevance: u32,
    pub unclassified: u32,
}

impl ErrorCounts {
    fn add(&mut self, other: ErrorCounts) {
        self.pairs += other.pairs;
        self.missing_content += other.missing_content;
        self.factual_error += other.factual_error;
        self.low_relevance += other.low_relevance;
        self.primary_missing_content += other.primary_missing_content;
        self.primary_factual_error += other.primary_factual_error;
        self.primary_low_relevance += other.primary_low_relevance;
        self.unclassified += other.unclassified;
    }
}

/// Per-note evaluation record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerNoteEval {
    pub note_id: String,
    pub specialty: Specialty,
    pub iterations_used: Option<u32>,
    pub failed_runs: u32,
    /// Metric name -> one value per run.
    pub scores: BTreeMap<String, Vec<Score>>,
    /// Metric name -> mean across runs.
    pub mean_scores: BTreeMap<String, Score>,
    /// One entry per run.
    pub error_counts: Vec<ErrorCounts>,
}

/// One row of the per-specialty table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecialtyRow {
    pub specialty: Specialty,
    pub notes: usize,
    /// Metric name -> mean across runs.
    pub metrics: BTreeMap<String, Score>,
    /// Counts from the first run, for additivity checks against the
    /// corpus totals.
    pub diagnostic_gold: MatchCounts,
    pub interpretation_gold: MatchCounts,
}

/// The corpus-level evaluation report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub run_config_digest: String,
    pub eval_digest: String,
    pub method: Method,
    pub match_mode: MatchMode,
    pub seed: u64,
    pub bootstrap_resamples: u32,
    pub ci_level: Score,
    pub runs_evaluated: u32,
    pub note_count: usize,
    /// Metric name -> mean/std over runs plus note-level bootstrap CI.
    pub metrics: BTreeMap<String, RunAggregate>,
    /// Count family ("diagnostic_gold", ...) -> one `MatchCounts` per run.
    pub counts: BTreeMap<String, Vec<MatchCounts>>,
    pub per_specialty: Vec<SpecialtyRow>,
    pub judge_coverage: Score,
    /// One entry per run.
    pub error_totals: Vec<ErrorCounts>,
    pub iteration_histogram: BTreeMap<u32, usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerNoteFile {
    pub run_config_digest: String,
    pub eval_digest: String,
    pub notes: Vec<PerNoteEval>,
}

#[derive(Debug)]
pub struct EvalSummary {
    pub out_dir: PathBuf,
    pub judge_coverage: Score,
    /// True when judge failures left part of the report uncovered.
    pub partial: bool,
    pub backend_calls: u64,
    pub cache_hits: u64,
}

/// Memoizes matcher decisions so the diagnostic pass, the interpretation
/// pass, the text metrics, and the error classifier share judge verdicts.
struct MemoMatcher<'a> {
    inner: &'a dyn Matcher,
    diagnosis: Mutex<HashMap<(String, String), bool>>,
    evidence: Mutex<HashMap<(String, String), bool>>,
}

impl<'a> MemoMatcher<'a> {
    fn new(inner: &'a dyn Matcher) -> Self {
        MemoMatcher {
            inner,
            diagnosis: Mutex::new(HashMap::new()),
            evidence: Mutex::new(HashMap::new()),
        }
    }
}

impl Matcher for MemoMatcher<'_> {
    fn diagnosis_match(&self, gold_name: &str, predicted_name: &str) -> Result<bool, MetricError> {
        let key = (gold_name.to_string(), predicted_name.to_string());
        if let Some(&verdict) = self.diagnosis.lock().expect("memo lock").get(&key) {
            return Ok(verdict);
        }
        let verdict = self.inner.diagnosis_match(gold_name, predicted_name)?;
        self.diagnosis
            .lock()
            .expect("memo lock")
            .insert(key, verdict);
        Ok(verdict)
    }

    fn evidence_match(
        &self,
        gold_item: &str,
        predicted_items: &[String],
    ) -> Result<bool, MetricError> {
        let key = (gold_item.to_string(), predicted_items.join("\u{0}"));
        if let Some(&verdict) = self.evidence.lock().expect("memo lock").get(&key) {
            return Ok(verdict);
        }
        let verdict = self.inner.evidence_match(gold_item, predicted_items)?;
        self.evidence
            .lock()
            .expect("memo lock")
            .insert(key, verdict);
        Ok(verdict)
    }
}

/// First accepted predicted diagnosis matching each gold diagnosis.
/// Non-fatal judge errors leave the gold diagnosis unassigned.
fn assignments<'p>(
    note: &NoteRecord,
    prediction: &'p DdxPrediction,
    matcher: &dyn Matcher,
) -> Result<Vec<Option<&'p PredictedDiagnosis>>, MetricError> {
    let accepted: Vec<&PredictedDiagnosis> = prediction.accepted().collect();
    let mut out = Vec::with_capacity(note.differentials.len());
    for diff in &note.differentials {
        let mut assigned = None;
        for pred in &accepted {
            match matcher.diagnosis_match(&diff.diagnosis_name, &pred.diagnosis_name) {
                Ok(true) => {
                    assigned = Some(*pred);
                    break;
                }
                Ok(false) => {}
                Err(MetricError::Backend(e)) if e.is_fatal() => {
                    return Err(MetricError::Backend(e))
                }
                Err(_) => {}
            }
        }
        out.push(assigned);
    }
    Ok(out)
}

struct TextScores {
    meteor: Score,
    bertscore_f1: Score,
    sentence_similarity: Score,
}

/// Text metrics for one note: per matched gold diagnosis, the predicted
/// evidence (joined) is scored against the gold evidence (joined);
/// unmatched gold diagnoses contribute zero. The note score is the mean
/// over gold diagnoses.
fn note_text_scores(
    note: &NoteRecord,
    assigned: &[Option<&PredictedDiagnosis>],
    embedder: &dyn EmbeddingBackend,
    meteor_opts: &MeteorOptions,
) -> anyhow::Result<TextScores> {
    let mut meteor_sum = 0.0;
    let mut bert_sum = 0.0;
    let mut sent_sum = 0.0;
    for (diff, pred) in note.differentials.iter().zip(assigned) {
        let Some(pred) = pred else { continue };
        if pred.evidence.is_empty() {
            continue;
        }
        let candidate = pred.evidence.join("; ");
        let reference = diff.evidence.join("; ");
        meteor_sum += meteor::<Score>(&candidate, &reference, meteor_opts);

        let cand_tokens = tokenize(&candidate);
        let ref_tokens = tokenize(&reference);
        if !cand_tokens.is_empty() && !ref_tokens.is_empty() {
            let mut batch: Vec<String> = cand_tokens.clone();
            batch.extend(ref_tokens.iter().cloned());
            let vectors = embedder.embed(&batch)?;
            let to_f64 = |v: &Vec<f32>| v.iter().map(|&x| x as Score).collect::<Vec<Score>>();
            let cand_vecs: Vec<Vec<Score>> =
                vectors[..cand_tokens.len()].iter().map(to_f64).collect();
            let ref_vecs: Vec<Vec<Score>> =
                vectors[cand_tokens.len()..].iter().map(to_f64).collect();
            bert_sum += bertscore(&cand_vecs, &ref_vecs)
                .map(|s| s.f1)
                .unwrap_or(0.0);
        }

        let sentence_vectors = embedder.embed(&[candidate, reference])?;
        let a: Vec<Score> = sentence_vectors[0].iter().map(|&x| x as Score).collect();
        let b: Vec<Score> = sentence_vectors[1].iter().map(|&x| x as Score).collect();
        sent_sum += cosine(&a, &b).unwrap_or(0.0);
    }
    let n = note.differentials.len() as Score;
    Ok(TextScores {
        meteor: meteor_sum / n,
        bertscore_f1: bert_sum / n,
        sentence_similarity: sent_sum / n,
    })
}

fn note_error_counts(
    note: &NoteRecord,
    assigned: &[Option<&PredictedDiagnosis>],
    matcher: &dyn Matcher,
    judge: Option<&JudgeMatcher>,
) -> anyhow::Result<ErrorCounts> {
    let mut counts = ErrorCounts::default();
    for (diff, pred) in note.differentials.iter().zip(assigned) {
        let Some(pred) = pred else { continue };
        let classification = classify_error(&note.note_text, diff, pred, matcher, judge)?;
        counts.pairs += 1;
        if classification.missing_content {
            counts.missing_content += 1;
        }
        if classification.factual_error == Some(true) {
            counts.factual_error += 1;
        }
        if classification.low_relevance == Some(true) {
            counts.low_relevance += 1;
        }
        match classification.primary {
            Some(ErrorType::MissingContent) => counts.primary_missing_content += 1,
            Some(ErrorType::FactualError) => counts.primary_factual_error += 1,
            Some(ErrorType::LowRelevance) => counts.primary_low_relevance += 1,
            None => {}
        }
        if classification.unclassified {
            counts.unclassified += 1;
        }
    }
    Ok(counts)
}

const METRIC_NAMES: [&str; 7] = [
    "diagnostic_accuracy",
    "diagnostic_precision",
    "interpretation_accuracy",
    "interpretation_precision",
    "meteor",
    "bertscore_f1",
    "sentence_similarity",
];

/// Scores every completed run in the run directory and writes the eval
/// artifacts: `report.json`, `per_note.json`, `per_specialty.tsv`, and
/// `worksheet.tsv`.
pub fn cmd_evaluate(config: &EvaluateConfig) -> anyhow::Result<EvalSummary> {
    let manifest: RunManifest = read_json(&config.run_dir.join("manifest.json"))?;
    let dataset_bytes = std::fs::read(&config.dataset)
        .with_context(|| format!("reading dataset {}", config.dataset.display()))?;
    let dataset_digest = sha256_hex(&dataset_bytes);
    if dataset_digest != manifest.dataset_digest {
        bail!(
            "gold dataset digest {dataset_digest} does not match the run manifest's {}; \
             refusing to evaluate against a different corpus",
            manifest.dataset_digest
        );
    }
    let corpus = Corpus::parse(std::str::from_utf8(&dataset_bytes)?)?;
    let missing: Vec<&String> = manifest
        .note_ids
        .iter()
        .filter(|id| corpus.get(id).is_none())
        .collect();
    if !missing.is_empty() {
        bail!("gold corpus is missing note ids from the run manifest: {missing:?}");
    }
    let gold_notes: Vec<NoteRecord> = manifest
        .note_ids
        .iter()
        .map(|id| corpus.get(id).expect("checked above").clone())
        .collect();
    let gold = Corpus::new(gold_notes)?;
    let runs_evaluated = manifest.run_records.len() as u32;
    if runs_evaluated == 0 {
        bail!("run directory has no completed runs to evaluate");
    }

    // Backends for judge mode and embeddings.
    let backend_set = match &config.backend_config {
        Some(path) => {
            let file = BackendConfigFile::load(path)?;
            let dir = path
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .to_path_buf();
            Some(BackendSet::build(&file, &dir, config.cache_dir.as_deref())?)
        }
        None => None,
    };
    let judge_pair = match config.match_mode {
        MatchMode::Judge => {
            let set = backend_set
                .as_ref()
                .context("judge match mode requires --backend-config")?;
            Some(match &config.judge_backend {
                Some(id) => set.chat_by_id(id)?,
                None => set.chat_for_role("judge")?,
            })
        }
        MatchMode::ExactNormalized => None,
    };
    let exact = ExactMatcher;
    let judge_matcher = judge_pair
        .as_ref()
        .map(|(id, backend)| JudgeMatcher::new(backend.as_ref(), id.clone()));
    let base_matcher: &dyn Matcher = match &judge_matcher {
        Some(judge) => judge,
        None => &exact,
    };
    let matcher = MemoMatcher::new(base_matcher);

    let fallback_embedder;
    let embedder: &dyn EmbeddingBackend = match backend_set.as_ref().and_then(|s| s.embedder()) {
        Some(e) => {
            fallback_embedder = e;
            fallback_embedder.as_ref()
        }
        None => {
            fallback_embedder =
                std::sync::Arc::new(crate::backend::HashEmbedder::new(config.embedding_dim)?);
            fallback_embedder.as_ref()
        }
    };

    let synonyms = config
        .synonym_table
        .as_ref()
        .map(|p| SynonymTable::load(p))
        .transpose()
        .map_err(|e| anyhow::anyhow!("loading synonym table: {e}"))?;
    let meteor_opts = MeteorOptions {
        skip_stemming: false,
        synonyms: synonyms.as_ref(),
    };

    let eval_digest = sha256_hex(
        serde_json::to_string(&(
            &manifest.config_digest,
            config.match_mode,
            config.seed,
            config.bootstrap_resamples,
            config.ci_level,
            config.embedding_dim,
            synonyms.is_some(),
        ))?
        .as_bytes(),
    );

    let _lock = DirLock::acquire(&config.out)?;

    // Per-run, per-metric corpus values and per-note values.
    let mut run_values: BTreeMap<&str, Vec<Score>> = BTreeMap::new();
    let mut per_note_values: BTreeMap<&str, Vec<Vec<Score>>> = BTreeMap::new();
    for name in METRIC_NAMES {
        run_values.insert(name, Vec::new());
        per_note_values.insert(name, vec![Vec::new(); gold.len()]);
    }
    let mut counts: BTreeMap<String, Vec<MatchCounts>> = BTreeMap::new();
    let mut error_totals: Vec<ErrorCounts> = Vec::new();
    let mut per_note_errors: Vec<Vec<ErrorCounts>> = vec![Vec::new(); gold.len()];
    let mut failed_runs_per_note: Vec<u32> = vec![0; gold.len()];
    let mut judge_attempted = 0u64;
    let mut judge_failed = 0u64;
    let mut iterations_used: Vec<Option<u32>> = vec![None; gold.len()];
    let mut specialty_run_counts: BTreeMap<Specialty, (MatchCounts, MatchCounts)> = BTreeMap::new();
    let mut specialty_scores: BTreeMap<Specialty, BTreeMap<&str, Vec<Score>>> = BTreeMap::new();

    for run_index in 1..=runs_evaluated {
        let artifacts = load_run_artifacts(&config.run_dir, run_index, &manifest.note_ids)?;
        let mut predictions: BTreeMap<String, DdxPrediction> = BTreeMap::new();
        for (slot, artifact) in artifacts.iter().enumerate() {
            match artifact {
                Some(a) => {
                    predictions.insert(a.note_id().to_string(), a.final_prediction().clone());
                    if a.failure().is_some() {
                        failed_runs_per_note[slot] += 1;
                    }
                    if run_index == 1 {
                        iterations_used[slot] = a.iterations_used();
                    }
                }
                None => failed_runs_per_note[slot] += 1,
            }
        }

        let diag = diagnostic_accuracy(&predictions, &gold, &matcher)?;
        let interp = interpretation_accuracy(&predictions, &gold, &matcher)?;
        judge_attempted += diag.judge_attempted + interp.judge_attempted;
        judge_failed += diag.judge_failed + interp.judge_failed;

        run_values
            .get_mut("diagnostic_accuracy")
            .unwrap()
            .push(diag.score);
        run_values
            .get_mut("diagnostic_precision")
            .unwrap()
            .push(diag.precision);
        run_values
            .get_mut("interpretation_accuracy")
            .unwrap()
            .push(interp.score);
        run_values
            .get_mut("interpretation_precision")
            .unwrap()
            .push(interp.precision);
        counts
            .entry("diagnostic_gold".into())
            .or_default()
            .push(diag.gold);
        counts
            .entry("diagnostic_predicted".into())
            .or_default()
            .push(diag.predicted);
        counts
            .entry("interpretation_gold".into())
            .or_default()
            .push(interp.gold);
        counts
            .entry("interpretation_predicted".into())
            .or_default()
            .push(interp.predicted);

        if run_index == 1 {
            for (specialty, c) in &diag.per_specialty {
                specialty_run_counts.entry(*specialty).or_default().0 = c.gold;
            }
            for (specialty, c) in &interp.per_specialty {
                specialty_run_counts.entry(*specialty).or_default().1 = c.gold;
            }
        }

        let mut run_meteor = Vec::with_capacity(gold.len());
        let mut run_bert = Vec::with_capacity(gold.len());
        let mut run_sent = Vec::with_capacity(gold.len());
        let mut run_errors = ErrorCounts::default();
        let empty_prediction = DdxPrediction::default();
        for (slot, note) in gold.notes().iter().enumerate() {
            let prediction = predictions.get(&note.id).unwrap_or(&empty_prediction);
            let assigned = assignments(note, prediction, &matcher)?;
            let text = note_text_scores(note, &assigned, embedder, &meteor_opts)?;
            run_meteor.push(text.meteor);
            run_bert.push(text.bertscore_f1);
            run_sent.push(text.sentence_similarity);
            let errors = note_error_counts(note, &assigned, &matcher, judge_matcher.as_ref())?;
            per_note_errors[slot].push(errors);
            run_errors.add(errors);

            per_note_values.get_mut("diagnostic_accuracy").unwrap()[slot]
                .push(diag.per_note[slot].score);
            per_note_values.get_mut("diagnostic_precision").unwrap()[slot]
                .push(diag.per_note[slot].predicted.ratio());
            per_note_values.get_mut("interpretation_accuracy").unwrap()[slot]
                .push(interp.per_note[slot].score);
            per_note_values.get_mut("interpretation_precision").unwrap()[slot]
                .push(interp.per_note[slot].predicted.ratio());
            per_note_values.get_mut("meteor").unwrap()[slot].push(text.meteor);
            per_note_values.get_mut("bertscore_f1").unwrap()[slot].push(text.bertscore_f1);
            per_note_values.get_mut("sentence_similarity").unwrap()[slot]
                .push(text.sentence_similarity);

            let slot_scores = specialty_scores.entry(note.specialty).or_default();
            slot_scores
                .entry("diagnostic_accuracy")
                .or_default()
                .push(diag.per_note[slot].score);
            slot_scores
                .entry("interpretation_accuracy")
                .or_default()
                .push(interp.per_note[slot].score);
            slot_scores.entry("meteor").or_default().push(text.meteor);
            slot_scores
                .entry("bertscore_f1")
                .or_default()
                .push(text.bertscore_f1);
            slot_scores
                .entry("sentence_similarity")
                .or_default()
                .push(text.sentence_similarity);
        }
        run_values
            .get_mut("meteor")
            .unwrap()
            .push(mean(&run_meteor));
        run_values
            .get_mut("bertscore_f1")
            .unwrap()
            .push(mean(&run_bert));
        run_values
            .get_mut("sentence_similarity")
            .unwrap()
            .push(mean(&run_sent));
        error_totals.push(run_errors);
    }

    // Aggregates.
    let mut metrics: BTreeMap<String, RunAggregate> = BTreeMap::new();
    for name in METRIC_NAMES {
        let per_note_means: Vec<Score> = per_note_values[name]
            .iter()
            .map(|values| mean(values))
            .collect();
        let aggregate = aggregate_runs(
            &run_values[name],
            &per_note_means,
            config.bootstrap_resamples,
            config.ci_level,
            config.seed,
        )?;
        metrics.insert(name.to_string(), aggregate);
    }

    let mut per_specialty = Vec::new();
    for (specialty, scores) in &specialty_scores {
        let mut row_metrics = BTreeMap::new();
        for (name, values) in scores {
            row_metrics.insert(name.to_string(), mean(values));
        }
        let (diag_counts, interp_counts) = specialty_run_counts
            .get(specialty)
            .copied()
            .unwrap_or_default();
        per_specialty.push(SpecialtyRow {
            specialty: *specialty,
            notes: gold
                .notes()
                .iter()
                .filter(|n| n.specialty == *specialty)
                .count(),
            metrics: row_metrics,
            diagnostic_gold: diag_counts,
            interpretation_gold: interp_counts,
        });
    }

    let mut iteration_histogram: BTreeMap<u32, usize> = BTreeMap::new();
    for used in iterations_used.iter().flatten() {
        *iteration_histogram.entry(*used).or_insert(0) += 1;
    }

    let judge_coverage = if judge_attempted == 0 {
        1.0
    } else {
        1.0 - judge_failed as Score / judge_attempted as Score
    };

    let report = EvalReport {
        run_config_digest: manifest.config_digest.clone(),
        eval_digest: eval_digest.clone(),
        method: manifest.method,
        match_mode: config.match_mode,
        seed: config.seed,
        bootstrap_resamples: config.bootstrap_resamples,
        ci_level: config.ci_level,
        runs_evaluated,
        note_count: gold.len(),
        metrics,
        counts,
        per_specialty,
        judge_coverage,
        error_totals,
        iteration_histogram,
    };
    write_json(&config.out.join("report.json"), &report)?;

    let per_note: Vec<PerNoteEval> = gold
        .notes()
        .iter()
        .enumerate()
        .map(|(slot, note)| {
            let mut scores = BTreeMap::new();
            let mut mean_scores = BTreeMap::new();
            for name in METRIC_NAMES {
                let values = per_note_values[name][slot].clone();
                mean_scores.insert(name.to_string(), mean(&values));
                scores.insert(name.to_string(), values);
            }
            PerNoteEval {
                note_id: note.id.clone(),
                specialty: note.specialty,
                iterations_used: iterations_used[slot],
                failed_runs: failed_runs_per_note[slot],
                scores,
                mean_scores,
                error_counts: per_note_errors[slot].clone(),
            }
        })
        .collect();
    write_json(
        &config.out.join("per_note.json"),
        &PerNoteFile {
            run_config_digest: manifest.config_digest.clone(),
            eval_digest: eval_digest.clone(),
            notes: per_note,
        },
    )?;

    write_specialty_tsv(&config.out.join("per_specialty.tsv"), &report)?;
    write_worksheet(
        &config.out.join("worksheet.tsv"),
        &manifest,
        &config.run_dir,
        &gold,
    )?;

    Ok(EvalSummary {
        out_dir: config.out.clone(),
        judge_coverage,
        partial: judge_coverage < 1.0,
        backend_calls: backend_set.as_ref().map(|s| s.stats().calls()).unwrap_or(0),
        cache_hits: backend_set.as_ref().map(|s| s.stats().hits()).unwrap_or(0),
    })
}

fn write_specialty_tsv(path: &Path, report: &EvalReport) -> anyhow::Result<()> {
    let mut out = format!(
        "# run_config_digest={}\n# eval_digest={}\n",
        report.run_config_digest, report.eval_digest
    );
    out.push_str(
        "specialty\tnotes\tdiagnostic_accuracy\tinterpretation_accuracy\tmeteor\t\
         bertscore_f1\tsentence_similarity\tdiag_matched\tdiag_total\tinterp_matched\t\
         interp_total\n",
    );
    for row in &report.per_specialty {
        let metric = |name: &str| {
            row.metrics
                .get(name)
                .map(|v| format!("{v:.6}"))
                .unwrap_or_else(|| "".into())
        };
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            row.specialty,
            row.notes,
            metric("diagnostic_accuracy"),
            metric("interpretation_accuracy"),
            metric("meteor"),
            metric("bertscore_f1"),
            metric("sentence_similarity"),
            row.diagnostic_gold.matched,
            row.diagnostic_gold.total,
            row.interpretation_gold.matched,
            row.interpretation_gold.total,
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// The human-evaluation worksheet: note id, the rendered prediction of
/// run 1, and blank 1-5 columns for correctness, completeness, and
/// usefulness.
fn write_worksheet(
    path: &Path,
    manifest: &RunManifest,
    run_dir: &Path,
    gold: &Corpus,
) -> anyhow::Result<()> {
    let artifacts = load_run_artifacts(run_dir, 1, &manifest.note_ids)?;
    let mut out = format!("# config_digest={}\n", manifest.config_digest);
    out.push_str("note_id\tprediction\tcorrectness\tcompleteness\tusefulness\n");
    for (note, artifact) in gold.notes().iter().zip(&artifacts) {
        let rendered = artifact
            .as_ref()
            .map(|a| render_prediction(a.final_prediction()))
            .unwrap_or_default()
            .replace('\t', " ")
            .replace('\n', "\\n");
        out.push_str(&format!("{}\t{rendered}\t\t\t\n", note.id));
    }
    std::fs::write(path, out)?;
    Ok(())
}
