//! The `run` stage: execute a method over a corpus subset, r times, into
//! a run directory of per-note artifacts plus a manifest.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    sha256_hex, write_json, BackendConfigFile, BackendSet, DirLock, Method, RunConfig, Subset,
};
use crate::baselines::{run_baseline, BaselineConfig, BaselineOutcome};
use crate::corpus::{filter_rare, Corpus, RareDiseaseList};
use crate::engine::{run_pipeline, Backends, EngineError, PipelineConfig, PipelineTrace};
use crate::protocol::DdxPrediction;

/// One per-note artifact file: a pipeline trace or a baseline outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoteArtifact {
    Pipeline(PipelineTrace),
    Baseline(BaselineOutcome),
}

impl NoteArtifact {
    pub fn note_id(&self) -> &str {
        match self {
            NoteArtifact::Pipeline(t) => &t.note_id,
            NoteArtifact::Baseline(b) => &b.note_id,
        }
    }

    pub fn final_prediction(&self) -> &DdxPrediction {
        match self {
            NoteArtifact::Pipeline(t) => &t.final_prediction,
            NoteArtifact::Baseline(b) => &b.prediction,
        }
    }

    pub fn failure(&self) -> Option<&str> {
        match self {
            NoteArtifact::Pipeline(t) => t.failure.as_deref(),
            NoteArtifact::Baseline(b) => b.failure.as_deref(),
        }
    }

    pub fn iterations_used(&self) -> Option<u32> {
        match self {
            NoteArtifact::Pipeline(t) => Some(t.iterations_used),
            NoteArtifact::Baseline(_) => None,
        }
    }

    pub fn responses_digest(&self) -> &str {
        match self {
            NoteArtifact::Pipeline(t) => &t.responses_digest,
            NoteArtifact::Baseline(b) => &b.responses_digest,
        }
    }
}

/// One completed run index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub index: u32,
    /// Digest over all response texts of the run, note order then call
    /// order; lets run-to-run variance be observed without re-reading
    /// traces.
    pub responses_digest: String,
    pub failed_note_ids: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Partial,
    Aborted,
}

/// The run manifest: config digest, dataset digest, parameters, note ids,
/// and per-run outcomes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub dataset_digest: String,
    pub method: Method,
    pub beta: u32,
    pub max_iterations: u32,
    pub temperature: f64,
    pub max_output: u32,
    pub runs: u32,
    pub seed: u64,
    pub subset: String,
    pub sc_paths: u32,
    pub vote_threshold: Option<u32>,
    pub sample_temperature: f64,
    pub note_ids: Vec<String>,
    pub run_records: Vec<RunRecord>,
    pub status: RunStatus,
    pub notices: Vec<String>,
    /// Fatal error message when the run aborted.
    pub abort_error: Option<String>,
}

/// In-memory result of `cmd_run`.
#[derive(Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub status: RunStatus,
    pub failed_notes: BTreeSet<String>,
    pub backend_calls: u64,
    pub cache_hits: u64,
}

fn select_subset(config: &RunConfig, corpus: &Corpus) -> anyhow::Result<Corpus> {
    match config.subset {
        Subset::All => Ok(corpus.clone()),
        Subset::Rare => {
            let path = config
                .rare_list
                .as_ref()
                .context("subset=rare requires --rare-list")?;
            let list = RareDiseaseList::load(path)?;
            Ok(filter_rare(corpus, &list))
        }
        Subset::Specialty(specialty) => Ok(corpus.filter_specialty(specialty)),
    }
}

/// Note ids become file names; anything outside a safe character set is
/// replaced and disambiguated with a digest suffix.
fn artifact_file_name(note_id: &str) -> String {
    let safe: String = note_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect();
    if safe == note_id && !note_id.is_empty() {
        format!("{note_id}.json")
    } else {
        format!("{safe}-{}.json", &sha256_hex(note_id.as_bytes())[..12])
    }
}

fn artifact_path(out: &Path, run_index: u32, note_id: &str) -> PathBuf {
    out.join("runs")
        .join(run_index.to_string())
        .join("traces")
        .join(artifact_file_name(note_id))
}

/// Executes the configured method over the subset `runs` times.
///
/// Notes run concurrently up to `concurrency`; artifacts are written as
/// they complete and the manifest last. Per-note failures leave the run
/// `partial`; a fatal backend error aborts after writing a manifest of
/// what completed.
pub fn cmd_run(config: &RunConfig) -> anyhow::Result<RunSummary> {
    let dataset_bytes = std::fs::read(&config.dataset)
        .with_context(|| format!("reading dataset {}", config.dataset.display()))?;
    let dataset_digest = sha256_hex(&dataset_bytes);
    let corpus =
        Corpus::parse(std::str::from_utf8(&dataset_bytes).context("dataset is not UTF-8")?)?;
    let subset = select_subset(config, &corpus)?;

    let backend_file = BackendConfigFile::load(&config.backend_config)?;
    let config_dir = config
        .backend_config
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf();
    let backends = BackendSet::build(&backend_file, &config_dir, config.cache_dir.as_deref())?;

    let config_digest = config.semantic_digest(&dataset_digest);
    let _lock = DirLock::acquire(&config.out)?;

    let mut notices = Vec::new();
    if matches!(config.method, Method::Baseline { method } if method == crate::baselines::BaselineMethod::ScCot)
        && (config.sample_temperature - config.temperature).abs() > f64::EPSILON
    {
        notices.push(format!(
            "sc-cot samples paths at temperature {} (run temperature {})",
            config.sample_temperature, config.temperature
        ));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.concurrency.max(1))
        .build()
        .context("building worker pool")?;

    let mut manifest = RunManifest {
        config_digest: config_digest.clone(),
        dataset_digest,
        method: config.method,
        beta: config.beta,
        max_iterations: config.max_iterations,
        temperature: config.temperature,
        max_output: config.max_output,
        runs: config.runs,
        seed: config.seed,
        subset: config.subset.label(),
        sc_paths: config.sc_paths,
        vote_threshold: config.vote_threshold,
        sample_temperature: config.sample_temperature,
        note_ids: subset.notes().iter().map(|n| n.id.clone()).collect(),
        run_records: Vec::new(),
        status: RunStatus::Complete,
        notices,
        abort_error: None,
    };

    // (note id, responses digest, per-note failure).
    type NoteResult = Result<(String, String, Option<String>), EngineError>;

    let mut failed_notes = BTreeSet::new();
    'runs: for run_index in 1..=config.runs {
        let results: Vec<NoteResult> = pool.install(|| {
            subset
                .notes()
                .par_iter()
                .map(|note| {
                    let mut artifact = execute_note(note, config, &backends)?;
                    match &mut artifact {
                        NoteArtifact::Pipeline(t) => t.config_digest = config_digest.clone(),
                        NoteArtifact::Baseline(b) => b.config_digest = config_digest.clone(),
                    }
                    let path = artifact_path(&config.out, run_index, &note.id);
                    write_json(&path, &artifact).map_err(|e| {
                        EngineError::InvalidConfig(format!(
                            "cannot write artifact {}: {e}",
                            path.display()
                        ))
                    })?;
                    Ok((
                        note.id.clone(),
                        artifact.responses_digest().to_string(),
                        artifact.failure().map(str::to_string),
                    ))
                })
                .collect()
        });

        let mut run_hasher = sha2::Sha256::new();
        use sha2::Digest;
        let mut failed_this_run = Vec::new();
        for result in results {
            match result {
                Ok((note_id, responses_digest, failure)) => {
                    run_hasher.update(responses_digest.as_bytes());
                    run_hasher.update([0u8]);
                    if let Some(reason) = failure {
                        log::warn!("run {run_index}: note {note_id} failed: {reason}");
                        failed_this_run.push(note_id.clone());
                        failed_notes.insert(note_id);
                    }
                }
                Err(e) => {
                    manifest.status = RunStatus::Aborted;
                    manifest.abort_error = Some(e.to_string());
                    write_json(&config.out.join("manifest.json"), &manifest)?;
                    bail!("fatal backend error, run aborted: {e}");
                }
            }
        }
        manifest.run_records.push(RunRecord {
            index: run_index,
            responses_digest: hex::encode(run_hasher.finalize()),
            failed_note_ids: failed_this_run,
        });
        if manifest.status == RunStatus::Aborted {
            break 'runs;
        }
    }

    if !failed_notes.is_empty() {
        manifest.status = RunStatus::Partial;
    }
    write_json(&config.out.join("manifest.json"), &manifest)?;

    Ok(RunSummary {
        out_dir: config.out.clone(),
        status: manifest.status,
        failed_notes,
        backend_calls: backends.stats().calls(),
        cache_hits: backends.stats().hits(),
    })
}

fn execute_note(
    note: &crate::corpus::NoteRecord,
    config: &RunConfig,
    backends: &BackendSet,
) -> Result<NoteArtifact, EngineError> {
    match config.method {
        Method::Pipeline { variant } => {
            let (forward_id, forward) = backends
                .chat_for_role("forward")
                .map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
            let (backward_id, backward) = backends
                .chat_for_role("backward")
                .map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
            let (exam_id, exam) = backends
                .chat_for_role("examination")
                .map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
            let pipeline_config = PipelineConfig {
                variant,
                beta: config.beta,
                max_iterations: config.max_iterations,
                temperature: config.temperature,
                max_output: config.max_output,
                forward_backend: forward_id,
                backward_backend: backward_id,
                examination_backend: exam_id,
            };
            let trace = run_pipeline(
                note,
                &pipeline_config,
                &Backends {
                    forward: forward.as_ref(),
                    backward: backward.as_ref(),
                    examination: exam.as_ref(),
                },
            )?;
            Ok(NoteArtifact::Pipeline(trace))
        }
        Method::Baseline { method } => {
            let (backend_id, backend) = backends
                .chat_for_role("baseline")
                .map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
            let baseline_config = BaselineConfig {
                method,
                paths: config.sc_paths,
                vote_threshold: config.vote_threshold,
                temperature: config.temperature,
                sample_temperature: config.sample_temperature,
                max_output: config.max_output,
                backend_id,
            };
            let outcome = run_baseline(note, &baseline_config, backend.as_ref())?;
            Ok(NoteArtifact::Baseline(outcome))
        }
    }
}

/// Reads every artifact of one run index, keyed by note id.
pub(crate) fn load_run_artifacts(
    out: &Path,
    run_index: u32,
    note_ids: &[String],
) -> anyhow::Result<Vec<Option<NoteArtifact>>> {
    note_ids
        .iter()
        .map(|id| {
            let path = artifact_path(out, run_index, id);
            if path.exists() {
                Ok(Some(super::read_json(&path)?))
            } else {
                Ok(None)
            }
        })
        .collect()
}
