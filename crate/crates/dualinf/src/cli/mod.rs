//! The `run` / `evaluate` / `report` pipeline stages.
//!
//! Each command is a pure stage over directories: `run` executes a method
//! into a run directory, `evaluate` scores a run directory against the
//! gold corpus into an eval directory, and `report` compares eval
//! directories. Judge-mode re-scoring therefore never re-invokes the
//! diagnostic backends. Every artifact embeds the run-config digest, and
//! a stage takes an exclusive lock file on its output directory.

mod evaluate;
mod report;
mod run;

pub use evaluate::{
    cmd_evaluate, ErrorCounts, EvalReport, EvalSummary, EvaluateConfig, PerNoteEval, PerNoteFile,
    SpecialtyRow,
};
pub use report::{
    cmd_report, ComparisonReport, MetricComparison, MetricQuantiles, ReportConfig,
};
pub use run::{cmd_run, NoteArtifact, RunManifest, RunRecord, RunStatus, RunSummary};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{
    BackendStats, CachedBackend, EmbeddingBackend, HashEmbedder, HttpBackend, HttpBackendConfig,
    HttpEmbedder, ResponseCache, ScriptedBackend, ScriptedEmbedder, API_KEY_ENV,
};
use crate::baselines::BaselineMethod;
use crate::corpus::Specialty;
use crate::engine::Variant;

/// Process exit codes: success, fatal, partial.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FATAL: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

/// What a run executes: the pipeline (with a variant) or a baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Pipeline { variant: Variant },
    Baseline { method: BaselineMethod },
}

impl Method {
    /// Resolves `--method` plus optional `--variant`.
    pub fn parse(method: &str, variant: Option<&str>) -> anyhow::Result<Self> {
        if method == "dual-inf" || method == "dual_inf" {
            let variant = match variant {
                Some(v) => v.parse::<Variant>().map_err(anyhow::Error::msg)?,
                None => Variant::DualInf,
            };
            return Ok(Method::Pipeline { variant });
        }
        if variant.is_some() {
            bail!("--variant only applies to --method dual-inf");
        }
        let baseline = method
            .parse::<BaselineMethod>()
            .map_err(anyhow::Error::msg)?;
        Ok(Method::Baseline { method: baseline })
    }

    pub fn label(&self) -> String {
        match self {
            Method::Pipeline { variant } => variant.as_str().to_string(),
            Method::Baseline { method } => method.as_str().to_string(),
        }
    }
}

/// Which slice of the corpus a run covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    All,
    Rare,
    Specialty(Specialty),
}

impl Subset {
    pub fn parse(s: &str) -> anyhow::Result<Self> {
        if s == "all" {
            return Ok(Subset::All);
        }
        if s == "rare" {
            return Ok(Subset::Rare);
        }
        if let Some(name) = s.strip_prefix("specialty:") {
            return Ok(Subset::Specialty(
                name.parse::<Specialty>().map_err(anyhow::Error::msg)?,
            ));
        }
        bail!("unknown subset {s:?}; expected all, rare, or specialty:<name>")
    }

    pub fn label(&self) -> String {
        match self {
            Subset::All => "all".into(),
            Subset::Rare => "rare".into(),
            Subset::Specialty(sp) => format!("specialty:{sp}"),
        }
    }
}

/// Everything a run needs. Path-valued fields never enter the config
/// digest, so identical runs on different machines digest identically.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub method: Method,
    pub backend_config: PathBuf,
    pub beta: u32,
    pub max_iterations: u32,
    pub temperature: f64,
    pub max_output: u32,
    pub runs: u32,
    pub seed: u64,
    pub subset: Subset,
    pub rare_list: Option<PathBuf>,
    pub sc_paths: u32,
    pub vote_threshold: Option<u32>,
    pub sample_temperature: f64,
    pub cache_dir: Option<PathBuf>,
    pub out: PathBuf,
    pub concurrency: usize,
}

impl RunConfig {
    pub fn new(dataset: PathBuf, method: Method, backend_config: PathBuf, out: PathBuf) -> Self {
        RunConfig {
            dataset,
            method,
            backend_config,
            beta: 3,
            max_iterations: 5,
            temperature: crate::backend::DEFAULT_TEMPERATURE,
            max_output: crate::backend::DEFAULT_MAX_OUTPUT,
            runs: 5,
            seed: 0,
            subset: Subset::All,
            rare_list: None,
            sc_paths: 5,
            vote_threshold: None,
            sample_temperature: 0.7,
            cache_dir: None,
            out,
            concurrency: 1,
        }
    }

    /// Digest over the semantic run parameters plus the dataset content
    /// digest; machine-local paths are excluded.
    pub fn semantic_digest(&self, dataset_digest: &str) -> String {
        let canonical = serde_json::to_string(&(
            &self.method,
            self.beta,
            self.max_iterations,
            self.temperature,
            self.max_output,
            self.runs,
            self.seed,
            self.subset.label(),
            self.sc_paths,
            self.vote_threshold,
            self.sample_temperature,
            dataset_digest,
        ))
        .expect("config tuple serializes");
        sha256_hex(canonical.as_bytes())
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

/// One backend definition in the backend-config file. Relative paths
/// resolve against the config file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendDef {
    Scripted {
        transcript: PathBuf,
    },
    Http {
        base_url: String,
        model: String,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default)]
        requests_per_minute: Option<f64>,
        #[serde(default)]
        max_retries: Option<u32>,
    },
    ScriptedEmbedding {
        table: PathBuf,
    },
    HashEmbedding {
        dim: usize,
    },
    HttpEmbedding {
        base_url: String,
        model: String,
        #[serde(default)]
        api_key_env: Option<String>,
    },
}

/// The backend-config file: named backends plus a role map
/// (forward / backward / examination / baseline / judge / embedding).
/// Missing roles fall back to the backend named `default`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendConfigFile {
    pub backends: BTreeMap<String, BackendDef>,
    #[serde(default)]
    pub roles: BTreeMap<String, String>,
}

impl BackendConfigFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("reading backend config {}", path.display()))?;
        serde_json::from_str(&raw)
            .with_context(|| format!("parsing backend config {}", path.display()))
    }
}

fn resolve_path(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Instantiated backends with a shared cache and shared call counters.
pub struct BackendSet {
    chats: BTreeMap<String, Arc<CachedBackend>>,
    embedders: BTreeMap<String, Arc<dyn EmbeddingBackend>>,
    roles: BTreeMap<String, String>,
    stats: Arc<BackendStats>,
}

impl BackendSet {
    pub fn build(
        file: &BackendConfigFile,
        config_dir: &Path,
        cache_dir: Option<&Path>,
    ) -> anyhow::Result<Self> {
        let stats = Arc::new(BackendStats::default());
        let mut chats: BTreeMap<String, Arc<CachedBackend>> = BTreeMap::new();
        let mut embedders: BTreeMap<String, Arc<dyn EmbeddingBackend>> = BTreeMap::new();
        for (id, def) in &file.backends {
            match def {
                BackendDef::Scripted { transcript } => {
                    let inner = ScriptedBackend::load(&resolve_path(config_dir, transcript))
                        .with_context(|| format!("loading transcript for backend {id:?}"))?;
                    let cache = cache_dir.map(ResponseCache::new).transpose()?;
                    chats.insert(
                        id.clone(),
                        Arc::new(CachedBackend::new(Arc::new(inner), cache, stats.clone())),
                    );
                }
                BackendDef::Http {
                    base_url,
                    model,
                    api_key_env,
                    requests_per_minute,
                    max_retries,
                } => {
                    let mut config = HttpBackendConfig::new(base_url, model);
                    config.api_key_env = api_key_env
                        .clone()
                        .unwrap_or_else(|| API_KEY_ENV.to_string());
                    config.requests_per_minute = *requests_per_minute;
                    if let Some(retries) = max_retries {
                        config.max_retries = *retries;
                    }
                    let inner = HttpBackend::new(config)
                        .with_context(|| format!("building http backend {id:?}"))?;
                    let cache = cache_dir.map(ResponseCache::new).transpose()?;
                    chats.insert(
                        id.clone(),
                        Arc::new(CachedBackend::new(Arc::new(inner), cache, stats.clone())),
                    );
                }
                BackendDef::ScriptedEmbedding { table } => {
                    let embedder = ScriptedEmbedder::load(&resolve_path(config_dir, table))
                        .with_context(|| format!("loading embedding table for {id:?}"))?;
                    embedders.insert(id.clone(), Arc::new(embedder));
                }
                BackendDef::HashEmbedding { dim } => {
                    embedders.insert(id.clone(), Arc::new(HashEmbedder::new(*dim)?));
                }
                BackendDef::HttpEmbedding {
                    base_url,
                    model,
                    api_key_env,
                } => {
                    let mut config = HttpBackendConfig::new(base_url, model);
                    config.api_key_env = api_key_env
                        .clone()
                        .unwrap_or_else(|| API_KEY_ENV.to_string());
                    embedders.insert(id.clone(), Arc::new(HttpEmbedder::new(config)?));
                }
            }
        }
        Ok(BackendSet {
            chats,
            embedders,
            roles: file.roles.clone(),
            stats,
        })
    }

    fn role_target(&self, role: &str) -> &str {
        self.roles
            .get(role)
            .map(String::as_str)
            .unwrap_or("default")
    }

    /// Chat backend for a role, with its backend id (the id feeds request
    /// digests, so the cache distinguishes backends).
    pub fn chat_for_role(&self, role: &str) -> anyhow::Result<(String, Arc<CachedBackend>)> {
        let id = self.role_target(role);
        let backend = self
            .chats
            .get(id)
            .with_context(|| format!("no chat backend {id:?} for role {role:?}"))?;
        Ok((id.to_string(), backend.clone()))
    }

    pub fn chat_by_id(&self, id: &str) -> anyhow::Result<(String, Arc<CachedBackend>)> {
        let backend = self
            .chats
            .get(id)
            .with_context(|| format!("no chat backend named {id:?}"))?;
        Ok((id.to_string(), backend.clone()))
    }

    /// Embedding backend for the `embedding` role, when configured.
    pub fn embedder(&self) -> Option<Arc<dyn EmbeddingBackend>> {
        let id = self.role_target("embedding");
        self.embedders.get(id).cloned().or_else(|| {
            if self.embedders.len() == 1 {
                self.embedders.values().next().cloned()
            } else {
                None
            }
        })
    }

    pub fn stats(&self) -> &Arc<BackendStats> {
        &self.stats
    }
}

/// Exclusive per-directory lock; stages never run concurrently over the
/// same output directory.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("LOCK");
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                bail!(
                    "output directory {} is locked by another stage (remove {} if stale)",
                    dir.display(),
                    path.display()
                )
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// Writes a JSON artifact with stable formatting.
pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)?;
    Ok(())
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let raw =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&raw).with_context(|| format!("parsing {}", path.display()))
}
