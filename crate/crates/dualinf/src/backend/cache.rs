//! Persistent response cache: one file per entry, named by cache key,
//! written atomically (temp file + rename) so concurrent readers see either
//! a complete entry or a miss.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use super::{BackendError, ChatBackend, ChatExchange, ChatRequest};

/// Directory-backed cache of serialized [`ChatExchange`] entries.
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(ResponseCache { dir })
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Returns the cached exchange, marked as a hit. Unreadable or corrupt
    /// entries count as misses.
    pub fn get(&self, key: &str) -> Option<ChatExchange> {
        let raw = std::fs::read_to_string(self.entry_path(key)).ok()?;
        let mut exchange: ChatExchange = serde_json::from_str(&raw).ok()?;
        exchange.cache_hit = true;
        Some(exchange)
    }

    /// Stores an exchange under the key via write-temp-then-rename.
    pub fn put(&self, key: &str, exchange: &ChatExchange) -> Result<(), BackendError> {
        let tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        serde_json::to_writer_pretty(&tmp, exchange)?;
        tmp.persist(self.entry_path(key))
            .map_err(|e| BackendError::Io(e.error))?;
        Ok(())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

/// Call counters shared across a backend set.
#[derive(Debug, Default)]
pub struct BackendStats {
    pub backend_calls: AtomicU64,
    pub cache_hits: AtomicU64,
}

impl BackendStats {
    pub fn calls(&self) -> u64 {
        self.backend_calls.load(Ordering::SeqCst)
    }

    pub fn hits(&self) -> u64 {
        self.cache_hits.load(Ordering::SeqCst)
    }
}

/// Wraps a backend with the persistent cache. Identical requests replay
/// the stored response byte-identically without touching the inner backend.
pub struct CachedBackend {
    inner: Arc<dyn ChatBackend>,
    cache: Option<ResponseCache>,
    stats: Arc<BackendStats>,
}

impl CachedBackend {
    pub fn new(
        inner: Arc<dyn ChatBackend>,
        cache: Option<ResponseCache>,
        stats: Arc<BackendStats>,
    ) -> Self {
        CachedBackend {
            inner,
            cache,
            stats,
        }
    }

    pub fn stats(&self) -> &Arc<BackendStats> {
        &self.stats
    }
}

impl ChatBackend for CachedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatExchange, BackendError> {
        let key = request.cache_key();
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&key) {
                self.stats.cache_hits.fetch_add(1, Ordering::SeqCst);
                return Ok(hit);
            }
        }
        let started = Instant::now();
        let mut exchange = self.inner.complete(request)?;
        if exchange.latency_ms == 0 {
            exchange.latency_ms = started.elapsed().as_millis() as u64;
        }
        self.stats.backend_calls.fetch_add(1, Ordering::SeqCst);
        if let Some(cache) = &self.cache {
            cache.put(&key, &exchange)?;
        }
        Ok(exchange)
    }
}
