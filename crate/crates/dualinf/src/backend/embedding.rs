//! Offline embedding backends: a closed-world scripted table and a
//! deterministic feature-hash embedder usable on arbitrary text.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::{check_embedding_batch, BackendError, EmbeddingBackend};
use crate::text::tokenize;

#[derive(Deserialize)]
struct EmbeddingTableFile {
    dim: usize,
    table: HashMap<String, Vec<f32>>,
}

/// Replays a text-to-vector table exactly; unknown texts are an error.
pub struct ScriptedEmbedder {
    dim: usize,
    table: HashMap<String, Vec<f32>>,
}

impl ScriptedEmbedder {
    pub fn new(dim: usize, table: HashMap<String, Vec<f32>>) -> Result<Self, BackendError> {
        for v in table.values() {
            if v.len() != dim {
                return Err(BackendError::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
        }
        Ok(ScriptedEmbedder { dim, table })
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let raw = std::fs::read_to_string(path)?;
        let file: EmbeddingTableFile = serde_json::from_str(&raw)?;
        Self::new(file.dim, file.table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl EmbeddingBackend for ScriptedEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, BackendError> {
        if texts.is_empty() {
            return Err(BackendError::EmptyInput("embedding batch".into()));
        }
        let vectors = texts
            .iter()
            .map(|t| {
                self.table
                    .get(t)
                    .cloned()
                    .ok_or_else(|| BackendError::UnscriptedText { text: t.clone() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        check_embedding_batch(texts, &vectors)?;
        Ok(vectors)
    }
}

/// Deterministic token-count feature hashing into a fixed dimension,
/// L2-normalized. Uses SHA-256 so vectors are stable across platforms and
/// processes.
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Result<Self, BackendError> {
        if dim == 0 {
            return Err(BackendError::InvalidRequest("embedding dim is zero".into()));
        }
        Ok(HashEmbedder { dim })
    }

    fn bucket(&self, token: &str) -> usize {
        let digest = Sha256::digest(token.as_bytes());
        let mut word = [0u8; 8];
        word.copy_from_slice(&digest[..8]);
        (u64::from_be_bytes(word) % self.dim as u64) as usize
    }
}

impl EmbeddingBackend for HashEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, BackendError> {
        if texts.is_empty() {
            return Err(BackendError::EmptyInput("embedding batch".into()));
        }
        let mut vectors = Vec::with_capacity(texts.len());
        for text in texts {
            let tokens = tokenize(text);
            if tokens.is_empty() {
                return Err(BackendError::EmptyInput(format!(
                    "no tokens in text {text:?}"
                )));
            }
            let mut v = vec![0.0f32; self.dim];
            for token in &tokens {
                v[self.bucket(token)] += 1.0;
            }
            let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
            for x in &mut v {
                *x /= norm;
            }
            vectors.push(v);
        }
        check_embedding_batch(texts, &vectors)?;
        Ok(vectors)
    }
}
