//! Deterministic scripted backend: a closed-world transcript maps request
//! digests to canned responses.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{BackendError, ChatBackend, ChatExchange, ChatRequest};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ScriptedResponse {
    Single {
        digest: String,
        response: String,
    },
    Sequence {
        digest: String,
        responses: Vec<String>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TranscriptFile {
    entries: Vec<ScriptedResponse>,
}

#[derive(Debug)]
enum Entry {
    Single(String),
    Sequence(Vec<String>),
}

/// A digest-keyed response table, optionally with per-digest response
/// sequences for repeated sampling.
#[derive(Debug)]
pub struct Transcript {
    entries: HashMap<String, Entry>,
}

impl Transcript {
    /// Loads a transcript file. A digest may appear at most once; use a
    /// `responses` sequence for repeated sampling of the same prompt.
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let raw = std::fs::read_to_string(path)?;
        Self::parse(&raw)
    }

    pub fn parse(raw: &str) -> Result<Self, BackendError> {
        let file: TranscriptFile = serde_json::from_str(raw)?;
        let mut entries = HashMap::new();
        for item in file.entries {
            let (digest, entry) = match item {
                ScriptedResponse::Single { digest, response } => (digest, Entry::Single(response)),
                ScriptedResponse::Sequence { digest, responses } => {
                    (digest, Entry::Sequence(responses))
                }
            };
            if entries.insert(digest.clone(), entry).is_some() {
                return Err(BackendError::DuplicateDigest { digest });
            }
        }
        Ok(Transcript { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Builds transcripts programmatically, typically when authoring fixtures:
/// render the request the pipeline will issue, attach the response.
#[derive(Default)]
pub struct TranscriptBuilder {
    entries: Vec<ScriptedResponse>,
}

impl TranscriptBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Scripts a single response for the request's digest.
    pub fn respond(&mut self, request: &ChatRequest, response: impl Into<String>) -> &mut Self {
        self.entries.push(ScriptedResponse::Single {
            digest: request.digest(),
            response: response.into(),
        });
        self
    }

    /// Scripts a response sequence consumed call by call (or addressed by
    /// `sample_index`).
    pub fn respond_seq<S: Into<String>>(
        &mut self,
        request: &ChatRequest,
        responses: impl IntoIterator<Item = S>,
    ) -> &mut Self {
        self.entries.push(ScriptedResponse::Sequence {
            digest: request.digest(),
            responses: responses.into_iter().map(Into::into).collect(),
        });
        self
    }

    pub fn build(&self) -> Result<Transcript, BackendError> {
        Transcript::parse(&self.to_json())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TranscriptFile {
            entries: self.entries.clone(),
        })
        .expect("transcript serializes")
    }

    pub fn write(&self, path: &Path) -> Result<(), BackendError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Replays a [`Transcript`] exactly. Behavior is a pure function of the
/// request digest and, for sequences, either the explicit `sample_index`
/// or the per-digest call count.
pub struct ScriptedBackend {
    transcript: Transcript,
    counters: Mutex<HashMap<String, usize>>,
    calls: AtomicU64,
}

impl ScriptedBackend {
    pub fn new(transcript: Transcript) -> Self {
        ScriptedBackend {
            transcript,
            counters: Mutex::new(HashMap::new()),
            calls: AtomicU64::new(0),
        }
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        Ok(Self::new(Transcript::load(path)?))
    }

    /// Number of completions served so far.
    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatExchange, BackendError> {
        request.validate()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        let digest = request.digest();
        let entry = self
            .transcript
            .entries
            .get(&digest)
            .ok_or(BackendError::Unscripted {
                digest: digest.clone(),
            })?;
        let text = match entry {
            Entry::Single(text) => text.clone(),
            Entry::Sequence(seq) => {
                // sample_index is 1-based when explicit; 0 means "next in
                // sequence" via the per-digest call counter.
                let index = if request.sample_index > 0 {
                    (request.sample_index - 1) as usize
                } else {
                    let mut counters = self.counters.lock().expect("counter lock");
                    let slot = counters.entry(digest.clone()).or_insert(0);
                    let index = *slot;
                    *slot += 1;
                    index
                };
                seq.get(index)
                    .ok_or(BackendError::SequenceExhausted {
                        digest: digest.clone(),
                        len: seq.len(),
                    })?
                    .clone()
            }
        };
        Ok(ChatExchange {
            request: request.clone(),
            response_text: text,
            latency_ms: 0,
            cache_hit: false,
            token_usage: None,
        })
    }
}
