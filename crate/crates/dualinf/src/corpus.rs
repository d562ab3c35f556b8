//! Loading, validation, and slicing of the annotated clinical-note corpus.
//!
//! The dataset file is UTF-8 JSON Lines, one record per line:
//!
//! ```json
//! {"id": "...", "specialty": "Respiratory disease", "note": "...",
//!  "differentials": [{"diagnosis": "...", "evidence": ["...", "..."]}]}
//! ```
//!
//! Loading enforces the record invariants (minimum note length, non-empty
//! differentials with unique normalized names, non-empty de-duplicated
//! evidence) and fails with the record index and the violated rule.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::text::normalize;

/// Minimum note length in characters; shorter notes are rejected at load.
pub const MIN_NOTE_CHARS: usize = 130;

/// Errors raised while loading or validating corpus files.
#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse failure at record {index}: {message}")]
    Parse { index: usize, message: String },
    #[error("note {note_id} violates invariant: {rule}")]
    Invariant { note_id: String, rule: String },
    #[error("empty corpus: {0}")]
    Empty(String),
    #[error("rare-disease list is empty")]
    EmptyRareList,
}

/// The nine clinical specialties the corpus is annotated with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Specialty {
    Cardiovascular,
    Digestive,
    Respiratory,
    Endocrine,
    Nervous,
    Reproductive,
    Circulatory,
    Skin,
    Orthopedic,
}

impl Specialty {
    /// All specialties in canonical order.
    pub const ALL: [Specialty; 9] = [
        Specialty::Cardiovascular,
        Specialty::Digestive,
        Specialty::Respiratory,
        Specialty::Endocrine,
        Specialty::Nervous,
        Specialty::Reproductive,
        Specialty::Circulatory,
        Specialty::Skin,
        Specialty::Orthopedic,
    ];

    /// Canonical display name used in the dataset file.
    pub fn name(&self) -> &'static str {
        match self {
            Specialty::Cardiovascular => "Cardiovascular disease",
            Specialty::Digestive => "Digestive system disease",
            Specialty::Respiratory => "Respiratory disease",
            Specialty::Endocrine => "Endocrine disorder",
            Specialty::Nervous => "Nervous system disease",
            Specialty::Reproductive => "Reproductive system disease",
            Specialty::Circulatory => "Circulatory system disease",
            Specialty::Skin => "Skin disease",
            Specialty::Orthopedic => "Orthopedic disease",
        }
    }
}

impl fmt::Display for Specialty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Specialty {
    type Err = String;

    /// Parses case-insensitively on the leading word, so "respiratory",
    /// "Respiratory disease", and "RESPIRATORY" all resolve.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let first = s.split_whitespace().next().unwrap_or("").to_lowercase();
        match first.as_str() {
            "cardiovascular" => Ok(Specialty::Cardiovascular),
            "digestive" => Ok(Specialty::Digestive),
            "respiratory" => Ok(Specialty::Respiratory),
            "endocrine" => Ok(Specialty::Endocrine),
            "nervous" => Ok(Specialty::Nervous),
            "reproductive" => Ok(Specialty::Reproductive),
            "circulatory" => Ok(Specialty::Circulatory),
            "skin" => Ok(Specialty::Skin),
            "orthopedic" => Ok(Specialty::Orthopedic),
            _ => Err(format!("unknown specialty: {s:?}")),
        }
    }
}

impl Serialize for Specialty {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Specialty {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Specialty::from_str(&s).map_err(serde::de::Error::custom)
    }
}

/// One ground-truth differential: a diagnosis and the evidence supporting it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifferentialEntry {
    #[serde(rename = "diagnosis")]
    pub diagnosis_name: String,
    pub evidence: Vec<String>,
}

/// One clinical note with its annotated differentials.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteRecord {
    pub id: String,
    pub specialty: Specialty,
    #[serde(rename = "note")]
    pub note_text: String,
    pub differentials: Vec<DifferentialEntry>,
}

impl NoteRecord {
    /// Checks the per-record invariants, returning the violated rule.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let fail = |rule: String| CorpusError::Invariant {
            note_id: self.id.clone(),
            rule,
        };
        let chars = self.note_text.chars().count();
        if chars < MIN_NOTE_CHARS {
            return Err(fail(format!(
                "note text has {chars} characters, below the {MIN_NOTE_CHARS}-character minimum"
            )));
        }
        if self.differentials.is_empty() {
            return Err(fail("differentials list is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for entry in &self.differentials {
            let norm = normalize(&entry.diagnosis_name);
            if norm.is_empty() {
                return Err(fail(format!(
                    "diagnosis name {:?} is empty after normalization",
                    entry.diagnosis_name
                )));
            }
            if !seen.insert(norm) {
                return Err(fail(format!(
                    "duplicate diagnosis name {:?} after normalization",
                    entry.diagnosis_name
                )));
            }
            if entry.evidence.is_empty() {
                return Err(fail(format!(
                    "diagnosis {:?} carries no evidence",
                    entry.diagnosis_name
                )));
            }
            let mut evidence_seen = BTreeSet::new();
            for ev in &entry.evidence {
                let trimmed = ev.trim();
                if trimmed.is_empty() {
                    return Err(fail(format!(
                        "diagnosis {:?} has an evidence string that is empty after trimming",
                        entry.diagnosis_name
                    )));
                }
                if !evidence_seen.insert(trimmed) {
                    return Err(fail(format!(
                        "diagnosis {:?} has duplicate evidence {:?}",
                        entry.diagnosis_name, trimmed
                    )));
                }
            }
        }
        Ok(())
    }

    /// Total evidence strings across all differentials.
    pub fn evidence_count(&self) -> usize {
        self.differentials.iter().map(|d| d.evidence.len()).sum()
    }
}

/// An ordered collection of validated note records.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    notes: Vec<NoteRecord>,
}

impl Corpus {
    /// Builds a corpus from records, validating every invariant.
    pub fn new(notes: Vec<NoteRecord>) -> Result<Self, CorpusError> {
        let mut ids = BTreeSet::new();
        for note in &notes {
            note.validate()?;
            if !ids.insert(note.id.clone()) {
                return Err(CorpusError::Invariant {
                    note_id: note.id.clone(),
                    rule: "duplicate note id".into(),
                });
            }
        }
        Ok(Corpus { notes })
    }

    /// Loads a JSON Lines dataset file, preserving file order.
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let raw = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&raw)
    }

    /// Parses JSON Lines text; blank lines are skipped.
    pub fn parse(raw: &str) -> Result<Self, CorpusError> {
        let mut notes = Vec::new();
        for (index, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: NoteRecord =
                serde_json::from_str(line).map_err(|e| CorpusError::Parse {
                    index,
                    message: e.to_string(),
                })?;
            notes.push(record);
        }
        Self::new(notes)
    }

    /// Serializes back to the JSON Lines format.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for note in &self.notes {
            out.push_str(&serde_json::to_string(note).expect("note serializes"));
            out.push('\n');
        }
        out
    }

    /// Writes the corpus to a file in the JSON Lines format.
    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let mut file = fs::File::create(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        file.write_all(self.to_jsonl().as_bytes())
            .map_err(|source| CorpusError::Io {
                path: path.display().to_string(),
                source,
            })
    }

    pub fn notes(&self) -> &[NoteRecord] {
        &self.notes
    }

    pub fn len(&self) -> usize {
        self.notes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&NoteRecord> {
        self.notes.iter().find(|n| n.id == id)
    }

    /// Keeps only notes whose id passes the predicate, preserving order.
    pub fn retain_ids(&self, keep: impl Fn(&str) -> bool) -> Corpus {
        Corpus {
            notes: self.notes.iter().filter(|n| keep(&n.id)).cloned().collect(),
        }
    }

    /// Keeps only notes of the given specialty.
    pub fn filter_specialty(&self, specialty: Specialty) -> Corpus {
        Corpus {
            notes: self
                .notes
                .iter()
                .filter(|n| n.specialty == specialty)
                .cloned()
                .collect(),
        }
    }
}

/// Descriptive statistics over a corpus. Standard deviations use the
/// population convention (divide by n).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusStats {
    pub note_count: usize,
    /// Note length in characters.
    pub note_length_mean: f64,
    pub note_length_std: f64,
    /// Note length in whitespace-separated words, reported alongside the
    /// character counts so either convention can be checked against
    /// published figures.
    pub note_length_words_mean: f64,
    pub note_length_words_std: f64,
    pub diagnoses_per_note_mean: f64,
    pub diagnoses_per_note_std: f64,
    pub evidence_per_note_mean: f64,
    pub evidence_per_note_std: f64,
    pub evidence_per_diagnosis_mean: f64,
    pub evidence_per_diagnosis_std: f64,
    pub per_specialty_counts: std::collections::BTreeMap<Specialty, usize>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Computes corpus statistics; errors on an empty corpus.
pub fn compute_stats(corpus: &Corpus) -> Result<CorpusStats, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::Empty("cannot compute statistics".into()));
    }
    let chars: Vec<f64> = corpus
        .notes()
        .iter()
        .map(|n| n.note_text.chars().count() as f64)
        .collect();
    let words: Vec<f64> = corpus
        .notes()
        .iter()
        .map(|n| n.note_text.split_whitespace().count() as f64)
        .collect();
    let diagnoses: Vec<f64> = corpus
        .notes()
        .iter()
        .map(|n| n.differentials.len() as f64)
        .collect();
    let evidence: Vec<f64> = corpus
        .notes()
        .iter()
        .map(|n| n.evidence_count() as f64)
        .collect();
    let per_diagnosis: Vec<f64> = corpus
        .notes()
        .iter()
        .flat_map(|n| n.differentials.iter().map(|d| d.evidence.len() as f64))
        .collect();

    let (note_length_mean, note_length_std) = mean_std(&chars);
    let (note_length_words_mean, note_length_words_std) = mean_std(&words);
    let (diagnoses_per_note_mean, diagnoses_per_note_std) = mean_std(&diagnoses);
    let (evidence_per_note_mean, evidence_per_note_std) = mean_std(&evidence);
    let (evidence_per_diagnosis_mean, evidence_per_diagnosis_std) = mean_std(&per_diagnosis);

    let mut per_specialty_counts = std::collections::BTreeMap::new();
    for note in corpus.notes() {
        *per_specialty_counts.entry(note.specialty).or_insert(0) += 1;
    }

    Ok(CorpusStats {
        note_count: corpus.len(),
        note_length_mean,
        note_length_std,
        note_length_words_mean,
        note_length_words_std,
        diagnoses_per_note_mean,
        diagnoses_per_note_std,
        evidence_per_note_mean,
        evidence_per_note_std,
        evidence_per_diagnosis_mean,
        evidence_per_diagnosis_std,
        per_specialty_counts,
    })
}

/// A set of normalized rare-disease names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RareDiseaseList {
    names: BTreeSet<String>,
}

impl RareDiseaseList {
    /// Builds a list from raw names; names are normalized and de-duplicated.
    pub fn new<I: IntoIterator<Item = S>, S: AsRef<str>>(names: I) -> Result<Self, CorpusError> {
        let set: BTreeSet<String> = names
            .into_iter()
            .map(|n| normalize(n.as_ref()))
            .filter(|n| !n.is_empty())
            .collect();
        if set.is_empty() {
            return Err(CorpusError::EmptyRareList);
        }
        Ok(RareDiseaseList { names: set })
    }

    /// Loads a plain-text list, one name per line; `#` starts a comment.
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let raw = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::new(raw.lines().map(|l| match l.find('#') {
            Some(pos) => &l[..pos],
            None => l,
        }))
    }

    pub fn names(&self) -> &BTreeSet<String> {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// True when a normalized diagnosis name involves a listed disease:
    /// exact normalized match, or the diagnosis contains a whole list entry
    /// as a substring ("wilson disease of the liver" matches "wilson disease").
    pub fn matches(&self, normalized_diagnosis: &str) -> bool {
        if self.names.contains(normalized_diagnosis) {
            return true;
        }
        self.names
            .iter()
            .any(|entry| normalized_diagnosis.contains(entry.as_str()))
    }
}

/// Selects the notes with at least one ground-truth diagnosis involving a
/// listed rare disease. The result may be empty.
pub fn filter_rare(corpus: &Corpus, rare_list: &RareDiseaseList) -> Corpus {
    corpus.retain_ids(|id| {
        corpus
            .get(id)
            .map(|note| {
                note.differentials
                    .iter()
                    .any(|d| rare_list.matches(&normalize(&d.diagnosis_name)))
            })
            .unwrap_or(false)
    })
}
