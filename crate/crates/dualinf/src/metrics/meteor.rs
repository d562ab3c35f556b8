//! Unigram alignment metric with staged matching and a chunk penalty.
//!
//! Alignment proceeds in stages — exact surface match, stemmed match, then
//! synonym match when a table is supplied — each stage pairing still
//! unmatched tokens. Within a stage, equal tokens are paired left to right,
//! which maximizes matches per stage and keeps crossings low. With `m`
//! matches over candidate length `c` and reference length `r`:
//!
//! ```text
//! P = m / c            R = m / r
//! Fmean   = 10 P R / (R + 9 P)
//! penalty = 0.5 (chunks / m)^3
//! score   = Fmean (1 - penalty)        (0 when m = 0)
//! ```
//!
//! A chunk is a maximal run of matches contiguous and in order on both
//! sides.

use std::collections::{HashMap, HashSet, VecDeque};
use std::path::Path;
use std::sync::LazyLock;

use num_traits::{Float, FromPrimitive};
use rust_stemmers::{Algorithm, Stemmer};

use super::MetricError;
use crate::text::tokenize;

static STEMMER: LazyLock<Stemmer> = LazyLock::new(|| Stemmer::create(Algorithm::English));

/// Symmetric token-level synonym pairs, loaded from `term<TAB>synonym`
/// lines. `#` starts a comment.
#[derive(Debug, Clone, Default)]
pub struct SynonymTable {
    pairs: HashSet<(String, String)>,
}

impl SynonymTable {
    pub fn new<I, A, B>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: AsRef<str>,
        B: AsRef<str>,
    {
        let mut set = HashSet::new();
        for (a, b) in pairs {
            let a = a.as_ref().trim().to_lowercase();
            let b = b.as_ref().trim().to_lowercase();
            if !a.is_empty() && !b.is_empty() {
                set.insert(Self::key(&a, &b));
            }
        }
        SynonymTable { pairs: set }
    }

    pub fn load(path: &Path) -> Result<Self, MetricError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| MetricError::EmptyInput(format!("synonym table: {e}")))?;
        let mut pairs = Vec::new();
        for line in raw.lines() {
            let line = match line.find('#') {
                Some(pos) => &line[..pos],
                None => line,
            };
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            if let (Some(a), Some(b)) = (fields.next(), fields.next()) {
                pairs.push((a.to_string(), b.to_string()));
            }
        }
        Ok(Self::new(pairs))
    }

    fn key(a: &str, b: &str) -> (String, String) {
        if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        }
    }

    pub fn are_synonyms(&self, a: &str, b: &str) -> bool {
        self.pairs.contains(&Self::key(a, b))
    }
}

/// Knobs for the alignment stages.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeteorOptions<'a> {
    /// Disable the stemmed stage (the exact stage always runs).
    pub skip_stemming: bool,
    /// Synonym stage runs only when a table is supplied.
    pub synonyms: Option<&'a SynonymTable>,
}

/// Raw alignment outcome, before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeteorAlignment {
    pub matches: usize,
    pub chunks: usize,
    pub candidate_len: usize,
    pub reference_len: usize,
}

fn pair_stage<K: std::hash::Hash + Eq>(
    candidate: &[String],
    reference: &[String],
    matched_c: &mut [Option<usize>],
    matched_r: &mut [bool],
    keyfn: impl Fn(&str) -> K,
) {
    let mut available: HashMap<K, VecDeque<usize>> = HashMap::new();
    for (j, token) in reference.iter().enumerate() {
        if !matched_r[j] {
            available.entry(keyfn(token)).or_default().push_back(j);
        }
    }
    for (i, token) in candidate.iter().enumerate() {
        if matched_c[i].is_some() {
            continue;
        }
        if let Some(queue) = available.get_mut(&keyfn(token)) {
            if let Some(j) = queue.pop_front() {
                matched_c[i] = Some(j);
                matched_r[j] = true;
            }
        }
    }
}

/// Computes the staged alignment between candidate and reference texts.
pub fn meteor_alignment(candidate: &str, reference: &str, opts: &MeteorOptions) -> MeteorAlignment {
    let cand = tokenize(candidate);
    let refr = tokenize(reference);
    let mut matched_c: Vec<Option<usize>> = vec![None; cand.len()];
    let mut matched_r: Vec<bool> = vec![false; refr.len()];

    pair_stage(&cand, &refr, &mut matched_c, &mut matched_r, |t| {
        t.to_string()
    });
    if !opts.skip_stemming {
        pair_stage(&cand, &refr, &mut matched_c, &mut matched_r, |t| {
            STEMMER.stem(t).to_string()
        });
    }
    if let Some(table) = opts.synonyms {
        for i in 0..cand.len() {
            if matched_c[i].is_some() {
                continue;
            }
            for j in 0..refr.len() {
                if !matched_r[j] && table.are_synonyms(&cand[i], &refr[j]) {
                    matched_c[i] = Some(j);
                    matched_r[j] = true;
                    break;
                }
            }
        }
    }

    let pairs: Vec<(usize, usize)> = matched_c
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| (i, j)))
        .collect();
    let mut chunks = 0;
    let mut prev: Option<(usize, usize)> = None;
    for &(i, j) in &pairs {
        if prev != Some((i.wrapping_sub(1), j.wrapping_sub(1))) {
            chunks += 1;
        }
        prev = Some((i, j));
    }

    MeteorAlignment {
        matches: pairs.len(),
        chunks,
        candidate_len: cand.len(),
        reference_len: refr.len(),
    }
}

/// The score in `[0, 1]`; 0 whenever nothing aligns.
pub fn meteor<F: Float + FromPrimitive>(
    candidate: &str,
    reference: &str,
    opts: &MeteorOptions,
) -> F {
    let alignment = meteor_alignment(candidate, reference, opts);
    score_alignment(alignment)
}

fn score_alignment<F: Float + FromPrimitive>(alignment: MeteorAlignment) -> F {
    if alignment.matches == 0 {
        return F::zero();
    }
    let f = |n: usize| F::from_usize(n).expect("count fits scalar");
    let m = f(alignment.matches);
    let precision = m / f(alignment.candidate_len);
    let recall = m / f(alignment.reference_len);
    let ten = F::from_u8(10).expect("constant");
    let nine = F::from_u8(9).expect("constant");
    let half = F::from_f64(0.5).expect("constant");
    let fmean = ten * precision * recall / (recall + nine * precision);
    let penalty = half * (f(alignment.chunks) / m).powi(3);
    fmean * (F::one() - penalty)
}
