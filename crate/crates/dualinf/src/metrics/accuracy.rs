//! Diagnostic and interpretation accuracy over a corpus.
//!
//! Both accuracies are recall-oriented: the denominator counts gold items
//! (diagnoses, or evidence strings). A precision-oriented variant over
//! predicted totals is always co-emitted so neither convention can be
//! silently misread. Only accepted predicted diagnoses participate.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{Matcher, MetricError};
use crate::corpus::{Corpus, Specialty};
use crate::protocol::{DdxPrediction, PredictedDiagnosis};
use crate::Score;

/// A matched/total pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub matched: u64,
    pub total: u64,
}

impl MatchCounts {
    pub fn ratio(&self) -> Score {
        if self.total == 0 {
            0.0
        } else {
            self.matched as Score / self.total as Score
        }
    }

    fn add(&mut self, other: MatchCounts) {
        self.matched += other.matched;
        self.total += other.total;
    }
}

/// Per-specialty numerators and denominators; they sum to the corpus
/// totals by construction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialtyCounts {
    pub gold: MatchCounts,
    pub predicted: MatchCounts,
}

/// One note's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteOutcome {
    pub note_id: String,
    pub specialty: Specialty,
    pub gold: MatchCounts,
    pub predicted: MatchCounts,
    /// Recall-oriented per-note score (`gold.ratio()`).
    pub score: Score,
}

/// Accuracy over the evaluated corpus, with per-note and per-specialty
/// breakdowns and judge coverage accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Gold-denominator score (the primary convention).
    pub score: Score,
    pub gold: MatchCounts,
    /// Predicted-denominator score (co-emitted variant).
    pub precision: Score,
    pub predicted: MatchCounts,
    pub per_note: Vec<NoteOutcome>,
    pub per_specialty: BTreeMap<Specialty, SpecialtyCounts>,
    pub judge_attempted: u64,
    pub judge_failed: u64,
}

impl AccuracyReport {
    /// Fraction of judge decisions that completed; 1 when no judging ran
    /// or everything succeeded.
    pub fn judge_coverage(&self) -> Score {
        if self.judge_attempted == 0 {
            1.0
        } else {
            1.0 - self.judge_failed as Score / self.judge_attempted as Score
        }
    }
}

/// Tracks judge outcomes, downgrading non-fatal judge errors to unmatched
/// pairs so a flaky judge yields a partial report instead of an abort.
struct JudgeLedger {
    attempted: u64,
    failed: u64,
}

impl JudgeLedger {
    fn new() -> Self {
        JudgeLedger {
            attempted: 0,
            failed: 0,
        }
    }

    fn observe(&mut self, outcome: Result<bool, MetricError>) -> Result<bool, MetricError> {
        self.attempted += 1;
        match outcome {
            Ok(v) => Ok(v),
            Err(MetricError::Backend(e)) if e.is_fatal() => Err(MetricError::Backend(e)),
            Err(_) => {
                self.failed += 1;
                Ok(false)
            }
        }
    }
}

fn check_note_ids(
    predictions: &BTreeMap<String, DdxPrediction>,
    gold: &Corpus,
) -> Result<(), MetricError> {
    let unknown: Vec<String> = predictions
        .keys()
        .filter(|id| gold.get(id).is_none())
        .cloned()
        .collect();
    if unknown.is_empty() {
        Ok(())
    } else {
        Err(MetricError::UnknownNoteIds(unknown))
    }
}

type PairMemo = HashMap<(String, String), bool>;

fn diagnosis_pair_match(
    matcher: &dyn Matcher,
    memo: &mut PairMemo,
    ledger: &mut JudgeLedger,
    gold_name: &str,
    predicted_name: &str,
) -> Result<bool, MetricError> {
    let key = (gold_name.to_string(), predicted_name.to_string());
    if let Some(&hit) = memo.get(&key) {
        return Ok(hit);
    }
    let verdict = ledger.observe(matcher.diagnosis_match(gold_name, predicted_name))?;
    memo.insert(key, verdict);
    Ok(verdict)
}

/// Cumulative correct diagnoses over cumulative gold diagnoses. Each gold
/// diagnosis counts as matched when at least one accepted predicted
/// diagnosis matches it, and is counted at most once.
pub fn diagnostic_accuracy(
    predictions: &BTreeMap<String, DdxPrediction>,
    gold: &Corpus,
    matcher: &dyn Matcher,
) -> Result<AccuracyReport, MetricError> {
    check_note_ids(predictions, gold)?;
    if gold.is_empty() {
        return Err(MetricError::EmptyDenominator("no gold notes".into()));
    }

    let empty = DdxPrediction::default();
    let mut memo: PairMemo = HashMap::new();
    let mut ledger = JudgeLedger::new();
    let mut per_note = Vec::with_capacity(gold.len());
    let mut per_specialty: BTreeMap<Specialty, SpecialtyCounts> = BTreeMap::new();
    let mut gold_totals = MatchCounts::default();
    let mut predicted_totals = MatchCounts::default();

    for note in gold.notes() {
        let prediction = predictions.get(&note.id).unwrap_or(&empty);
        let accepted: Vec<&PredictedDiagnosis> = prediction.accepted().collect();

        let mut note_gold = MatchCounts {
            matched: 0,
            total: note.differentials.len() as u64,
        };
        for diff in &note.differentials {
            for pred in &accepted {
                if diagnosis_pair_match(
                    matcher,
                    &mut memo,
                    &mut ledger,
                    &diff.diagnosis_name,
                    &pred.diagnosis_name,
                )? {
                    note_gold.matched += 1;
                    break;
                }
            }
        }

        let mut note_predicted = MatchCounts {
            matched: 0,
            total: accepted.len() as u64,
        };
        for pred in &accepted {
            for diff in &note.differentials {
                if diagnosis_pair_match(
                    matcher,
                    &mut memo,
                    &mut ledger,
                    &diff.diagnosis_name,
                    &pred.diagnosis_name,
                )? {
                    note_predicted.matched += 1;
                    break;
                }
            }
        }

        gold_totals.add(note_gold);
        predicted_totals.add(note_predicted);
        let slot = per_specialty.entry(note.specialty).or_default();
        slot.gold.add(note_gold);
        slot.predicted.add(note_predicted);
        per_note.push(NoteOutcome {
            note_id: note.id.clone(),
            specialty: note.specialty,
            gold: note_gold,
            predicted: note_predicted,
            score: note_gold.ratio(),
        });
    }

    if gold_totals.total == 0 {
        return Err(MetricError::EmptyDenominator("no gold diagnoses".into()));
    }
    Ok(AccuracyReport {
        score: gold_totals.ratio(),
        gold: gold_totals,
        precision: predicted_totals.ratio(),
        predicted: predicted_totals,
        per_note,
        per_specialty,
        judge_attempted: ledger.attempted,
        judge_failed: ledger.failed,
    })
}

/// Cumulative correct interpretations over cumulative gold evidence items.
/// Each gold diagnosis is assigned the first accepted predicted diagnosis
/// that matches it; its evidence items are then judged against that
/// entry's evidence list. Gold items under unmatched gold diagnoses count
/// as unmatched.
pub fn interpretation_accuracy(
    predictions: &BTreeMap<String, DdxPrediction>,
    gold: &Corpus,
    matcher: &dyn Matcher,
) -> Result<AccuracyReport, MetricError> {
    check_note_ids(predictions, gold)?;
    if gold.is_empty() {
        return Err(MetricError::EmptyDenominator("no gold notes".into()));
    }

    let empty = DdxPrediction::default();
    let mut memo: PairMemo = HashMap::new();
    let mut ledger = JudgeLedger::new();
    let mut per_note = Vec::with_capacity(gold.len());
    let mut per_specialty: BTreeMap<Specialty, SpecialtyCounts> = BTreeMap::new();
    let mut gold_totals = MatchCounts::default();
    let mut predicted_totals = MatchCounts::default();

    for note in gold.notes() {
        let prediction = predictions.get(&note.id).unwrap_or(&empty);
        let accepted: Vec<&PredictedDiagnosis> = prediction.accepted().collect();

        // Gold diagnosis -> first matching accepted prediction.
        let mut assignment: Vec<Option<&PredictedDiagnosis>> = Vec::new();
        for diff in &note.differentials {
            let mut assigned = None;
            for pred in &accepted {
                if diagnosis_pair_match(
                    matcher,
                    &mut memo,
                    &mut ledger,
                    &diff.diagnosis_name,
                    &pred.diagnosis_name,
                )? {
                    assigned = Some(*pred);
                    break;
                }
            }
            assignment.push(assigned);
        }

        let mut note_gold = MatchCounts::default();
        for (diff, assigned) in note.differentials.iter().zip(&assignment) {
            note_gold.total += diff.evidence.len() as u64;
            if let Some(pred) = assigned {
                for item in &diff.evidence {
                    if ledger.observe(matcher.evidence_match(item, &pred.evidence))? {
                        note_gold.matched += 1;
                    }
                }
            }
        }

        // Precision side: predicted evidence covered by the gold evidence
        // of the first gold diagnosis the prediction matches.
        let mut note_predicted = MatchCounts::default();
        for pred in &accepted {
            note_predicted.total += pred.evidence.len() as u64;
            let mut gold_match = None;
            for diff in &note.differentials {
                if diagnosis_pair_match(
                    matcher,
                    &mut memo,
                    &mut ledger,
                    &diff.diagnosis_name,
                    &pred.diagnosis_name,
                )? {
                    gold_match = Some(diff);
                    break;
                }
            }
            if let Some(diff) = gold_match {
                for item in &pred.evidence {
                    if ledger.observe(matcher.evidence_match(item, &diff.evidence))? {
                        note_predicted.matched += 1;
                    }
                }
            }
        }

        gold_totals.add(note_gold);
        predicted_totals.add(note_predicted);
        let slot = per_specialty.entry(note.specialty).or_default();
        slot.gold.add(note_gold);
        slot.predicted.add(note_predicted);
        per_note.push(NoteOutcome {
            note_id: note.id.clone(),
            specialty: note.specialty,
            gold: note_gold,
            predicted: note_predicted,
            score: note_gold.ratio(),
        });
    }

    if gold_totals.total == 0 {
        return Err(MetricError::EmptyDenominator(
            "no gold evidence items".into(),
        ));
    }
    Ok(AccuracyReport {
        score: gold_totals.ratio(),
        gold: gold_totals,
        precision: predicted_totals.ratio(),
        predicted: predicted_totals,
        per_note,
        per_specialty,
        judge_attempted: ledger.attempted,
        judge_failed: ledger.failed,
    })
}
