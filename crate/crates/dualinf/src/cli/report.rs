//! The `report` stage: compare evaluated methods and export plot-ready
//! tables — method-vs-method deltas with CIs and permutation p-values,
//! iteration histograms, per-note score quantiles, and error-type counts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use super::evaluate::{ErrorCounts, EvalReport, PerNoteFile};
use super::{read_json, write_json, DirLock};
use crate::metrics::{mean, paired_permutation_test, percentile, Bootstrap, ConfidenceInterval};
use crate::Score;

#[derive(Debug, Clone)]
pub struct ReportConfig {
    pub eval_dirs: Vec<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub bootstrap_resamples: u32,
    pub ci_level: Score,
}

impl ReportConfig {
    pub fn new(eval_dirs: Vec<PathBuf>, out: PathBuf) -> Self {
        ReportConfig {
            eval_dirs,
            out,
            seed: 0,
            bootstrap_resamples: 10_000,
            ci_level: 0.95,
        }
    }
}

/// One method-vs-method comparison for one metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: String,
    pub method_a: String,
    pub method_b: String,
    pub mean_a: Score,
    pub mean_b: Score,
    pub delta: Score,
    /// Bootstrap CI of the per-note delta.
    pub delta_ci: ConfidenceInterval,
    pub p_one_sided: Score,
    pub p_two_sided: Score,
    pub permutations_exhaustive: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricQuantiles {
    pub metric: String,
    pub method: String,
    pub median: Score,
    pub q1: Score,
    pub q3: Score,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub methods: Vec<String>,
    /// Eval digests of the inputs, in order.
    pub eval_digests: Vec<String>,
    pub seed: u64,
    pub bootstrap_resamples: u32,
    pub ci_level: Score,
    pub comparisons: Vec<MetricComparison>,
    pub quantiles: Vec<MetricQuantiles>,
    /// Method -> iteration count -> notes.
    pub iteration_histograms: BTreeMap<String, BTreeMap<u32, usize>>,
    /// Method -> per-run error counts.
    pub error_counts: BTreeMap<String, Vec<ErrorCounts>>,
}

struct LoadedEval {
    label: String,
    report: EvalReport,
    per_note: PerNoteFile,
}

fn load_eval(dir: &Path) -> anyhow::Result<LoadedEval> {
    let report: EvalReport = read_json(&dir.join("report.json"))?;
    let per_note: PerNoteFile = read_json(&dir.join("per_note.json"))?;
    let label = report.method.label();
    Ok(LoadedEval {
        label,
        report,
        per_note,
    })
}

fn note_ids(eval: &LoadedEval) -> Vec<&str> {
    eval.per_note
        .notes
        .iter()
        .map(|n| n.note_id.as_str())
        .collect()
}

/// Compares evaluated methods pairwise and writes `comparison.json` plus
/// the tabular exports. Paired statistics require identical note id sets
/// across the inputs.
pub fn cmd_report(config: &ReportConfig) -> anyhow::Result<()> {
    if config.eval_dirs.is_empty() {
        bail!("report requires at least one eval directory");
    }
    let evals: Vec<LoadedEval> = config
        .eval_dirs
        .iter()
        .map(|d| load_eval(d).with_context(|| format!("loading eval dir {}", d.display())))
        .collect::<anyhow::Result<_>>()?;

    for pair in evals.windows(2) {
        if note_ids(&pair[0]) != note_ids(&pair[1]) {
            bail!(
                "eval directories cover different note sets ({} vs {}); paired statistics \
                 are undefined",
                pair[0].label,
                pair[1].label
            );
        }
    }

    let _lock = DirLock::acquire(&config.out)?;

    let metric_names: Vec<String> = evals[0].report.metrics.keys().cloned().collect();
    let mut comparisons = Vec::new();
    for i in 0..evals.len() {
        for j in (i + 1)..evals.len() {
            let (a, b) = (&evals[i], &evals[j]);
            for metric in &metric_names {
                let values_a: Vec<Score> = a
                    .per_note
                    .notes
                    .iter()
                    .map(|n| n.mean_scores.get(metric).copied().unwrap_or(0.0))
                    .collect();
                let values_b: Vec<Score> = b
                    .per_note
                    .notes
                    .iter()
                    .map(|n| n.mean_scores.get(metric).copied().unwrap_or(0.0))
                    .collect();
                let diffs: Vec<Score> =
                    values_a.iter().zip(&values_b).map(|(x, y)| x - y).collect();
                let test =
                    paired_permutation_test(&diffs, config.bootstrap_resamples, config.seed)?;
                let boot = Bootstrap::run(&diffs, config.bootstrap_resamples, config.seed)?;
                comparisons.push(MetricComparison {
                    metric: metric.clone(),
                    method_a: a.label.clone(),
                    method_b: b.label.clone(),
                    mean_a: mean(&values_a),
                    mean_b: mean(&values_b),
                    delta: test.observed_mean,
                    delta_ci: boot.ci(config.ci_level),
                    p_one_sided: test.p_one_sided,
                    p_two_sided: test.p_two_sided,
                    permutations_exhaustive: test.exhaustive,
                });
            }
        }
    }

    let mut quantiles = Vec::new();
    for eval in &evals {
        for metric in &metric_names {
            let mut values: Vec<Score> = eval
                .per_note
                .notes
                .iter()
                .map(|n| n.mean_scores.get(metric).copied().unwrap_or(0.0))
                .collect();
            values.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
            if values.is_empty() {
                continue;
            }
            quantiles.push(MetricQuantiles {
                metric: metric.clone(),
                method: eval.label.clone(),
                median: percentile(&values, 0.5),
                q1: percentile(&values, 0.25),
                q3: percentile(&values, 0.75),
            });
        }
    }

    let mut iteration_histograms = BTreeMap::new();
    let mut error_counts = BTreeMap::new();
    for eval in &evals {
        iteration_histograms.insert(eval.label.clone(), eval.report.iteration_histogram.clone());
        error_counts.insert(eval.label.clone(), eval.report.error_totals.clone());
    }

    let report = ComparisonReport {
        methods: evals.iter().map(|e| e.label.clone()).collect(),
        eval_digests: evals.iter().map(|e| e.report.eval_digest.clone()).collect(),
        seed: config.seed,
        bootstrap_resamples: config.bootstrap_resamples,
        ci_level: config.ci_level,
        comparisons,
        quantiles,
        iteration_histograms,
        error_counts,
    };
    write_json(&config.out.join("comparison.json"), &report)?;
    write_comparison_tsv(&config.out.join("comparison.tsv"), &report)?;
    write_quantiles_tsv(&config.out.join("quantiles.tsv"), &report)?;
    write_iterations_tsv(&config.out.join("iterations.tsv"), &report)?;
    write_errors_tsv(&config.out.join("error_counts.tsv"), &report)?;
    Ok(())
}

fn header(report: &ComparisonReport) -> String {
    format!("# eval_digests={}\n", report.eval_digests.join(","))
}

fn write_comparison_tsv(path: &Path, report: &ComparisonReport) -> anyhow::Result<()> {
    let mut out = header(report);
    out.push_str(
        "metric\tmethod_a\tmethod_b\tmean_a\tmean_b\tdelta\tci_lower\tci_upper\t\
         p_one_sided\tp_two_sided\texhaustive\n",
    );
    for c in &report.comparisons {
        out.push_str(&format!(
            "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\n",
            c.metric,
            c.method_a,
            c.method_b,
            c.mean_a,
            c.mean_b,
            c.delta,
            c.delta_ci.lower,
            c.delta_ci.upper,
            c.p_one_sided,
            c.p_two_sided,
            c.permutations_exhaustive,
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_quantiles_tsv(path: &Path, report: &ComparisonReport) -> anyhow::Result<()> {
    let mut out = header(report);
    out.push_str("metric\tmethod\tq1\tmedian\tq3\n");
    for q in &report.quantiles {
        out.push_str(&format!(
            "{}\t{}\t{:.6}\t{:.6}\t{:.6}\n",
            q.metric, q.method, q.q1, q.median, q.q3
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_iterations_tsv(path: &Path, report: &ComparisonReport) -> anyhow::Result<()> {
    let mut out = header(report);
    out.push_str("method\titerations\tnotes\n");
    for (method, histogram) in &report.iteration_histograms {
        for (iterations, notes) in histogram {
            out.push_str(&format!("{method}\t{iterations}\t{notes}\n"));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_errors_tsv(path: &Path, report: &ComparisonReport) -> anyhow::Result<()> {
    let mut out = header(report);
    out.push_str(
        "method\trun\tpairs\tmissing_content\tfactual_error\tlow_relevance\t\
         primary_missing_content\tprimary_factual_error\tprimary_low_relevance\tunclassified\n",
    );
    for (method, runs) in &report.error_counts {
        for (index, counts) in runs.iter().enumerate() {
            out.push_str(&format!(
                "{method}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                index + 1,
                counts.pairs,
                counts.missing_content,
                counts.factual_error,
                counts.low_relevance,
                counts.primary_missing_content,
                counts.primary_factual_error,
                counts.primary_low_relevance,
                counts.unclassified,
            ));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}
