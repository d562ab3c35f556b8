//! Run statistics: mean/std aggregation, percentile-bootstrap confidence
//! intervals, and paired sign-flip permutation tests. Everything is
//! deterministic given the recorded seed.

use num_traits::{Float, FromPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::Score;

/// Arithmetic mean; NaN on empty input. All-equal inputs return the value
/// exactly, so identical runs report a zero standard deviation.
pub fn mean<F: Float + FromPrimitive>(xs: &[F]) -> F {
    if let Some(&first) = xs.first() {
        if xs.iter().all(|&x| x == first) {
            return first;
        }
    }
    let sum = xs.iter().fold(F::zero(), |acc, &x| acc + x);
    sum / F::from_usize(xs.len()).expect("length fits scalar")
}

/// Population standard deviation (divide by n); NaN on empty input.
pub fn population_std<F: Float + FromPrimitive>(xs: &[F]) -> F {
    let mu = mean(xs);
    let var = xs
        .iter()
        .fold(F::zero(), |acc, &x| acc + (x - mu) * (x - mu))
        / F::from_usize(xs.len()).expect("length fits scalar");
    var.sqrt()
}

/// Linear-interpolation percentile of sorted values, `q` in `[0, 1]`.
pub fn percentile(sorted: &[Score], q: Score) -> Score {
    debug_assert!(!sorted.is_empty());
    let q = q.clamp(0.0, 1.0);
    let pos = q * (sorted.len() - 1) as Score;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as Score;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

/// A two-sided percentile confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: Score,
    pub upper: Score,
    pub level: Score,
}

/// Bootstrap resample distribution over note-level values. The resample
/// stream depends only on the seed, so intervals at different levels come
/// from the same distribution and nest.
#[derive(Debug, Clone)]
pub struct Bootstrap {
    sorted_means: Vec<Score>,
    pub seed: u64,
    pub resamples: u32,
}

impl Bootstrap {
    pub fn run(values: &[Score], resamples: u32, seed: u64) -> Result<Self, MetricError> {
        if values.is_empty() {
            return Err(MetricError::EmptyInput("bootstrap over no values".into()));
        }
        if resamples == 0 {
            return Err(MetricError::EmptyInput("zero bootstrap resamples".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = values.len();
        let mut means = Vec::with_capacity(resamples as usize);
        let mut draw = vec![0.0; n];
        for _ in 0..resamples {
            for slot in draw.iter_mut() {
                *slot = values[rng.gen_range(0..n)];
            }
            means.push(mean(&draw));
        }
        means.sort_by(|a, b| a.partial_cmp(b).expect("finite means"));
        Ok(Bootstrap {
            sorted_means: means,
            seed,
            resamples,
        })
    }

    pub fn ci(&self, level: Score) -> ConfidenceInterval {
        let alpha = (1.0 - level) / 2.0;
        ConfidenceInterval {
            lower: percentile(&self.sorted_means, alpha),
            upper: percentile(&self.sorted_means, 1.0 - alpha),
            level,
        }
    }
}

/// Result of a paired sign-flip permutation test on per-note differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationTest {
    pub observed_mean: Score,
    /// P(permuted mean >= observed mean).
    pub p_one_sided: Score,
    /// P(|permuted mean| >= |observed mean|).
    pub p_two_sided: Score,
    /// True when all 2^n sign assignments were enumerated.
    pub exhaustive: bool,
    pub permutations: u64,
}

/// Exhaustive enumeration up to 20 notes (2^20 sign masks); Monte Carlo
/// with the seeded generator beyond that, with the identity permutation
/// included via the +1 convention.
pub fn paired_permutation_test(
    diffs: &[Score],
    max_resamples: u32,
    seed: u64,
) -> Result<PermutationTest, MetricError> {
    if diffs.is_empty() {
        return Err(MetricError::EmptyInput(
            "permutation test over no pairs".into(),
        ));
    }
    let n = diffs.len();
    let observed = diffs.iter().sum::<Score>() / n as Score;
    let abs_observed = observed.abs();

    if n <= 20 {
        let total: u64 = 1 << n;
        let mut ge = 0u64;
        let mut abs_ge = 0u64;
        for mask in 0..total {
            let mut sum = 0.0;
            for (i, &d) in diffs.iter().enumerate() {
                if mask & (1 << i) == 0 {
                    sum += d;
                } else {
                    sum -= d;
                }
            }
            let permuted = sum / n as Score;
            if permuted >= observed {
                ge += 1;
            }
            if permuted.abs() >= abs_observed {
                abs_ge += 1;
            }
        }
        Ok(PermutationTest {
            observed_mean: observed,
            p_one_sided: ge as Score / total as Score,
            p_two_sided: abs_ge as Score / total as Score,
            exhaustive: true,
            permutations: total,
        })
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = max_resamples.max(1) as u64;
        let mut ge = 0u64;
        let mut abs_ge = 0u64;
        for _ in 0..b {
            let mut sum = 0.0;
            for &d in diffs {
                if rng.gen::<bool>() {
                    sum -= d;
                } else {
                    sum += d;
                }
            }
            let permuted = sum / n as Score;
            if permuted >= observed {
                ge += 1;
            }
            if permuted.abs() >= abs_observed {
                abs_ge += 1;
            }
        }
        Ok(PermutationTest {
            observed_mean: observed,
            p_one_sided: (ge + 1) as Score / (b + 1) as Score,
            p_two_sided: (abs_ge + 1) as Score / (b + 1) as Score,
            exhaustive: false,
            permutations: b,
        })
    }
}

/// Run-level aggregate of one metric: mean/std over runs plus a
/// note-level bootstrap confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAggregate {
    pub mean: Score,
    pub std: Score,
    pub ci: ConfidenceInterval,
    pub resamples: u32,
    pub seed: u64,
}

/// Aggregates per-run corpus values and per-note values (averaged across
/// runs by the caller) into mean/std and a bootstrap CI.
pub fn aggregate_runs(
    run_values: &[Score],
    per_note_values: &[Score],
    resamples: u32,
    level: Score,
    seed: u64,
) -> Result<RunAggregate, MetricError> {
    if run_values.is_empty() {
        return Err(MetricError::EmptyInput("no run values to aggregate".into()));
    }
    let bootstrap = Bootstrap::run(per_note_values, resamples, seed)?;
    Ok(RunAggregate {
        mean: mean(run_values),
        std: population_std(run_values),
        ci: bootstrap.ci(level),
        resamples,
        seed,
    })
}
