//! Embedding-space similarity: cosine and greedy token matching.

use num_traits::Float;

use super::MetricError;

/// Cosine similarity in `[-1, 1]`. Errors on dimension mismatch, empty
/// vectors, or a zero norm.
pub fn cosine<F: Float>(a: &[F], b: &[F]) -> Result<F, MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptyInput("cosine over empty vector".into()));
    }
    if a.len() != b.len() {
        return Err(MetricError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let mut dot = F::zero();
    let mut na = F::zero();
    let mut nb = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        dot = dot + x * y;
        na = na + x * x;
        nb = nb + y * y;
    }
    if na.is_zero() || nb.is_zero() {
        return Err(MetricError::ZeroNorm);
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}

/// Greedy-matching precision/recall/F1 over token vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BertScore<F> {
    pub precision: F,
    pub recall: F,
    pub f1: F,
}

/// For each candidate token take its best cosine similarity to any
/// reference token (precision side), symmetrically for recall; F1 is the
/// harmonic mean. No idf weighting, no baseline rescaling.
pub fn bertscore<F: Float>(
    candidate: &[Vec<F>],
    reference: &[Vec<F>],
) -> Result<BertScore<F>, MetricError> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptyInput(
            "bertscore requires at least one token per side".into(),
        ));
    }
    let dim = candidate[0].len();
    for v in candidate.iter().chain(reference.iter()) {
        if v.len() != dim {
            return Err(MetricError::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
    }

    let mut best_for_candidate = vec![F::neg_infinity(); candidate.len()];
    let mut best_for_reference = vec![F::neg_infinity(); reference.len()];
    for (i, c) in candidate.iter().enumerate() {
        for (j, r) in reference.iter().enumerate() {
            let sim = cosine(c, r)?;
            if sim > best_for_candidate[i] {
                best_for_candidate[i] = sim;
            }
            if sim > best_for_reference[j] {
                best_for_reference[j] = sim;
            }
        }
    }

    let avg = |xs: &[F]| {
        let sum = xs.iter().fold(F::zero(), |acc, &x| acc + x);
        sum / F::from(xs.len()).expect("length fits scalar")
    };
    let precision = avg(&best_for_candidate);
    let recall = avg(&best_for_reference);
    let two = F::one() + F::one();
    let f1 = if (precision + recall) > F::zero() {
        two * precision * recall / (precision + recall)
    } else {
        F::zero()
    };
    Ok(BertScore {
        precision,
        recall,
        f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_identity_orthogonal_and_hand_value() {
        let v = vec![0.5f64, 1.5, -2.0];
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        assert!(cosine(&[1.0f64, 0.0], &[0.0, 1.0]).unwrap().abs() < 1e-12);
        // (1,2,2)·(2,1,2) = 8, norms 3 and 3 → 8/9.
        let got = cosine(&[1.0f64, 2.0, 2.0], &[2.0, 1.0, 2.0]).unwrap();
        assert!((got - 8.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_error_paths() {
        assert!(matches!(
            cosine(&[1.0f64], &[1.0, 2.0]).unwrap_err(),
            MetricError::DimensionMismatch { .. }
        ));
        assert!(matches!(
            cosine(&[0.0f64, 0.0], &[1.0, 0.0]).unwrap_err(),
            MetricError::ZeroNorm
        ));
        assert!(cosine::<f64>(&[], &[]).is_err());
    }

    #[test]
    fn identical_token_sequences_score_one() {
        let tokens = vec![vec![0.3f64, 0.7], vec![-1.0, 0.4]];
        let s = bertscore(&tokens, &tokens).unwrap();
        assert!((s.f1 - 1.0).abs() < 1e-12);
        assert!((s.precision - 1.0).abs() < 1e-12);
        assert!((s.recall - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mutually_orthogonal_tokens_score_zero() {
        let cand = vec![vec![1.0f64, 0.0, 0.0]];
        let refr = vec![vec![0.0f64, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let s = bertscore(&cand, &refr).unwrap();
        assert_eq!(s.f1, 0.0);
    }

    #[test]
    fn two_by_two_fixture_matches_brute_force() {
        let cand = vec![vec![1.0f64, 0.0], vec![0.6, 0.8]];
        let refr = vec![vec![0.8f64, 0.6], vec![0.0, 1.0]];
        let s = bertscore(&cand, &refr).unwrap();

        // Brute-force recomputation with explicit loops.
        let sim = |a: &[f64], b: &[f64]| {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            dot / (na * nb)
        };
        let mut p_sum = 0.0;
        for c in &cand {
            let mut best = f64::NEG_INFINITY;
            for r in &refr {
                best = best.max(sim(c, r));
            }
            p_sum += best;
        }
        let mut r_sum = 0.0;
        for r in &refr {
            let mut best = f64::NEG_INFINITY;
            for c in &cand {
                best = best.max(sim(c, r));
            }
            r_sum += best;
        }
        let p = p_sum / cand.len() as f64;
        let r = r_sum / refr.len() as f64;
        assert!((s.precision - p).abs() < 1e-12);
        assert!((s.recall - r).abs() < 1e-12);
        assert!((s.f1 - 2.0 * p * r / (p + r)).abs() < 1e-12);
    }

    #[test]
    fn bertscore_rejects_bad_shapes() {
        assert!(bertscore::<f64>(&[], &[vec![1.0]]).is_err());
        assert!(matches!(
            bertscore(&[vec![1.0f64, 0.0]], &[vec![1.0]]).unwrap_err(),
            MetricError::DimensionMismatch { .. }
        ));
        assert!(matches!(
            bertscore(&[vec![0.0f64, 0.0]], &[vec![1.0, 0.0]]).unwrap_err(),
            MetricError::ZeroNorm
        ));
    }
}
