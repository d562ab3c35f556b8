//! Inter-annotator agreement: Jaccard over set-valued annotations and
//! Cohen's kappa over categorical labels.

use std::collections::BTreeSet;
use std::collections::HashMap;
use std::hash::Hash;

use num_traits::{Float, FromPrimitive};

use super::MetricError;

/// `|A ∩ B| / |A ∪ B|`. Two empty sets are defined as full agreement (1)
/// and logged, since the ratio is formally undefined there.
pub fn jaccard<T: Ord, F: Float + FromPrimitive>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> F {
    if a.is_empty() && b.is_empty() {
        log::warn!("jaccard over two empty sets defined as 1.0");
        return F::one();
    }
    let intersection = a.intersection(b).count();
    let union = a.union(b).count();
    F::from_usize(intersection).expect("count fits scalar")
        / F::from_usize(union).expect("count fits scalar")
}

/// Cohen's kappa: `(po - pe) / (1 - pe)` with chance agreement `pe` from
/// the marginal label products. When `pe = 1`, kappa is defined as 1 if
/// the annotators agree everywhere and an error otherwise.
///
/// Computed as `(agreements·n − S) / (n² − S)` with `S = Σ_label
/// countA·countB` held in integers, so the result is exact and symmetric
/// under annotator swap.
pub fn cohen_kappa<L, F>(a: &[L], b: &[L]) -> Result<F, MetricError>
where
    L: Eq + Hash,
    F: Float + FromPrimitive,
{
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    if a.is_empty() {
        return Err(MetricError::EmptyInput(
            "kappa over empty label sequences".into(),
        ));
    }
    let n = a.len() as u128;
    let agreements = a.iter().zip(b).filter(|(x, y)| x == y).count() as u128;

    let mut counts_a: HashMap<&L, u128> = HashMap::new();
    let mut counts_b: HashMap<&L, u128> = HashMap::new();
    for label in a {
        *counts_a.entry(label).or_insert(0) += 1;
    }
    for label in b {
        *counts_b.entry(label).or_insert(0) += 1;
    }
    let marginal_products: u128 = counts_a
        .iter()
        .map(|(label, ca)| ca * counts_b.get(*label).copied().unwrap_or(0))
        .sum();

    if marginal_products == n * n {
        if agreements == n {
            return Ok(F::one());
        }
        return Err(MetricError::DegenerateKappa {
            observed: agreements as f64 / n as f64,
        });
    }
    let numerator = agreements as f64 * n as f64 - marginal_products as f64;
    let denominator = (n * n - marginal_products) as f64;
    Ok(F::from_f64(numerator / denominator).expect("kappa fits scalar"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn jaccard_identical_partial_disjoint() {
        let ab = set(&["a", "b"]);
        assert_eq!(jaccard::<_, f64>(&ab, &ab), 1.0);
        assert!((jaccard::<_, f64>(&ab, &set(&["b", "c"])) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(jaccard::<_, f64>(&ab, &set(&["x", "y"])), 0.0);
    }

    #[test]
    fn jaccard_both_empty_is_one_by_convention() {
        let empty: BTreeSet<String> = BTreeSet::new();
        assert_eq!(jaccard::<_, f64>(&empty, &empty), 1.0);
    }

    #[test]
    fn jaccard_is_symmetric() {
        let a = set(&["a", "b", "c"]);
        let b = set(&["b", "d"]);
        assert_eq!(jaccard::<_, f64>(&a, &b), jaccard::<_, f64>(&b, &a));
    }

    #[test]
    fn kappa_perfect_agreement() {
        let labels = ["x", "y", "x", "z"];
        assert_eq!(cohen_kappa::<_, f64>(&labels, &labels).unwrap(), 1.0);
    }

    #[test]
    fn kappa_hand_value_zero() {
        // po = 0.5, pe = 0.5 (both marginals 50/50) → kappa = 0.
        let a = ["x", "x", "y", "y"];
        let b = ["x", "y", "x", "y"];
        assert_eq!(cohen_kappa::<_, f64>(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn kappa_symmetric_under_annotator_swap() {
        let a = ["x", "x", "y", "z", "z", "y"];
        let b = ["x", "y", "y", "z", "x", "y"];
        let k1: f64 = cohen_kappa(&a, &b).unwrap();
        let k2: f64 = cohen_kappa(&b, &a).unwrap();
        assert_eq!(k1, k2);
    }

    #[test]
    fn kappa_length_mismatch_is_an_error() {
        let a = ["x", "y"];
        let b = ["x"];
        assert!(matches!(
            cohen_kappa::<_, f64>(&a, &b).unwrap_err(),
            MetricError::LengthMismatch { a: 2, b: 1 }
        ));
    }

    #[test]
    fn kappa_single_shared_label_is_one() {
        let a = ["x", "x"];
        assert_eq!(cohen_kappa::<_, f64>(&a, &a).unwrap(), 1.0);
    }
}
