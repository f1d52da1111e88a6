//! Plug-in entropy and mutual information over discretised variables (nats).

use crate::{Error, Result};

/// Assign each value to one of `bins` equal-count bins.
///
/// Interior edges are the order statistics at ranks `⌊j·N/bins⌋`,
/// `j = 1..bins`. A value's bin is the number of edges at or below it, so
/// tied values always share a bin and a constant input occupies one bin.
pub fn equal_count_bins(x: &[f64], bins: usize) -> Vec<usize> {
    if x.is_empty() || bins <= 1 {
        return vec![0; x.len()];
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let edges: Vec<f64> = (1..bins).map(|j| sorted[(j * n / bins).min(n - 1)]).collect();
    x.iter()
        .map(|&v| edges.partition_point(|&e| e <= v))
        .collect()
}

/// Relabel arbitrary labels to `0..k` in increasing label order.
fn dense_labels(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut uniq: Vec<usize> = labels.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    let mapped = labels
        .iter()
        .map(|l| uniq.binary_search(l).expect("label present"))
        .collect();
    (mapped, uniq.len())
}

pub fn entropy(labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let (dense, k) = dense_labels(labels);
    let mut counts = vec![0usize; k];
    for &l in &dense {
        counts[l] += 1;
    }
    let n = labels.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Plug-in mutual information of two discrete label sequences.
pub fn mutual_information(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "mutual_information",
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let (da, ka) = dense_labels(a);
    let (db, kb) = dense_labels(b);
    let mut joint = vec![0usize; ka * kb];
    let mut ca = vec![0usize; ka];
    let mut cb = vec![0usize; kb];
    for (&x, &y) in da.iter().zip(&db) {
        joint[x * kb + y] += 1;
        ca[x] += 1;
        cb[y] += 1;
    }
    let n = a.len() as f64;
    let mut mi = 0.0;
    for x in 0..ka {
        for y in 0..kb {
            let c = joint[x * kb + y];
            if c == 0 {
                continue;
            }
            let pxy = c as f64 / n;
            mi += pxy * (c as f64 * n / (ca[x] as f64 * cb[y] as f64)).ln();
        }
    }
    Ok(mi.max(0.0))
}

/// Mutual information between a continuous variable, discretised into
/// `bins` equal-count bins, and categorical labels.
pub fn discretized_mutual_information(x: &[f64], y: &[usize], bins: usize) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "discretized_mutual_information",
            expected: x.len(),
            got: y.len(),
        });
    }
    if bins == 0 || x.len() < bins {
        return Err(Error::invalid(format!(
            "need at least {bins} samples for {bins} bins, got {}",
            x.len()
        )));
    }
    let (_, k) = dense_labels(y);
    if k < 2 {
        return Err(Error::invalid("labels must take at least two values"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("discretized_mutual_information input".into()));
    }
    mutual_information(&equal_count_bins(x, bins), y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use proptest::prelude::*;

    #[test]
    fn bins_are_equal_count_for_distinct_values() {
        let x: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let b = equal_count_bins(&x, 20);
        for bin in 0..20 {
            assert_eq!(b.iter().filter(|&&v| v == bin).count(), 5);
        }
    }

    #[test]
    fn injective_map_recovers_label_entropy() {
        let mut rng = RngStream::new(4);
        let n = 20_000;
        let y: Vec<usize> = (0..n).map(|_| rng.below(8)).collect();
        let x: Vec<f64> = y.iter().map(|&l| (l as f64).powi(2) + 0.5).collect();
        let mi = discretized_mutual_information(&x, &y, 20).unwrap();
        let h = (8f64).ln();
        assert!((mi - h).abs() / h < 0.05, "mi {mi} vs {h}");
    }

    #[test]
    fn independent_variables_have_small_mi() {
        let mut rng = RngStream::new(8);
        let n = 10_000;
        let x: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.below(5)).collect();
        let mi = discretized_mutual_information(&x, &y, 20).unwrap();
        assert!(mi < 0.02, "mi = {mi}");
    }

    #[test]
    fn constant_x_gives_zero() {
        let x = vec![3.0; 100];
        let y: Vec<usize> = (0..100).map(|i| i % 3).collect();
        assert_eq!(discretized_mutual_information(&x, &y, 20).unwrap(), 0.0);
    }

    #[test]
    fn preconditions() {
        assert!(discretized_mutual_information(&[1.0, 2.0], &[0, 1], 20).is_err());
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert!(discretized_mutual_information(&x, &vec![1; 50], 20).is_err());
    }

    proptest! {
        #[test]
        fn mi_nonnegative_and_label_permutation_invariant(
            xs in prop::collection::vec(-10.0f64..10.0, 40..200),
            seed in any::<u64>(),
        ) {
            let mut rng = RngStream::new(seed);
            let y: Vec<usize> = xs.iter().map(|_| rng.below(4)).collect();
            prop_assume!(y.iter().any(|&l| l != y[0]));
            let mi = discretized_mutual_information(&xs, &y, 10).unwrap();
            prop_assert!(mi >= 0.0);
            let relabel = [7usize, 2, 9, 0];
            let y2: Vec<usize> = y.iter().map(|&l| relabel[l]).collect();
            let mi2 = discretized_mutual_information(&xs, &y2, 10).unwrap();
            prop_assert!((mi - mi2).abs() < 1e-12);
        }
    }
}
