//! Empirical check that entries of independent random vectors are pairwise
//! independent: for every entry index `i`, the plug-in mutual information
//! between `z₁ᵢ` and a binned `z₂ᵢ` should sit at estimator bias.

use nalgebra::DMatrix;

use crate::numerics::{discretized_mutual_information, equal_count_bins};
use crate::{Error, Result};

pub const DEFAULT_X_BINS: usize = 20;
pub const DEFAULT_LABEL_BINS: usize = 10;

/// Per-entry MI in nats between columns of `z1` and `z2` (`n × D` each).
/// `z₁ᵢ` is histogrammed into `x_bins` equal-count bins and `z₂ᵢ` into
/// `label_bins` equal-count labels.
pub fn theorem2_independence_check(
    z1: &DMatrix<f64>,
    z2: &DMatrix<f64>,
    x_bins: usize,
    label_bins: usize,
) -> Result<Vec<f64>> {
    if z1.shape() != z2.shape() {
        return Err(Error::DimensionMismatch {
            context: "independence check",
            expected: z1.len(),
            got: z2.len(),
        });
    }
    (0..z1.ncols())
        .map(|i| {
            let x: Vec<f64> = z1.column(i).iter().copied().collect();
            let y: Vec<f64> = z2.column(i).iter().copied().collect();
            discretized_mutual_information(&x, &equal_count_bins(&y, label_bins), x_bins)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    #[test]
    fn scalar_case() {
        let mut rng = RngStream::new(1);
        let a = DMatrix::from_fn(5000, 1, |_, _| rng.normal());
        let b = DMatrix::from_fn(5000, 1, |_, _| rng.normal());
        let mi = theorem2_independence_check(&a, &b, DEFAULT_X_BINS, DEFAULT_LABEL_BINS).unwrap();
        assert_eq!(mi.len(), 1);
        assert!(mi[0] < 0.05);
        let same = theorem2_independence_check(&a, &a, DEFAULT_X_BINS, DEFAULT_LABEL_BINS).unwrap();
        assert!(same[0] > 2.0);
    }
}
