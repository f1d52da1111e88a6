//! Mutual information gap.

use super::rep::RepresentationMatrix;
use crate::numerics::{discretized_mutual_information, entropy};
use crate::{Error, Result};

pub const DEFAULT_MIG_BINS: usize = 20;

/// Mean over factors of `(top1 − top2)/H(factor)` where `top1 ≥ top2` are
/// the two largest unit/factor mutual informations. Factors with zero
/// entropy are skipped; the result is clipped to `[0, 1]`.
pub fn mig(rep: &RepresentationMatrix, bins: usize) -> Result<f64> {
    if rep.d != 1 {
        return Err(Error::invalid("mig needs one scalar per unit; apply pca_postprocess"));
    }
    if rep.len() < bins {
        return Err(Error::invalid(format!("mig needs at least {bins} rows")));
    }
    let mut gaps = Vec::new();
    for f in 0..rep.n_factors() {
        let labels = rep.factor_column(f);
        let h = entropy(&labels);
        if h <= 0.0 {
            continue;
        }
        let mut mi: Vec<f64> = (0..rep.m)
            .map(|j| {
                let x: Vec<f64> = rep.codes.column(j).iter().copied().collect();
                discretized_mutual_information(&x, &labels, bins)
            })
            .collect::<Result<_>>()?;
        mi.sort_by(|a, b| b.total_cmp(a));
        let second = mi.get(1).copied().unwrap_or(0.0);
        gaps.push((mi[0] - second) / h);
    }
    if gaps.is_empty() {
        return Err(Error::invalid("every factor is constant in the representation"));
    }
    Ok((gaps.iter().sum::<f64>() / gaps.len() as f64).clamp(0.0, 1.0))
}
