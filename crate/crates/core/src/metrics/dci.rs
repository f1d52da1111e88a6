//! DCI disentanglement from random-forest importances.

use serde::{Deserialize, Serialize};

use super::forest::{ForestConfig, RandomForest};
use super::rep::RepresentationMatrix;
use crate::numerics::RngStream;
use crate::synthdata::FactorGrid;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DciScores {
    pub disentanglement: f64,
    pub completeness: f64,
    /// Mean held-out forest accuracy over factors.
    pub informativeness: f64,
    /// `units × factors` importance matrix.
    pub importance: Vec<Vec<f64>>,
}

/// `1 − H(p)/ln(k)` for a non-negative weight vector of length `k`.
fn one_minus_normalised_entropy(w: &[f64]) -> f64 {
    if w.len() <= 1 {
        return 1.0;
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let h: f64 = w
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let p = v / total;
            -p * p.ln()
        })
        .sum();
    1.0 - h / (w.len() as f64).ln()
}

/// Disentanglement, completeness and informativeness from an importance
/// matrix `R` (`units × factors`).
pub fn dci_from_importance(importance: &[Vec<f64>]) -> (f64, f64) {
    let total: f64 = importance.iter().flatten().sum();
    if total <= 0.0 {
        return (0.0, 0.0);
    }
    let disent = importance
        .iter()
        .map(|row| row.iter().sum::<f64>() / total * one_minus_normalised_entropy(row))
        .sum();
    let n_factors = importance.first().map_or(0, |r| r.len());
    let compl = (0..n_factors)
        .map(|f| {
            let col: Vec<f64> = importance.iter().map(|r| r[f]).collect();
            col.iter().sum::<f64>() / total * one_minus_normalised_entropy(&col)
        })
        .sum();
    (disent, compl)
}

/// Rows are shuffled and split 80/20; forests are fit on the first part and
/// scored on the rest.
pub fn dci(rep: &RepresentationMatrix, grid: &FactorGrid, cfg: &ForestConfig, rng: &mut RngStream) -> Result<DciScores> {
    if rep.d != 1 {
        return Err(Error::invalid("dci needs one scalar per unit; apply pca_postprocess"));
    }
    if rep.len() < 5 {
        return Err(Error::invalid("dci needs at least 5 rows"));
    }
    rep.check_grid(grid)?;
    let perm = rng.permutation(rep.len());
    let n_train = rep.len() * 4 / 5;
    let (tr, te) = perm.split_at(n_train);
    let x_tr = rep.codes.select_rows(tr);
    let x_te = rep.codes.select_rows(te);
    let mut importance = vec![vec![0.0; grid.n_factors()]; rep.m];
    let mut info = 0.0;
    for f in 0..grid.n_factors() {
        let y_tr: Vec<usize> = tr.iter().map(|&r| rep.factors[r][f]).collect();
        let y_te: Vec<usize> = te.iter().map(|&r| rep.factors[r][f]).collect();
        let mut forest_rng = rng.child_indexed("factor", f as u64);
        let rf = RandomForest::fit(&x_tr, &y_tr, grid.cardinalities[f], cfg, &mut forest_rng)?;
        for (j, v) in rf.feature_importances().iter().enumerate() {
            importance[j][f] = *v;
        }
        let pred = rf.predict(&x_te);
        info += pred.iter().zip(&y_te).filter(|(a, b)| a == b).count() as f64 / y_te.len().max(1) as f64;
    }
    let (disentanglement, completeness) = dci_from_importance(&importance);
    Ok(DciScores {
        disentanglement,
        completeness,
        informativeness: info / grid.n_factors() as f64,
        importance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_importance_is_fully_disentangled() {
        let r = vec![vec![0.7, 0.0], vec![0.0, 0.3]];
        let (d, c) = dci_from_importance(&r);
        assert!((d - 1.0).abs() < 1e-12 && (c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_importance_scores_zero() {
        let r = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let (d, _) = dci_from_importance(&r);
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn empty_rows_carry_no_weight() {
        let r = vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]];
        assert!((dci_from_importance(&r).0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_unit_single_factor() {
        assert_eq!(dci_from_importance(&[vec![0.4]]).0, 1.0);
    }
}
