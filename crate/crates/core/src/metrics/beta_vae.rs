//! β-VAE score: a linear classifier predicts which factor was held fixed
//! from mean absolute code differences of pairs sharing that factor.

use nalgebra::DMatrix;

use super::factor_vae::rows_by_value;
use super::logistic::{logistic_cv_fit, LogisticConfig};
use super::rep::RepresentationMatrix;
use crate::numerics::RngStream;
use crate::synthdata::FactorGrid;
use crate::{Error, Result};

pub const DEFAULT_PAIRS: usize = 800;
pub const DEFAULT_PAIRS_PER_POINT: usize = 64;

/// `points` training examples, split 80/20. Each feature vector averages
/// `|z⁽¹⁾ − z⁽²⁾|` over `pairs_per_point` pairs drawn with the same value of
/// the fixed factor.
pub fn beta_vae_score(
    rep: &RepresentationMatrix,
    grid: &FactorGrid,
    points: usize,
    pairs_per_point: usize,
    logistic: &LogisticConfig,
    rng: &mut RngStream,
) -> Result<f64> {
    if points < 10 || pairs_per_point == 0 {
        return Err(Error::invalid("need at least 10 points and one pair per point"));
    }
    rep.check_grid(grid)?;
    if rep.is_empty() {
        return Err(Error::invalid("empty representation"));
    }
    let groups = rows_by_value(rep, grid);
    let width = rep.codes.ncols();
    let mut x = DMatrix::zeros(points, width);
    let mut y = Vec::with_capacity(points);
    for p in 0..points {
        let f = rng.below(grid.n_factors());
        for _ in 0..pairs_per_point {
            let a = rng.below(rep.len());
            let pool = &groups[f][rep.factors[a][f]];
            let b = pool[rng.below(pool.len())];
            for c in 0..width {
                x[(p, c)] += (rep.codes[(a, c)] - rep.codes[(b, c)]).abs();
            }
        }
        y.push(f);
    }
    x /= pairs_per_point as f64;
    let n_train = points * 4 / 5;
    let (ytr, yte) = y.split_at(n_train);
    let distinct = {
        let mut v = ytr.to_vec();
        v.sort_unstable();
        v.dedup();
        v.len()
    };
    if distinct < 2 {
        return Ok(yte.iter().filter(|&&f| f == ytr[0]).count() as f64 / yte.len() as f64);
    }
    let model = logistic_cv_fit(&x.rows(0, n_train).into_owned(), ytr, logistic)?;
    Ok(model.accuracy(&x.rows(n_train, points - n_train).into_owned(), yte))
}
