//! Compositional-generalisation probes: fit on a few labelled training
//! combinations, score on unseen test combinations.

use serde::{Deserialize, Serialize};

use super::logistic::{logistic_cv_fit, LogisticConfig};
use super::rep::RepresentationMatrix;
use super::ridge::{r2_score, ridge_cv_fit};
use crate::numerics::RngStream;
use crate::synthdata::FactorGrid;
use crate::{Error, Result};

pub const DEFAULT_N_LABEL: usize = 500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompGenScores {
    /// Mean test R² of ridge probes on `[0, 1]`-normalised factor values.
    pub r2: f64,
    /// Mean test accuracy of logistic probes on factor labels.
    pub acc: f64,
    /// `None` for factors dropped because the labelled subsample held a
    /// single value.
    pub r2_per_factor: Vec<Option<f64>>,
    pub acc_per_factor: Vec<Option<f64>>,
}

fn distinct(values: impl Iterator<Item = usize>) -> usize {
    let mut v: Vec<usize> = values.collect();
    v.sort_unstable();
    v.dedup();
    v.len()
}

pub fn comp_gen_eval(
    train: &RepresentationMatrix,
    test: &RepresentationMatrix,
    grid: &FactorGrid,
    n_label: usize,
    alphas: &[f64],
    logistic: &LogisticConfig,
    rng: &mut RngStream,
) -> Result<CompGenScores> {
    if train.len() < n_label {
        return Err(Error::invalid(format!(
            "{} training rows, need n_label = {n_label}",
            train.len()
        )));
    }
    if test.is_empty() {
        return Err(Error::invalid("empty test representation"));
    }
    if train.codes.ncols() != test.codes.ncols() {
        return Err(Error::DimensionMismatch {
            context: "probe features",
            expected: train.codes.ncols(),
            got: test.codes.ncols(),
        });
    }
    train.check_grid(grid)?;
    test.check_grid(grid)?;
    let draw = |rng: &mut RngStream| -> Vec<usize> {
        let mut p = rng.permutation(train.len());
        p.truncate(n_label);
        p
    };
    let first = draw(rng);
    let mut second: Option<Vec<usize>> = None;
    let mut r2s = Vec::with_capacity(grid.n_factors());
    let mut accs = Vec::with_capacity(grid.n_factors());
    for f in 0..grid.n_factors() {
        let varied = |idx: &[usize]| distinct(idx.iter().map(|&i| train.factors[i][f])) >= 2;
        let idx = if varied(&first) {
            &first
        } else {
            let s = second.get_or_insert_with(|| draw(rng));
            if varied(s) {
                s
            } else {
                log::warn!("dropping factor {}: one value in the labelled subsample", grid.names[f]);
                r2s.push(None);
                accs.push(None);
                continue;
            }
        };
        let x = train.codes.select_rows(idx);
        let targets: Vec<f64> = idx.iter().map(|&i| grid.unit_value(f, train.factors[i][f])).collect();
        let labels: Vec<usize> = idx.iter().map(|&i| train.factors[i][f]).collect();

        let ridge = ridge_cv_fit(&x, &targets, alphas)?;
        let y_test: Vec<f64> = test.factors.iter().map(|t| grid.unit_value(f, t[f])).collect();
        r2s.push(Some(r2_score(&y_test, &ridge.predict(&test.codes))));

        let clf = logistic_cv_fit(&x, &labels, logistic)?;
        accs.push(Some(clf.accuracy(&test.codes, &test.factor_column(f))));
    }
    let mean = |v: &[Option<f64>]| {
        let kept: Vec<f64> = v.iter().flatten().copied().collect();
        if kept.is_empty() {
            f64::NAN
        } else {
            kept.iter().sum::<f64>() / kept.len() as f64
        }
    };
    Ok(CompGenScores {
        r2: mean(&r2s),
        acc: mean(&accs),
        r2_per_factor: r2s,
        acc_per_factor: accs,
    })
}
