//! FactorVAE score: a majority-vote classifier from "least varying latent"
//! to the factor that was held fixed.

use super::rep::RepresentationMatrix;
use crate::numerics::RngStream;
use crate::synthdata::FactorGrid;
use crate::{Error, Result};

pub const DEFAULT_VOTES: usize = 800;
pub const DEFAULT_PROBE_BATCH: usize = 64;

/// Row indices grouped by factor and value.
pub(crate) fn rows_by_value(rep: &RepresentationMatrix, grid: &FactorGrid) -> Vec<Vec<Vec<usize>>> {
    let mut out: Vec<Vec<Vec<usize>>> = grid.cardinalities.iter().map(|&c| vec![Vec::new(); c]).collect();
    for (r, t) in rep.factors.iter().enumerate() {
        for (f, &v) in t.iter().enumerate() {
            out[f][v].push(r);
        }
    }
    out
}

fn column_std(rep: &RepresentationMatrix) -> Vec<f64> {
    let n = rep.len() as f64;
    rep.codes
        .column_iter()
        .map(|c| {
            let m = c.sum() / n;
            (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt()
        })
        .collect()
}

/// Requires a scalar-per-unit representation. `votes` are split 80/20 into
/// classifier training and evaluation.
pub fn factor_vae_score(
    rep: &RepresentationMatrix,
    grid: &FactorGrid,
    votes: usize,
    probe_batch: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    if rep.d != 1 {
        return Err(Error::invalid("factor_vae_score needs one scalar per unit; apply pca_postprocess"));
    }
    if votes < 5 || probe_batch < 2 {
        return Err(Error::invalid("need at least 5 votes and a probe batch of 2"));
    }
    rep.check_grid(grid)?;
    let std = column_std(rep);
    let active: Vec<usize> = (0..rep.m).filter(|&j| std[j] > 0.0).collect();
    if active.is_empty() {
        return Ok(0.0);
    }
    let groups = rows_by_value(rep, grid);
    let usable: Vec<(usize, usize)> = groups
        .iter()
        .enumerate()
        .flat_map(|(f, vals)| vals.iter().enumerate().filter(|(_, r)| !r.is_empty()).map(move |(v, _)| (f, v)))
        .collect();
    let factors_present: Vec<usize> = {
        let mut f: Vec<usize> = usable.iter().map(|p| p.0).collect();
        f.dedup();
        f
    };
    if factors_present.is_empty() {
        return Err(Error::invalid("no factor values present in the representation"));
    }

    let mut pairs = Vec::with_capacity(votes);
    for _ in 0..votes {
        let f = factors_present[rng.below(factors_present.len())];
        let values: Vec<usize> = (0..grid.cardinalities[f]).filter(|&v| !groups[f][v].is_empty()).collect();
        let v = values[rng.below(values.len())];
        let pool = &groups[f][v];
        let rows: Vec<usize> = (0..probe_batch).map(|_| pool[rng.below(pool.len())]).collect();
        let mut best = (f64::INFINITY, active[0]);
        for &j in &active {
            let mut s = 0.0;
            let mut s2 = 0.0;
            for &r in &rows {
                let x = rep.codes[(r, j)] / std[j];
                s += x;
                s2 += x * x;
            }
            let n = probe_batch as f64;
            let var = (s2 - s * s / n) / (n - 1.0);
            if var < best.0 {
                best = (var, j);
            }
        }
        pairs.push((best.1, f));
    }
    let n_train = votes * 4 / 5;
    let mut table = vec![vec![0usize; grid.n_factors()]; rep.m];
    for &(j, f) in &pairs[..n_train] {
        table[j][f] += 1;
    }
    let predict = |j: usize| {
        let row = &table[j];
        let mut best = 0;
        for f in 1..row.len() {
            if row[f] > row[best] {
                best = f;
            }
        }
        best
    };
    let held = &pairs[n_train..];
    let correct = held.iter().filter(|&&(j, f)| predict(j) == f).count();
    Ok(correct as f64 / held.len() as f64)
}
