use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::grid::FactorGrid;
use super::render::Renderer;
use crate::numerics::RngStream;
use crate::{Error, Result};

pub const MAX_SPLIT_ATTEMPTS: u64 = 100;
pub const DEFAULT_BATCH: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Train,
    Test,
}

/// Combination-level partition of a grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMask {
    pub ratio: (u32, u32),
    pub seed: u64,
    /// Sorted combination indices.
    pub train: Vec<usize>,
    /// Sorted combination indices.
    pub test: Vec<usize>,
}

impl SplitMask {
    pub fn side(&self, side: Side) -> &[usize] {
        match side {
            Side::Train => &self.train,
            Side::Test => &self.test,
        }
    }

    pub fn is_train(&self, index: usize) -> bool {
        self.train.binary_search(&index).is_ok()
    }

    pub fn total(&self) -> usize {
        self.train.len() + self.test.len()
    }

    /// Up to `max_rows` distinct combinations of one side as factor tuples,
    /// in index order. `max_rows = 0` keeps the whole side.
    pub fn sample_tuples(
        &self,
        grid: &FactorGrid,
        side: Side,
        max_rows: usize,
        rng: &mut RngStream,
    ) -> Result<Vec<Vec<usize>>> {
        let pool = self.side(side);
        let mut idx: Vec<usize> = if max_rows == 0 || pool.len() <= max_rows {
            pool.to_vec()
        } else {
            let mut p = rng.permutation(pool.len());
            p.truncate(max_rows);
            p.into_iter().map(|i| pool[i]).collect()
        };
        idx.sort_unstable();
        idx.into_iter().map(|i| grid.tuple_of(i)).collect()
    }
}

fn covers_all_values(grid: &FactorGrid, train: &[usize]) -> bool {
    let mut seen: Vec<Vec<bool>> = grid.cardinalities.iter().map(|&c| vec![false; c]).collect();
    let mut missing: usize = grid.cardinalities.iter().sum();
    for &i in train {
        let mut rest = i;
        for f in (0..grid.n_factors()).rev() {
            let v = rest % grid.cardinalities[f];
            rest /= grid.cardinalities[f];
            if !seen[f][v] {
                seen[f][v] = true;
                missing -= 1;
            }
        }
        if missing == 0 {
            return true;
        }
    }
    missing == 0
}

/// Shuffle all combinations and take the first `round(total·a/(a+b))` as
/// train, re-drawing until every factor value occurs in train.
pub fn split_combinations(grid: &FactorGrid, ratio: (u32, u32), seed: u64) -> Result<SplitMask> {
    grid.validate()?;
    let (a, b) = ratio;
    if a == 0 || b == 0 {
        return Err(Error::invalid(format!("split ratio {a}:{b} must have positive parts")));
    }
    let total = grid.total();
    let n_train = ((total as f64) * a as f64 / (a + b) as f64).round() as usize;
    if n_train == 0 || n_train == total {
        return Err(Error::invalid(format!(
            "split ratio {a}:{b} leaves one side empty on {total} combinations"
        )));
    }
    let root = RngStream::new(seed);
    for attempt in 0..MAX_SPLIT_ATTEMPTS {
        let mut rng = root.child_indexed("split", attempt);
        let perm = rng.permutation(total);
        let mut train = perm[..n_train].to_vec();
        if !covers_all_values(grid, &train) {
            continue;
        }
        let mut test = perm[n_train..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        return Ok(SplitMask {
            ratio,
            seed,
            train,
            test,
        });
    }
    Err(Error::invalid(format!(
        "split {a}:{b} failed to cover every factor value in train after {MAX_SPLIT_ATTEMPTS} attempts"
    )))
}

/// A rendered batch with its factor tuples and combination indices.
#[derive(Clone, Debug)]
pub struct Batch {
    pub observations: DMatrix<f64>,
    pub factors: Vec<Vec<usize>>,
    pub indices: Vec<usize>,
}

/// Draw `batch` combinations uniformly with replacement from one side.
pub fn sample_batch(
    renderer: &Renderer,
    mask: &SplitMask,
    side: Side,
    batch: usize,
    rng: &mut RngStream,
) -> Result<Batch> {
    let pool = mask.side(side);
    if pool.is_empty() {
        return Err(Error::invalid(format!("{side:?} side of the split is empty")));
    }
    let indices: Vec<usize> = (0..batch).map(|_| pool[rng.below(pool.len())]).collect();
    let factors = indices
        .iter()
        .map(|&i| renderer.grid().tuple_of(i))
        .collect::<Result<Vec<_>>>()?;
    let observations = renderer.render(&factors, rng)?;
    Ok(Batch {
        observations,
        factors,
        indices,
    })
}
