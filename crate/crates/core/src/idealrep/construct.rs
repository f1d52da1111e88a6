use nalgebra::DMatrix;

use crate::losses::Model;
use crate::metrics::RepresentationMatrix;
use crate::numerics::RngStream;
use crate::synthdata::{FactorGrid, Renderer, Side};
use crate::{Error, Result};

/// One unit-norm direction per unit, drawn from `child_indexed("embed", i)`.
/// The first entry is made non-negative, so `d = 1` gives `[1.0]`.
pub fn unit_embeddings(units: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let root = RngStream::new(seed);
    (0..units)
        .map(|i| {
            let mut rng = root.child_indexed("embed", i as u64);
            loop {
                let mut e: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
                let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm < 1e-12 {
                    continue;
                }
                let sign = if e[0] < 0.0 { -1.0 } else { 1.0 };
                e.iter_mut().for_each(|v| *v *= sign / norm);
                break e;
            }
        })
        .collect()
}

/// Column `f` holds factor `f` normalised to `[0, 1]`.
pub fn ideal_scalar(grid: &FactorGrid, tuples: &[Vec<usize>], side: Side) -> Result<RepresentationMatrix> {
    for t in tuples {
        grid.check_tuple(t)?;
    }
    let f = grid.n_factors();
    let codes = DMatrix::from_fn(tuples.len(), f, |r, c| grid.unit_value(c, tuples[r][c]));
    RepresentationMatrix::new(codes, tuples.to_vec(), f, 1, side)
}

/// Unit `f` is the normalised value of factor `f` times a fixed random
/// unit vector; the same `embed_seed` yields the same vectors on both sides.
pub fn ideal_vector(
    grid: &FactorGrid,
    tuples: &[Vec<usize>],
    d: usize,
    embed_seed: u64,
    side: Side,
) -> Result<RepresentationMatrix> {
    if d < 2 {
        return Err(Error::invalid(format!("ideal vector representation needs D >= 2, got {d}")));
    }
    map_embed(&ideal_scalar(grid, tuples, side)?, d, embed_seed)
}

fn require_scalar(rep: &RepresentationMatrix) -> Result<()> {
    if rep.d != 1 {
        return Err(Error::invalid(format!("expected a scalar representation, got D = {}", rep.d)));
    }
    Ok(())
}

/// Each scalar unit times a fixed random unit-norm `d`-vector.
pub fn map_embed(rep: &RepresentationMatrix, d: usize, seed: u64) -> Result<RepresentationMatrix> {
    require_scalar(rep)?;
    if d == 0 {
        return Err(Error::invalid("embedding size must be positive"));
    }
    let e = unit_embeddings(rep.m, d, seed);
    let codes = DMatrix::from_fn(rep.len(), rep.m * d, |r, c| rep.codes[(r, c / d)] * e[c / d][c % d]);
    rep.with_codes(codes, rep.m, d)
}

/// Each scalar unit copied `d` times.
pub fn map_repeat(rep: &RepresentationMatrix, d: usize) -> Result<RepresentationMatrix> {
    require_scalar(rep)?;
    if d == 0 {
        return Err(Error::invalid("repeat count must be positive"));
    }
    let codes = DMatrix::from_fn(rep.len(), rep.m * d, |r, c| rep.codes[(r, c / d)]);
    rep.with_codes(codes, rep.m, d)
}

/// Posterior means of `model` on the clean renderings of `tuples`.
pub fn learned_representation(
    model: &Model,
    renderer: &Renderer,
    tuples: &[Vec<usize>],
    side: Side,
) -> Result<RepresentationMatrix> {
    let x = renderer.render_clean(tuples)?;
    let codes = model.encode_mean(&x)?;
    RepresentationMatrix::new(codes, tuples.to_vec(), model.config.m, model.config.d, side)
}
