//! A frozen random MLP that turns factor tuples into observation vectors.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::grid::{enumerate_combinations, FactorGrid};
use crate::digest::json_sha256;
use crate::neural::{mlp_forward, Activation, MlpSpec, ParamBlock};
use crate::numerics::RngStream;
use crate::{Error, Result};

/// Minimum Euclidean distance between any two noiseless observations.
pub const INJECTIVITY_TOLERANCE: f64 = 1e-6;

const HIDDEN_WIDTH: usize = 64;
const RENDER_CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObservationSpec {
    pub d_x: usize,
    pub generator_seed: u64,
    pub noise_std: f64,
    /// Multiplier on the fan-in scaled uniform weight init of the generator.
    pub generator_gain: f64,
}

impl Default for ObservationSpec {
    fn default() -> Self {
        ObservationSpec {
            d_x: 64,
            generator_seed: 0,
            noise_std: 0.0,
            generator_gain: 2.0,
        }
    }
}

/// Builds observations for one grid. Construction verifies injectivity.
#[derive(Clone, Debug)]
pub struct Renderer {
    grid: FactorGrid,
    spec: ObservationSpec,
    net: MlpSpec,
    params: ParamBlock,
    lipschitz: f64,
}

#[derive(Serialize)]
struct HashedSpec<'a> {
    grid: &'a FactorGrid,
    observation: &'a ObservationSpec,
}

impl Renderer {
    pub fn new(grid: FactorGrid, spec: ObservationSpec) -> Result<Self> {
        grid.validate()?;
        if spec.d_x == 0 {
            return Err(Error::invalid("observation dimensionality must be positive"));
        }
        if !(spec.noise_std >= 0.0 && spec.noise_std.is_finite()) {
            return Err(Error::invalid(format!("noise_std {} must be finite and >= 0", spec.noise_std)));
        }
        if !(spec.generator_gain > 0.0 && spec.generator_gain.is_finite()) {
            return Err(Error::invalid("generator_gain must be positive"));
        }
        let net = MlpSpec::new(
            vec![grid.n_factors(), HIDDEN_WIDTH, HIDDEN_WIDTH, spec.d_x],
            Activation::Tanh,
            spec.generator_seed,
        )?;
        let mut params = net.init_params_scaled(spec.generator_gain);
        // Zero biases give g(0) = 0, which bounds ‖x‖ by L·‖u‖.
        for l in 0..net.n_layers() {
            let lay = params.layers[l];
            params.values[lay.bias_offset..lay.bias_offset + lay.fan_out].fill(0.0);
        }
        let lipschitz = (0..net.n_layers())
            .map(|l| params.weight(l).into_owned().singular_values().max())
            .product();
        let r = Renderer {
            grid,
            spec,
            net,
            params,
            lipschitz,
        };
        r.check_injective()?;
        Ok(r)
    }

    pub fn grid(&self) -> &FactorGrid {
        &self.grid
    }

    pub fn spec(&self) -> &ObservationSpec {
        &self.spec
    }

    pub fn d_x(&self) -> usize {
        self.spec.d_x
    }

    /// Product of layer spectral norms; tanh is 1-Lipschitz.
    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz
    }

    /// Hash identifying the grid and generator; stored in exported datasets.
    pub fn spec_hash(&self) -> Result<String> {
        json_sha256(&HashedSpec {
            grid: &self.grid,
            observation: &self.spec,
        })
    }

    fn encode_inputs(&self, tuples: &[Vec<usize>]) -> Result<DMatrix<f64>> {
        let f = self.grid.n_factors();
        let mut u = DMatrix::zeros(tuples.len(), f);
        for (r, t) in tuples.iter().enumerate() {
            self.grid.check_tuple(t)?;
            for (k, &v) in t.iter().enumerate() {
                u[(r, k)] = self.grid.signed_value(k, v);
            }
        }
        Ok(u)
    }

    /// Noiseless observations, one row per tuple.
    pub fn render_clean(&self, tuples: &[Vec<usize>]) -> Result<DMatrix<f64>> {
        let u = self.encode_inputs(tuples)?;
        Ok(mlp_forward(&self.net, &self.params, &u)?.0)
    }

    /// Observations with `N(0, noise_std²)` noise drawn row by row from `noise`.
    pub fn render(&self, tuples: &[Vec<usize>], noise: &mut RngStream) -> Result<DMatrix<f64>> {
        let mut x = self.render_clean(tuples)?;
        if self.spec.noise_std > 0.0 {
            for r in 0..x.nrows() {
                for c in 0..x.ncols() {
                    x[(r, c)] += self.spec.noise_std * noise.normal();
                }
            }
        }
        Ok(x)
    }

    pub fn render_one(&self, tuple: &[usize], noise: &mut RngStream) -> Result<Vec<f64>> {
        let x = self.render(&[tuple.to_vec()], noise)?;
        Ok(x.row(0).iter().copied().collect())
    }

    /// Render the whole grid in chunks, handing each chunk with its first
    /// combination index to `visit`.
    pub fn for_each_chunk<F>(&self, mut visit: F) -> Result<()>
    where
        F: FnMut(usize, &DMatrix<f64>) -> Result<()>,
    {
        let all = enumerate_combinations(&self.grid);
        for (c, chunk) in all.chunks(RENDER_CHUNK).enumerate() {
            let x = self.render_clean(chunk)?;
            visit(c * RENDER_CHUNK, &x)?;
        }
        Ok(())
    }

    /// Verify that all noiseless observations are pairwise further apart than
    /// [`INJECTIVITY_TOLERANCE`].
    ///
    /// Points closer than the tolerance are also closer than it along any unit
    /// direction, so only pairs whose projections on a random direction fall
    /// within the tolerance need a full comparison.
    pub fn check_injective(&self) -> Result<()> {
        let mut rng = RngStream::new(self.spec.generator_seed).child("injectivity");
        let mut dir: Vec<f64> = (0..self.spec.d_x).map(|_| rng.normal()).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        dir.iter_mut().for_each(|v| *v /= norm);

        let mut proj = Vec::with_capacity(self.grid.total());
        self.for_each_chunk(|start, x| {
            for r in 0..x.nrows() {
                let p: f64 = x.row(r).iter().zip(&dir).map(|(a, b)| a * b).sum();
                proj.push((p, start + r));
            }
            Ok(())
        })?;
        proj.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for i in 0..proj.len() {
            let mut j = i + 1;
            while j < proj.len() && proj[j].0 - proj[i].0 <= INJECTIVITY_TOLERANCE {
                let a = self.grid.tuple_of(proj[i].1)?;
                let b = self.grid.tuple_of(proj[j].1)?;
                let x = self.render_clean(&[a.clone(), b.clone()])?;
                let d = (x.row(0) - x.row(1)).norm();
                if d <= INJECTIVITY_TOLERANCE {
                    return Err(Error::invalid(format!(
                        "generator is not injective: {a:?} and {b:?} render {d:e} apart"
                    )));
                }
                j += 1;
            }
        }
        Ok(())
    }
}
