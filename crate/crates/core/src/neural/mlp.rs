//! Fully connected networks with an explicit activation tape.
//!
//! A forward pass records each layer's input and pre-activation; `backprop`
//! replays the tape in reverse to produce exact parameter (and optionally
//! input) gradients. Weights of layer `l` are stored column-major as a
//! `fan_in × fan_out` block followed by the `fan_out` bias, so a batch
//! `X` (rows are samples) maps to `X·W + b`.

use nalgebra::{DMatrix, DMatrixView};
use serde::{Deserialize, Serialize};

use crate::numerics::RngStream;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    None,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::None => x,
        }
    }

    /// Derivative as a function of the pre-activation.
    #[inline]
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
            Activation::None => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Input width followed by every layer's output width.
    pub layer_widths: Vec<usize>,
    /// One activation per hidden layer; the output layer is linear.
    pub activations: Vec<Activation>,
    pub init_seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerLayout {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub values: Vec<f64>,
    pub layers: Vec<LayerLayout>,
}

impl MlpSpec {
    /// Network whose hidden layers all share one activation.
    pub fn new(layer_widths: Vec<usize>, hidden: Activation, init_seed: u64) -> Result<Self> {
        let n_hidden = layer_widths.len().saturating_sub(2);
        let spec = MlpSpec {
            layer_widths,
            activations: vec![hidden; n_hidden],
            init_seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(Error::invalid("an MLP needs at least one layer"));
        }
        if self.layer_widths.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        if self.activations.len() != self.layer_widths.len() - 2 {
            return Err(Error::invalid(format!(
                "{} hidden layers but {} activations",
                self.layer_widths.len() - 2,
                self.activations.len()
            )));
        }
        Ok(())
    }

    pub fn n_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_widths.last().expect("validated spec")
    }

    pub fn layout(&self) -> Vec<LayerLayout> {
        let mut offset = 0;
        self.layer_widths
            .windows(2)
            .map(|w| {
                let l = LayerLayout {
                    fan_in: w[0],
                    fan_out: w[1],
                    weight_offset: offset,
                    bias_offset: offset + w[0] * w[1],
                };
                offset += w[0] * w[1] + w[1];
                l
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Weights and biases uniform in `±1/√fan_in`, drawn from `init_seed`.
    pub fn init_params(&self) -> ParamBlock {
        self.init_params_scaled(1.0)
    }

    pub fn init_params_scaled(&self, gain: f64) -> ParamBlock {
        let layers = self.layout();
        let mut values = vec![0.0; self.param_count()];
        let root = RngStream::new(self.init_seed);
        for (l, lay) in layers.iter().enumerate() {
            let mut rng = root.child_indexed("layer", l as u64);
            let bound = gain / (lay.fan_in as f64).sqrt();
            for v in &mut values[lay.weight_offset..lay.bias_offset + lay.fan_out] {
                *v = rng.uniform_in(-bound, bound);
            }
        }
        ParamBlock { values, layers }
    }

    fn activation(&self, layer: usize) -> Activation {
        self.activations.get(layer).copied().unwrap_or(Activation::None)
    }
}

impl ParamBlock {
    pub fn zeros_like(&self) -> Vec<f64> {
        vec![0.0; self.values.len()]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn weight(&self, layer: usize) -> DMatrixView<'_, f64> {
        let l = self.layers[layer];
        DMatrixView::from_slice(&self.values[l.weight_offset..l.bias_offset], l.fan_in, l.fan_out)
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let l = self.layers[layer];
        &self.values[l.bias_offset..l.bias_offset + l.fan_out]
    }

    /// Set every weight and bias of `layer` to zero.
    pub fn zero_layer(&mut self, layer: usize) {
        let l = self.layers[layer];
        self.values[l.weight_offset..l.bias_offset + l.fan_out].fill(0.0);
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug)]
struct LayerCache {
    input: DMatrix<f64>,
    pre: DMatrix<f64>,
}

/// Cached activations of one forward pass.
#[derive(Clone, Debug)]
pub struct Tape {
    layers: Vec<LayerCache>,
    batch: usize,
    out_width: usize,
}

impl Tape {
    pub fn batch(&self) -> usize {
        self.batch
    }
}

fn check_params(spec: &MlpSpec, params: &ParamBlock) -> Result<()> {
    if params.len() != spec.param_count() {
        return Err(Error::DimensionMismatch {
            context: "mlp parameters",
            expected: spec.param_count(),
            got: params.len(),
        });
    }
    Ok(())
}

pub fn mlp_forward(spec: &MlpSpec, params: &ParamBlock, input: &DMatrix<f64>) -> Result<(DMatrix<f64>, Tape)> {
    check_params(spec, params)?;
    if input.ncols() != spec.input_width() {
        return Err(Error::DimensionMismatch {
            context: "mlp input",
            expected: spec.input_width(),
            got: input.ncols(),
        });
    }
    let mut layers = Vec::with_capacity(spec.n_layers());
    let mut h = input.clone();
    for l in 0..spec.n_layers() {
        let mut pre = &h * params.weight(l);
        for (mut col, b) in pre.column_iter_mut().zip(params.bias(l)) {
            col.add_scalar_mut(*b);
        }
        if pre.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("activations of layer {l}")));
        }
        let act = spec.activation(l);
        let post = if act == Activation::None {
            pre.clone()
        } else {
            pre.map(|v| act.apply(v))
        };
        layers.push(LayerCache { input: h, pre });
        h = post;
    }
    let tape = Tape {
        layers,
        batch: input.nrows(),
        out_width: spec.output_width(),
    };
    Ok((h, tape))
}

/// Parameter gradient and gradient with respect to the network input.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Option<DMatrix<f64>>,
}

fn backward(
    spec: &MlpSpec,
    params: &ParamBlock,
    tape: &Tape,
    upstream: &DMatrix<f64>,
    want_input: bool,
) -> Result<Gradients> {
    check_params(spec, params)?;
    if upstream.shape() != (tape.batch, tape.out_width) || tape.layers.len() != spec.n_layers() {
        return Err(Error::DimensionMismatch {
            context: "backprop upstream",
            expected: tape.batch * tape.out_width,
            got: upstream.len(),
        });
    }
    let mut grad = params.zeros_like();
    let mut delta = upstream.clone();
    for l in (0..spec.n_layers()).rev() {
        let cache = &tape.layers[l];
        let act = spec.activation(l);
        if act != Activation::None {
            delta.zip_apply(&cache.pre, |d, p| *d *= act.derivative(p));
        }
        let lay = params.layers[l];
        let dw = cache.input.transpose() * &delta;
        grad[lay.weight_offset..lay.bias_offset].copy_from_slice(dw.as_slice());
        for (j, col) in delta.column_iter().enumerate() {
            grad[lay.bias_offset + j] = col.sum();
        }
        if l > 0 || want_input {
            delta = &delta * params.weight(l).transpose();
        }
    }
    Ok(Gradients {
        params: grad,
        input: want_input.then_some(delta),
    })
}

/// Reverse-mode gradient of `Σ upstream ⊙ output` with respect to the
/// parameters.
pub fn backprop(spec: &MlpSpec, params: &ParamBlock, tape: &Tape, upstream: &DMatrix<f64>) -> Result<Vec<f64>> {
    backward(spec, params, tape, upstream, false).map(|g| g.params)
}

/// As [`backprop`], also returning the gradient with respect to the input.
pub fn backprop_with_input(
    spec: &MlpSpec,
    params: &ParamBlock,
    tape: &Tape,
    upstream: &DMatrix<f64>,
) -> Result<Gradients> {
    backward(spec, params, tape, upstream, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_difference_gradient, max_relative_error};

    fn random_input(rng: &mut RngStream, b: usize, d: usize) -> DMatrix<f64> {
        DMatrix::from_fn(b, d, |_, _| rng.normal())
    }

    #[test]
    fn zeroed_final_layer_outputs_zero() {
        let spec = MlpSpec::new(vec![3, 5, 2], Activation::Relu, 1).unwrap();
        let mut p = spec.init_params();
        p.zero_layer(1);
        let mut rng = RngStream::new(0);
        let (out, _) = mlp_forward(&spec, &p, &random_input(&mut rng, 4, 3)).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let spec = MlpSpec::new(vec![3, 3], Activation::None, 1).unwrap();
        let mut p = spec.init_params();
        p.zero_layer(0);
        for i in 0..3 {
            p.values[i * 3 + i] = 1.0;
        }
        let mut rng = RngStream::new(0);
        let x = random_input(&mut rng, 5, 3);
        let (out, _) = mlp_forward(&spec, &p, &x).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn linear_net_gradient_matches_fd() {
        let spec = MlpSpec::new(vec![4, 3], Activation::None, 3).unwrap();
        let p = spec.init_params();
        let mut rng = RngStream::new(1);
        let x = random_input(&mut rng, 6, 4);
        let (_, tape) = mlp_forward(&spec, &p, &x).unwrap();
        let analytic = backprop(&spec, &p, &tape, &DMatrix::from_element(6, 3, 1.0)).unwrap();
        let numeric = finite_difference_gradient(
            |theta| {
                let q = ParamBlock {
                    values: theta.to_vec(),
                    layers: p.layers.clone(),
                };
                mlp_forward(&spec, &q, &x).unwrap().0.sum()
            },
            &p.values,
            1e-5,
        )
        .unwrap();
        assert!(max_relative_error(&analytic, &numeric) < 1e-5);
    }

    #[test]
    fn bias_gradient_of_mean_output() {
        let spec = MlpSpec::new(vec![2, 3], Activation::None, 3).unwrap();
        let p = spec.init_params();
        let mut rng = RngStream::new(2);
        let b = 8;
        let (_, tape) = mlp_forward(&spec, &p, &random_input(&mut rng, b, 2)).unwrap();
        let up = DMatrix::from_element(b, 3, 1.0 / b as f64);
        let g = backprop(&spec, &p, &tape, &up).unwrap();
        // Each sample contributes 1/b to every bias entry.
        for j in 0..3 {
            assert!((g[p.layers[0].bias_offset + j] - 1.0).abs() < 1e-14);
        }
        let (_, tape1) = mlp_forward(&spec, &p, &random_input(&mut rng, 1, 2)).unwrap();
        let g1 = backprop(&spec, &p, &tape1, &DMatrix::from_element(1, 3, 1.0 / b as f64)).unwrap();
        assert_eq!(g1[p.layers[0].bias_offset], 1.0 / b as f64);
    }

    #[test]
    fn zero_upstream_zero_gradient() {
        let spec = MlpSpec::new(vec![3, 4, 2], Activation::Tanh, 5).unwrap();
        let p = spec.init_params();
        let mut rng = RngStream::new(3);
        let (_, tape) = mlp_forward(&spec, &p, &random_input(&mut rng, 4, 3)).unwrap();
        let g = backprop(&spec, &p, &tape, &DMatrix::zeros(4, 2)).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn composite_net_gradient_matches_fd() {
        for act in [Activation::Tanh, Activation::Relu] {
            let spec = MlpSpec::new(vec![3, 5, 4, 2], act, 11).unwrap();
            let p = spec.init_params();
            let mut rng = RngStream::new(4);
            let x = random_input(&mut rng, 7, 3);
            let w = random_input(&mut rng, 7, 2);
            let loss = |q: &ParamBlock, x: &DMatrix<f64>| {
                let (o, _) = mlp_forward(&spec, q, x).unwrap();
                o.zip_map(&w, |a, b| 0.5 * (a - b).powi(2)).sum()
            };
            let (out, tape) = mlp_forward(&spec, &p, &x).unwrap();
            let up = &out - &w;
            let grads = backprop_with_input(&spec, &p, &tape, &up).unwrap();
            let numeric = finite_difference_gradient(
                |theta| {
                    let q = ParamBlock {
                        values: theta.to_vec(),
                        layers: p.layers.clone(),
                    };
                    loss(&q, &x)
                },
                &p.values,
                1e-6,
            )
            .unwrap();
            assert!(max_relative_error(&grads.params, &numeric) < 1e-3, "{act:?}");
            let numeric_x = finite_difference_gradient(
                |flat| loss(&p, &DMatrix::from_column_slice(7, 3, flat)),
                x.as_slice(),
                1e-6,
            )
            .unwrap();
            assert!(max_relative_error(grads.input.as_ref().unwrap().as_slice(), &numeric_x) < 1e-3);
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let spec = MlpSpec::new(vec![3, 8, 2], Activation::Relu, 9).unwrap();
        let p = spec.init_params();
        assert_eq!(p, spec.init_params());
        let mut rng = RngStream::new(5);
        let x = random_input(&mut rng, 4, 3);
        let (a, _) = mlp_forward(&spec, &p, &x).unwrap();
        let (b, _) = mlp_forward(&spec, &p, &x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_activation_names_layer() {
        let spec = MlpSpec::new(vec![2, 2, 2], Activation::None, 1).unwrap();
        let mut p = spec.init_params();
        p.values[p.layers[1].weight_offset] = f64::INFINITY;
        let err = mlp_forward(&spec, &p, &DMatrix::from_element(1, 2, 1.0)).unwrap_err();
        assert!(err.to_string().contains("layer 1"), "{err}");
    }

    #[test]
    fn shape_errors() {
        let spec = MlpSpec::new(vec![2, 3], Activation::None, 1).unwrap();
        let p = spec.init_params();
        assert!(mlp_forward(&spec, &p, &DMatrix::zeros(1, 3)).is_err());
        let (_, tape) = mlp_forward(&spec, &p, &DMatrix::zeros(2, 2)).unwrap();
        assert!(backprop(&spec, &p, &tape, &DMatrix::zeros(2, 2)).is_err());
        assert!(MlpSpec::new(vec![3], Activation::None, 0).is_err());
    }
}
