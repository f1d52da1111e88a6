//! Density-ratio estimate of total correlation with a real-vs-permuted
//! classifier. Logit 0 scores "real", logit 1 scores "unit-permuted".

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::neural::{backprop, backprop_with_input, mlp_forward, Activation, MlpSpec, ParamBlock};
use crate::numerics::RngStream;
use crate::{Error, Result};

pub fn discriminator_spec(input: usize, hidden_width: usize, hidden_layers: usize, seed: u64) -> Result<MlpSpec> {
    let mut widths = vec![input];
    widths.extend(std::iter::repeat_n(hidden_width, hidden_layers));
    widths.push(2);
    MlpSpec::new(widths, Activation::Relu, seed)
}

fn logits(spec: &MlpSpec, params: &ParamBlock, z: &DMatrix<f64>) -> Result<(DMatrix<f64>, crate::neural::Tape)> {
    if spec.output_width() != 2 {
        return Err(Error::invalid("discriminator must output two logits"));
    }
    let (out, tape) = mlp_forward(spec, params, z)?;
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("discriminator logits".into()));
    }
    Ok((out, tape))
}

/// Batch mean of `logit_real − logit_perm`, i.e. `E[ln 𝒟 − ln(1 − 𝒟)]`.
pub fn discriminator_tc(spec: &MlpSpec, params: &ParamBlock, z: &DMatrix<f64>) -> Result<f64> {
    let (out, _) = logits(spec, params, z)?;
    Ok(out.row_iter().map(|r| r[0] - r[1]).sum::<f64>() / z.nrows() as f64)
}

/// [`discriminator_tc`] and its gradient with respect to `z`.
pub fn discriminator_tc_with_grad(
    spec: &MlpSpec,
    params: &ParamBlock,
    z: &DMatrix<f64>,
) -> Result<(f64, DMatrix<f64>)> {
    let (out, tape) = logits(spec, params, z)?;
    let b = z.nrows() as f64;
    let value = out.row_iter().map(|r| r[0] - r[1]).sum::<f64>() / b;
    let up = DMatrix::from_fn(z.nrows(), 2, |_, c| if c == 0 { 1.0 / b } else { -1.0 / b });
    let g = backprop_with_input(spec, params, &tape, &up)?;
    Ok((value, g.input.expect("input gradient requested")))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorLoss {
    /// `½(mean CE on real + mean CE on permuted)`.
    pub loss: f64,
    /// Fraction of both batches classified correctly.
    pub accuracy: f64,
}

/// Cross-entropy of one batch against `label`, its correct count, and the
/// logit gradient scaled by `scale`.
fn cross_entropy(out: &DMatrix<f64>, label: usize, scale: f64) -> (f64, usize, DMatrix<f64>) {
    let mut loss = 0.0;
    let mut correct = 0;
    let mut grad = DMatrix::zeros(out.nrows(), 2);
    for r in 0..out.nrows() {
        let (a, b) = (out[(r, 0)], out[(r, 1)]);
        let mx = a.max(b);
        let lse = mx + ((a - mx).exp() + (b - mx).exp()).ln();
        let p = [(a - lse).exp(), (b - lse).exp()];
        loss -= out[(r, label)] - lse;
        if (label == 0 && a > b) || (label == 1 && b > a) {
            correct += 1;
        }
        for c in 0..2 {
            grad[(r, c)] = scale * (p[c] - if c == label { 1.0 } else { 0.0 });
        }
    }
    (loss, correct, grad)
}

/// Discriminator objective and its parameter gradient. `real` rows are
/// labelled 0, `permuted` rows 1.
pub fn discriminator_loss(
    spec: &MlpSpec,
    params: &ParamBlock,
    real: &DMatrix<f64>,
    permuted: &DMatrix<f64>,
) -> Result<(DiscriminatorLoss, Vec<f64>)> {
    let (out_r, tape_r) = logits(spec, params, real)?;
    let (out_p, tape_p) = logits(spec, params, permuted)?;
    let (nr, np) = (real.nrows() as f64, permuted.nrows() as f64);
    let (lr, cr, gr) = cross_entropy(&out_r, 0, 0.5 / nr);
    let (lp, cp, gp) = cross_entropy(&out_p, 1, 0.5 / np);
    let mut grad = backprop(spec, params, &tape_r, &gr)?;
    for (g, v) in grad.iter_mut().zip(backprop(spec, params, &tape_p, &gp)?) {
        *g += v;
    }
    let loss = DiscriminatorLoss {
        loss: 0.5 * (lr / nr + lp / np),
        accuracy: (cr + cp) as f64 / (nr + np),
    };
    Ok((loss, grad))
}

/// Shuffle the batch axis independently for every unit, moving each unit's
/// `D` entries together.
pub fn permute_units(z: &DMatrix<f64>, m: usize, d: usize, rng: &mut RngStream) -> Result<DMatrix<f64>> {
    if z.ncols() != m * d {
        return Err(Error::DimensionMismatch {
            context: "permute_units",
            expected: m * d,
            got: z.ncols(),
        });
    }
    let b = z.nrows();
    let mut out = DMatrix::zeros(b, m * d);
    for i in 0..m {
        let perm = rng.permutation(b);
        for (r, &src) in perm.iter().enumerate() {
            for j in 0..d {
                out[(r, i * d + j)] = z[(src, i * d + j)];
            }
        }
    }
    Ok(out)
}
