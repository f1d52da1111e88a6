//! Ridge regression with an unpenalised intercept and exact leave-one-out
//! selection of the penalty.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_ALPHAS: [f64; 5] = [0.0, 0.01, 0.1, 1.0, 10.0];

/// Relative singular-value threshold below which `alpha = 0` is skipped.
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub coef: Vec<f64>,
    pub intercept: f64,
    pub alpha: f64,
    /// Mean squared leave-one-out error per alpha; `None` where skipped.
    pub cv_errors: Vec<Option<f64>>,
}

impl RidgeModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        x.row_iter()
            .map(|r| self.intercept + r.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }
}

struct Centered {
    x_mean: DVector<f64>,
    y_mean: f64,
    u: DMatrix<f64>,
    s: DVector<f64>,
    v_t: DMatrix<f64>,
    uty: DVector<f64>,
    yc: DVector<f64>,
}

fn center(x: &DMatrix<f64>, y: &[f64]) -> Centered {
    let n = x.nrows();
    let x_mean = DVector::from_fn(x.ncols(), |c, _| x.column(c).mean());
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let mut xc = x.clone();
    for (c, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-x_mean[c]);
    }
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let svd = xc.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V");
    let uty = u.transpose() * &yc;
    Centered {
        x_mean,
        y_mean,
        u,
        s: svd.singular_values,
        v_t,
        uty,
        yc,
    }
}

fn alpha_usable(c: &Centered, alpha: f64, d: usize) -> bool {
    if alpha > 0.0 {
        return true;
    }
    let smax = c.s.max();
    c.s.len() >= d && smax > 0.0 && c.s.iter().all(|&s| s > RANK_TOL * smax)
}

fn shrink(s: f64, alpha: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s / (s * s + alpha)
    }
}

/// Mean squared leave-one-out residual from the hat-matrix identity
/// `eᵢ / (1 − Hᵢᵢ)`, with `H = 11ᵀ/n + U diag(s²/(s²+α)) Uᵀ`.
fn loo_error(c: &Centered, alpha: f64) -> Option<f64> {
    let n = c.yc.len();
    let filt = DVector::from_iterator(c.s.len(), c.s.iter().map(|&s| s * s / (s * s + alpha)));
    let fitted = &c.u * filt.component_mul(&c.uty);
    let mut total = 0.0;
    for i in 0..n {
        let h = 1.0 / n as f64 + (0..c.s.len()).map(|k| c.u[(i, k)] * c.u[(i, k)] * filt[k]).sum::<f64>();
        let denom = 1.0 - h;
        if denom <= 1e-12 {
            return None;
        }
        let e = (c.yc[i] - fitted[i]) / denom;
        total += e * e;
    }
    Some(total / n as f64)
}

fn solve(c: &Centered, alpha: f64) -> (Vec<f64>, f64) {
    let w = DVector::from_iterator(c.s.len(), c.s.iter().zip(c.uty.iter()).map(|(&s, &b)| shrink(s, alpha) * b));
    let coef = c.v_t.transpose() * w;
    let intercept = c.y_mean - coef.dot(&c.x_mean);
    (coef.iter().copied().collect(), intercept)
}

/// Closed-form ridge fit for one penalty.
pub fn ridge_fit(x: &DMatrix<f64>, y: &[f64], alpha: f64) -> Result<RidgeModel> {
    check(x, y, 1)?;
    let c = center(x, y);
    let (coef, intercept) = solve(&c, alpha);
    Ok(RidgeModel {
        coef,
        intercept,
        alpha,
        cv_errors: vec![],
    })
}

fn check(x: &DMatrix<f64>, y: &[f64], min_rows: usize) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "ridge targets",
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if x.nrows() < min_rows {
        return Err(Error::invalid(format!("ridge needs at least {min_rows} rows, got {}", x.nrows())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ridge inputs".into()));
    }
    Ok(())
}

/// Fit every alpha, pick the lowest leave-one-out error (first on ties) and
/// refit on all rows. `alpha = 0` is skipped when the centred design is rank
/// deficient.
pub fn ridge_cv_fit(x: &DMatrix<f64>, y: &[f64], alphas: &[f64]) -> Result<RidgeModel> {
    check(x, y, 5)?;
    if alphas.is_empty() || alphas.iter().any(|a| !(*a >= 0.0)) {
        return Err(Error::invalid("alphas must be a non-empty list of non-negative values"));
    }
    let c = center(x, y);
    let d = x.ncols();
    let cv_errors: Vec<Option<f64>> = alphas
        .iter()
        .map(|&a| {
            if alpha_usable(&c, a, d) {
                loo_error(&c, a)
            } else {
                log::warn!("skipping alpha {a}: design matrix is rank deficient");
                None
            }
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, e) in cv_errors.iter().enumerate() {
        if let Some(e) = *e {
            if best.is_none_or(|(_, b)| e < b) {
                best = Some((i, e));
            }
        }
    }
    let (idx, _) = best.ok_or_else(|| Error::invalid("no usable ridge penalty"))?;
    let (coef, intercept) = solve(&c, alphas[idx]);
    Ok(RidgeModel {
        coef,
        intercept,
        alpha: alphas[idx],
        cv_errors,
    })
}

/// Coefficient of determination of `pred` against `y`.
pub fn r2_score(y: &[f64], pred: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let ss_res: f64 = y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum();
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}
