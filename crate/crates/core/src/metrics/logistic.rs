//! Multinomial logistic regression with an L2 penalty, fitted by L-BFGS,
//! and stratified k-fold selection of the inverse regularisation strength.
//!
//! The objective is `(1/n)·Σ CE + ‖W‖²/(2Cn)`; the intercept is not
//! penalised. Features are standardised with training statistics.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::numerics::{lbfgs, LbfgsConfig};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub cs: Vec<f64>,
    pub folds: usize,
    pub max_iter: usize,
    pub gtol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            cs: log_grid(-4.0, 4.0, 10),
            folds: 5,
            max_iter: 100,
            gtol: 1e-6,
        }
    }
}

/// `n` values spaced evenly in log10 between `10^lo` and `10^hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1).max(1) as f64))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticModel {
    /// Original labels; column `c` of the weights scores `classes[c]`.
    pub classes: Vec<usize>,
    /// `d × c`.
    pub weights: DMatrix<f64>,
    pub bias: Vec<f64>,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub c: f64,
    /// Mean fold accuracy per candidate `C` (empty for a single fit).
    pub cv_scores: Vec<f64>,
    pub converged: bool,
}

impl LogisticModel {
    pub fn decision(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let xs = apply_scaling(x, &self.feature_mean, &self.feature_scale);
        let mut z = xs * &self.weights;
        for (mut col, b) in z.column_iter_mut().zip(&self.bias) {
            col.add_scalar_mut(*b);
        }
        z
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<usize> {
        self.decision(x)
            .row_iter()
            .map(|r| {
                let mut best = 0;
                for c in 1..r.len() {
                    if r[c] > r[best] {
                        best = c;
                    }
                }
                self.classes[best]
            })
            .collect()
    }

    pub fn accuracy(&self, x: &DMatrix<f64>, y: &[usize]) -> f64 {
        accuracy(&self.predict(x), y)
    }
}

pub fn accuracy(pred: &[usize], y: &[usize]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}

fn scaling(x: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    let mean: Vec<f64> = x.column_iter().map(|c| c.sum() / n).collect();
    let scale = x
        .column_iter()
        .zip(&mean)
        .map(|(c, m)| {
            let sd = (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
            if sd > 1e-12 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

fn apply_scaling(x: &DMatrix<f64>, mean: &[f64], scale: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| (x[(r, c)] - mean[c]) / scale[c])
}

fn class_index(y: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut classes = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let dense = y.iter().map(|v| classes.binary_search(v).expect("class present")).collect();
    (classes, dense)
}

/// Objective and gradient at `theta = [vec(W) ; b]` on standardised `x`.
fn objective(x: &DMatrix<f64>, y: &[usize], n_classes: usize, c: f64, theta: &[f64], grad: &mut [f64]) -> f64 {
    let (n, d) = (x.nrows(), x.ncols());
    let w = DMatrix::from_column_slice(d, n_classes, &theta[..d * n_classes]);
    let b = &theta[d * n_classes..];
    let mut z = x * &w;
    let mut loss = 0.0;
    for r in 0..n {
        let mut mx = f64::NEG_INFINITY;
        for k in 0..n_classes {
            z[(r, k)] += b[k];
            mx = mx.max(z[(r, k)]);
        }
        let mut sum = 0.0;
        for k in 0..n_classes {
            sum += (z[(r, k)] - mx).exp();
        }
        let lse = mx + sum.ln();
        loss += lse - z[(r, y[r])];
        for k in 0..n_classes {
            z[(r, k)] = (z[(r, k)] - lse).exp();
        }
        z[(r, y[r])] -= 1.0;
    }
    let inv_n = 1.0 / n as f64;
    let reg = 1.0 / (c * n as f64);
    let gw = x.transpose() * &z * inv_n + &w * reg;
    grad[..d * n_classes].copy_from_slice(gw.as_slice());
    for k in 0..n_classes {
        grad[d * n_classes + k] = z.column(k).sum() * inv_n;
    }
    loss * inv_n + 0.5 * reg * w.norm_squared()
}

fn fit_dense(
    x: &DMatrix<f64>,
    y: &[usize],
    n_classes: usize,
    c: f64,
    cfg: &LogisticConfig,
) -> (DMatrix<f64>, Vec<f64>, bool) {
    let d = x.ncols();
    let x0 = vec![0.0; (d + 1) * n_classes];
    let res = lbfgs(
        |t, g| objective(x, y, n_classes, c, t, g),
        &x0,
        LbfgsConfig {
            max_iter: cfg.max_iter,
            gtol: cfg.gtol,
            ..Default::default()
        },
    );
    let w = DMatrix::from_column_slice(d, n_classes, &res.x[..d * n_classes]);
    (w, res.x[d * n_classes..].to_vec(), res.converged)
}

fn check(x: &DMatrix<f64>, y: &[usize]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "logistic labels",
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logistic features".into()));
    }
    Ok(())
}

/// Fit with a fixed `C`.
pub fn logistic_fit(x: &DMatrix<f64>, y: &[usize], c: f64, cfg: &LogisticConfig) -> Result<LogisticModel> {
    check(x, y)?;
    let (classes, dense) = class_index(y);
    if classes.len() < 2 {
        return Err(Error::invalid("logistic regression needs at least two classes"));
    }
    let (mean, scale) = scaling(x);
    let xs = apply_scaling(x, &mean, &scale);
    let (weights, bias, converged) = fit_dense(&xs, &dense, classes.len(), c, cfg);
    Ok(LogisticModel {
        classes,
        weights,
        bias,
        feature_mean: mean,
        feature_scale: scale,
        c,
        cv_scores: vec![],
        converged,
    })
}

/// Fold id per row: the `r`-th member of each class goes to fold `r mod k`.
/// `k` drops to the smallest class count when that is below the request
/// (never below 2).
pub fn stratified_folds(y: &[usize], k: usize) -> (Vec<usize>, usize) {
    let (classes, dense) = class_index(y);
    let mut counts = vec![0usize; classes.len()];
    for &c in &dense {
        counts[c] += 1;
    }
    let min_count = counts.iter().copied().min().unwrap_or(0);
    let k = k.min(min_count).max(2);
    let mut seen = vec![0usize; classes.len()];
    let folds = dense
        .iter()
        .map(|&c| {
            let f = seen[c] % k;
            seen[c] += 1;
            f
        })
        .collect();
    (folds, k)
}

/// Mean held-out accuracy of fixed-`C` fits over the given folds.
pub fn fold_accuracy(
    x: &DMatrix<f64>,
    y: &[usize],
    folds: &[usize],
    n_folds: usize,
    c: f64,
    cfg: &LogisticConfig,
) -> Result<f64> {
    let mut total = 0.0;
    for f in 0..n_folds {
        let train: Vec<usize> = (0..y.len()).filter(|&r| folds[r] != f).collect();
        let test: Vec<usize> = (0..y.len()).filter(|&r| folds[r] == f).collect();
        let ytr: Vec<usize> = train.iter().map(|&r| y[r]).collect();
        let yte: Vec<usize> = test.iter().map(|&r| y[r]).collect();
        let model = logistic_fit(&x.select_rows(&train), &ytr, c, cfg)?;
        total += model.accuracy(&x.select_rows(&test), &yte);
    }
    Ok(total / n_folds as f64)
}

/// Pick `C` by stratified k-fold accuracy (first best on ties), then refit
/// on all rows.
pub fn logistic_cv_fit(x: &DMatrix<f64>, y: &[usize], cfg: &LogisticConfig) -> Result<LogisticModel> {
    check(x, y)?;
    if cfg.cs.is_empty() || cfg.cs.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::invalid("Cs must be a non-empty list of positive values"));
    }
    let (classes, _) = class_index(y);
    if classes.len() < 2 {
        return Err(Error::invalid("logistic regression needs at least two classes"));
    }
    let (folds, k) = stratified_folds(y, cfg.folds);
    let scores = cfg
        .cs
        .iter()
        .map(|&c| fold_accuracy(x, y, &folds, k, c, cfg))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    let mut model = logistic_fit(x, y, cfg.cs[best], cfg)?;
    model.cv_scores = scores;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_difference_gradient, max_relative_error, RngStream};

    #[test]
    fn grid_spans_the_range() {
        let g = log_grid(-4.0, 4.0, 10);
        assert_eq!(g.len(), 10);
        assert!((g[0] - 1e-4).abs() < 1e-18 && (g[9] - 1e4).abs() < 1e-9);
    }

    #[test]
    fn objective_gradient() {
        let mut rng = RngStream::new(1);
        let x = DMatrix::from_fn(12, 3, |_, _| rng.normal());
        let y: Vec<usize> = (0..12).map(|i| i % 3).collect();
        let theta: Vec<f64> = (0..12).map(|_| 0.5 * rng.normal()).collect();
        let mut g = vec![0.0; 12];
        objective(&x, &y, 3, 0.7, &theta, &mut g);
        let mut scratch = vec![0.0; 12];
        let num = finite_difference_gradient(|t| objective(&x, &y, 3, 0.7, t, &mut scratch), &theta, 1e-6).unwrap();
        assert!(max_relative_error(&g, &num) < 1e-6);
    }

    #[test]
    fn separable_two_class() {
        let mut rng = RngStream::new(2);
        let x = DMatrix::from_fn(60, 2, |r, c| {
            let centre = if r % 2 == 0 { 2.0 } else { -2.0 };
            if c == 0 {
                centre + 0.3 * rng.normal()
            } else {
                rng.normal()
            }
        });
        let y: Vec<usize> = (0..60).map(|r| r % 2).collect();
        let m = logistic_cv_fit(&x, &y, &LogisticConfig::default()).unwrap();
        assert_eq!(m.accuracy(&x, &y), 1.0);
    }

    #[test]
    fn folds_are_stratified() {
        let y: Vec<usize> = (0..23).map(|i| i % 3).collect();
        let (folds, k) = stratified_folds(&y, 5);
        assert_eq!(k, 5);
        for f in 0..5 {
            for c in 0..3 {
                let n = (0..23).filter(|&r| folds[r] == f && y[r] == c).count();
                assert!((1..=2).contains(&n));
            }
        }
        let (_, k) = stratified_folds(&[0, 0, 0, 1, 1, 1, 1, 2, 2, 2], 5);
        assert_eq!(k, 3);
    }

    #[test]
    fn labels_keep_their_values() {
        let x = DMatrix::from_row_slice(4, 1, &[-1.0, -1.1, 1.0, 1.2]);
        let y = vec![7, 7, 3, 3];
        let m = logistic_fit(&x, &y, 10.0, &LogisticConfig::default()).unwrap();
        assert_eq!(m.predict(&x), y);
        assert_eq!(m.classes, vec![3, 7]);
    }
}
