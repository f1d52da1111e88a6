//! Central finite differences, used as the gradient oracle for every
//! hand-derived backward pass in the crate.

use crate::{Error, Result};

/// `(f(θ + h·eᵢ) − f(θ − h·eᵢ)) / 2h` for every coordinate `i`.
pub fn finite_difference_gradient<F>(mut f: F, theta: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("step must be positive, got {h}")));
    }
    let mut point = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let orig = point[i];
        point[i] = orig + h;
        let plus = f(&point);
        point[i] = orig - h;
        let minus = f(&point);
        point[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "objective evaluation at coordinate {i} (f+ = {plus}, f- = {minus})"
            )));
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

/// Largest per-coordinate relative error between an analytic and a numeric
/// gradient.
///
/// Each coordinate is scaled by `max(|a|, |n|, 1e-6·‖n‖∞, 1e-12)` so entries
/// that are zero up to rounding do not dominate.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    let scale = numeric.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let floor = (1e-6 * scale).max(1e-12);
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_squared_norm() {
        let g = finite_difference_gradient(|t| 0.5 * t.iter().map(|x| x * x).sum::<f64>(), &[1.0, 2.0], 1e-5)
            .unwrap();
        assert!((g[0] - 1.0).abs() < 1e-8 && (g[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn sine_product() {
        let theta = [0.7, -1.3];
        let g = finite_difference_gradient(|t| t[0].sin() * t[1], &theta, 1e-5).unwrap();
        assert!((g[0] - theta[0].cos() * theta[1]).abs() < 1e-6);
        assert!((g[1] - theta[0].sin()).abs() < 1e-6);
    }

    #[test]
    fn reports_non_finite_coordinate() {
        let err = finite_difference_gradient(|t| if t[1] > 0.5 { f64::NAN } else { t[0] }, &[0.0, 0.5], 1e-3)
            .unwrap_err();
        assert!(err.to_string().contains("coordinate 1"));
    }

    #[test]
    fn relative_error_metric() {
        assert_eq!(max_relative_error(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert!((max_relative_error(&[1.1], &[1.0]) - 0.1 / 1.1).abs() < 1e-12);
    }
}
