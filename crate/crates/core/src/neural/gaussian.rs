//! Reparameterised sampling and log densities for spherical Gaussian units.
//!
//! Latent codes are laid out unit-major: unit `i` of a code with vector size
//! `D` occupies columns `[i·D, (i+1)·D)`. Every unit has one standard
//! deviation shared by its `D` entries.

use nalgebra::DMatrix;

use crate::numerics::RngStream;
use crate::{Error, Result};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Added to the softplus so the standard deviation stays strictly positive.
pub const SIGMA_FLOOR: f64 = 1e-6;

#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn sigma_from_raw(raw: f64) -> f64 {
    softplus(raw) + SIGMA_FLOOR
}

fn check_layout(mu: &DMatrix<f64>, sigma: &DMatrix<f64>, units: usize, dim: usize) -> Result<()> {
    if mu.ncols() != units * dim {
        return Err(Error::DimensionMismatch {
            context: "latent means",
            expected: units * dim,
            got: mu.ncols(),
        });
    }
    if sigma.shape() != (mu.nrows(), units) {
        return Err(Error::DimensionMismatch {
            context: "per-unit sigma",
            expected: mu.nrows() * units,
            got: sigma.len(),
        });
    }
    if let Some(s) = sigma.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::invalid(format!("sigma must be positive, got {s}")));
    }
    Ok(())
}

pub fn standard_normal_matrix(rows: usize, cols: usize, rng: &mut RngStream) -> DMatrix<f64> {
    // Row-major draw order so the stream layout does not depend on storage.
    let mut m = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m[(r, c)] = rng.normal();
        }
    }
    m
}

/// `z = μ + σ_unit · ε` with explicitly supplied noise `ε`.
pub fn reparameterize_with_noise(
    mu: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    noise: &DMatrix<f64>,
    units: usize,
    dim: usize,
) -> Result<DMatrix<f64>> {
    check_layout(mu, sigma, units, dim)?;
    if noise.shape() != mu.shape() {
        return Err(Error::DimensionMismatch {
            context: "reparameterisation noise",
            expected: mu.len(),
            got: noise.len(),
        });
    }
    let mut z = mu.clone();
    for i in 0..units {
        for j in 0..dim {
            let c = i * dim + j;
            for b in 0..mu.nrows() {
                z[(b, c)] += sigma[(b, i)] * noise[(b, c)];
            }
        }
    }
    Ok(z)
}

/// Draw `z = μ + σ_unit · ε`, returning the sample and the noise used.
pub fn reparameterize(
    mu: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    units: usize,
    dim: usize,
    rng: &mut RngStream,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_layout(mu, sigma, units, dim)?;
    let noise = standard_normal_matrix(mu.nrows(), mu.ncols(), rng);
    let z = reparameterize_with_noise(mu, sigma, &noise, units, dim)?;
    Ok((z, noise))
}

/// Pathwise gradient: returns `(∂L/∂μ, ∂L/∂σ)` given `∂L/∂z`.
pub fn reparameterize_backward(
    dz: &DMatrix<f64>,
    noise: &DMatrix<f64>,
    units: usize,
    dim: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut dsigma = DMatrix::zeros(dz.nrows(), units);
    for i in 0..units {
        for b in 0..dz.nrows() {
            let mut acc = 0.0;
            for j in 0..dim {
                let c = i * dim + j;
                acc += dz[(b, c)] * noise[(b, c)];
            }
            dsigma[(b, i)] = acc;
        }
    }
    (dz.clone(), dsigma)
}

/// Log density of one unit: `Σ_j ln N(z_j; μ_j, σ²)`.
///
/// This stays in log space; for large `D` the value is a large negative
/// number whose exponential underflows.
pub fn diag_gaussian_log_density(z: &[f64], mu: &[f64], sigma: f64) -> f64 {
    let inv_var = 1.0 / (sigma * sigma);
    let log_norm = -0.5 * LN_2PI - sigma.ln();
    log_density_with_constants(z, mu, log_norm, inv_var)
}

/// [`diag_gaussian_log_density`] with `−½ln 2π − ln σ` and `1/σ²` supplied.
#[inline]
pub fn log_density_with_constants(z: &[f64], mu: &[f64], log_norm: f64, inv_var: f64) -> f64 {
    debug_assert_eq!(z.len(), mu.len());
    let mut sq = 0.0;
    for (zj, mj) in z.iter().zip(mu) {
        let d = zj - mj;
        sq += d * d;
    }
    z.len() as f64 * log_norm - 0.5 * sq * inv_var
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_density_at_mean() {
        let v = diag_gaussian_log_density(&[0.3], &[0.3], 1.0);
        assert!((v + 0.918_938_533_204_672_7).abs() < 1e-12);
        let z = vec![0.1; 64];
        let v64 = diag_gaussian_log_density(&z, &z, 1.0);
        assert!((v64 - 64.0 * -0.918_938_533_204_672_7).abs() < 1e-10);
        assert!((v64 + 58.81).abs() < 0.01);
    }

    #[test]
    fn log_density_matches_density_product() {
        let mut rng = RngStream::new(31);
        for _ in 0..50 {
            let d = 1 + rng.below(8);
            let sigma = rng.uniform_in(0.3, 2.0);
            let mu: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let z: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let product: f64 = z
                .iter()
                .zip(&mu)
                .map(|(a, m)| {
                    (-(a - m) * (a - m) / (2.0 * sigma * sigma)).exp()
                        / (sigma * (2.0 * std::f64::consts::PI).sqrt())
                })
                .product();
            let lv = diag_gaussian_log_density(&z, &mu, sigma);
            assert!((lv - product.ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn tiny_sigma_returns_mean() {
        let mu = DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 3.0, 4.0]);
        let sigma = DMatrix::from_element(1, 2, 1e-300);
        let mut rng = RngStream::new(0);
        let (z, _) = reparameterize(&mu, &sigma, 2, 2, &mut rng).unwrap();
        assert_eq!(z, mu);
    }

    #[test]
    fn rejects_non_positive_sigma() {
        let mu = DMatrix::zeros(1, 2);
        let mut rng = RngStream::new(0);
        assert!(reparameterize(&mu, &DMatrix::from_element(1, 2, 0.0), 2, 1, &mut rng).is_err());
        assert!(reparameterize(&mu, &DMatrix::from_element(1, 2, -1.0), 2, 1, &mut rng).is_err());
    }

    #[test]
    fn shared_sigma_sample_statistics() {
        let units = 2;
        let dim = 3;
        let n = 100_000;
        let sig = [0.5, 1.7];
        let mu = DMatrix::from_fn(n, units * dim, |_, c| c as f64);
        let sigma = DMatrix::from_fn(n, units, |_, i| sig[i]);
        let mut rng = RngStream::new(12);
        let (z, _) = reparameterize(&mu, &sigma, units, dim, &mut rng).unwrap();
        let e = &z - &mu;
        for i in 0..units {
            for j in 0..dim {
                let col = e.column(i * dim + j);
                let var = col.iter().map(|v| v * v).sum::<f64>() / n as f64;
                assert!((var / (sig[i] * sig[i]) - 1.0).abs() < 0.03);
            }
            // Entries within a unit are uncorrelated.
            let a = e.column(i * dim);
            let b = e.column(i * dim + 1);
            let cov = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>() / n as f64;
            assert!((cov / (sig[i] * sig[i])).abs() < 0.02);
        }
    }

    #[test]
    fn unit_vector_size_is_standard_reparameterisation() {
        let mu = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 2.0, 0.0]);
        let sigma = DMatrix::from_row_slice(2, 2, &[0.1, 2.0, 1.0, 0.5]);
        let eps = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, 0.3, 2.0]);
        let z = reparameterize_with_noise(&mu, &sigma, &eps, 2, 1).unwrap();
        let expected = mu.clone() + sigma.component_mul(&eps);
        assert_eq!(z, expected);
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }
}
