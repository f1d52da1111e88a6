//! KL divergence of spherical Gaussian units from the standard normal prior.

use nalgebra::DMatrix;

use crate::{Error, Result};

/// A batch of posteriors: `m` units of size `D`, one shared standard
/// deviation per unit, and a sampled code.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentCode {
    pub m: usize,
    pub d: usize,
    /// `batch × (m·D)`, unit `i` in columns `i·D..(i+1)·D`.
    pub mu: DMatrix<f64>,
    /// `batch × m` standard deviations.
    pub sigma: DMatrix<f64>,
    /// `batch × (m·D)` sample.
    pub z: DMatrix<f64>,
}

impl LatentCode {
    pub fn new(m: usize, d: usize, mu: DMatrix<f64>, sigma: DMatrix<f64>, z: DMatrix<f64>) -> Result<Self> {
        let code = LatentCode { m, d, mu, sigma, z };
        code.validate()?;
        Ok(code)
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.mu.nrows();
        if self.mu.ncols() != self.m * self.d {
            return Err(Error::DimensionMismatch {
                context: "latent means",
                expected: self.m * self.d,
                got: self.mu.ncols(),
            });
        }
        if self.sigma.shape() != (b, self.m) {
            return Err(Error::DimensionMismatch {
                context: "latent sigma",
                expected: b * self.m,
                got: self.sigma.len(),
            });
        }
        if self.z.shape() != self.mu.shape() {
            return Err(Error::DimensionMismatch {
                context: "latent sample",
                expected: self.mu.len(),
                got: self.z.len(),
            });
        }
        if let Some(s) = self.sigma.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::invalid(format!("sigma must be positive and finite, got {s}")));
        }
        Ok(())
    }

    pub fn batch(&self) -> usize {
        self.mu.nrows()
    }
}

/// Gradients of a scalar loss with respect to a [`LatentCode`]'s fields.
#[derive(Clone, Debug, PartialEq)]
pub struct CodeGradient {
    pub mu: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub z: DMatrix<f64>,
}

impl CodeGradient {
    pub fn zeros(code: &LatentCode) -> Self {
        CodeGradient {
            mu: DMatrix::zeros(code.mu.nrows(), code.mu.ncols()),
            sigma: DMatrix::zeros(code.sigma.nrows(), code.sigma.ncols()),
            z: DMatrix::zeros(code.z.nrows(), code.z.ncols()),
        }
    }

    pub fn add_scaled(&mut self, other: &CodeGradient, scale: f64) {
        self.mu += &other.mu * scale;
        self.sigma += &other.sigma * scale;
        self.z += &other.z * scale;
    }
}

/// Batch-mean KL of the vector units:
/// `½(Σμ²/D + Σᵢ(varᵢ − ln varᵢ) − m)` with `varᵢ = σᵢ²`, times `D` when
/// `keep_multiplier` is set. With the multiplier this is the exact
/// `KL(N(μ, diag) ‖ N(0, I))`.
pub fn kl_vec_spherical(code: &LatentCode, keep_multiplier: bool) -> Result<f64> {
    kl_vec_spherical_with_grad(code, keep_multiplier).map(|(v, _)| v)
}

pub fn kl_vec_spherical_with_grad(code: &LatentCode, keep_multiplier: bool) -> Result<(f64, CodeGradient)> {
    code.validate()?;
    let b = code.batch();
    let dd = code.d as f64;
    let scale = if keep_multiplier { dd } else { 1.0 };
    let mut grad = CodeGradient::zeros(code);
    let mut total = 0.0;
    for r in 0..b {
        let mut sq = 0.0;
        for c in 0..code.mu.ncols() {
            let u = code.mu[(r, c)];
            sq += u * u;
            grad.mu[(r, c)] = scale * u / (dd * b as f64);
        }
        let mut var_term = 0.0;
        for i in 0..code.m {
            let s = code.sigma[(r, i)];
            let var = s * s;
            var_term += var - var.ln();
            grad.sigma[(r, i)] = scale * (s - 1.0 / s) / b as f64;
        }
        total += 0.5 * (sq / dd + var_term - code.m as f64);
    }
    Ok((scale * total / b as f64, grad))
}
