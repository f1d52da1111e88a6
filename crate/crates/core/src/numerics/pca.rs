//! Principal component analysis by eigendecomposition of the sample
//! covariance.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaStatus {
    Ok,
    /// All rows were identical; components are an arbitrary orthonormal set.
    Degenerate,
}

#[derive(Clone, Debug)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// `k × d`, rows orthonormal.
    pub components: DMatrix<f64>,
    /// Non-increasing, length `k`.
    pub explained_variance: Vec<f64>,
    pub status: PcaStatus,
}

/// Fit the top-`k` principal directions of `data` (`N × d`).
///
/// Each component is signed so that its first entry with magnitude above
/// `1e-12` is positive.
pub fn pca_fit(data: &DMatrix<f64>, k: usize) -> Result<PcaModel> {
    let (n, d) = data.shape();
    if n < 2 {
        return Err(Error::invalid(format!("pca_fit needs at least 2 rows, got {n}")));
    }
    if k == 0 || k > d.min(n) {
        return Err(Error::invalid(format!(
            "pca_fit component count {k} outside 1..={}",
            d.min(n)
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("pca_fit input".into()));
    }

    let mean = data.row_mean().transpose();
    let mut centered = data.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let total: f64 = cov.diagonal().iter().sum();

    if total <= f64::MIN_POSITIVE {
        return Ok(PcaModel {
            mean,
            components: DMatrix::identity(k, d),
            explained_variance: vec![0.0; k],
            status: PcaStatus::Degenerate,
        });
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut components = DMatrix::zeros(k, d);
    let mut explained_variance = Vec::with_capacity(k);
    for (row, &idx) in order.iter().take(k).enumerate() {
        let v = eig.eigenvectors.column(idx);
        let sign = v
            .iter()
            .find(|x| x.abs() > 1e-12)
            .map(|x| x.signum())
            .unwrap_or(1.0);
        for j in 0..d {
            components[(row, j)] = sign * v[j];
        }
        explained_variance.push(eig.eigenvalues[idx].max(0.0));
    }

    Ok(PcaModel {
        mean,
        components,
        explained_variance,
        status: PcaStatus::Ok,
    })
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    /// `(data − mean) · componentsᵀ`.
    pub fn project(&self, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if data.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "pca_project",
                expected: self.input_dim(),
                got: data.ncols(),
            });
        }
        let mut centered = data.clone();
        for (j, mut col) in centered.column_iter_mut().enumerate() {
            col.add_scalar_mut(-self.mean[j]);
        }
        Ok(centered * self.components.transpose())
    }

    /// Map scores back to the input space: `scores · components + mean`.
    pub fn reconstruct(&self, scores: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if scores.ncols() != self.n_components() {
            return Err(Error::DimensionMismatch {
                context: "pca_reconstruct",
                expected: self.n_components(),
                got: scores.ncols(),
            });
        }
        let mut out = scores * &self.components;
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col.add_scalar_mut(self.mean[j]);
        }
        Ok(out)
    }
}

pub fn pca_project(model: &PcaModel, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    model.project(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    fn random_matrix(rng: &mut RngStream, n: usize, d: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, d, |_, _| rng.normal())
    }

    #[test]
    fn axis_aligned_component() {
        let xs = [1.0, -2.0, 3.5, 0.0, 4.0, -1.5];
        let data = DMatrix::from_fn(xs.len(), 3, |i, j| if j == 0 { xs[i] } else { 2.0 });
        let model = pca_fit(&data, 1).unwrap();
        let c = model.components.row(0);
        assert!((c[0] - 1.0).abs() < 1e-12 && c[1].abs() < 1e-12 && c[2].abs() < 1e-12);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((model.explained_variance[0] - var).abs() < 1e-10);
    }

    #[test]
    fn recovers_known_rotation() {
        let theta = 0.6_f64;
        let mut rng = RngStream::new(5);
        let n = 500;
        // Axis-aligned cloud with very different variances, then rotated.
        let raw = DMatrix::from_fn(n, 2, |_, j| rng.normal() * if j == 0 { 3.0 } else { 0.5 });
        let rot = DMatrix::from_row_slice(2, 2, &[theta.cos(), theta.sin(), -theta.sin(), theta.cos()]);
        let data = &raw * &rot;
        let model = pca_fit(&data, 2).unwrap();
        // Expected principal axes are the rows of `rot` (signed by first entry).
        for r in 0..2 {
            let mut expect = [rot[(r, 0)], rot[(r, 1)]];
            if expect[0] < 0.0 {
                expect = [-expect[0], -expect[1]];
            }
            let got = model.components.row(r);
            // Sample noise limits agreement; the exact rotation is checked
            // below on noise-free data.
            assert!((got[0] - expect[0]).abs() < 0.05, "{got} vs {expect:?}");
        }

        // Noise-free: points exactly on the rotated axes with equal counts.
        let mut rows = Vec::new();
        for t in [-2.0, -1.0, 1.0, 2.0] {
            rows.push([3.0 * t * rot[(0, 0)], 3.0 * t * rot[(0, 1)]]);
            rows.push([0.5 * t * rot[(1, 0)], 0.5 * t * rot[(1, 1)]]);
        }
        let exact = DMatrix::from_fn(rows.len(), 2, |i, j| rows[i][j]);
        let model = pca_fit(&exact, 2).unwrap();
        for r in 0..2 {
            let mut expect = [rot[(r, 0)], rot[(r, 1)]];
            if expect[0] < 0.0 {
                expect = [-expect[0], -expect[1]];
            }
            let got = model.components.row(r);
            assert!((got[0] - expect[0]).abs() < 1e-6 && (got[1] - expect[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn full_rank_round_trip() {
        let mut rng = RngStream::new(9);
        let data = random_matrix(&mut rng, 40, 5);
        let model = pca_fit(&data, 5).unwrap();
        let gram = &model.components * model.components.transpose();
        assert!((gram - DMatrix::identity(5, 5)).abs().max() < 1e-8);
        let back = model.reconstruct(&model.project(&data).unwrap()).unwrap();
        assert!((back - &data).abs().max() < 1e-8);
        for w in model.explained_variance.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn mean_row_projects_to_zero() {
        let mut rng = RngStream::new(1);
        let data = random_matrix(&mut rng, 30, 4);
        let model = pca_fit(&data, 2).unwrap();
        let mean_row = DMatrix::from_row_slice(1, 4, model.mean.as_slice());
        let p = model.project(&mean_row).unwrap();
        assert!(p.abs().max() < 1e-12);
    }

    #[test]
    fn held_out_distances_bounded_by_discarded_variance() {
        // Truncated projection never increases pairwise distance and loses at
        // most the residual component relative to the full-rank projection.
        let mut rng = RngStream::new(21);
        let scales = [4.0, 2.0, 0.1, 0.05];
        let sample = |rng: &mut RngStream, n| DMatrix::from_fn(n, 4, |_, j| rng.normal() * scales[j]);
        let model_full = pca_fit(&sample(&mut rng, 400), 4).unwrap();
        let model_2 = pca_fit(&sample(&mut rng, 400), 2).unwrap();
        let held = sample(&mut rng, 50);
        let pf = model_full.project(&held).unwrap();
        let p2 = model_2.project(&held).unwrap();
        for a in 0..held.nrows() {
            for b in (a + 1)..held.nrows() {
                let full = (pf.row(a) - pf.row(b)).norm();
                let trunc = (p2.row(a) - p2.row(b)).norm();
                let orig = (held.row(a) - held.row(b)).norm();
                assert!((full - orig).abs() < 1e-9);
                assert!(trunc <= full + 1e-9);
                let resid = (held.row(a) - held.row(b)).columns(2, 2).norm();
                assert!(full * full - trunc * trunc <= 4.0 * resid * resid + 0.05 * full * full);
            }
        }
    }

    #[test]
    fn degenerate_input_is_flagged() {
        let data = DMatrix::from_element(10, 3, 1.5);
        let model = pca_fit(&data, 2).unwrap();
        assert_eq!(model.status, PcaStatus::Degenerate);
        assert_eq!(model.explained_variance, vec![0.0, 0.0]);
        let gram = &model.components * model.components.transpose();
        assert!((gram - DMatrix::identity(2, 2)).abs().max() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let mut rng = RngStream::new(2);
        let model = pca_fit(&random_matrix(&mut rng, 10, 3), 1).unwrap();
        assert!(model.project(&DMatrix::zeros(2, 4)).is_err());
        assert!(pca_fit(&random_matrix(&mut rng, 1, 3), 1).is_err());
        assert!(pca_fit(&random_matrix(&mut rng, 10, 3), 4).is_err());
    }
}
