use nalgebra::DMatrix;

use crate::numerics::{pca_fit, PcaStatus};
use crate::synthdata::{FactorGrid, Side};
use crate::{Error, Result};

/// Codes of `N` samples with their factor tuples. Unit `i` occupies columns
/// `i·D..(i+1)·D`.
#[derive(Clone, Debug, PartialEq)]
pub struct RepresentationMatrix {
    pub codes: DMatrix<f64>,
    pub factors: Vec<Vec<usize>>,
    pub m: usize,
    pub d: usize,
    pub side: Side,
}

impl RepresentationMatrix {
    pub fn new(codes: DMatrix<f64>, factors: Vec<Vec<usize>>, m: usize, d: usize, side: Side) -> Result<Self> {
        let rep = RepresentationMatrix {
            codes,
            factors,
            m,
            d,
            side,
        };
        rep.validate()?;
        Ok(rep)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.d == 0 || self.codes.ncols() != self.m * self.d {
            return Err(Error::DimensionMismatch {
                context: "representation layout",
                expected: self.m * self.d,
                got: self.codes.ncols(),
            });
        }
        if self.codes.nrows() != self.factors.len() {
            return Err(Error::DimensionMismatch {
                context: "representation rows",
                expected: self.codes.nrows(),
                got: self.factors.len(),
            });
        }
        if let Some(w) = self.factors.windows(2).find(|w| w[0].len() != w[1].len()) {
            return Err(Error::invalid(format!(
                "factor tuples of lengths {} and {}",
                w[0].len(),
                w[1].len()
            )));
        }
        if self.codes.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("representation codes".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.codes.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.nrows() == 0
    }

    pub fn n_factors(&self) -> usize {
        self.factors.first().map_or(0, |t| t.len())
    }

    pub fn factor_column(&self, f: usize) -> Vec<usize> {
        self.factors.iter().map(|t| t[f]).collect()
    }

    pub fn check_grid(&self, grid: &FactorGrid) -> Result<()> {
        for t in &self.factors {
            grid.check_tuple(t)?;
        }
        Ok(())
    }

    /// Rows `idx` as a new matrix on the same side.
    pub fn select(&self, idx: &[usize]) -> Self {
        RepresentationMatrix {
            codes: self.codes.select_rows(idx),
            factors: idx.iter().map(|&i| self.factors[i].clone()).collect(),
            m: self.m,
            d: self.d,
            side: self.side,
        }
    }

    pub fn with_codes(&self, codes: DMatrix<f64>, m: usize, d: usize) -> Result<Self> {
        RepresentationMatrix::new(codes, self.factors.clone(), m, d, self.side)
    }
}

/// Replace every unit block by its first principal component score, fitted
/// on the training side and applied to both. Units with zero training
/// variance become zero columns and are reported as degenerate. Identity when
/// `D = 1`.
pub fn pca_postprocess(
    train: &RepresentationMatrix,
    test: &RepresentationMatrix,
) -> Result<(RepresentationMatrix, RepresentationMatrix, Vec<PcaStatus>)> {
    if (train.m, train.d) != (test.m, test.d) {
        return Err(Error::invalid("train and test representations have different layouts"));
    }
    if train.d == 1 {
        return Ok((train.clone(), test.clone(), vec![PcaStatus::Ok; train.m]));
    }
    let (m, d) = (train.m, train.d);
    let mut tr = DMatrix::zeros(train.len(), m);
    let mut te = DMatrix::zeros(test.len(), m);
    let mut status = Vec::with_capacity(m);
    for i in 0..m {
        let block = train.codes.columns(i * d, d).into_owned();
        let model = pca_fit(&block, 1)?;
        status.push(model.status);
        if model.status == PcaStatus::Degenerate {
            log::warn!("unit {i} has zero variance on the training side");
            continue;
        }
        tr.column_mut(i).copy_from(&model.project(&block)?.column(0));
        let block_te = test.codes.columns(i * d, d).into_owned();
        te.column_mut(i).copy_from(&model.project(&block_te)?.column(0));
    }
    Ok((train.with_codes(tr, m, 1)?, test.with_codes(te, m, 1)?, status))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{pearson_correlation, RngStream};

    fn rep(codes: DMatrix<f64>, m: usize, d: usize) -> RepresentationMatrix {
        let n = codes.nrows();
        RepresentationMatrix::new(codes, vec![vec![0]; n], m, d, Side::Train).unwrap()
    }

    #[test]
    fn scalar_units_pass_through() {
        let mut rng = RngStream::new(1);
        let r = rep(DMatrix::from_fn(20, 3, |_, _| rng.normal()), 3, 1);
        let (a, b, _) = pca_postprocess(&r, &r).unwrap();
        assert_eq!(a, r);
        assert_eq!(b, r);
    }

    #[test]
    fn rank_one_blocks_recover_signal() {
        let mut rng = RngStream::new(2);
        let n = 200;
        let s: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let v = [0.3, -0.8, 0.52];
        let codes = DMatrix::from_fn(n, 3, |r, c| s[r] * v[c] + 4.0);
        let r = rep(codes, 1, 3);
        let (a, _, status) = pca_postprocess(&r, &r).unwrap();
        assert_eq!(status, vec![PcaStatus::Ok]);
        let col: Vec<f64> = a.codes.column(0).iter().copied().collect();
        assert!(pearson_correlation(&col, &s).unwrap().abs() > 0.999);
        let (twice, _, _) = pca_postprocess(&a, &a).unwrap();
        assert_eq!(twice, a);
    }

    #[test]
    fn constant_unit_becomes_zero_column() {
        let mut rng = RngStream::new(3);
        let codes = DMatrix::from_fn(10, 4, |_, c| if c < 2 { 1.5 } else { rng.normal() });
        let r = rep(codes, 2, 2);
        let (a, _, status) = pca_postprocess(&r, &r).unwrap();
        assert_eq!(status[0], PcaStatus::Degenerate);
        assert!(a.codes.column(0).iter().all(|&v| v == 0.0));
    }
}
