use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::metrics::RepresentationMatrix;
use crate::numerics::RngStream;
use crate::{Error, Result};

pub const MAX_MIX_ATTEMPTS: u64 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    None,
    Shifted,
    Matrix,
    MatrixShifted,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 4] = [
        CorruptionKind::None,
        CorruptionKind::Shifted,
        CorruptionKind::Matrix,
        CorruptionKind::MatrixShifted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorruptionKind::None => "ideal",
            CorruptionKind::Shifted => "shifted",
            CorruptionKind::Matrix => "matrix",
            CorruptionKind::MatrixShifted => "matrix_shifted",
        }
    }

    fn shifts(self) -> bool {
        matches!(self, CorruptionKind::Shifted | CorruptionKind::MatrixShifted)
    }

    fn mixes(self) -> bool {
        matches!(self, CorruptionKind::Matrix | CorruptionKind::MatrixShifted)
    }
}

/// Affine maps `y = αx + β` that differ between train and test, and a
/// random well-conditioned mixing matrix shared by both sides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub alpha_train: f64,
    pub beta_train: f64,
    pub alpha_test: f64,
    pub beta_test: f64,
    pub seed: u64,
    pub max_condition: f64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        CorruptionSpec {
            kind: CorruptionKind::None,
            alpha_train: 1.0,
            beta_train: 0.0,
            alpha_test: 3.0,
            beta_test: -1.0,
            seed: 0,
            max_condition: 100.0,
        }
    }
}

impl CorruptionSpec {
    pub fn with_kind(&self, kind: CorruptionKind) -> Self {
        CorruptionSpec { kind, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let params = [self.alpha_train, self.beta_train, self.alpha_test, self.beta_test];
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("corruption parameters must be finite"));
        }
        if self.kind.shifts() && (self.alpha_train, self.beta_train) == (self.alpha_test, self.beta_test) {
            return Err(Error::invalid("shifted corruption needs different train and test maps"));
        }
        if !(self.max_condition >= 1.0) {
            return Err(Error::invalid(format!(
                "max_condition must be at least 1, got {}",
                self.max_condition
            )));
        }
        Ok(())
    }
}

/// Gaussian `n × n` matrix with entry variance `1/n`, redrawn until its
/// condition number is at most `max_condition` and `|det| > 1e-8`.
pub fn mix_matrix(n: usize, seed: u64, max_condition: f64) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::invalid("mixing matrix needs a positive size"));
    }
    let root = RngStream::new(seed);
    let scale = 1.0 / (n as f64).sqrt();
    for attempt in 0..MAX_MIX_ATTEMPTS {
        let mut rng = root.child_indexed("mix", attempt);
        let m = DMatrix::from_fn(n, n, |_, _| rng.normal() * scale);
        let sv = m.singular_values();
        let (hi, lo) = (sv.max(), sv.min());
        if lo > 0.0 && hi / lo <= max_condition && m.determinant().abs() > 1e-8 {
            return Ok(m);
        }
    }
    Err(Error::invalid(format!(
        "no {n}x{n} matrix with condition number <= {max_condition} in {MAX_MIX_ATTEMPTS} draws"
    )))
}

fn affine(rep: &RepresentationMatrix, alpha: f64, beta: f64) -> Result<RepresentationMatrix> {
    rep.with_codes(rep.codes.map(|v| alpha * v + beta), rep.m, rep.d)
}

fn mixed(rep: &RepresentationMatrix, mix: &DMatrix<f64>) -> Result<RepresentationMatrix> {
    rep.with_codes(&rep.codes * mix, rep.m, rep.d)
}

/// Corrupt a train/test pair. Matrix kinds right-multiply both sides by the
/// same mixing matrix; shifted kinds then apply the side-specific maps.
pub fn corrupt(
    train: &RepresentationMatrix,
    test: &RepresentationMatrix,
    spec: &CorruptionSpec,
) -> Result<(RepresentationMatrix, RepresentationMatrix)> {
    spec.validate()?;
    if (train.m, train.d) != (test.m, test.d) {
        return Err(Error::invalid("train and test representations have different layouts"));
    }
    let (mut tr, mut te) = (train.clone(), test.clone());
    if spec.kind.mixes() {
        let mix = mix_matrix(train.codes.ncols(), spec.seed, spec.max_condition)?;
        tr = mixed(&tr, &mix)?;
        te = mixed(&te, &mix)?;
    }
    if spec.kind.shifts() {
        tr = affine(&tr, spec.alpha_train, spec.beta_train)?;
        te = affine(&te, spec.alpha_test, spec.beta_test)?;
    }
    Ok((tr, te))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::Side;

    fn rep(n: usize, cols: usize, seed: u64, side: Side) -> RepresentationMatrix {
        let mut rng = RngStream::new(seed);
        let codes = DMatrix::from_fn(n, cols, |_, _| rng.normal());
        RepresentationMatrix::new(codes, vec![vec![0]; n], cols, 1, side).unwrap()
    }

    #[test]
    fn none_is_identity() {
        let (a, b) = (rep(10, 3, 1, Side::Train), rep(8, 3, 2, Side::Test));
        let (x, y) = corrupt(&a, &b, &CorruptionSpec::default()).unwrap();
        assert_eq!((x, y), (a, b));
    }

    #[test]
    fn shift_uses_side_specific_maps() {
        let (a, b) = (rep(10, 3, 1, Side::Train), rep(8, 3, 2, Side::Test));
        let spec = CorruptionSpec::default().with_kind(CorruptionKind::Shifted);
        let (x, y) = corrupt(&a, &b, &spec).unwrap();
        assert_eq!(x, a);
        assert_eq!(y.codes, b.codes.map(|v| 3.0 * v - 1.0));
        let same = CorruptionSpec {
            alpha_test: 1.0,
            beta_test: 0.0,
            ..spec
        };
        assert!(corrupt(&a, &b, &same).is_err());
    }

    #[test]
    fn mix_is_conditioned_and_reproducible() {
        for n in [1, 6, 24] {
            let m = mix_matrix(n, 7, 100.0).unwrap();
            let sv = m.singular_values();
            assert!(sv.max() / sv.min() <= 100.0);
            assert!(m.determinant().abs() > 1e-8);
            assert_eq!(m, mix_matrix(n, 7, 100.0).unwrap());
        }
        assert!(mix_matrix(30, 0, 1.0).is_err());
    }

    #[test]
    fn matrix_kind_shares_the_mix_and_inverts() {
        let (a, b) = (rep(10, 4, 1, Side::Train), rep(8, 4, 2, Side::Test));
        let spec = CorruptionSpec {
            seed: 3,
            ..CorruptionSpec::default().with_kind(CorruptionKind::Matrix)
        };
        let (x, y) = corrupt(&a, &b, &spec).unwrap();
        let inv = mix_matrix(4, 3, 100.0).unwrap().try_inverse().unwrap();
        assert!((&x.codes * &inv - &a.codes).amax() < 1e-10);
        assert!((&y.codes * &inv - &b.codes).amax() < 1e-10);
    }

    #[test]
    fn matrix_shifted_mixes_then_shifts() {
        let (a, b) = (rep(5, 2, 1, Side::Train), rep(5, 2, 2, Side::Test));
        let base = CorruptionSpec::default();
        let (_, y) = corrupt(&a, &b, &base.with_kind(CorruptionKind::MatrixShifted)).unwrap();
        let (_, ym) = corrupt(&a, &b, &base.with_kind(CorruptionKind::Matrix)).unwrap();
        assert_eq!(y.codes, ym.codes.map(|v| 3.0 * v - 1.0));
    }
}
