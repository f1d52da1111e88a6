//! Minibatch estimators of the total correlation `KL(q(z) ‖ Πᵢ q(zᵢ))`.
//!
//! Both the joint and the unit marginals of the aggregate posterior are
//! estimated from one table of log densities `E[k][l][i] = ln q(zᵢ(x_k) | x_l)`
//! for every pair of batch members `k, l` and unit `i`. The joint log density
//! of `z(x_k)` under posterior `l` is `Σᵢ E[k][l][i]`. All sums over `l` are
//! computed as stabilised log-sum-exps, and the densities stay in log space.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::TcWeighting;
use super::kl::{CodeGradient, LatentCode};
use crate::neural::{log_density_with_constants, LN_2PI};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TcEstimator {
    Minibatch,
    PerDimension,
    Discriminator,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TcEstimate {
    /// Nats.
    pub value: f64,
    pub estimator: TcEstimator,
    pub batch: usize,
    pub dataset_size: usize,
}

/// `E[k][l][i]` stored at `(k·M + l)·m + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogDensityTable {
    pub batch: usize,
    pub units: usize,
    pub values: Vec<f64>,
}

impl LogDensityTable {
    #[inline]
    pub fn get(&self, k: usize, l: usize, i: usize) -> f64 {
        self.values[(k * self.batch + l) * self.units + i]
    }

    /// Log densities over all `D` entries of each unit.
    pub fn from_code(code: &LatentCode) -> Result<Self> {
        Self::over_entries(code, 0, code.d)
    }

    /// Log densities of entry `j` of each unit only, i.e. the scalar units of
    /// slice `j`.
    pub fn from_slice(code: &LatentCode, j: usize) -> Result<Self> {
        if j >= code.d {
            return Err(Error::invalid(format!("slice {j} outside vector size {}", code.d)));
        }
        Self::over_entries(code, j, 1)
    }

    fn over_entries(code: &LatentCode, start: usize, len: usize) -> Result<Self> {
        code.validate()?;
        let (b, m, d) = (code.batch(), code.m, code.d);
        let z = row_major(&code.z);
        let mu = row_major(&code.mu);
        let w = m * d;
        let consts: Vec<(f64, f64)> = (0..b)
            .flat_map(|l| (0..m).map(move |i| (l, i)))
            .map(|(l, i)| {
                let s = code.sigma[(l, i)];
                (-0.5 * LN_2PI - s.ln(), 1.0 / (s * s))
            })
            .collect();
        let mut values = vec![0.0; b * b * m];
        for k in 0..b {
            for l in 0..b {
                for i in 0..m {
                    let off = i * d + start;
                    let (log_norm, inv_var) = consts[l * m + i];
                    values[(k * b + l) * m + i] = log_density_with_constants(
                        &z[k * w + off..k * w + off + len],
                        &mu[l * w + off..l * w + off + len],
                        log_norm,
                        inv_var,
                    );
                }
            }
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            let (k, rest) = (p / (b * m), p % (b * m));
            return Err(Error::NonFinite(format!(
                "log density of sample {k} under posterior {} unit {}",
                rest / m,
                rest % m
            )));
        }
        Ok(LogDensityTable {
            batch: b,
            units: m,
            values,
        })
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn log_weights(weighting: TcWeighting, batch: usize, dataset_size: usize) -> (f64, f64) {
    let (mm, kk) = (batch as f64, dataset_size as f64);
    match weighting {
        TcWeighting::Stratified => (-kk.ln(), ((kk - 1.0) / (kk * (mm - 1.0))).ln()),
        TcWeighting::Verbatim => (-(mm * kk).ln(), -(mm * kk).ln()),
    }
}

/// Softmax over `l` of `scores`, written into `out`; returns the log-sum-exp.
fn log_softmax_into(scores: &[f64], out: &mut [f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, s) in out.iter_mut().zip(scores) {
        *o = (s - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    max + sum.ln()
}

/// TC estimate from a log-density table, with `∂TC/∂E` in table layout.
pub fn tc_from_table(
    table: &LogDensityTable,
    dataset_size: usize,
    weighting: TcWeighting,
) -> Result<(f64, Vec<f64>)> {
    let (b, m) = (table.batch, table.units);
    if b < 2 {
        return Err(Error::invalid("total correlation needs a batch of at least 2"));
    }
    if dataset_size < 2 {
        return Err(Error::invalid("dataset size must be at least 2"));
    }
    let (w_self, w_other) = log_weights(weighting, b, dataset_size);
    let inv_b = 1.0 / b as f64;
    let mut grad = vec![0.0; table.values.len()];
    let mut scores = vec![0.0; b];
    let mut joint_soft = vec![0.0; b];
    let mut unit_soft = vec![0.0; b];
    let mut total = 0.0;
    for k in 0..b {
        for (l, s) in scores.iter_mut().enumerate() {
            let w = if l == k { w_self } else { w_other };
            let row = &table.values[(k * b + l) * m..(k * b + l + 1) * m];
            *s = row.iter().sum::<f64>() + w;
        }
        let log_joint = log_softmax_into(&scores, &mut joint_soft);
        let mut log_marginals = 0.0;
        for i in 0..m {
            for (l, s) in scores.iter_mut().enumerate() {
                let w = if l == k { w_self } else { w_other };
                *s = table.get(k, l, i) + w;
            }
            log_marginals += log_softmax_into(&scores, &mut unit_soft);
            for l in 0..b {
                grad[(k * b + l) * m + i] = inv_b * (joint_soft[l] - unit_soft[l]);
            }
        }
        total += log_joint - log_marginals;
    }
    let value = total * inv_b;
    if !value.is_finite() {
        return Err(Error::NonFinite("total correlation estimate".into()));
    }
    Ok((value, grad))
}

/// Chain `∂TC/∂E` for the entries `start..start+len` of every unit back to
/// the code, accumulating into `out`.
fn chain_table_gradient(code: &LatentCode, start: usize, len: usize, d_table: &[f64], scale: f64, out: &mut CodeGradient) {
    let (b, m, d) = (code.batch(), code.m, code.d);
    for k in 0..b {
        for l in 0..b {
            for i in 0..m {
                let g = scale * d_table[(k * b + l) * m + i];
                if g == 0.0 {
                    continue;
                }
                let s = code.sigma[(l, i)];
                let inv_var = 1.0 / (s * s);
                let mut sq = 0.0;
                for j in start..start + len {
                    let c = i * d + j;
                    let diff = code.z[(k, c)] - code.mu[(l, c)];
                    sq += diff * diff;
                    out.z[(k, c)] -= g * diff * inv_var;
                    out.mu[(l, c)] += g * diff * inv_var;
                }
                out.sigma[(l, i)] += g * (-(len as f64) / s + sq * inv_var / s);
            }
        }
    }
}

pub fn tc_minibatch(code: &LatentCode, dataset_size: usize, weighting: TcWeighting) -> Result<TcEstimate> {
    let table = LogDensityTable::from_code(code)?;
    let (value, _) = tc_from_table(&table, dataset_size, weighting)?;
    Ok(TcEstimate {
        value,
        estimator: TcEstimator::Minibatch,
        batch: code.batch(),
        dataset_size,
    })
}

pub fn tc_minibatch_with_grad(
    code: &LatentCode,
    dataset_size: usize,
    weighting: TcWeighting,
) -> Result<(TcEstimate, CodeGradient)> {
    let table = LogDensityTable::from_code(code)?;
    let (value, d_table) = tc_from_table(&table, dataset_size, weighting)?;
    let mut grad = CodeGradient::zeros(code);
    chain_table_gradient(code, 0, code.d, &d_table, 1.0, &mut grad);
    let est = TcEstimate {
        value,
        estimator: TcEstimator::Minibatch,
        batch: code.batch(),
        dataset_size,
    };
    Ok((est, grad))
}

/// Mean over entry index `j` of the scalar-unit TC of slice `j`.
pub fn tc_per_dimension(code: &LatentCode, dataset_size: usize, weighting: TcWeighting) -> Result<TcEstimate> {
    let mut sum = 0.0;
    for j in 0..code.d {
        let table = LogDensityTable::from_slice(code, j)?;
        sum += tc_from_table(&table, dataset_size, weighting)?.0;
    }
    Ok(TcEstimate {
        value: sum / code.d as f64,
        estimator: TcEstimator::PerDimension,
        batch: code.batch(),
        dataset_size,
    })
}

pub fn tc_per_dimension_with_grad(
    code: &LatentCode,
    dataset_size: usize,
    weighting: TcWeighting,
) -> Result<(TcEstimate, CodeGradient)> {
    let mut sum = 0.0;
    let mut grad = CodeGradient::zeros(code);
    let scale = 1.0 / code.d as f64;
    for j in 0..code.d {
        let table = LogDensityTable::from_slice(code, j)?;
        let (v, d_table) = tc_from_table(&table, dataset_size, weighting)?;
        sum += v;
        chain_table_gradient(code, j, 1, &d_table, scale, &mut grad);
    }
    let est = TcEstimate {
        value: sum / code.d as f64,
        estimator: TcEstimator::PerDimension,
        batch: code.batch(),
        dataset_size,
    };
    Ok((est, grad))
}

/// Outcome of evaluating the estimator with single-precision densities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnderflowReport {
    /// Fraction of per-unit entries `E[k][l][i]` whose `f32` exponential is 0.
    pub unit_underflow_fraction: f64,
    /// Fraction of joint densities `exp(Σᵢ E[k][l][i])` that are 0 in `f32`.
    pub joint_underflow_fraction: f64,
    /// TC from summing exponentiated `f32` densities and taking logs.
    pub naive_f32_tc: f64,
    /// The stabilised `f64` log-space estimate on the same code.
    pub stable_tc: f64,
}

impl UnderflowReport {
    /// The single-precision path lost the estimate while log space kept it.
    pub fn reproduces_failure(&self) -> bool {
        self.unit_underflow_fraction > 0.0 && !self.naive_f32_tc.is_finite() && self.stable_tc.is_finite()
    }
}

/// Evaluate the estimator the way a single-precision implementation that
/// exponentiates densities before summing would.
pub fn f32_underflow_check(code: &LatentCode, dataset_size: usize, weighting: TcWeighting) -> Result<UnderflowReport> {
    let table = LogDensityTable::from_code(code)?;
    let stable_tc = tc_from_table(&table, dataset_size, weighting)?.0;
    let (b, m) = (table.batch, table.units);
    let (w_self, w_other) = log_weights(weighting, b, dataset_size);
    let (w_self, w_other) = (w_self.exp() as f32, w_other.exp() as f32);
    let mut unit_zero = 0usize;
    let mut joint_zero = 0usize;
    let mut total = 0.0f32;
    for k in 0..b {
        let mut joint = 0.0f32;
        let mut marg = vec![0.0f32; m];
        for l in 0..b {
            let w = if l == k { w_self } else { w_other };
            let mut p_joint = 1.0f32;
            for i in 0..m {
                let p = (table.get(k, l, i) as f32).exp();
                if p == 0.0 {
                    unit_zero += 1;
                }
                p_joint *= p;
                marg[i] += w * p;
            }
            if p_joint == 0.0 {
                joint_zero += 1;
            }
            joint += w * p_joint;
        }
        total += joint.ln() - marg.iter().map(|p| p.ln()).sum::<f32>();
    }
    let naive = total as f64 / b as f64;
    Ok(UnderflowReport {
        unit_underflow_fraction: unit_zero as f64 / (b * b * m) as f64,
        joint_underflow_fraction: joint_zero as f64 / (b * b) as f64,
        naive_f32_tc: naive,
        stable_tc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::diag_gaussian_log_density;
    use crate::numerics::{finite_difference_gradient, max_relative_error, RngStream};

    fn random_code(rng: &mut RngStream, b: usize, m: usize, d: usize) -> LatentCode {
        let mu = DMatrix::from_fn(b, m * d, |_, _| rng.normal());
        let sigma = DMatrix::from_fn(b, m, |_, _| rng.uniform_in(0.5, 1.5));
        let z = DMatrix::from_fn(b, m * d, |r, c| mu[(r, c)] + sigma[(r, c / d)] * rng.normal());
        LatentCode::new(m, d, mu, sigma, z).unwrap()
    }

    #[test]
    fn table_entries_are_unit_log_densities() {
        let mut rng = RngStream::new(1);
        let code = random_code(&mut rng, 3, 2, 4);
        let t = LogDensityTable::from_code(&code).unwrap();
        let z: Vec<f64> = (4..8).map(|c| code.z[(2, c)]).collect();
        let mu: Vec<f64> = (4..8).map(|c| code.mu[(0, c)]).collect();
        assert_eq!(t.get(2, 0, 1), diag_gaussian_log_density(&z, &mu, code.sigma[(0, 1)]));
    }

    #[test]
    fn verbatim_weighting_offsets_by_log_mk() {
        let mut rng = RngStream::new(2);
        let code = random_code(&mut rng, 8, 3, 2);
        let (mm, kk) = (8.0f64, 100.0f64);
        let t = LogDensityTable::from_code(&code).unwrap();
        // With uniform weights the marginal normalisers cancel up to (m-1)·ln(MK).
        let (v, _) = tc_from_table(&t, 100, TcWeighting::Verbatim).unwrap();
        let mut direct = 0.0;
        for k in 0..8 {
            let lse = |f: &dyn Fn(usize) -> f64| {
                let xs: Vec<f64> = (0..8).map(f).collect();
                let mx = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                mx + xs.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
            };
            direct += lse(&|l| (0..3).map(|i| t.get(k, l, i)).sum());
            for i in 0..3 {
                direct -= lse(&|l| t.get(k, l, i));
            }
        }
        direct /= 8.0;
        assert!((v - (direct + 2.0 * (mm * kk).ln())).abs() < 1e-10);
    }

    #[test]
    fn single_unit_has_zero_tc() {
        let mut rng = RngStream::new(3);
        let code = random_code(&mut rng, 6, 1, 3);
        let v = tc_minibatch(&code, 50, TcWeighting::Stratified).unwrap().value;
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn per_dimension_equals_minibatch_at_d1() {
        let mut rng = RngStream::new(4);
        let code = random_code(&mut rng, 16, 4, 1);
        for w in [TcWeighting::Stratified, TcWeighting::Verbatim] {
            let a = tc_minibatch_with_grad(&code, 1000, w).unwrap();
            let b = tc_per_dimension_with_grad(&code, 1000, w).unwrap();
            assert_eq!(a.0.value.to_bits(), b.0.value.to_bits());
            assert_eq!(a.1, b.1);
        }
    }

    fn flatten(code: &LatentCode) -> Vec<f64> {
        code.z
            .iter()
            .chain(code.mu.iter())
            .chain(code.sigma.iter())
            .copied()
            .collect()
    }

    fn unflatten(t: &[f64], b: usize, m: usize, d: usize) -> LatentCode {
        let w = b * m * d;
        LatentCode {
            m,
            d,
            z: DMatrix::from_column_slice(b, m * d, &t[..w]),
            mu: DMatrix::from_column_slice(b, m * d, &t[w..2 * w]),
            sigma: DMatrix::from_column_slice(b, m, &t[2 * w..]),
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = RngStream::new(5);
        let (b, m, d) = (5, 3, 2);
        let code = random_code(&mut rng, b, m, d);
        let theta = flatten(&code);
        for w in [TcWeighting::Stratified, TcWeighting::Verbatim] {
            let (_, g) = tc_minibatch_with_grad(&code, 40, w).unwrap();
            let analytic: Vec<f64> = g.z.iter().chain(g.mu.iter()).chain(g.sigma.iter()).copied().collect();
            let numeric = finite_difference_gradient(
                |t| tc_minibatch(&unflatten(t, b, m, d), 40, w).unwrap().value,
                &theta,
                1e-6,
            )
            .unwrap();
            assert!(max_relative_error(&analytic, &numeric) < 1e-5);

            let (_, g) = tc_per_dimension_with_grad(&code, 40, w).unwrap();
            let analytic: Vec<f64> = g.z.iter().chain(g.mu.iter()).chain(g.sigma.iter()).copied().collect();
            let numeric = finite_difference_gradient(
                |t| tc_per_dimension(&unflatten(t, b, m, d), 40, w).unwrap().value,
                &theta,
                1e-6,
            )
            .unwrap();
            assert!(max_relative_error(&analytic, &numeric) < 1e-5);
        }
    }

    #[test]
    fn prior_posteriors_give_near_zero_tc() {
        let mut rng = RngStream::new(6);
        let (b, m, d) = (512, 3, 2);
        let mu = DMatrix::zeros(b, m * d);
        let sigma = DMatrix::from_element(b, m, 1.0);
        let z = DMatrix::from_fn(b, m * d, |_, _| rng.normal());
        let code = LatentCode::new(m, d, mu, sigma, z).unwrap();
        assert!(tc_minibatch(&code, 10_000, TcWeighting::Stratified).unwrap().value.abs() < 0.05);
        assert!(tc_per_dimension(&code, 10_000, TcWeighting::Stratified).unwrap().value.abs() < 0.05);
    }

    #[test]
    fn large_d_underflows_in_single_precision() {
        let mut rng = RngStream::new(7);
        let (b, m, d) = (16, 10, 64);
        let mu = DMatrix::from_fn(b, m * d, |_, _| rng.normal());
        let sigma = DMatrix::from_element(b, m, 0.5);
        let z = DMatrix::from_fn(b, m * d, |r, c| mu[(r, c)] + 0.5 * rng.normal());
        let code = LatentCode::new(m, d, mu, sigma, z).unwrap();
        let rep = f32_underflow_check(&code, 10_000, TcWeighting::Stratified).unwrap();
        assert!(rep.reproduces_failure(), "{rep:?}");
        assert!(rep.unit_underflow_fraction > 0.5);

        // Small codes stay representable in single precision.
        let small = random_code(&mut rng, 16, 2, 1);
        let rep = f32_underflow_check(&small, 10_000, TcWeighting::Stratified).unwrap();
        assert!(!rep.reproduces_failure());
        assert!((rep.naive_f32_tc - rep.stable_tc).abs() < 1e-3);
    }
}
