use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub const DEFAULT_LR: f64 = 1e-4;

    pub fn new(len: usize, lr: f64) -> Self {
        AdamState {
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                context: "adam_step",
                expected: self.m.len(),
                got: grad.len().min(params.len()),
            });
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient entry {i}")));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {i} after Adam step {}", self.step)));
        }
        Ok(())
    }
}

pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64]) -> Result<()> {
    state.update(params, grad)
}

/// Rescale `grad` in place so its Euclidean norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [&mut Vec<f64>], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm.is_finite() {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            for v in g.iter_mut() {
                *v *= scale;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::new(3, 1e-3);
        let mut p = vec![1.0, -2.0, 3.0];
        s.update(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        for g in [0.3, -250.0] {
            let mut s = AdamState::new(1, 1e-4);
            let mut p = vec![0.5];
            s.update(&mut p, &[g]).unwrap();
            assert!(((0.5 - p[0]) - 1e-4 * g.signum()).abs() < 1e-9);
        }
    }

    #[test]
    fn quadratic_bowl_converges() {
        let target = [3.0, -1.0, 0.25];
        let mut s = AdamState::new(3, 1e-2);
        let mut p = vec![0.0; 3];
        let mut steps = 0;
        while steps < 5000 {
            let g: Vec<f64> = p.iter().zip(&target).map(|(x, t)| x - t).collect();
            s.update(&mut p, &g).unwrap();
            steps += 1;
            if p.iter().zip(&target).all(|(x, t)| (x - t).abs() < 1e-4) {
                break;
            }
        }
        assert!(p.iter().zip(&target).all(|(x, t)| (x - t).abs() < 1e-4), "{p:?} after {steps}");
    }

    #[test]
    fn rejects_non_finite_gradient() {
        let mut s = AdamState::new(2, 1e-3);
        let mut p = vec![0.0; 2];
        assert!(s.update(&mut p, &[1.0, f64::NAN]).is_err());
        assert_eq!(s.step, 0);
    }

    #[test]
    fn clipping() {
        let mut a = vec![3.0, 0.0];
        let mut b = vec![4.0];
        let n = clip_grad_norm(&mut [&mut a, &mut b], 1.0);
        assert_eq!(n, 5.0);
        assert!((a[0] - 0.6).abs() < 1e-15 && (b[0] - 0.8).abs() < 1e-15);
    }
}
