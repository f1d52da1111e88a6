//! Limited-memory BFGS with a backtracking Armijo line search.

#[derive(Clone, Copy, Debug)]
pub struct LbfgsConfig {
    pub max_iter: usize,
    pub history: usize,
    /// Stop once the infinity norm of the gradient falls below this.
    pub gtol: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            max_iter: 100,
            history: 10,
            gtol: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Minimise `f`, which writes its gradient into the second argument and
/// returns the objective value.
pub fn lbfgs<F>(mut f: F, x0: &[f64], cfg: LbfgsConfig) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut s_hist: Vec<Vec<f64>> = Vec::with_capacity(cfg.history);
    let mut y_hist: Vec<Vec<f64>> = Vec::with_capacity(cfg.history);
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut alpha_buf = vec![0.0; cfg.history];

    let mut iterations = 0;
    while iterations < cfg.max_iter {
        if inf_norm(&g) < cfg.gtol {
            break;
        }
        // Two-loop recursion.
        dir.copy_from_slice(&g);
        let hist = s_hist.len();
        for i in (0..hist).rev() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let a = rho * dot(&s_hist[i], &dir);
            alpha_buf[i] = a;
            for (d, y) in dir.iter_mut().zip(&y_hist[i]) {
                *d -= a * y;
            }
        }
        let gamma = if hist > 0 {
            dot(&s_hist[hist - 1], &y_hist[hist - 1]) / dot(&y_hist[hist - 1], &y_hist[hist - 1])
        } else {
            1.0 / dot(&g, &g).sqrt().max(1e-300)
        };
        for d in dir.iter_mut() {
            *d *= gamma;
        }
        for i in 0..hist {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let b = rho * dot(&y_hist[i], &dir);
            for (d, s) in dir.iter_mut().zip(&s_hist[i]) {
                *d += (alpha_buf[i] - b) * s;
            }
        }
        for d in dir.iter_mut() {
            *d = -*d;
        }
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            // Not a descent direction: restart from steepest descent.
            s_hist.clear();
            y_hist.clear();
            let scale = 1.0 / dot(&g, &g).sqrt().max(1e-300);
            for (d, gi) in dir.iter_mut().zip(&g) {
                *d = -gi * scale;
            }
            slope = dot(&g, &dir);
        }

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + step * dir[i];
            }
            let f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                if dot(&s, &y) > 1e-12 * dot(&y, &y).max(1e-300) {
                    if s_hist.len() == cfg.history {
                        s_hist.remove(0);
                        y_hist.remove(0);
                    }
                    s_hist.push(s);
                    y_hist.push(y);
                }
                x.copy_from_slice(&x_new);
                g.copy_from_slice(&g_new);
                fx = f_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        if !accepted {
            break;
        }
    }
    let grad_inf_norm = inf_norm(&g);
    LbfgsResult {
        x,
        value: fx,
        grad_inf_norm,
        iterations,
        converged: grad_inf_norm < cfg.gtol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let res = lbfgs(
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            },
            &[-1.2, 1.0],
            LbfgsConfig {
                max_iter: 500,
                ..Default::default()
            },
        );
        assert!(res.converged, "{res:?}");
        assert!((res.x[0] - 1.0).abs() < 1e-5 && (res.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let scales = [1.0, 10.0, 1000.0];
        let res = lbfgs(
            |x, g| {
                let mut f = 0.0;
                for i in 0..3 {
                    g[i] = scales[i] * (x[i] - i as f64);
                    f += 0.5 * scales[i] * (x[i] - i as f64).powi(2);
                }
                f
            },
            &[5.0, 5.0, 5.0],
            LbfgsConfig::default(),
        );
        assert!(res.converged);
        for i in 0..3 {
            assert!((res.x[i] - i as f64).abs() < 1e-6);
        }
    }
}
