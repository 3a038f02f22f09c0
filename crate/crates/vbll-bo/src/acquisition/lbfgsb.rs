//! Projected limited-memory quasi-Newton ascent over a box.
//!
//! Two-loop L-BFGS directions with projection onto the bounds and a
//! backtracking Armijo line search along the projected arc. Good enough for
//! smooth low-dimensional acquisition surfaces when combined with
//! multistart; not a full Cauchy-point active-set method.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iters: usize,
    /// Convergence threshold on the infinity norm of the projected gradient.
    pub grad_tol: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions { memory: 8, max_iters: 100, grad_tol: 1e-8, max_backtracks: 30 }
    }
}

fn clip(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Gradient components that would push outside an active bound are zeroed.
fn projected_gradient(x: &[f64], g: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(bounds)
        .map(|((&xi, &gi), &(lo, hi))| {
            if (xi <= lo && gi < 0.0) || (xi >= hi && gi > 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

/// Maximize `f` (which returns value and ascent gradient) inside `bounds`
/// starting from `x0`. Returns the best iterate and its value.
pub fn maximize_boxed<F>(mut f: F, x0: &[f64], bounds: &[(f64, f64)], opts: &LbfgsOptions) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    assert_eq!(bounds.len(), n);
    let mut x = x0.to_vec();
    clip(&mut x, bounds);
    let (mut fx, mut grad) = f(&x);
    if !fx.is_finite() {
        return (x, fx);
    }

    // History of (step, gradient-difference) pairs in minimization form.
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::new();

    for _ in 0..opts.max_iters {
        let pg = projected_gradient(&x, &grad, bounds);
        let pg_norm = pg.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if pg_norm < opts.grad_tol {
            break;
        }

        // Two-loop recursion on -f; the resulting descent direction for -f
        // is an ascent direction for f.
        let gmin: Vec<f64> = grad.iter().map(|v| -v).collect();
        let mut q = gmin.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y) in hist.iter().rev() {
            let sy: f64 = s.iter().zip(y).map(|(a, b)| a * b).sum();
            let a = s.iter().zip(&q).map(|(si, qi)| si * qi).sum::<f64>() / sy;
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push((a, sy));
        }
        if let Some((s, y)) = hist.back() {
            let sy: f64 = s.iter().zip(y).map(|(a, b)| a * b).sum();
            let yy: f64 = y.iter().map(|v| v * v).sum();
            let gamma = sy / yy.max(1e-300);
            for qi in q.iter_mut() {
                *qi *= gamma;
            }
        }
        for ((s, y), (a, sy)) in hist.iter().zip(alphas.iter().rev()) {
            let b = y.iter().zip(&q).map(|(yi, qi)| yi * qi).sum::<f64>() / sy;
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        // Ascent direction for f.
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        // Guard against a non-ascent direction.
        let dg: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
        if !dg.is_finite() || dg <= 0.0 {
            dir = pg.clone();
        }

        // Backtracking Armijo search along the projected arc.
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..opts.max_backtracks {
            let mut cand: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + alpha * di).collect();
            clip(&mut cand, bounds);
            let step: Vec<f64> = cand.iter().zip(&x).map(|(a, b)| a - b).collect();
            let step_norm: f64 = step.iter().map(|v| v * v).sum::<f64>();
            if step_norm == 0.0 {
                break;
            }
            let predicted: f64 = step.iter().zip(&grad).map(|(s, g)| s * g).sum();
            let (fc, gc) = f(&cand);
            if fc.is_finite() && fc >= fx + 1e-4 * predicted.max(0.0) && fc > fx - 1e-16 {
                // Accept; update curvature history.
                let ydiff: Vec<f64> = gc.iter().zip(&grad).map(|(a, b)| -(a - b)).collect();
                let sy: f64 = step.iter().zip(&ydiff).map(|(a, b)| a * b).sum();
                if sy > 1e-12 {
                    hist.push_back((step, ydiff));
                    if hist.len() > opts.memory {
                        hist.pop_front();
                    }
                }
                x = cand;
                fx = fc;
                grad = gc;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (x, fx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_interior_maximum() {
        let c = [0.3, 0.7, 0.5];
        let f = |x: &[f64]| {
            let v: f64 = x.iter().zip(&c).map(|(a, b)| -(a - b) * (a - b)).sum();
            let g: Vec<f64> = x.iter().zip(&c).map(|(a, b)| -2.0 * (a - b)).collect();
            (v, g)
        };
        let bounds = vec![(0.0, 1.0); 3];
        let (x, v) = maximize_boxed(f, &[0.9, 0.1, 0.2], &bounds, &LbfgsOptions::default());
        for (a, b) in x.iter().zip(&c) {
            assert!((a - b).abs() <= 1e-6);
        }
        assert!(v.abs() <= 1e-10);
    }

    #[test]
    fn quadratic_maximum_outside_box_projects_to_face() {
        let c = [1.5, 0.5];
        let f = |x: &[f64]| {
            let v: f64 = x.iter().zip(&c).map(|(a, b)| -(a - b) * (a - b)).sum();
            let g: Vec<f64> = x.iter().zip(&c).map(|(a, b)| -2.0 * (a - b)).collect();
            (v, g)
        };
        let bounds = vec![(0.0, 1.0); 2];
        let (x, _) = maximize_boxed(f, &[0.2, 0.2], &bounds, &LbfgsOptions::default());
        assert!((x[0] - 1.0).abs() <= 1e-8);
        assert!((x[1] - 0.5).abs() <= 1e-6);
    }

    #[test]
    fn linear_objective_reaches_corner() {
        let f = |x: &[f64]| (x[0] - 2.0 * x[1], vec![1.0, -2.0]);
        let bounds = vec![(0.0, 1.0); 2];
        let (x, _) = maximize_boxed(f, &[0.5, 0.5], &bounds, &LbfgsOptions::default());
        assert!((x[0] - 1.0).abs() <= 1e-10);
        assert!(x[1].abs() <= 1e-10);
    }
}
