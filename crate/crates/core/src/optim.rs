//! Box-constrained limited-memory BFGS.
//!
//! Two-loop recursion on the free variables, projection onto the box, and a
//! backtracking Armijo search along the projected path. Every accepted step
//! strictly decreases the objective.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when the projected gradient's infinity norm drops below this.
    pub grad_tol: f64,
    /// Stop when the relative objective decrease drops below this.
    pub f_tol: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self { memory: 6, max_iter: 200, grad_tol: 1e-7, f_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

fn projected_gradient_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lo.iter().zip(hi))
        .map(|((&x, &g), (&l, &h))| ((x - g).clamp(l, h) - x).abs())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` over the box `[lo, hi]` from `x0`.
///
/// `f` returns `None` where the objective is undefined; such points are
/// treated as infinitely bad. Returns `None` if `f` is undefined at `x0`.
pub fn minimize_box<F>(mut f: F, x0: &[f64], lo: &[f64], hi: &[f64], cfg: &LbfgsConfig) -> Option<Minimum>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let (mut fx, mut g) = f(&x)?;
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        if projected_gradient_norm(&x, &g, lo, hi) <= cfg.grad_tol {
            break;
        }
        iterations += 1;

        // Variables pinned at a bound with the gradient pushing outward stay fixed.
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect();
        let mut q: Vec<f64> = g.iter().zip(&free).map(|(g, &fr)| if fr { *g } else { 0.0 }).collect();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(q, y)| *q -= a * y);
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(q, s)| *q += (a - b) * s);
        }
        let mut d: Vec<f64> = q.iter().zip(&free).map(|(q, &fr)| if fr { -q } else { 0.0 }).collect();
        if dot(&d, &g) >= 0.0 {
            // Not a descent direction; fall back to steepest descent.
            hist.clear();
            d = g.iter().zip(&free).map(|(g, &fr)| if fr { -g } else { 0.0 }).collect();
        }
        if hist.is_empty() {
            // Unit first step of at most one box-width tenth.
            let dn = d.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let width = lo.iter().zip(hi).map(|(l, h)| h - l).fold(f64::INFINITY, f64::min);
            let cap = if width.is_finite() { 0.1 * width } else { 1.0 };
            if dn > cap {
                d.iter_mut().for_each(|v| *v *= cap / dn);
            }
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(x, d)| x + step * d).collect();
            project(&mut xn, lo, hi);
            let decrease: f64 = g.iter().zip(xn.iter().zip(&x)).map(|(g, (a, b))| g * (a - b)).sum();
            if let Some((fn_, gn)) = f(&xn) {
                if fn_.is_finite() && fn_ <= fx + 1e-4 * decrease && fn_ < fx {
                    accepted = Some((xn, fn_, gn));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else { break };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).max(f64::MIN_POSITIVE) {
            if hist.len() == cfg.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        let rel = (fx - fn_) / fx.abs().max(1.0);
        x = xn;
        fx = fn_;
        g = gn;
        if rel <= cfg.f_tol {
            break;
        }
    }
    Some(Minimum { x, f: fx, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            Some((v, vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)]))
        };
        let m = minimize_box(f, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], &LbfgsConfig::default()).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m);
    }

    #[test]
    fn active_bound() {
        // Unconstrained minimum at (3, -2); box caps the first coordinate at 1.
        let f = |x: &[f64]| Some(((x[0] - 3.0).powi(2) + (x[1] + 2.0).powi(2), vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 2.0)]));
        let m = minimize_box(f, &[0.0, 0.0], &[-1.0, -5.0], &[1.0, 5.0], &LbfgsConfig::default()).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-9 && (m.x[1] + 2.0).abs() < 1e-6);
    }

    #[test]
    fn undefined_region_is_avoided() {
        let f = |x: &[f64]| if x[0] > 2.0 { None } else { Some(((x[0] - 4.0).powi(2), vec![2.0 * (x[0] - 4.0)])) };
        let m = minimize_box(f, &[0.0], &[-10.0], &[10.0], &LbfgsConfig::default()).unwrap();
        assert!(m.x[0] <= 2.0 && m.f < 16.0);
        assert!(minimize_box(f, &[3.0], &[-10.0], &[10.0], &LbfgsConfig::default()).is_none());
    }
}
