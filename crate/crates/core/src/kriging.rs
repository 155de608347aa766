//! Ordinary kriging with a Gaussian correlation and profile-likelihood
//! hyperparameters.
//!
//! `R_ij = exp(-Σ_k η_k (x_ik - x_jk)²)`. Given η, the generalized
//! least-squares mean and process variance are substituted in closed form,
//! leaving `n/2 · ln σ̂² + 1/2 · ln|R|` to be minimized over `ln η`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::optim::{minimize_box, LbfgsConfig};

pub const DEFAULT_NUGGET: f64 = 1e-8;
pub const LOG_ETA_BOUNDS: (f64, f64) = (-6.0, 8.0);
/// Largest accepted `|R α − (y − μ)|` relative to `max |y|`.
const RESIDUAL_TOL: f64 = 1e-10;

pub fn gaussian_correlation(a: &[f64], b: &[f64], eta: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).zip(eta).map(|((a, b), e)| e * (a - b) * (a - b)).sum();
    (-s).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrigingConfig {
    pub nugget: f64,
    pub n_starts: usize,
    pub log_eta_bounds: (f64, f64),
    pub seed: u64,
}

impl Default for KrigingConfig {
    fn default() -> Self {
        Self { nugget: DEFAULT_NUGGET, n_starts: 8, log_eta_bounds: LOG_ETA_BOUNDS, seed: 0 }
    }
}

/// Serialized hyperparameters; the factorization is rebuilt from the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpParams {
    pub mu: f64,
    pub sigma2: f64,
    pub eta: Vec<f64>,
    pub nugget: f64,
}

#[derive(Debug, Clone)]
pub struct GpModel {
    pub params: GpParams,
    /// Responses were constant; `sigma2` is 0 and `eta` is nominal.
    pub degenerate: bool,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    /// `R⁻¹ (y − μ 1)`.
    alpha: DVector<f64>,
    /// `1ᵀ R⁻¹ 1`.
    one_rinv_one: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

fn correlation_matrix(x: &[Vec<f64>], eta: &[f64], nugget: f64) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 + nugget } else { gaussian_correlation(&x[i], &x[j], eta) })
}

fn check_inputs(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.is_empty() {
        return Err(Error::ShapeMismatch("kriging needs training points".into()));
    }
    let p = x[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != p) {
        return Err(Error::DimensionMismatch { expected: p, got: bad.len() });
    }
    if y.iter().any(|v| !v.is_finite()) || x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::ShapeMismatch("non-finite training data".into()));
    }
    Ok(p)
}

fn is_constant(y: &[f64]) -> bool {
    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    y.iter().all(|v| (v - y[0]).abs() <= 1e-14 * scale)
}

/// Cholesky solve with up to two refinement steps, each kept only if it shrinks
/// the residual (refinement diverges once cond(R) exceeds 1/eps).
fn refined_solve(chol: &Cholesky<f64, Dyn>, a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut x = chol.solve(b);
    let mut res = b - a * &x;
    for _ in 0..2 {
        let cand = &x + chol.solve(&res);
        let cand_res = b - a * &cand;
        if cand_res.norm() >= res.norm() {
            break;
        }
        (x, res) = (cand, cand_res);
    }
    x
}

/// Profile quantities for fixed η; `None` when the factorization fails.
struct Profile {
    chol: Cholesky<f64, Dyn>,
    mu: f64,
    sigma2: f64,
    alpha: DVector<f64>,
    one_rinv_one: f64,
}

fn profile(x: &[Vec<f64>], y: &[f64], eta: &[f64], nugget: f64) -> Option<Profile> {
    let n = x.len();
    let r = correlation_matrix(x, eta, nugget);
    let chol = r.clone().cholesky()?;
    let ones = DVector::from_element(n, 1.0);
    let yv = DVector::from_column_slice(y);
    let rinv_one = refined_solve(&chol, &r, &ones);
    let rinv_y = refined_solve(&chol, &r, &yv);
    let one_rinv_one = rinv_one.sum();
    if !(one_rinv_one > 0.0) {
        return None;
    }
    let mu = rinv_y.sum() / one_rinv_one;
    let resid = yv.add_scalar(-mu);
    // Solved directly rather than as a difference so training points are reproduced
    // to rounding even when R is nearly singular.
    let alpha = refined_solve(&chol, &r, &resid);
    // Near-singular R: the solve no longer reproduces the data and the profile
    // likelihood is rounding noise, which the optimizer would otherwise chase.
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if (&r * &alpha - &resid).amax() > RESIDUAL_TOL * scale {
        return None;
    }
    let sigma2 = (resid.dot(&alpha) / n as f64).max(0.0);
    Some(Profile { chol, mu, sigma2, alpha, one_rinv_one })
}

/// Negative profile log-likelihood (constants dropped) and its gradient in `ln η`.
pub fn neg_log_likelihood(x: &[Vec<f64>], y: &[f64], log_eta: &[f64], nugget: f64) -> Option<(f64, Vec<f64>)> {
    let n = x.len();
    let eta: Vec<f64> = log_eta.iter().map(|v| v.exp()).collect();
    let pr = profile(x, y, &eta, nugget)?;
    let sigma2 = pr.sigma2.max(f64::MIN_POSITIVE);
    let logdet: f64 = 2.0 * pr.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let f = 0.5 * n as f64 * sigma2.ln() + 0.5 * logdet;
    if !f.is_finite() {
        return None;
    }
    let rinv = pr.chol.inverse();
    let mut grad = vec![0.0; eta.len()];
    for i in 0..n {
        for j in 0..i {
            let m = rinv[(i, j)] - pr.alpha[i] * pr.alpha[j] / sigma2;
            let r = gaussian_correlation(&x[i], &x[j], &eta);
            for (k, g) in grad.iter_mut().enumerate() {
                let d = x[i][k] - x[j][k];
                // Symmetric pair counted twice, times the 1/2 prefactor.
                *g -= m * eta[k] * d * d * r;
            }
        }
    }
    Some((f, grad))
}

impl GpModel {
    /// Model with fixed hyperparameters; `mu` and `sigma2` take their profile values.
    pub fn with_eta(x: &[Vec<f64>], y: &[f64], eta: &[f64], nugget: f64) -> Result<Self> {
        let p = check_inputs(x, y)?;
        if eta.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: eta.len() });
        }
        let pr = profile(x, y, eta, nugget).ok_or(Error::IllConditioned)?;
        let degenerate = is_constant(y);
        let (mu, sigma2) = if degenerate { (y[0], 0.0) } else { (pr.mu, pr.sigma2) };
        let alpha = if degenerate { DVector::zeros(x.len()) } else { pr.alpha };
        Ok(Self {
            params: GpParams { mu, sigma2, eta: eta.to_vec(), nugget },
            degenerate,
            x: x.to_vec(),
            y: y.to_vec(),
            chol: pr.chol,
            alpha,
            one_rinv_one: pr.one_rinv_one,
        })
    }

    /// Rebuilds a model from stored hyperparameters.
    pub fn from_params(x: &[Vec<f64>], y: &[f64], params: &GpParams) -> Result<Self> {
        let mut m = Self::with_eta(x, y, &params.eta, params.nugget)?;
        m.params.mu = params.mu;
        m.params.sigma2 = params.sigma2;
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn training(&self) -> (&[Vec<f64>], &[f64]) {
        (&self.x, &self.y)
    }

    pub fn neg_log_likelihood(&self) -> Option<f64> {
        let le: Vec<f64> = self.params.eta.iter().map(|e| e.ln()).collect();
        neg_log_likelihood(&self.x, &self.y, &le, self.params.nugget).map(|v| v.0)
    }

    pub fn predict(&self, c: &[f64]) -> Prediction {
        let r = DVector::from_iterator(self.n(), self.x.iter().map(|xi| gaussian_correlation(xi, c, &self.params.eta)));
        let mean = self.params.mu + r.dot(&self.alpha);
        if self.params.sigma2 == 0.0 {
            return Prediction { mean, variance: 0.0 };
        }
        let v = self.chol.solve(&r);
        let u = 1.0 - v.sum();
        let variance = self.params.sigma2 * (1.0 - r.dot(&v) + u * u / self.one_rinv_one);
        Prediction { mean, variance: variance.max(0.0) }
    }
}

/// Space-filling starting points in the log-η box.
fn starts(p: usize, n: usize, bounds: (f64, f64), seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    for _ in 0..p {
        let mut levels: Vec<f64> = (0..n).map(|j| (j as f64 + rng.random::<f64>()) / n as f64).collect();
        for i in (1..n).rev() {
            levels.swap(i, rng.random_range(0..=i));
        }
        cols.push(levels);
    }
    (0..n).map(|i| cols.iter().map(|c| bounds.0 + (bounds.1 - bounds.0) * c[i]).collect()).collect()
}

/// Maximum-likelihood fit: multi-start bounded L-BFGS over `ln η`; best start kept.
pub fn fit_mle(x: &[Vec<f64>], y: &[f64], cfg: &KrigingConfig) -> Result<GpModel> {
    let p = check_inputs(x, y)?;
    if is_constant(y) {
        return GpModel::with_eta(x, y, &vec![1.0; p], cfg.nugget);
    }
    let (lo, hi) = (vec![cfg.log_eta_bounds.0; p], vec![cfg.log_eta_bounds.1; p]);
    let opt = LbfgsConfig { max_iter: 100, grad_tol: 1e-6, f_tol: 1e-10, ..Default::default() };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in starts(p, cfg.n_starts.max(1), cfg.log_eta_bounds, cfg.seed) {
        let Some(m) = minimize_box(|le| neg_log_likelihood(x, y, le, cfg.nugget), &s, &lo, &hi, &opt) else {
            continue;
        };
        if best.as_ref().is_none_or(|b| m.f < b.0) {
            best = Some((m.f, m.x));
        }
    }
    let (_, log_eta) = best.ok_or(Error::IllConditioned)?;
    let eta: Vec<f64> = log_eta.iter().map(|v| v.exp()).collect();
    GpModel::with_eta(x, y, &eta, cfg.nugget)
}

/// Half-width of the two-sided `level` confidence interval.
pub fn confidence_halfwidth(variance: f64, level: f64) -> f64 {
    let z = Normal::standard().inverse_cdf(0.5 * (1.0 + level));
    z * variance.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn data(seed: u64, n: usize, p: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random::<f64>()).collect()).collect();
        let y = x.iter().map(|r| (3.0 * r[0]).sin() + r.iter().skip(1).map(|v| v * v).sum::<f64>()).collect();
        (x, y)
    }

    #[test]
    fn correlation_values() {
        assert_eq!(gaussian_correlation(&[0.3, 0.4], &[0.3, 0.4], &[5.0, 2.0]), 1.0);
        assert_eq!(gaussian_correlation(&[0.0, 1.0], &[1.0, 0.0], &[0.0, 0.0]), 1.0);
        assert_relative_eq!(gaussian_correlation(&[0.0], &[1.0], &[1.0]), 0.367_879_441_171_442_3, epsilon = 1e-15);
    }

    #[test]
    fn halfwidths() {
        assert_eq!(confidence_halfwidth(0.0, 0.8), 0.0);
        assert!((confidence_halfwidth(1.0, 0.8) - 1.281552).abs() <= 1e-5);
        assert!((confidence_halfwidth(4.0, 0.8) - 2.563103).abs() <= 1e-5);
    }

    #[test]
    fn constant_responses_flagged() {
        let x = vec![vec![0.1], vec![0.5], vec![0.9]];
        let m = fit_mle(&x, &[2.5; 3], &KrigingConfig::default()).unwrap();
        assert!(m.degenerate);
        assert_eq!((m.params.mu, m.params.sigma2), (2.5, 0.0));
        assert_eq!(m.predict(&[0.3]), Prediction { mean: 2.5, variance: 0.0 });
    }

    #[test]
    fn two_point_closed_form() {
        // R = [[1, ρ], [ρ, 1]]: μ̂ = (y1 + y2)/2, σ̂² = (y1 − y2)²/(4(1 − ρ)).
        let (x, y, eta) = (vec![vec![0.2], vec![0.7]], [1.0, 3.0], [2.0]);
        let rho = (-2.0f64 * 0.25).exp();
        let m = GpModel::with_eta(&x, &y, &eta, 0.0).unwrap();
        assert_relative_eq!(m.params.mu, 2.0, epsilon = 1e-10);
        assert_relative_eq!(m.params.sigma2, 4.0 / (4.0 * (1.0 - rho)), epsilon = 1e-10);
        // Midpoint: r = (q, q), q = exp(-2·0.0625); mean = μ + q(y1 + y2 − 2μ)/(1 + ρ) = μ.
        let q = (-2.0f64 * 0.0625).exp();
        let p = m.predict(&[0.45]);
        assert_relative_eq!(p.mean, 2.0, epsilon = 1e-10);
        let rr = 2.0 * q * q / (1.0 + rho);
        let u = 1.0 - 2.0 * q / (1.0 + rho);
        let var = m.params.sigma2 * (1.0 - rr + u * u * (1.0 + rho) / 2.0);
        assert_relative_eq!(p.variance, var, epsilon = 1e-10);
        // Off-centre point with an asymmetric response.
        let a = (-2.0f64 * 0.01).exp();
        let b = (-2.0f64 * 0.16).exp();
        let det = 1.0 - rho * rho;
        let w1 = (a - rho * b) / det;
        let w2 = (b - rho * a) / det;
        let p = m.predict(&[0.3]);
        assert_relative_eq!(p.mean, 2.0 + w1 * (1.0 - 2.0) + w2 * (3.0 - 2.0), epsilon = 1e-10);
    }

    #[test]
    fn interpolates_training_points() {
        let (x, y) = data(1, 12, 2);
        let m = GpModel::with_eta(&x, &y, &[3.0, 2.0], 0.0).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let p = m.predict(xi);
            assert!((p.mean - yi).abs() <= 1e-8 * yi.abs().max(1.0));
            assert!(p.variance <= 1e-10 * m.params.sigma2);
        }
    }

    #[test]
    fn near_singular_profiles_rejected() {
        // Eight 1D points with rough responses: tiny η makes R numerically singular.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.random::<f64>()]).collect();
        let y: Vec<f64> = (0..8).map(|_| rng.random_range(1.0..3.0)).collect();
        assert!(matches!(GpModel::with_eta(&x, &y, &[0.01], 0.0), Err(Error::IllConditioned)));
        let m = fit_mle(&x, &y, &KrigingConfig { nugget: 0.0, ..Default::default() }).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((m.predict(xi).mean - yi).abs() <= 1e-8 * yi);
        }
    }

    #[test]
    fn far_field_limit() {
        let (x, y) = data(2, 8, 2);
        let m = GpModel::with_eta(&x, &y, &[50.0, 50.0], 0.0).unwrap();
        let far = [10.0, -10.0];
        assert!(x.iter().all(|xi| gaussian_correlation(xi, &far, &m.params.eta) < 1e-12));
        let p = m.predict(&far);
        assert_relative_eq!(p.mean, m.params.mu, epsilon = 1e-10);
        assert_relative_eq!(p.variance, m.params.sigma2 * (1.0 + 1.0 / m.one_rinv_one), max_relative = 1e-10);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (x, y) = data(3, 10, 3);
        let le = [0.5, -1.0, 2.0];
        let (_, g) = neg_log_likelihood(&x, &y, &le, 1e-8).unwrap();
        for k in 0..3 {
            let h = 1e-5;
            let mut a = le;
            let mut b = le;
            a[k] += h;
            b[k] -= h;
            let fd = (neg_log_likelihood(&x, &y, &a, 1e-8).unwrap().0 - neg_log_likelihood(&x, &y, &b, 1e-8).unwrap().0)
                / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-5 * (1.0 + fd.abs()), "k={k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn fit_improves_on_every_start() {
        let (x, y) = data(4, 20, 2);
        let cfg = KrigingConfig { seed: 9, ..Default::default() };
        let m = fit_mle(&x, &y, &cfg).unwrap();
        let best = m.neg_log_likelihood().unwrap();
        for s in starts(2, cfg.n_starts, cfg.log_eta_bounds, cfg.seed) {
            if let Some((f, _)) = neg_log_likelihood(&x, &y, &s, cfg.nugget) {
                assert!(best <= f + 1e-9);
            }
        }
        let again = fit_mle(&x, &y, &cfg).unwrap();
        assert_eq!(m.params, again.params);
    }

    #[test]
    fn mean_is_unbiased_over_generated_datasets() {
        // y ~ GP(μ = 2, σ² = 1, η = (3, 1)); the predictor mean should average to μ at a new point.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<Vec<f64>> = (0..10).map(|_| vec![rng.random(), rng.random()]).collect();
        let eta = [3.0, 1.0];
        let c = [0.37, 0.81];
        let mut all = x.clone();
        all.push(c.to_vec());
        let l = correlation_matrix(&all, &eta, 1e-10).cholesky().unwrap().l();
        let normal = rand_distr::StandardNormal;
        let mut errs = Vec::with_capacity(500);
        for _ in 0..500 {
            let z = DVector::from_iterator(11, (0..11).map(|_| rng.sample::<f64, _>(normal)));
            let f = (&l * z).add_scalar(2.0);
            let m = GpModel::with_eta(&x, &f.as_slice()[..10], &eta, 0.0).unwrap();
            errs.push(m.predict(&c).mean - f[10]);
        }
        let mean = errs.iter().sum::<f64>() / 500.0;
        let sd = (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / 499.0).sqrt();
        assert!(mean.abs() <= 3.0 * sd / 500f64.sqrt(), "bias {mean}, se {}", sd / 500f64.sqrt());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn permutation_invariant(seed in 0u64..500, q in (0.0f64..1.0, 0.0f64..1.0)) {
            let (x, y) = data(seed, 9, 2);
            let m = GpModel::with_eta(&x, &y, &[2.0, 5.0], 1e-8).unwrap();
            let mut idx: Vec<usize> = (0..9).collect();
            idx.reverse();
            idx.swap(0, 4);
            let xp: Vec<Vec<f64>> = idx.iter().map(|&i| x[i].clone()).collect();
            let yp: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            let mp = GpModel::with_eta(&xp, &yp, &[2.0, 5.0], 1e-8).unwrap();
            let (a, b) = (m.predict(&[q.0, q.1]), mp.predict(&[q.0, q.1]));
            prop_assert!((a.mean - b.mean).abs() <= 1e-7 * (1.0 + a.mean.abs()));
            prop_assert!((a.variance - b.variance).abs() <= 1e-7 * (1.0 + a.variance));
            prop_assert!(a.variance >= 0.0);
        }
    }
}
