//! Variance-based global sensitivity: main-effect and two-factor Sobol'
//! indices by pick-freeze Monte Carlo over quasi-random points.
//!
//! Two independent point sets `A` and `B` come from the first and second
//! halves of a `2p`-dimensional Sobol' sequence under a seeded random digital
//! shift. For a subset `u` of inputs, `A_B^u` takes the columns in `u` from
//! `B` and the rest from `A`; then
//!
//! ```text
//! V_u ~ mean_j f(B_j) * (f(A_B^u_j) - f(A_j))
//! ```
//!
//! estimates the closed variance `Var(E[f | x_u])`. Main effects use `u = {i}`
//! and the pair interaction is the closed pair variance minus both main effects.

pub mod sequence;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{DesignPoint, DesignSpace, NormalizedDesign};
use crate::error::{Error, Result};

pub use sequence::{sobol_points, SobolSequence};

/// Two-sided normal quantile for the reported confidence intervals.
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SobolResult {
    pub names: Vec<String>,
    pub f0: f64,
    pub variance: f64,
    pub main: Vec<f64>,
    pub main_ci: Vec<f64>,
    /// Symmetric `p x p`; the diagonal is unused and left at zero.
    pub pair: Vec<Vec<f64>>,
    pub pair_ci: Vec<Vec<f64>>,
    pub n: usize,
}

impl SobolResult {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("parameter\tindex\tci\n");
        for (i, name) in self.names.iter().enumerate() {
            let _ = writeln!(s, "{name}\t{:.6}\t{:.6}", self.main[i], self.main_ci[i]);
        }
        let p = self.names.len();
        for i in 0..p {
            for j in i + 1..p {
                let _ = writeln!(
                    s,
                    "{}:{}\t{:.6}\t{:.6}",
                    self.names[i], self.names[j], self.pair[i][j], self.pair_ci[i][j]
                );
            }
        }
        s
    }
}

/// Estimator of a closed variance from its per-sample terms.
fn mean_and_halfwidth(terms: &[f64]) -> (f64, f64) {
    let n = terms.len() as f64;
    let mean = terms.iter().sum::<f64>() / n;
    let var = terms.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, Z_95 * (var / n).sqrt())
}

struct PickFreeze {
    p: usize,
    n: usize,
    f_a: Vec<f64>,
    f_b: Vec<f64>,
    /// Per-sample terms `f(B)(f(A_B^i) - f(A))` for each input.
    main_terms: Vec<Vec<f64>>,
    /// Same for each pair `(i, j)`, `i < j`, in row-major order.
    pair_terms: Vec<Vec<f64>>,
    f0: f64,
    variance: f64,
}

fn base_points(p: usize, n: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let mut seq = SobolSequence::new(2 * p).map_err(|_| Error::DimensionUnsupported {
        requested: p,
        max: sequence::MAX_DIM / 2,
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<u32> = (0..2 * p).map(|_| rng.random()).collect();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for _ in 0..n {
        let raw = seq.next_raw();
        let pt: Vec<f64> = raw.iter().zip(&shift).map(|(x, s)| sequence::to_unit(x ^ s)).collect();
        a.push(pt[..p].to_vec());
        b.push(pt[p..].to_vec());
    }
    Ok((a, b))
}

fn evaluate<F>(f: &F, pts: &[Vec<f64>]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pts.par_iter().map(|x| f(x)).collect()
}

fn mixed(a: &[Vec<f64>], b: &[Vec<f64>], cols: &[usize]) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| {
            let mut r = ra.clone();
            for &c in cols {
                r[c] = rb[c];
            }
            r
        })
        .collect()
}

impl PickFreeze {
    fn run<F>(f: &F, p: usize, n: usize, seed: u64, with_pairs: bool) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        if p == 0 || n < 2 {
            return Err(Error::ShapeMismatch(format!("need p >= 1 and N >= 2, got p={p}, N={n}")));
        }
        let (a, b) = base_points(p, n, seed)?;
        let f_a = evaluate(f, &a);
        let f_b = evaluate(f, &b);
        if f_a.iter().chain(&f_b).any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("response returned a non-finite value".into()));
        }
        let all = f_a.len() + f_b.len();
        let f0 = f_a.iter().chain(&f_b).sum::<f64>() / all as f64;
        let variance = f_a.iter().chain(&f_b).map(|v| (v - f0) * (v - f0)).sum::<f64>() / (all - 1) as f64;
        if variance <= 1e-14 * f0 * f0 {
            return Err(Error::ZeroVariance);
        }
        let terms = |cols: &[usize]| -> Vec<f64> {
            let f_ab = evaluate(f, &mixed(&a, &b, cols));
            f_b.iter().zip(&f_ab).zip(&f_a).map(|((fb, fab), fa)| fb * (fab - fa)).collect()
        };
        let main_terms: Vec<Vec<f64>> = (0..p).map(|i| terms(&[i])).collect();
        let mut pair_terms = Vec::new();
        if with_pairs {
            for i in 0..p {
                for j in i + 1..p {
                    pair_terms.push(terms(&[i, j]));
                }
            }
        }
        Ok(Self { p, n, f_a, f_b, main_terms, pair_terms, f0, variance })
    }

    fn main(&self) -> (Vec<f64>, Vec<f64>) {
        self.main_terms
            .iter()
            .map(|t| {
                let (m, hw) = mean_and_halfwidth(t);
                (m / self.variance, hw / self.variance)
            })
            .unzip()
    }

    fn pairs(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let p = self.p;
        let mut s = vec![vec![0.0; p]; p];
        let mut ci = vec![vec![0.0; p]; p];
        let mut idx = 0;
        for i in 0..p {
            for j in i + 1..p {
                let interaction: Vec<f64> = self.pair_terms[idx]
                    .iter()
                    .zip(&self.main_terms[i])
                    .zip(&self.main_terms[j])
                    .map(|((c, a), b)| c - a - b)
                    .collect();
                let (m, hw) = mean_and_halfwidth(&interaction);
                s[i][j] = m / self.variance;
                s[j][i] = s[i][j];
                ci[i][j] = hw / self.variance;
                ci[j][i] = ci[i][j];
                idx += 1;
            }
        }
        (s, ci)
    }

    fn into_result(self, names: Vec<String>) -> SobolResult {
        let (main, main_ci) = self.main();
        let (pair, pair_ci) = if self.pair_terms.is_empty() {
            (vec![vec![0.0; self.p]; self.p], vec![vec![0.0; self.p]; self.p])
        } else {
            self.pairs()
        };
        debug_assert_eq!(self.f_a.len(), self.f_b.len());
        SobolResult { names, f0: self.f0, variance: self.variance, main, main_ci, pair, pair_ci, n: self.n }
    }
}

fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|i| format!("x{i}")).collect()
}

/// Main-effect indices of `f` over `[0,1]^p` with 95% half-widths.
pub fn main_effect_indices<F>(f: F, p: usize, n: usize, seed: u64) -> Result<SobolResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    Ok(PickFreeze::run(&f, p, n, seed, false)?.into_result(default_names(p)))
}

/// Main-effect and two-factor interaction indices.
pub fn pair_interaction_indices<F>(f: F, p: usize, n: usize, seed: u64) -> Result<SobolResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    Ok(PickFreeze::run(&f, p, n, seed, true)?.into_result(default_names(p)))
}

/// Sensitivity of a physical-space response over a design space.
pub fn design_sensitivity<F>(response: F, space: &DesignSpace, n: usize, seed: u64) -> Result<SobolResult>
where
    F: Fn(&DesignPoint) -> f64 + Sync,
{
    let f = |u: &[f64]| {
        let nd = NormalizedDesign::new(u.to_vec()).expect("sample inside the unit cube");
        let d = space.denormalize(&nd).expect("dimension checked");
        response(&d)
    };
    let names = space.params().iter().map(|p| p.name.clone()).collect();
    Ok(PickFreeze::run(&f, space.dim(), n, seed, true)?.into_result(names))
}
