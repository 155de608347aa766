//! Thick-restart Lanczos for the leading eigenpairs of a symmetric matrix.
//!
//! Full reorthogonalization; Rayleigh-Ritz on the explicit projection at
//! every restart, keeping the best Ritz vectors plus the last residual.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosConfig {
    /// Residual tolerance relative to the largest Ritz value.
    pub tol: f64,
    pub max_restarts: usize,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        Self { tol: 1e-11, max_restarts: 500 }
    }
}

/// Leading `nev` eigenpairs of symmetric `a`, largest first.
/// Eigenvectors are the columns of the returned matrix.
pub fn leading_eigenpairs(a: &DMatrix<f64>, nev: usize, cfg: &LanczosConfig) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if n == 0 || nev == 0 {
        return Ok((Vec::new(), DMatrix::zeros(n, 0)));
    }
    let nev = nev.min(n);
    let m = (2 * nev + 20).min(n);
    if m == n {
        // Krylov space would span everything.
        return dense_leading(a, nev);
    }
    let mut v = DMatrix::<f64>::zeros(n, m);
    let mut av = DMatrix::<f64>::zeros(n, m);
    let start = DVector::from_fn(n, |i, _| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_749_895).fract());
    v.set_column(0, &start.normalize());
    let mut kept = 0;
    let mut probe = 1u64;
    for _ in 0..cfg.max_restarts {
        for j in kept..m {
            let w = a * v.column(j);
            av.set_column(j, &w);
            if j + 1 < m {
                let next = orthonormal_next(&v, j + 1, w, &mut probe)?;
                v.set_column(j + 1, &next);
            }
        }
        let h = v.tr_mul(&av);
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
        let theta: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let y = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
        let scale = theta[0].abs().max(f64::MIN_POSITIVE);

        let ritz = &v * &y;
        let aritz = &av * &y;
        let converged = (0..nev).all(|i| {
            let res = aritz.column(i) - ritz.column(i) * theta[i];
            res.norm() <= cfg.tol * scale
        });
        if converged {
            return Ok((theta[..nev].to_vec(), ritz.columns(0, nev).into_owned()));
        }

        // Thick restart: keep the leading Ritz vectors and continue from the
        // residual of the last expansion step, which is orthogonal to them.
        kept = (nev + (m - nev) / 2).min(m - 1);
        let last = av.column(m - 1).into_owned();
        let mut f = last.clone();
        for c in 0..m {
            let col = v.column(c);
            f -= col * col.dot(&last);
        }
        v.columns_mut(0, kept).copy_from(&ritz.columns(0, kept));
        av.columns_mut(0, kept).copy_from(&aritz.columns(0, kept));
        let next = orthonormal_next(&v, kept, f, &mut probe)?;
        v.set_column(kept, &next);
        av.set_column(kept, &(a * &next));
        kept += 1;
    }
    Err(Error::SolverFailure(format!("Lanczos did not converge {nev} eigenpairs in {} restarts", cfg.max_restarts)))
}

/// Orthonormalizes `w` against the first `upto` columns of `v` (twice), replacing it with
/// a deterministic probe vector when it collapses.
fn orthonormal_next(v: &DMatrix<f64>, upto: usize, mut w: DVector<f64>, probe: &mut u64) -> Result<DVector<f64>> {
    let n = v.nrows();
    for attempt in 0..8 {
        let before = w.norm();
        for _ in 0..2 {
            for c in 0..upto {
                let col = v.column(c);
                let d = col.dot(&w);
                w -= col * d;
            }
        }
        let after = w.norm();
        if after > 1e-10 * before.max(f64::MIN_POSITIVE) && after > 0.0 {
            return Ok(w / after);
        }
        // Invariant subspace found; continue with a fresh direction.
        *probe = probe.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
        let seed = *probe;
        w = DVector::from_fn(n, |i, _| {
            let z = seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        });
        if attempt == 7 {
            break;
        }
    }
    Err(Error::SolverFailure("could not extend the Krylov basis".into()))
}

/// Leading eigenpairs by full dense decomposition, largest first.
pub fn dense_leading(a: &DMatrix<f64>, nev: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let eig = SymmetricEigen::try_new(a.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::SolverFailure("dense symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let nev = nev.min(n);
    let vals = order[..nev].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, nev, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((vals, vecs))
}
