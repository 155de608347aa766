//! Common POD basis by the method of snapshots.
//!
//! Snapshots from every case are pooled as columns of `S` (case-major, then
//! time). With quadrature weights `W` the Gram matrix is `G = SᵀWS / (nT)`,
//! so eigenvalues are energy densities and `Σ β_k² = λ_k · nT` over all
//! training snapshots.

mod lanczos;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::common_grid::{remap_plan, CommonGrid, IdwConfig};
use crate::error::{Error, Result};
use crate::field::{AxisymGrid, CaseGeometry, SnapshotSeries, Variable};

pub use lanczos::{dense_leading, leading_eigenpairs, LanczosConfig};

pub const DEFAULT_ENERGY_TARGET: f64 = 0.99;
pub const DEFAULT_DENSE_LIMIT: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    /// Dense up to `dense_limit` snapshots, Lanczos beyond.
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PodConfig {
    pub energy_target: f64,
    pub solver: Solver,
    pub dense_limit: usize,
    /// Subtract the pooled mean before decomposition.
    pub centered: bool,
    pub max_modes: Option<usize>,
}

impl Default for PodConfig {
    fn default() -> Self {
        Self {
            energy_target: DEFAULT_ENERGY_TARGET,
            solver: Solver::Auto,
            dense_limit: DEFAULT_DENSE_LIMIT,
            centered: true,
            max_modes: None,
        }
    }
}

/// Pooled snapshot matrix (nodes × nT) with the mean already removed.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub variable: Variable,
    pub snapshots: DMatrix<f64>,
    pub mean: Vec<f64>,
    pub n_cases: usize,
    pub steps: usize,
}

impl Ensemble {
    pub fn columns(&self) -> usize {
        self.snapshots.ncols()
    }
}

/// Stacks one variable from every case into a centered (or raw) snapshot matrix.
pub fn assemble_ensemble(cases: &[&SnapshotSeries], variable: Variable, centered: bool) -> Result<Ensemble> {
    let first = cases.first().ok_or_else(|| Error::ShapeMismatch("no cases to assemble".into()))?;
    let (nodes, steps) = (first.nodes(), first.steps());
    for (i, c) in cases.iter().enumerate() {
        if c.nodes() != nodes || c.steps() != steps {
            return Err(Error::ShapeMismatch(format!(
                "case {i} has {}x{} (nodes x steps), expected {nodes}x{steps}",
                c.nodes(),
                c.steps()
            )));
        }
    }
    let ncols = cases.len() * steps;
    let mut s = DMatrix::<f64>::zeros(nodes, ncols);
    for (i, c) in cases.iter().enumerate() {
        let values = c.values(variable)?;
        for t in 0..steps {
            s.column_mut(i * steps + t).copy_from_slice(&values[t * nodes..(t + 1) * nodes]);
        }
    }
    let mut mean = vec![0.0; nodes];
    if centered {
        for (n, m) in mean.iter_mut().enumerate() {
            *m = s.row(n).sum() / ncols as f64;
        }
        for mut col in s.column_iter_mut() {
            for (v, m) in col.iter_mut().zip(&mean) {
                *v -= m;
            }
        }
    }
    Ok(Ensemble { variable, snapshots: s, mean, n_cases: cases.len(), steps })
}

/// Per-case time coefficients, `beta[k][i][t]` stored flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffTable {
    pub modes: usize,
    pub cases: usize,
    pub steps: usize,
    pub beta: Vec<f64>,
}

impl CoeffTable {
    pub fn zeros(modes: usize, cases: usize, steps: usize) -> Self {
        Self { modes, cases, steps, beta: vec![0.0; modes * cases * steps] }
    }

    fn offset(&self, k: usize, i: usize) -> usize {
        (k * self.cases + i) * self.steps
    }

    pub fn get(&self, k: usize, i: usize, t: usize) -> f64 {
        self.beta[self.offset(k, i) + t]
    }

    /// Time history of mode `k` in case `i`.
    pub fn series(&self, k: usize, i: usize) -> &[f64] {
        let o = self.offset(k, i);
        &self.beta[o..o + self.steps]
    }

    /// Coefficients of one snapshot, one per mode.
    pub fn snapshot(&self, i: usize, t: usize) -> Vec<f64> {
        (0..self.modes).map(|k| self.get(k, i, t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpodBasis {
    pub variable: Variable,
    pub common: CommonGrid,
    pub mean_field: Vec<f64>,
    /// Orthonormal under the quadrature-weighted inner product.
    pub modes: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    /// Cumulative energy fraction of the retained modes.
    pub energy_fraction: Vec<f64>,
    /// Trace of the Gram matrix (total energy density).
    pub total_energy: f64,
    pub quadrature: Vec<f64>,
    pub centered: bool,
}

impl CpodBasis {
    pub fn k(&self) -> usize {
        self.modes.len()
    }

    pub fn nodes(&self) -> usize {
        self.mean_field.len()
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        weighted_dot(&self.quadrature, a, b)
    }

    /// Coefficients of one field: `⟨field − mean, φ_k⟩_w`.
    pub fn project_snapshot(&self, field: &[f64]) -> Result<Vec<f64>> {
        if field.len() != self.nodes() {
            return Err(Error::ShapeMismatch(format!("field has {} nodes, basis {}", field.len(), self.nodes())));
        }
        let fluct: Vec<f64> = field.iter().zip(&self.mean_field).map(|(f, m)| f - m).collect();
        Ok(self.modes.iter().map(|phi| self.inner(&fluct, phi)).collect())
    }

    /// `mean + Σ β_k φ_k` on the common grid; `beta` may be shorter than K.
    pub fn reconstruct_snapshot(&self, beta: &[f64]) -> Result<Vec<f64>> {
        if beta.len() > self.k() {
            return Err(Error::ShapeMismatch(format!("{} coefficients for {} modes", beta.len(), self.k())));
        }
        let mut out = self.mean_field.clone();
        for (b, phi) in beta.iter().zip(&self.modes) {
            for (o, p) in out.iter_mut().zip(phi) {
                *o += b * p;
            }
        }
        Ok(out)
    }
}

fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

/// `SᵀWS / (nT)`.
pub fn gram_matrix(ensemble: &Ensemble, quadrature: &[f64]) -> Result<DMatrix<f64>> {
    let s = &ensemble.snapshots;
    if quadrature.len() != s.nrows() {
        return Err(Error::ShapeMismatch(format!("{} weights for {} nodes", quadrature.len(), s.nrows())));
    }
    if quadrature.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::ShapeMismatch("quadrature weights must be positive".into()));
    }
    let mut ws = s.clone();
    for (mut row, w) in ws.row_iter_mut().zip(quadrature) {
        row *= w.sqrt();
    }
    // Explicit transpose takes the blocked GEMM path.
    let g = ws.transpose() * &ws;
    Ok((&g + g.transpose()) * (0.5 / s.ncols() as f64))
}

/// Smallest K whose cumulative fraction reaches `target`.
fn truncation(eigenvalues: &[f64], total: f64, target: f64) -> usize {
    let mut cum = 0.0;
    for (k, l) in eigenvalues.iter().enumerate() {
        cum += l;
        if cum >= target * total * (1.0 - 1e-12) {
            return k + 1;
        }
    }
    eigenvalues.len()
}

/// Eigenpairs covering the energy target, largest first.
fn solve(g: &DMatrix<f64>, total: f64, cfg: &PodConfig) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = g.nrows();
    let use_dense = match cfg.solver {
        Solver::Dense => true,
        Solver::Lanczos => false,
        Solver::Auto => n <= cfg.dense_limit,
    };
    if use_dense {
        return dense_leading(g, n);
    }
    let mut nev = 16.min(n);
    loop {
        let (vals, vecs) = leading_eigenpairs(g, nev, &LanczosConfig::default())?;
        let captured: f64 = vals.iter().sum();
        let cap = cfg.max_modes.unwrap_or(usize::MAX);
        if captured >= cfg.energy_target * total * (1.0 - 1e-12) || nev >= n || nev >= cap {
            return Ok((vals, vecs));
        }
        nev = (2 * nev).min(n);
    }
}

/// Extracts the common basis and training coefficients from an ensemble.
pub fn compute_basis(
    ensemble: &Ensemble,
    common: &CommonGrid,
    cfg: &PodConfig,
) -> Result<(CpodBasis, CoeffTable)> {
    let nt = ensemble.columns();
    if nt < 2 {
        return Err(Error::ShapeMismatch("need at least two snapshots".into()));
    }
    let quadrature = common.grid.cell_area.clone();
    let g = gram_matrix(ensemble, &quadrature)?;
    let total = g.trace();
    let (vals, vecs) = solve(&g, total, cfg)?;

    // Mode error scales as eps * λ_max / λ_k; below this floor modes are not orthonormal to 1e-8.
    let floor = 1e-9 * vals.first().copied().unwrap_or(0.0).max(0.0);
    let usable = vals.iter().take_while(|&&l| l > floor && l > 0.0).count();
    let usable_vals = &vals[..usable];
    let mut k = if total > 0.0 { truncation(usable_vals, total, cfg.energy_target) } else { 0 };
    if let Some(cap) = cfg.max_modes {
        k = k.min(cap);
    }

    let s = &ensemble.snapshots;
    let mut modes = Vec::with_capacity(k);
    let mut coeffs = CoeffTable::zeros(k, ensemble.n_cases, ensemble.steps);
    for j in 0..k {
        let lambda = usable_vals[j];
        let norm = (nt as f64 * lambda).sqrt();
        let a = vecs.column(j);
        let mut phi: Vec<f64> = (s * a).iter().map(|v| v / norm).collect();
        let lead = phi.iter().enumerate().fold(0, |best, (i, v)| if v.abs() > phi[best].abs() { i } else { best });
        let sign = if phi[lead] < 0.0 { -1.0 } else { 1.0 };
        if sign < 0.0 {
            phi.iter_mut().for_each(|v| *v = -*v);
        }
        for col in 0..nt {
            let (i, t) = (col / ensemble.steps, col % ensemble.steps);
            let o = coeffs.offset(j, i) + t;
            coeffs.beta[o] = sign * norm * a[col];
        }
        modes.push(phi);
    }
    let mut cum = 0.0;
    let energy_fraction = usable_vals[..k]
        .iter()
        .map(|l| {
            cum += l;
            (cum / total).min(1.0)
        })
        .collect();
    let basis = CpodBasis {
        variable: ensemble.variable,
        common: common.clone(),
        mean_field: ensemble.mean.clone(),
        modes,
        eigenvalues: usable_vals[..k].to_vec(),
        energy_fraction,
        total_energy: total,
        quadrature,
        centered: cfg.centered,
    };
    Ok((basis, coeffs))
}

/// Coefficients `β_k(t)` of a common-grid series, as K rows of length T.
pub fn project(series: &SnapshotSeries, basis: &CpodBasis) -> Result<Vec<Vec<f64>>> {
    if series.nodes() != basis.nodes() {
        return Err(Error::ShapeMismatch(format!("series has {} nodes, basis {}", series.nodes(), basis.nodes())));
    }
    let mut out = vec![Vec::with_capacity(series.steps()); basis.k()];
    for t in 0..series.steps() {
        for (row, b) in out.iter_mut().zip(basis.project_snapshot(series.snapshot(basis.variable, t)?)?) {
            row.push(b);
        }
    }
    Ok(out)
}

/// Expands K×T coefficients on the common grid, then carries the series onto
/// the target geometry's grid.
pub fn reconstruct(
    beta: &[Vec<f64>],
    basis: &CpodBasis,
    steps: usize,
    dt: f64,
    target_grid: &AxisymGrid,
    target_geom: &CaseGeometry,
    idw: IdwConfig,
) -> Result<SnapshotSeries> {
    if beta.len() > basis.k() {
        return Err(Error::ShapeMismatch(format!("{} coefficient rows for {} modes", beta.len(), basis.k())));
    }
    if beta.iter().any(|row| row.len() != steps) {
        return Err(Error::ShapeMismatch(format!("coefficient rows must have {steps} steps")));
    }
    let plan = remap_plan(&basis.common.grid, &basis.common.geometry, target_grid, target_geom, idw)?;
    let mut data = Vec::with_capacity(steps * target_grid.len());
    for t in 0..steps {
        let b: Vec<f64> = beta.iter().map(|row| row[t]).collect();
        data.extend(plan.apply(&basis.reconstruct_snapshot(&b)?)?);
    }
    let mut out = SnapshotSeries::new(target_grid.clone(), steps, dt, 0.0)?;
    out.insert(basis.variable, data)?;
    Ok(out)
}
