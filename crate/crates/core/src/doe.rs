//! Maximum-projection Latin-hypercube designs.
//!
//! Designs are optimized by simulated annealing over within-column swaps, so
//! every column stays a permutation of the midpoint levels `(j - 0.5) / n`
//! and no two rows ever share a coordinate.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{DesignPoint, DesignSpace, NormalizedDesign};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if n == 0 || p == 0 {
            return Err(Error::ShapeMismatch("design matrix needs at least one row and column".into()));
        }
        let mut data = Vec::with_capacity(n * p);
        for r in rows {
            if r.len() != p {
                return Err(Error::ShapeMismatch("ragged design rows".into()));
            }
            if r.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::ShapeMismatch("design entries must lie in [0, 1]".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { n, p, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.p)
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows().map(|r| r[k]).collect()
    }

    fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.p + k]
    }

    fn swap(&mut self, a: usize, b: usize, k: usize) {
        self.data.swap(a * self.p + k, b * self.p + k);
    }

    /// Rows mapped from the unit cube onto the space's physical bounds.
    pub fn to_design_points(&self, space: &DesignSpace) -> Result<Vec<DesignPoint>> {
        if self.p() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), got: self.p() });
        }
        self.rows().map(|r| space.denormalize(&NormalizedDesign::new(r.to_vec())?)).collect()
    }

    pub fn to_tsv(&self, criterion: f64) -> String {
        let mut s = format!("# maxpro n={} p={} criterion={criterion:.10e}\n", self.n, self.p);
        for r in self.rows() {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:.17}")).collect();
            let _ = writeln!(s, "{}", cells.join("\t"));
        }
        s
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> = line.split('\t').map(|c| c.trim().parse()).collect();
            rows.push(row.map_err(|_| Error::Format(format!("bad design row `{line}`")))?);
        }
        Self::from_rows(&rows)
    }

    pub fn read_tsv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_tsv(&std::fs::read_to_string(path)?)
    }
}

fn pair_product(d: &DesignMatrix, i: usize, j: usize) -> f64 {
    (0..d.p)
        .map(|k| {
            let diff = d.get(i, k) - d.get(j, k);
            1.0 / (diff * diff)
        })
        .product()
}

/// `[ (1/C(n,2)) sum_{i<j} prod_k (x_ik - x_jk)^-2 ]^(1/p)`; lower is better.
pub fn maxpro_criterion(d: &DesignMatrix) -> Result<f64> {
    if d.n < 2 {
        return Err(Error::ShapeMismatch("criterion needs at least two rows".into()));
    }
    let mut sum = 0.0;
    for i in 0..d.n {
        for j in i + 1..d.n {
            if (0..d.p).any(|k| d.get(i, k) == d.get(j, k)) {
                return Err(Error::DegenerateDesign(i, j));
            }
            sum += pair_product(d, i, j);
        }
    }
    let pairs = (d.n * (d.n - 1) / 2) as f64;
    Ok((sum / pairs).powf(1.0 / d.p as f64))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AnnealConfig {
    pub n_restarts: usize,
    pub n_iters: usize,
    /// Initial temperature as a fraction of the starting criterion.
    pub initial_temperature: f64,
    /// Geometric decay applied after every sweep.
    pub cooling: f64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self { n_restarts: 4, n_iters: 200, initial_temperature: 0.1, cooling: 0.95 }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizedDesign {
    pub design: DesignMatrix,
    pub criterion: f64,
    /// Criterion of each restart's random starting design.
    pub initial_criteria: Vec<f64>,
    /// Best-so-far criterion after each sweep, for the winning restart.
    pub history: Vec<f64>,
}

pub fn random_latin_hypercube(n: usize, p: usize, rng: &mut impl Rng) -> DesignMatrix {
    let levels: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) / n as f64).collect();
    let mut data = vec![0.0; n * p];
    for k in 0..p {
        let mut col = levels.clone();
        col.shuffle(rng);
        for (i, v) in col.into_iter().enumerate() {
            data[i * p + k] = v;
        }
    }
    DesignMatrix { n, p, data }
}

/// Pairwise product terms, kept in sync with the design under swaps.
struct PairTable {
    n: usize,
    prod: Vec<f64>,
    sum: f64,
}

impl PairTable {
    fn new(d: &DesignMatrix) -> Self {
        let n = d.n;
        let mut prod = vec![0.0; n * n];
        let mut sum = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let v = pair_product(d, i, j);
                prod[i * n + j] = v;
                prod[j * n + i] = v;
                sum += v;
            }
        }
        Self { n, prod, sum }
    }

    fn criterion(&self, p: usize) -> f64 {
        let pairs = (self.n * (self.n - 1) / 2) as f64;
        (self.sum / pairs).powf(1.0 / p as f64)
    }

    /// Sum after swapping rows `a`, `b` in one column, plus the changed entries.
    fn propose(&self, d: &DesignMatrix, a: usize, b: usize, scratch: &mut Vec<(usize, f64, f64)>) -> f64 {
        scratch.clear();
        let mut sum = self.sum;
        for j in 0..self.n {
            if j == a || j == b {
                continue;
            }
            // Rows `a` and `b` were already swapped in `d` by the caller.
            let na = pair_product(d, a, j);
            let nb = pair_product(d, b, j);
            sum += na - self.prod[a * self.n + j] + nb - self.prod[b * self.n + j];
            scratch.push((j, na, nb));
        }
        sum
    }

    fn commit(&mut self, a: usize, b: usize, sum: f64, scratch: &[(usize, f64, f64)]) {
        let n = self.n;
        for &(j, na, nb) in scratch {
            self.prod[a * n + j] = na;
            self.prod[j * n + a] = na;
            self.prod[b * n + j] = nb;
            self.prod[j * n + b] = nb;
        }
        self.sum = sum;
    }
}

struct RestartOutcome {
    design: DesignMatrix,
    criterion: f64,
    initial: f64,
    history: Vec<f64>,
}

fn anneal(n: usize, p: usize, rng: &mut ChaCha8Rng, cfg: &AnnealConfig) -> RestartOutcome {
    let mut current = random_latin_hypercube(n, p, rng);
    let mut table = PairTable::new(&current);
    let initial = table.criterion(p);
    let mut best = current.clone();
    let mut best_crit = initial;
    let mut history = Vec::with_capacity(cfg.n_iters);
    if n < 3 {
        // Two rows admit a single pair whose per-column distances swaps cannot change.
        history.push(best_crit);
        return RestartOutcome { design: best, criterion: best_crit, initial, history };
    }
    let mut temperature = cfg.initial_temperature * initial;
    let mut scratch = Vec::with_capacity(n);
    let proposals_per_sweep = n * p;
    for _ in 0..cfg.n_iters {
        for _ in 0..proposals_per_sweep {
            let k = rng.random_range(0..p);
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            let old = table.criterion(p);
            current.swap(a, b, k);
            let sum = table.propose(&current, a, b, &mut scratch);
            let pairs = (n * (n - 1) / 2) as f64;
            let new = (sum / pairs).powf(1.0 / p as f64);
            let delta = new - old;
            let accept = delta <= 0.0 || (temperature > 0.0 && rng.random::<f64>() < (-delta / temperature).exp());
            if accept {
                table.commit(a, b, sum, &scratch);
                if new < best_crit {
                    best_crit = new;
                    best.clone_from(&current);
                }
            } else {
                current.swap(a, b, k);
            }
        }
        temperature *= cfg.cooling;
        history.push(best_crit);
    }
    // Recompute from scratch so the reported value carries no drift from incremental updates.
    let criterion = maxpro_criterion(&best).expect("latin hypercube columns are distinct");
    RestartOutcome { design: best, criterion, initial, history }
}

/// Generates an `n`-point MaxPro Latin-hypercube design in `[0,1]^p`.
pub fn generate_design(n: usize, p: usize, seed: u64, cfg: &AnnealConfig) -> Result<OptimizedDesign> {
    if n < 2 || p < 1 {
        return Err(Error::ShapeMismatch(format!("need n >= 2 and p >= 1, got n={n}, p={p}")));
    }
    let restarts = cfg.n_restarts.max(1);
    let outcomes: Vec<RestartOutcome> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            anneal(n, p, &mut rng, cfg)
        })
        .collect();
    let initial_criteria = outcomes.iter().map(|o| o.initial).collect();
    // Lowest criterion wins; ties go to the lowest restart index.
    let best = outcomes
        .into_iter()
        .reduce(|a, b| if b.criterion < a.criterion { b } else { a })
        .expect("at least one restart");
    log::debug!("maxpro n={n} p={p}: criterion {} after {} sweeps", best.criterion, best.history.len());
    Ok(OptimizedDesign { design: best.design, criterion: best.criterion, initial_criteria, history: best.history })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Projection {
    pub k: usize,
    pub l: usize,
    pub points: Vec<(f64, f64)>,
}

/// All two-dimensional coordinate projections of a design.
pub fn projection_scatter(d: &DesignMatrix) -> Vec<Projection> {
    let mut out = Vec::with_capacity(d.p * d.p.saturating_sub(1) / 2);
    for k in 0..d.p {
        for l in k + 1..d.p {
            out.push(Projection { k, l, points: d.rows().map(|r| (r[k], r[l])).collect() });
        }
    }
    out
}
