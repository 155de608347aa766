//! Validation diagnostics: RMSRE, periodograms, film metrics, probes, UQ maps.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::common_grid::{fractional_index, IdwConfig, InterpolationPlan};
use crate::error::{Error, Result};
use crate::field::{AxisymGrid, CaseGeometry, SnapshotSeries, Variable};
use crate::kriging::confidence_halfwidth;
use crate::oracle::FlowClass;

pub const PROBE_NEIGHBOURS: usize = 4;
pub const DEFAULT_PROBES: usize = 8;
pub const DEFAULT_CI_LEVEL: f64 = 0.80;
/// Downstream extent of the spreading-angle fit, in nozzle radii.
pub const ANGLE_WINDOW_RADII: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub name: String,
    pub nodes: Vec<usize>,
}

impl RegionSpec {
    pub fn overall(grid: &AxisymGrid) -> Self {
        Self { name: "overall".into(), nodes: (0..grid.len()).collect() }
    }

    /// Nodes with `x` at or before the injector exit.
    pub fn upstream(grid: &AxisymGrid, geom: &CaseGeometry) -> Self {
        let exit = geom.exit();
        Self { name: "upstream".into(), nodes: (0..grid.len()).filter(|&i| grid.coords(i).0 <= exit).collect() }
    }

    pub fn downstream(grid: &AxisymGrid, geom: &CaseGeometry) -> Self {
        let exit = geom.exit();
        Self { name: "downstream".into(), nodes: (0..grid.len()).filter(|&i| grid.coords(i).0 > exit).collect() }
    }

    pub fn custom(grid: &AxisymGrid, name: &str, x: (f64, f64), r: (f64, f64)) -> Result<Self> {
        let nodes: Vec<usize> = (0..grid.len())
            .filter(|&i| {
                let (xi, ri) = grid.coords(i);
                (x.0..=x.1).contains(&xi) && (r.0..=r.1).contains(&ri)
            })
            .collect();
        if nodes.is_empty() {
            return Err(Error::ShapeMismatch(format!("region `{name}` holds no grid nodes")));
        }
        Ok(Self { name: name.into(), nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Root-mean-square error over `region`, relative to the full-field range of `sim`, in percent.
pub fn rmsre(sim: &[f64], emu: &[f64], region: &RegionSpec) -> Result<f64> {
    if sim.len() != emu.len() {
        return Err(Error::ShapeMismatch(format!("sim has {} nodes, emu {}", sim.len(), emu.len())));
    }
    if region.is_empty() || region.nodes.iter().any(|&i| i >= sim.len()) {
        return Err(Error::ShapeMismatch(format!("region `{}` does not fit the field", region.name)));
    }
    let (lo, hi) = sim.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return Err(Error::ZeroRange);
    }
    let ss: f64 = region.nodes.iter().map(|&i| (sim[i] - emu[i]).powi(2)).sum();
    Ok(100.0 * (ss / region.len() as f64).sqrt() / (hi - lo))
}

/// RMSRE at every timestep of two series on the same grid.
pub fn rmsre_series(sim: &SnapshotSeries, emu: &SnapshotSeries, var: Variable, region: &RegionSpec) -> Result<Vec<f64>> {
    if sim.steps() != emu.steps() {
        return Err(Error::ShapeMismatch(format!("{} vs {} steps", sim.steps(), emu.steps())));
    }
    (0..sim.steps()).map(|t| rmsre(sim.snapshot(var, t)?, emu.snapshot(var, t)?, region)).collect()
}

/// Time-averaged RMSRE.
pub fn mean_rmsre(sim: &SnapshotSeries, emu: &SnapshotSeries, var: Variable, region: &RegionSpec) -> Result<f64> {
    let per_step = rmsre_series(sim, emu, var, region)?;
    Ok(per_step.iter().sum::<f64>() / per_step.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rect,
    Hann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    /// Hz, from 0 to Nyquist.
    pub frequencies: Vec<f64>,
    /// One-sided density in (signal units)²/Hz.
    pub density: Vec<f64>,
}

impl Psd {
    pub fn resolution(&self) -> f64 {
        self.frequencies.get(1).copied().unwrap_or(0.0)
    }

    /// Frequency of the largest non-DC bin.
    pub fn dominant_frequency(&self) -> f64 {
        let k = (1..self.density.len()).fold(1.min(self.density.len() - 1), |best, k| {
            if self.density[k] > self.density[best] {
                k
            } else {
                best
            }
        });
        self.frequencies[k]
    }

    /// `Σ S_k Δf`, the mean square of the (windowed) signal.
    pub fn total_power(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.resolution()
    }
}

pub fn nyquist(dt: f64) -> f64 {
    0.5 / dt
}

/// Signal minus its mean, so window leakage from DC cannot mask the spectrum.
pub fn remove_mean(signal: &[f64]) -> Vec<f64> {
    let mean = signal.iter().sum::<f64>() / signal.len().max(1) as f64;
    signal.iter().map(|v| v - mean).collect()
}

/// One-sided periodogram. `S_k = c_k |X_k|² dt / (N U)` with `U` the window's
/// mean square and `c_k = 2` except at DC and Nyquist, so a rect window
/// satisfies `Σ S_k Δf = mean(x²)`.
/// Shortest signal `psd` accepts.
pub const MIN_PSD_SAMPLES: usize = 8;

pub fn psd(signal: &[f64], dt: f64, window: Window) -> Result<Psd> {
    let n = signal.len();
    if n < MIN_PSD_SAMPLES {
        return Err(Error::ShapeMismatch(format!("periodogram needs at least {MIN_PSD_SAMPLES} samples, got {n}")));
    }
    if !(dt > 0.0) {
        return Err(Error::ShapeMismatch(format!("dt must be positive, got {dt}")));
    }
    let w: Vec<f64> = match window {
        Window::Rect => vec![1.0; n],
        Window::Hann => (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect(),
    };
    let u = w.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let xw: Vec<f64> = signal.iter().zip(&w).map(|(x, w)| x * w).collect();
    let (cos, sin): (Vec<f64>, Vec<f64>) =
        (0..n).map(|m| 2.0 * PI * m as f64 / n as f64).map(|a| (a.cos(), a.sin())).unzip();
    let half = n / 2;
    let mut density = Vec::with_capacity(half + 1);
    for k in 0..=half {
        let (mut re, mut im) = (0.0, 0.0);
        for (j, x) in xw.iter().enumerate() {
            let m = (k * j) % n;
            re += x * cos[m];
            im -= x * sin[m];
        }
        let edge = k == 0 || (n % 2 == 0 && k == half);
        let c = if edge { 1.0 } else { 2.0 };
        density.push(c * (re * re + im * im) * dt / (n as f64 * u));
    }
    let df = 1.0 / (n as f64 * dt);
    Ok(Psd { frequencies: (0..=half).map(|k| k as f64 * df).collect(), density })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilmMetrics {
    /// mm
    pub thickness: f64,
    /// degrees
    pub angle: f64,
    /// `(x, interface radius)` for stations used in the angle fit.
    pub stations: Vec<(f64, f64)>,
}

/// Radius of the steepest radial density gradient in one axial column, refined
/// by a parabola through the neighbouring gradient samples.
fn column_interface(column: &[f64], r: &[f64]) -> Option<(f64, f64)> {
    let nr = r.len();
    if nr < 3 {
        return None;
    }
    let g: Vec<f64> = (1..nr - 1).map(|j| ((column[j + 1] - column[j - 1]) / (r[j + 1] - r[j - 1])).abs()).collect();
    let (jm, gm) = g.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (j, &v)| if v > b.1 { (j, v) } else { b });
    let j = jm + 1;
    if jm == 0 || jm + 1 == g.len() {
        return Some((r[j], gm));
    }
    let (x0, x1, x2) = (r[j - 1], r[j], r[j + 1]);
    let (y0, y1, y2) = (g[jm - 1], g[jm], g[jm + 1]);
    let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
    let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
    if a >= 0.0 {
        return Some((x1, gm));
    }
    Some(((-b / (2.0 * a)).clamp(x0, x2), gm))
}

fn column(field: &[f64], grid: &AxisymGrid, ix: usize) -> Vec<f64> {
    let nr = grid.nr();
    field[ix * nr..(ix + 1) * nr].to_vec()
}

/// Film thickness at the injector exit and spreading angle just downstream,
/// from the interface traced by the steepest radial density gradient.
pub fn extract_film_metrics(density: &[f64], grid: &AxisymGrid, geom: &CaseGeometry) -> Result<FilmMetrics> {
    if density.len() != grid.len() {
        return Err(Error::ShapeMismatch(format!("{} values for {} nodes", density.len(), grid.len())));
    }
    let (lo, hi) = density.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let scale = hi - lo;
    let exit = geom.exit();
    let r_max = *grid.r.last().unwrap();
    let interfaces: Vec<Option<(f64, f64)>> =
        (0..grid.nx()).map(|ix| column_interface(&column(density, grid, ix), &grid.r)).collect();
    let g_max = interfaces.iter().flatten().map(|v| v.1).fold(0.0, f64::max);
    if !(scale > 0.0) || g_max * r_max < 1e-9 * hi.abs().max(scale) {
        return Err(Error::NoInterface("radial density gradient is flat".into()));
    }

    let exit_ix = (0..grid.nx())
        .min_by(|&a, &b| (grid.x[a] - exit).abs().total_cmp(&(grid.x[b] - exit).abs()))
        .expect("grid has nodes");
    let (r_exit, _) = interfaces[exit_ix].ok_or_else(|| Error::NoInterface("no interface at the exit".into()))?;
    let thickness = geom.radius - r_exit;

    let x_end = exit + ANGLE_WINDOW_RADII * geom.radius;
    let stations: Vec<(f64, f64)> = (0..grid.nx())
        .filter(|&ix| grid.x[ix] >= exit - 1e-9 && grid.x[ix] <= x_end + 1e-9)
        .filter_map(|ix| interfaces[ix].map(|(r, g)| (grid.x[ix], r, g)))
        .filter(|&(_, r, g)| r < 0.95 * r_max && g >= 0.1 * g_max)
        .map(|(x, r, _)| (x, r))
        .collect();
    if stations.len() < 2 {
        return Err(Error::NoInterface("fewer than two downstream stations trace the interface".into()));
    }
    let n = stations.len() as f64;
    let mx = stations.iter().map(|s| s.0).sum::<f64>() / n;
    let my = stations.iter().map(|s| s.1).sum::<f64>() / n;
    let sxy: f64 = stations.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    let sxx: f64 = stations.iter().map(|s| (s.0 - mx).powi(2)).sum();
    let angle = (sxy / sxx).atan().to_degrees();
    Ok(FilmMetrics { thickness, angle, stations })
}

/// Film metrics from the time-mean density of a series.
pub fn film_metrics(series: &SnapshotSeries, geom: &CaseGeometry) -> Result<FilmMetrics> {
    extract_film_metrics(&series.mean_field(Variable::Density)?, &series.grid, geom)
}

/// Jet or swirl from the extracted spreading angle.
pub fn label_flow(series: &SnapshotSeries, geom: &CaseGeometry) -> Result<FlowClass> {
    Ok(FlowClass::from_angle(film_metrics(series, geom)?.angle))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSet {
    /// `(x, r)` in mm.
    pub positions: Vec<(f64, f64)>,
}

impl ProbeSet {
    /// `count` probes on the traced film surface, evenly spaced from mid-injector
    /// to one injector length past the exit.
    pub fn along_film(density: &[f64], grid: &AxisymGrid, geom: &CaseGeometry, count: usize) -> Result<Self> {
        if density.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!("{} values for {} nodes", density.len(), grid.len())));
        }
        let trace: Vec<(f64, f64)> = (0..grid.nx())
            .filter_map(|ix| column_interface(&column(density, grid, ix), &grid.r).map(|(r, _)| (grid.x[ix], r)))
            .collect();
        let x0 = geom.headend + 0.5 * geom.length;
        let x1 = geom.exit() + geom.length;
        let r_max = *grid.r.last().unwrap();
        let positions = (0..count)
            .map(|i| {
                let x = if count == 1 { x0 } else { x0 + (x1 - x0) * i as f64 / (count - 1) as f64 };
                let r = interpolate_trace(&trace, x).unwrap_or(geom.radius);
                (x, r.clamp(0.0, r_max))
            })
            .collect();
        Ok(Self { positions })
    }
}

fn interpolate_trace(trace: &[(f64, f64)], x: f64) -> Option<f64> {
    let hi = trace.partition_point(|p| p.0 < x);
    if hi == 0 {
        return trace.first().map(|p| p.1);
    }
    if hi == trace.len() {
        return trace.last().map(|p| p.1);
    }
    let (a, b) = (trace[hi - 1], trace[hi]);
    Some(a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0))
}

/// Time signals at each probe, interpolated from the four nearest nodes.
pub fn probe_signals(series: &SnapshotSeries, probes: &ProbeSet, var: Variable) -> Result<Vec<Vec<f64>>> {
    let grid = &series.grid;
    let (x0, x1, r0, r1) = grid.extent();
    let nr = grid.nr();
    let mut queries = Vec::with_capacity(probes.positions.len());
    for &(x, r) in &probes.positions {
        let tol = 1e-9 * (1.0 + x1.abs());
        if x < x0 - tol || x > x1 + tol || r < r0 - tol || r > r1 + tol {
            return Err(Error::OutOfDomain(x, r));
        }
        queries.push([fractional_index(&grid.x, x), fractional_index(&grid.r, r)]);
    }
    let source: Vec<[f64; 2]> = (0..grid.len()).map(|i| [(i / nr) as f64, (i % nr) as f64]).collect();
    let plan = InterpolationPlan::new(&source, &queries, IdwConfig { neighbours: PROBE_NEIGHBOURS, power: 2.0 })?;
    let mut out = vec![Vec::with_capacity(series.steps()); probes.positions.len()];
    for t in 0..series.steps() {
        for (sig, v) in out.iter_mut().zip(plan.apply(series.snapshot(var, t)?)?) {
            sig.push(v);
        }
    }
    Ok(out)
}

/// Pointwise confidence half-widths of a variance field.
pub fn uq_map(variance: &[f64], level: f64) -> Vec<f64> {
    variance.iter().map(|&v| confidence_halfwidth(v, level)).collect()
}

/// Fraction of points where `|mean − truth|` lies within the `level` half-width.
pub fn coverage(truth: &[f64], mean: &[f64], variance: &[f64], level: f64) -> Result<f64> {
    if truth.len() != mean.len() || mean.len() != variance.len() || truth.is_empty() {
        return Err(Error::ShapeMismatch("coverage inputs differ in length".into()));
    }
    let hits = truth
        .iter()
        .zip(mean)
        .zip(variance)
        .filter(|((t, m), v)| (*m - *t).abs() <= confidence_halfwidth(**v, level))
        .count();
    Ok(hits as f64 / truth.len() as f64)
}
