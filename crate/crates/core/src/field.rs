//! Axisymmetric (x, r) grids, their five-region partition, and time-ordered
//! field snapshots.
//!
//! Case grids are laid out region by region: the axial coordinate is a fixed
//! piecewise map of a parametric coordinate `s in [0, 1]`, one piece per
//! region. Two grids built from the same [`GridSpec`] therefore correspond
//! node-for-node under the per-region affine maps of [`crate::common_grid`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design::DesignPoint;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    Headend,
    Interior,
    NearField,
    MidField,
    FarField,
}

impl Region {
    pub const ALL: [Region; 5] = [Region::Headend, Region::Interior, Region::NearField, Region::MidField, Region::FarField];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Region> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::Headend => "headend",
            Region::Interior => "interior",
            Region::NearField => "near-field",
            Region::MidField => "mid-field",
            Region::FarField => "far-field",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Temperature,
    Density,
    Pressure,
    AxialVelocity,
    AzimuthalVelocity,
}

impl Variable {
    pub const ALL: [Variable; 5] = [
        Variable::Temperature,
        Variable::Density,
        Variable::Pressure,
        Variable::AxialVelocity,
        Variable::AzimuthalVelocity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::Temperature => "temperature",
            Variable::Density => "density",
            Variable::Pressure => "pressure",
            Variable::AxialVelocity => "axial_velocity",
            Variable::AzimuthalVelocity => "azimuthal_velocity",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Variable::Temperature => "K",
            Variable::Density => "kg/m^3",
            Variable::Pressure => "Pa",
            Variable::AxialVelocity | Variable::AzimuthalVelocity => "m/s",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown variable `{s}`")))
    }
}

/// Injector geometry that fixes a case's domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseGeometry {
    /// Headend offset (mm).
    pub headend: f64,
    /// Injector length (mm).
    pub length: f64,
    /// Injector radius (mm).
    pub radius: f64,
}

impl CaseGeometry {
    pub fn from_design(d: &DesignPoint) -> Self {
        Self { headend: d.headend(), length: d.length(), radius: d.radius() }
    }

    /// Axial coordinate of the injector exit.
    pub fn exit(&self) -> f64 {
        self.headend + self.length
    }

    /// Axial region breaks: headend, interior, then three equal downstream thirds
    /// spanning three injector lengths.
    pub fn axial_breaks(&self) -> [f64; 6] {
        let e = self.exit();
        let l = self.length;
        [0.0, self.headend, e, e + l, e + 2.0 * l, e + 3.0 * l]
    }

    pub fn radial_extent(&self) -> f64 {
        3.0 * self.radius
    }

    pub fn region_boxes(&self) -> [RegionBox; 5] {
        let b = self.axial_breaks();
        let r1 = self.radial_extent();
        Region::ALL.map(|reg| {
            let i = reg.index();
            RegionBox { region: reg, x0: b[i], x1: b[i + 1], r0: 0.0, r1 }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionBox {
    pub region: Region,
    pub x0: f64,
    pub x1: f64,
    pub r0: f64,
    pub r1: f64,
}

impl RegionBox {
    pub fn contains(&self, x: f64, r: f64) -> bool {
        x >= self.x0 && x <= self.x1 && r >= self.r0 && r <= self.r1
    }
}

/// Node counts and axial node allocation for case grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub nr: usize,
    /// Share of the parametric axial coordinate given to each region.
    pub axial_fractions: [f64; 5],
    /// Exponent clustering near-field nodes toward the injector exit (1 = uniform).
    pub exit_clustering: f64,
}

impl GridSpec {
    pub fn new(nx: usize, nr: usize) -> Self {
        Self { nx, nr, ..Self::default() }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nx: 64, nr: 48, axial_fractions: [0.06, 0.30, 0.34, 0.15, 0.15], exit_clustering: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisymGrid {
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    /// Quadrature weight per node (mm^2), index `ix * nr + jr`.
    pub cell_area: Vec<f64>,
    pub region: Vec<Region>,
}

impl AxisymGrid {
    /// Builds a grid from axis coordinates, labelling nodes by `label(ix, jr)`.
    pub fn new(x: Vec<f64>, r: Vec<f64>, label: impl Fn(usize, usize) -> Region) -> Result<Self> {
        if x.len() < 2 || r.len() < 2 {
            return Err(Error::ShapeMismatch("grid needs at least two nodes per axis".into()));
        }
        for axis in [&x, &r] {
            if axis.windows(2).any(|w| !(w[1] > w[0])) || axis.iter().any(|v| !v.is_finite()) {
                return Err(Error::ShapeMismatch("grid coordinates must be strictly increasing".into()));
            }
        }
        let wx = trapezoid_weights(&x);
        let wr = trapezoid_weights(&r);
        let mut cell_area = Vec::with_capacity(x.len() * r.len());
        let mut region = Vec::with_capacity(x.len() * r.len());
        for (ix, &ax) in wx.iter().enumerate() {
            for (jr, &ar) in wr.iter().enumerate() {
                cell_area.push(ax * ar);
                region.push(label(ix, jr));
            }
        }
        Ok(Self { x, r, cell_area, region })
    }

    /// Region-aligned grid covering a case's domain.
    pub fn for_geometry(geom: &CaseGeometry, spec: &GridSpec) -> Result<Self> {
        let breaks = geom.axial_breaks();
        if breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::DegenerateRegion("zero-length axial region".into()));
        }
        let (xs, regions) = axial_layout(&breaks, spec)?;
        let re = geom.radial_extent();
        let r: Vec<f64> = (0..spec.nr).map(|j| re * j as f64 / (spec.nr - 1) as f64).collect();
        Self::new(xs, r, |ix, _| regions[ix])
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn nr(&self) -> usize {
        self.r.len()
    }

    pub fn len(&self) -> usize {
        self.x.len() * self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, ix: usize, jr: usize) -> usize {
        ix * self.r.len() + jr
    }

    pub fn coords(&self, node: usize) -> (f64, f64) {
        let nr = self.r.len();
        (self.x[node / nr], self.r[node % nr])
    }

    pub fn nodes_in(&self, region: Region) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.region[i] == region).collect()
    }

    pub fn extent(&self) -> (f64, f64, f64, f64) {
        (self.x[0], *self.x.last().unwrap(), self.r[0], *self.r.last().unwrap())
    }
}

fn trapezoid_weights(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let lo = if i == 0 { v[0] } else { 0.5 * (v[i - 1] + v[i]) };
            let hi = if i + 1 == n { v[n - 1] } else { 0.5 * (v[i] + v[i + 1]) };
            hi - lo
        })
        .collect()
}

/// Axial node coordinates and region labels for a region-aligned grid.
fn axial_layout(breaks: &[f64; 6], spec: &GridSpec) -> Result<(Vec<f64>, Vec<Region>)> {
    if spec.nx < 6 || spec.nr < 2 {
        return Err(Error::ShapeMismatch(format!("grid {}x{} too small", spec.nx, spec.nr)));
    }
    let total: f64 = spec.axial_fractions.iter().sum();
    if spec.axial_fractions.iter().any(|f| *f <= 0.0) || total <= 0.0 {
        return Err(Error::ShapeMismatch("axial fractions must be positive".into()));
    }
    let mut cum = [0.0; 6];
    for i in 0..5 {
        cum[i + 1] = cum[i] + spec.axial_fractions[i] / total;
    }
    cum[5] = 1.0;
    let mut xs = Vec::with_capacity(spec.nx);
    let mut regions = Vec::with_capacity(spec.nx);
    for i in 0..spec.nx {
        let s = i as f64 / (spec.nx - 1) as f64;
        let j = (0..5).rev().find(|&j| s >= cum[j]).unwrap_or(0);
        let u = ((s - cum[j]) / (cum[j + 1] - cum[j])).clamp(0.0, 1.0);
        let g = if Region::ALL[j] == Region::NearField { u.powf(spec.exit_clustering) } else { u };
        xs.push(breaks[j] + (breaks[j + 1] - breaks[j]) * g);
        regions.push(Region::ALL[j]);
    }
    Ok((xs, regions))
}

/// Five region boxes for a design, checked against a grid's extent.
pub fn partition_domain(grid: &AxisymGrid, d: &DesignPoint) -> Result<[RegionBox; 5]> {
    let geom = CaseGeometry::from_design(d);
    let boxes = geom.region_boxes();
    let (x0, x1, r0, r1) = grid.extent();
    let tol = 1e-9 * (1.0 + x1.abs());
    if x0 > tol || x1 < boxes[4].x1 - tol || r0 > tol || r1 < geom.radial_extent() - tol {
        return Err(Error::GeometryMismatch(format!(
            "grid spans x[{x0}, {x1}] r[{r0}, {r1}], domain needs x[0, {}] r[0, {}]",
            boxes[4].x1,
            geom.radial_extent()
        )));
    }
    Ok(boxes)
}

/// Time-ordered snapshots of several variables on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSeries {
    pub grid: AxisymGrid,
    pub dt: f64,
    pub t0: f64,
    steps: usize,
    /// Per variable, `steps * nodes` values, time-major.
    data: BTreeMap<Variable, Vec<f64>>,
}

impl SnapshotSeries {
    pub fn new(grid: AxisymGrid, steps: usize, dt: f64, t0: f64) -> Result<Self> {
        if steps == 0 || !(dt > 0.0) {
            return Err(Error::ShapeMismatch(format!("need T >= 1 and dt > 0, got T={steps}, dt={dt}")));
        }
        Ok(Self { grid, dt, t0, steps, data: BTreeMap::new() })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn nodes(&self) -> usize {
        self.grid.len()
    }

    pub fn insert(&mut self, var: Variable, values: Vec<f64>) -> Result<()> {
        if values.len() != self.steps * self.nodes() {
            return Err(Error::ShapeMismatch(format!(
                "{var}: {} values for {} steps x {} nodes",
                values.len(),
                self.steps,
                self.nodes()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch(format!("{var}: non-finite values")));
        }
        self.data.insert(var, values);
        Ok(())
    }

    pub fn variables(&self) -> impl Iterator<Item = Variable> + '_ {
        self.data.keys().copied()
    }

    pub fn has(&self, var: Variable) -> bool {
        self.data.contains_key(&var)
    }

    pub fn values(&self, var: Variable) -> Result<&[f64]> {
        self.data
            .get(&var)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Corpus(format!("series has no `{var}` field")))
    }

    pub fn snapshot(&self, var: Variable, t: usize) -> Result<&[f64]> {
        let n = self.nodes();
        if t >= self.steps {
            return Err(Error::ShapeMismatch(format!("step {t} out of range {}", self.steps)));
        }
        Ok(&self.values(var)?[t * n..(t + 1) * n])
    }

    /// Time signal at one node.
    pub fn node_signal(&self, var: Variable, node: usize) -> Result<Vec<f64>> {
        let n = self.nodes();
        let v = self.values(var)?;
        Ok((0..self.steps).map(|t| v[t * n + node]).collect())
    }

    /// Temporal mean of one variable.
    pub fn mean_field(&self, var: Variable) -> Result<Vec<f64>> {
        let n = self.nodes();
        let v = self.values(var)?;
        let mut out = vec![0.0; n];
        for snap in v.chunks(n) {
            for (o, x) in out.iter_mut().zip(snap) {
                *o += x;
            }
        }
        out.iter_mut().for_each(|o| *o /= self.steps as f64);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn partition_breaks_follow_geometry() {
        let d = DesignPoint::injector(20.0, 3.22, 52.9, 0.52, 3.42);
        let grid = AxisymGrid::for_geometry(&CaseGeometry::from_design(&d), &GridSpec::default()).unwrap();
        let boxes = partition_domain(&grid, &d).unwrap();
        let breaks: Vec<f64> = boxes.iter().map(|b| b.x0).chain([boxes[4].x1]).collect();
        for (got, want) in breaks.iter().zip([0.0, 3.42, 23.42, 43.42, 63.42, 83.42]) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn every_node_in_its_labelled_box() {
        let d = DesignPoint::injector(63.0, 2.4, 50.0, 1.9, 1.2);
        let geom = CaseGeometry::from_design(&d);
        let grid = AxisymGrid::for_geometry(&geom, &GridSpec::default()).unwrap();
        let boxes = geom.region_boxes();
        for i in 0..grid.len() {
            let (x, r) = grid.coords(i);
            assert!(boxes[grid.region[i].index()].contains(x, r), "node {i} at ({x}, {r})");
        }
        for reg in Region::ALL {
            assert!(!grid.nodes_in(reg).is_empty(), "{} empty", reg.name());
        }
    }

    #[test]
    fn identical_geometry_identical_boxes() {
        let d = DesignPoint::injector(40.0, 3.0, 60.0, 1.0, 2.0);
        let g1 = AxisymGrid::for_geometry(&CaseGeometry::from_design(&d), &GridSpec::new(32, 16)).unwrap();
        let g2 = AxisymGrid::for_geometry(&CaseGeometry::from_design(&d), &GridSpec::new(80, 40)).unwrap();
        assert_eq!(partition_domain(&g1, &d).unwrap(), partition_domain(&g2, &d).unwrap());
    }

    #[test]
    fn partition_rejects_short_grid() {
        let small = DesignPoint::injector(20.0, 2.0, 60.0, 1.0, 1.0);
        let big = DesignPoint::injector(90.0, 4.0, 60.0, 1.0, 1.0);
        let grid = AxisymGrid::for_geometry(&CaseGeometry::from_design(&small), &GridSpec::new(16, 8)).unwrap();
        assert!(matches!(partition_domain(&grid, &big), Err(Error::GeometryMismatch(_))));
    }

    #[test]
    fn cell_areas_sum_to_domain_area() {
        let geom = CaseGeometry { headend: 2.0, length: 30.0, radius: 3.0 };
        let grid = AxisymGrid::for_geometry(&geom, &GridSpec::default()).unwrap();
        let total: f64 = grid.cell_area.iter().sum();
        assert_relative_eq!(total, (2.0 + 120.0) * 9.0, max_relative = 1e-12);
        assert!(grid.cell_area.iter().all(|a| *a > 0.0));
    }

    #[test]
    fn series_shape_checks() {
        let grid = AxisymGrid::new(vec![0.0, 1.0], vec![0.0, 1.0], |_, _| Region::Headend).unwrap();
        let mut s = SnapshotSeries::new(grid, 2, 1.0, 0.0).unwrap();
        assert!(s.insert(Variable::Pressure, vec![0.0; 7]).is_err());
        assert!(s.insert(Variable::Pressure, vec![f64::NAN; 8]).is_err());
        s.insert(Variable::Pressure, (0..8).map(f64::from).collect()).unwrap();
        assert_eq!(s.snapshot(Variable::Pressure, 1).unwrap(), &[4.0, 5.0, 6.0, 7.0]);
        assert_eq!(s.node_signal(Variable::Pressure, 2).unwrap(), vec![2.0, 6.0]);
        assert_eq!(s.mean_field(Variable::Pressure).unwrap(), vec![2.0, 3.0, 4.0, 5.0]);
        assert!(s.values(Variable::Density).is_err());
        assert!(SnapshotSeries::new(s.grid.clone(), 0, 1.0, 0.0).is_err());
    }

    #[test]
    fn variable_names_round_trip() {
        for v in Variable::ALL {
            assert_eq!(v.name().parse::<Variable>().unwrap(), v);
        }
    }
}
