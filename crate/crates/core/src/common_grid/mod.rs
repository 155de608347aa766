//! Common grid for pooling cases of different geometry.
//!
//! Each case domain is cut into five axial boxes (headend, interior, three
//! downstream thirds). A [`RegionMap`] sends every box of one domain onto the
//! matching box of another with an axis-aligned affine transform, and field
//! values are carried across by inverse-distance weighting in the source
//! grid's fractional-index coordinates.

mod kdtree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{AxisymGrid, CaseGeometry, Region, RegionBox, SnapshotSeries};

pub use kdtree::KdTree;

pub const DEFAULT_NEIGHBOURS: usize = 10;
pub const DEFAULT_POWER: f64 = 2.0;
const EXACT_HIT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdwConfig {
    pub neighbours: usize,
    pub power: f64,
}

impl Default for IdwConfig {
    fn default() -> Self {
        Self { neighbours: DEFAULT_NEIGHBOURS, power: DEFAULT_POWER }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine1 {
    pub scale: f64,
    pub offset: f64,
}

impl Affine1 {
    /// The map sending `[a0, a1]` onto `[b0, b1]`.
    pub fn between(a0: f64, a1: f64, b0: f64, b1: f64) -> Self {
        let scale = (b1 - b0) / (a1 - a0);
        Self { scale, offset: b0 - scale * a0 }
    }

    pub fn apply(&self, v: f64) -> f64 {
        self.scale * v + self.offset
    }

    pub fn invert(&self, v: f64) -> f64 {
        (v - self.offset) / self.scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionTransform {
    pub region: Region,
    pub axial: Affine1,
    pub radial: Affine1,
}

/// Per-region affine maps from one domain (the source boxes) onto another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    pub source: [RegionBox; 5],
    pub target: [RegionBox; 5],
    pub transforms: [RegionTransform; 5],
}

fn check_boxes(boxes: &[RegionBox; 5]) -> Result<()> {
    for b in boxes {
        if !(b.x1 > b.x0) || !(b.r1 > b.r0) {
            return Err(Error::DegenerateRegion(b.region.name().into()));
        }
    }
    Ok(())
}

/// Which box holds `x`; boundary points resolve to the lower region, which maps
/// them identically by continuity.
fn locate(boxes: &[RegionBox; 5], x: f64) -> usize {
    boxes.iter().position(|b| x <= b.x1).unwrap_or(4)
}

impl RegionMap {
    pub fn between(source: [RegionBox; 5], target: [RegionBox; 5]) -> Result<Self> {
        check_boxes(&source)?;
        check_boxes(&target)?;
        let transforms = std::array::from_fn(|i| {
            let (s, t) = (&source[i], &target[i]);
            RegionTransform {
                region: s.region,
                axial: Affine1::between(s.x0, s.x1, t.x0, t.x1),
                radial: Affine1::between(s.r0, s.r1, t.r0, t.r1),
            }
        });
        Ok(Self { source, target, transforms })
    }

    pub fn forward(&self, x: f64, r: f64) -> (f64, f64) {
        let t = &self.transforms[locate(&self.source, x)];
        (t.axial.apply(x), t.radial.apply(r))
    }

    pub fn inverse(&self, x: f64, r: f64) -> (f64, f64) {
        let t = &self.transforms[locate(&self.target, x)];
        (t.axial.invert(x), t.radial.invert(r))
    }

    pub fn inverted(&self) -> Self {
        Self::between(self.target, self.source).expect("boxes already validated")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommonGrid {
    pub grid: AxisymGrid,
    pub geometry: CaseGeometry,
    /// Index of the case whose grid was selected.
    pub source_case: usize,
}

impl CommonGrid {
    pub fn boxes(&self) -> [RegionBox; 5] {
        self.geometry.region_boxes()
    }
}

/// Densest grid among the cases; ties go to the lowest index.
pub fn select_common_grid(cases: &[(AxisymGrid, CaseGeometry)]) -> Result<CommonGrid> {
    let (idx, (grid, geometry)) = cases
        .iter()
        .enumerate()
        .reduce(|best, cur| if cur.1 .0.len() > best.1 .0.len() { cur } else { best })
        .ok_or_else(|| Error::Corpus("no cases to select a common grid from".into()))?;
    Ok(CommonGrid { grid: grid.clone(), geometry: *geometry, source_case: idx })
}

/// Region map from the common domain onto a case domain.
pub fn build_region_map(common: &CommonGrid, case: &CaseGeometry) -> Result<RegionMap> {
    RegionMap::between(common.boxes(), case.region_boxes())
}

/// IDW weights for a fixed set of query points, reusable across fields.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationPlan {
    source_len: usize,
    stencils: Vec<Vec<(usize, f64)>>,
}

impl InterpolationPlan {
    pub fn new(source: &[[f64; 2]], queries: &[[f64; 2]], cfg: IdwConfig) -> Result<Self> {
        if source.is_empty() {
            return Err(Error::EmptySource);
        }
        let tree = KdTree::new(source.to_vec());
        let stencils = queries.iter().map(|&q| idw_weights(&tree, q, cfg)).collect();
        Ok(Self { source_len: source.len(), stencils })
    }

    pub fn len(&self) -> usize {
        self.stencils.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stencils.is_empty()
    }

    pub fn stencil(&self, q: usize) -> &[(usize, f64)] {
        &self.stencils[q]
    }

    pub fn apply(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.source_len {
            return Err(Error::ShapeMismatch(format!(
                "plan built for {} source nodes, got {} values",
                self.source_len,
                values.len()
            )));
        }
        Ok(self.stencils.iter().map(|st| st.iter().map(|&(i, w)| w * values[i]).sum()).collect())
    }
}

fn idw_weights(tree: &KdTree, q: [f64; 2], cfg: IdwConfig) -> Vec<(usize, f64)> {
    let near = tree.nearest(q, cfg.neighbours.max(1));
    if near[0].1.sqrt() <= EXACT_HIT {
        return vec![(near[0].0, 1.0)];
    }
    let raw: Vec<(usize, f64)> = near.iter().map(|&(i, d2)| (i, d2.sqrt().powf(-cfg.power))).collect();
    let total: f64 = raw.iter().map(|w| w.1).sum();
    raw.into_iter().map(|(i, w)| (i, w / total)).collect()
}

/// Inverse-distance-weighted values at `queries` from scattered `source` samples.
pub fn idw_interpolate(source: &[[f64; 2]], values: &[f64], queries: &[[f64; 2]], cfg: IdwConfig) -> Result<Vec<f64>> {
    if cfg.neighbours > source.len() {
        return Err(Error::ShapeMismatch(format!("k = {} exceeds {} source nodes", cfg.neighbours, source.len())));
    }
    InterpolationPlan::new(source, queries, cfg)?.apply(values)
}

/// Fractional node index of `v` along a strictly increasing axis, clamped to its ends.
pub fn fractional_index(axis: &[f64], v: f64) -> f64 {
    let n = axis.len();
    if v <= axis[0] {
        return 0.0;
    }
    if v >= axis[n - 1] {
        return (n - 1) as f64;
    }
    let hi = axis.partition_point(|&a| a <= v);
    let lo = hi - 1;
    lo as f64 + (v - axis[lo]) / (axis[hi] - axis[lo])
}

/// Interpolation plan carrying fields from one domain's grid onto another's.
///
/// Every destination node is pulled back into the source domain through the
/// per-region affine maps. Distances are measured in the source grid's
/// fractional-index space so stencils stay balanced on anisotropic grids.
pub fn remap_plan(
    src_grid: &AxisymGrid,
    src_geom: &CaseGeometry,
    dst_grid: &AxisymGrid,
    dst_geom: &CaseGeometry,
    cfg: IdwConfig,
) -> Result<InterpolationPlan> {
    let dst_to_src = RegionMap::between(dst_geom.region_boxes(), src_geom.region_boxes())?;
    let nr = src_grid.nr();
    let source: Vec<[f64; 2]> = (0..src_grid.len()).map(|i| [(i / nr) as f64, (i % nr) as f64]).collect();
    let queries: Vec<[f64; 2]> = (0..dst_grid.len())
        .map(|i| {
            let (x, r) = dst_grid.coords(i);
            let (sx, sr) = dst_to_src.forward(x, r);
            [fractional_index(&src_grid.x, sx), fractional_index(&src_grid.r, sr)]
        })
        .collect();
    InterpolationPlan::new(&source, &queries, cfg)
}

fn apply_to_series(series: &SnapshotSeries, plan: &InterpolationPlan, grid: &AxisymGrid) -> Result<SnapshotSeries> {
    let mut out = SnapshotSeries::new(grid.clone(), series.steps(), series.dt, series.t0)?;
    let vars: Vec<_> = series.variables().collect();
    for var in vars {
        let mut data = Vec::with_capacity(series.steps() * grid.len());
        for t in 0..series.steps() {
            data.extend(plan.apply(series.snapshot(var, t)?)?);
        }
        out.insert(var, data)?;
    }
    Ok(out)
}

/// Carries every variable of a case series onto the common grid.
pub fn rescale_case_to_common(
    series: &SnapshotSeries,
    case_geom: &CaseGeometry,
    common: &CommonGrid,
    cfg: IdwConfig,
) -> Result<SnapshotSeries> {
    let plan = remap_plan(&series.grid, case_geom, &common.grid, &common.geometry, cfg)?;
    apply_to_series(series, &plan, &common.grid)
}

/// Carries a common-grid series onto a target geometry's grid.
pub fn rescale_common_to_case(
    series: &SnapshotSeries,
    common: &CommonGrid,
    target_grid: &AxisymGrid,
    target_geom: &CaseGeometry,
    cfg: IdwConfig,
) -> Result<SnapshotSeries> {
    let plan = remap_plan(&common.grid, &common.geometry, target_grid, target_geom, cfg)?;
    apply_to_series(series, &plan, target_grid)
}
