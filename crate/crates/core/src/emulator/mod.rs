//! Training and prediction: classification-partitioned corpora, one common
//! basis per class and variable, one GP per (mode, timestep).

mod archive;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::common_grid::{
    build_region_map, remap_plan, rescale_case_to_common, select_common_grid, CommonGrid, IdwConfig, RegionMap,
};
use crate::design::{DesignPoint, DesignSpace, NormalizedDesign};
use crate::diagnostics::{extract_film_metrics, film_metrics, FilmMetrics, DEFAULT_CI_LEVEL};
use crate::error::{Error, Result};
use crate::field::{AxisymGrid, CaseGeometry, GridSpec, SnapshotSeries, Variable};
use crate::kriging::{confidence_halfwidth, fit_mle, GpModel, KrigingConfig, Prediction};
use crate::oracle::FlowClass;
use crate::pod::{assemble_ensemble, compute_basis, CoeffTable, CpodBasis, PodConfig};
use crate::store::{read_corpus, Case};
use crate::tree::{classify, fit_tree, LabeledDesign, TreeConfig, TreeNode};

pub use archive::{load_model, save_model, MANIFEST_FILE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmulatorConfig {
    pub variables: Vec<Variable>,
    pub pod: PodConfig,
    pub kriging: KrigingConfig,
    pub idw: IdwConfig,
    pub tree: TreeConfig,
    /// Train one model per flow class; `false` trains a single pooled model.
    pub partitioned: bool,
    /// Layout of prediction grids.
    pub grid: GridSpec,
    pub ci_level: f64,
}

impl Default for EmulatorConfig {
    fn default() -> Self {
        Self {
            variables: Variable::ALL.to_vec(),
            pod: PodConfig::default(),
            kriging: KrigingConfig::default(),
            idw: IdwConfig::default(),
            tree: TreeConfig::default(),
            partitioned: true,
            grid: GridSpec::default(),
            ci_level: DEFAULT_CI_LEVEL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionLabel {
    Pooled,
    Jet,
    Swirl,
}

impl PartitionLabel {
    pub fn name(self) -> &'static str {
        match self {
            PartitionLabel::Pooled => "pooled",
            PartitionLabel::Jet => "jet",
            PartitionLabel::Swirl => "swirl",
        }
    }
}

impl From<FlowClass> for PartitionLabel {
    fn from(c: FlowClass) -> Self {
        match c {
            FlowClass::Jet => PartitionLabel::Jet,
            FlowClass::Swirl => PartitionLabel::Swirl,
        }
    }
}

impl fmt::Display for PartitionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Response {
    Thickness,
    Angle,
}

/// Basis, training coefficients and the K×T coefficient GPs of one variable.
#[derive(Debug, Clone)]
pub struct VariableModel {
    pub basis: CpodBasis,
    pub coeffs: CoeffTable,
    /// Indexed `k * steps + t`.
    pub gps: Vec<GpModel>,
}

impl VariableModel {
    pub fn gp(&self, k: usize, t: usize) -> &GpModel {
        &self.gps[k * self.coeffs.steps + t]
    }
}

#[derive(Debug)]
pub struct PartitionModel {
    pub label: PartitionLabel,
    /// Indices into the model's training designs.
    pub cases: Vec<usize>,
    pub common: CommonGrid,
    /// Maps from the common domain to each training case, in `cases` order.
    pub maps: Vec<RegionMap>,
    pub variables: BTreeMap<Variable, VariableModel>,
    uses: AtomicUsize,
}

impl PartitionModel {
    /// Number of predictions routed through this partition.
    pub fn uses(&self) -> usize {
        self.uses.load(Ordering::Relaxed)
    }

    pub fn variable(&self, var: Variable) -> Result<&VariableModel> {
        self.variables
            .get(&var)
            .ok_or_else(|| Error::ModelMissing(format!("{var} in the {} partition", self.label)))
    }
}

/// Film metrics of one training case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub thickness: f64,
    pub angle: f64,
    pub label: FlowClass,
}

#[derive(Debug)]
pub struct EmulatorModel {
    pub space: DesignSpace,
    pub config: EmulatorConfig,
    pub designs: Vec<DesignPoint>,
    pub metrics: Vec<CaseMetrics>,
    /// Present iff the model is partitioned.
    pub tree: Option<TreeNode>,
    pub partitions: Vec<PartitionModel>,
    pub thickness_gp: GpModel,
    pub angle_gp: GpModel,
    pub steps: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarEstimate {
    pub mean: f64,
    pub variance: f64,
    /// Half-width of the two-sided interval at `level`.
    pub ci: f64,
    pub level: f64,
}

/// Predicted coefficient means and variances, K rows of T.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPrediction {
    pub mean: Vec<Vec<f64>>,
    pub variance: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct EmulationResult {
    pub design: DesignPoint,
    pub geometry: CaseGeometry,
    pub classification: FlowClass,
    pub partition: PartitionLabel,
    /// Mean fields on the target grid.
    pub fields: SnapshotSeries,
    /// Pointwise predictive variance, time-major like `fields`.
    pub variance: BTreeMap<Variable, Vec<f64>>,
    pub thickness: ScalarEstimate,
    pub angle: ScalarEstimate,
    /// Metrics traced on the predicted mean density, when density is emulated.
    pub field_metrics: Option<FilmMetrics>,
}

fn normalized_rows(space: &DesignSpace, designs: &[DesignPoint]) -> Result<Vec<Vec<f64>>> {
    designs.iter().map(|d| Ok(space.normalize(d)?.coords().to_vec())).collect()
}

fn check_corpus(cases: &[Case], space: &DesignSpace, cfg: &EmulatorConfig) -> Result<()> {
    let first = cases.first().ok_or_else(|| Error::Corpus("empty corpus".into()))?;
    if !(cfg.pod.energy_target > 0.0 && cfg.pod.energy_target <= 1.0) {
        return Err(Error::InvalidSpace(format!("energy target {} outside (0, 1]", cfg.pod.energy_target)));
    }
    if cfg.variables.is_empty() {
        return Err(Error::Corpus("no variables requested".into()));
    }
    for (i, c) in cases.iter().enumerate() {
        space.check(&c.design)?;
        if c.series.steps() != first.series.steps() {
            return Err(Error::Corpus(format!(
                "case {i}: {} timesteps, case 0 has {}",
                c.series.steps(),
                first.series.steps()
            )));
        }
        if (c.series.dt - first.series.dt).abs() > 1e-12 * first.series.dt.abs() {
            return Err(Error::Corpus(format!("case {i}: dt {} differs from {}", c.series.dt, first.series.dt)));
        }
        for var in cfg.variables.iter().copied().chain([Variable::Density]) {
            if !c.series.has(var) {
                return Err(Error::Corpus(format!("case {i}: missing variable {var}")));
            }
        }
    }
    Ok(())
}

fn fit_coefficient_gps(x: &[Vec<f64>], coeffs: &CoeffTable, cfg: &KrigingConfig) -> Result<Vec<GpModel>> {
    (0..coeffs.modes * coeffs.steps)
        .into_par_iter()
        .map(|j| {
            let (k, t) = (j / coeffs.steps, j % coeffs.steps);
            let y: Vec<f64> = (0..coeffs.cases).map(|i| coeffs.get(k, i, t)).collect();
            fit_mle(x, &y, cfg)
        })
        .collect()
}

fn train_partition(
    label: PartitionLabel,
    members: Vec<usize>,
    cases: &[Case],
    x_all: &[Vec<f64>],
    cfg: &EmulatorConfig,
) -> Result<PartitionModel> {
    let grids: Vec<(AxisymGrid, CaseGeometry)> =
        members.iter().map(|&i| (cases[i].series.grid.clone(), cases[i].geometry())).collect();
    let mut common = select_common_grid(&grids)?;
    common.source_case = members[common.source_case];
    let rescaled: Vec<SnapshotSeries> = members
        .iter()
        .map(|&i| rescale_case_to_common(&cases[i].series, &cases[i].geometry(), &common, cfg.idw))
        .collect::<Result<_>>()?;
    let maps = grids.iter().map(|(_, g)| build_region_map(&common, g)).collect::<Result<_>>()?;
    let refs: Vec<&SnapshotSeries> = rescaled.iter().collect();
    let x: Vec<Vec<f64>> = members.iter().map(|&i| x_all[i].clone()).collect();
    let mut variables = BTreeMap::new();
    for &var in &cfg.variables {
        let ensemble = assemble_ensemble(&refs, var, cfg.pod.centered)?;
        let (basis, coeffs) = compute_basis(&ensemble, &common, &cfg.pod)?;
        log::info!("{label}/{var}: {} cases, {} modes", members.len(), basis.k());
        let gps = fit_coefficient_gps(&x, &coeffs, &cfg.kriging)?;
        variables.insert(var, VariableModel { basis, coeffs, gps });
    }
    Ok(PartitionModel { label, cases: members, common, maps, variables, uses: AtomicUsize::new(0) })
}

/// Which partitions to build and whether a tree routes between them.
fn plan_partitions(labels: &[FlowClass], cfg: &EmulatorConfig) -> (bool, Vec<(PartitionLabel, Vec<usize>)>) {
    let all: Vec<usize> = (0..labels.len()).collect();
    if !cfg.partitioned {
        return (false, vec![(PartitionLabel::Pooled, all)]);
    }
    let members = |c: FlowClass| -> Vec<usize> { (0..labels.len()).filter(|&i| labels[i] == c).collect() };
    let (jet, swirl) = (members(FlowClass::Jet), members(FlowClass::Swirl));
    if jet.is_empty() || swirl.is_empty() {
        log::warn!("only one flow class in the corpus; training a pooled model");
        return (false, vec![(PartitionLabel::Pooled, all)]);
    }
    let mut parts = Vec::new();
    let mut pooled = false;
    for (label, m) in [(PartitionLabel::Jet, jet), (PartitionLabel::Swirl, swirl)] {
        if m.len() >= 2 {
            parts.push((label, m));
        } else {
            log::warn!("{label} class has {} case; it falls back to the pooled model", m.len());
            pooled = true;
        }
    }
    if pooled {
        parts.insert(0, (PartitionLabel::Pooled, all));
    }
    (true, parts)
}

/// Trains an emulator from in-memory cases.
pub fn train(cases: &[Case], space: &DesignSpace, cfg: &EmulatorConfig) -> Result<EmulatorModel> {
    check_corpus(cases, space, cfg)?;
    let designs: Vec<DesignPoint> = cases.iter().map(|c| c.design.clone()).collect();
    let x = normalized_rows(space, &designs)?;
    let metrics: Vec<CaseMetrics> = cases
        .par_iter()
        .map(|c| {
            let m = film_metrics(&c.series, &c.geometry())?;
            Ok(CaseMetrics { thickness: m.thickness, angle: m.angle, label: FlowClass::from_angle(m.angle) })
        })
        .collect::<Result<_>>()?;
    let labels: Vec<FlowClass> = metrics.iter().map(|m| m.label).collect();

    let (use_tree, plan) = plan_partitions(&labels, cfg);
    let tree = use_tree.then(|| {
        let data: Vec<LabeledDesign> = x
            .iter()
            .zip(&labels)
            .map(|(c, &label)| LabeledDesign { design: NormalizedDesign::new(c.clone()).expect("normalized"), label })
            .collect();
        fit_tree(&data, cfg.tree)
    });
    let partitions =
        plan.into_iter().map(|(label, m)| train_partition(label, m, cases, &x, cfg)).collect::<Result<_>>()?;

    let thickness: Vec<f64> = metrics.iter().map(|m| m.thickness).collect();
    let angle: Vec<f64> = metrics.iter().map(|m| m.angle).collect();
    Ok(EmulatorModel {
        space: space.clone(),
        config: cfg.clone(),
        designs,
        metrics,
        tree,
        partitions,
        thickness_gp: fit_mle(&x, &thickness, &cfg.kriging)?,
        angle_gp: fit_mle(&x, &angle, &cfg.kriging)?,
        steps: cases[0].series.steps(),
        dt: cases[0].series.dt,
    })
}

/// Trains from a corpus directory of case subdirectories.
pub fn train_from_dir(corpus: &Path, space: &DesignSpace, cfg: &EmulatorConfig) -> Result<EmulatorModel> {
    train(&read_corpus(corpus)?, space, cfg)
}

impl EmulatorModel {
    pub fn is_partitioned(&self) -> bool {
        self.tree.is_some()
    }

    pub fn partition(&self, label: PartitionLabel) -> Option<&PartitionModel> {
        self.partitions.iter().find(|p| p.label == label)
    }

    pub fn training_inputs(&self) -> Result<Vec<Vec<f64>>> {
        normalized_rows(&self.space, &self.designs)
    }

    pub fn predict_scalar(&self, response: Response, d: &DesignPoint) -> Result<ScalarEstimate> {
        let c = self.space.normalize(d)?;
        let gp = match response {
            Response::Thickness => &self.thickness_gp,
            Response::Angle => &self.angle_gp,
        };
        let p = gp.predict(c.coords());
        let level = self.config.ci_level;
        Ok(ScalarEstimate { mean: p.mean, variance: p.variance, ci: confidence_halfwidth(p.variance, level), level })
    }

    /// Flow class of a design: the tree when partitioned, else the emulated angle.
    pub fn classify(&self, d: &DesignPoint) -> Result<FlowClass> {
        let c = self.space.normalize(d)?;
        match &self.tree {
            Some(tree) => Ok(classify(tree, &c)),
            None => Ok(FlowClass::from_angle(self.predict_scalar(Response::Angle, d)?.mean)),
        }
    }

    fn route(&self, class: FlowClass) -> Result<&PartitionModel> {
        self.partition(class.into())
            .or_else(|| self.partition(PartitionLabel::Pooled))
            .ok_or_else(|| Error::ModelMissing(format!("no partition serves {class} designs")))
    }

    /// Coefficient predictions of one variable in a given partition.
    pub fn predict_coefficients(
        &self,
        partition: &PartitionModel,
        var: Variable,
        d: &DesignPoint,
    ) -> Result<CoefficientPrediction> {
        let c = self.space.normalize(d)?;
        let vm = partition.variable(var)?;
        let (k, steps) = (vm.basis.k(), vm.coeffs.steps);
        let preds: Vec<_> = (0..k * steps).into_par_iter().map(|j| vm.gps[j].predict(c.coords())).collect();
        let rows = |f: fn(&Prediction) -> f64| -> Vec<Vec<f64>> {
            preds.chunks(steps.max(1)).map(|row| row.iter().map(f).collect()).collect()
        };
        let mut out = CoefficientPrediction { mean: rows(|p| p.mean), variance: rows(|p| p.variance) };
        out.mean.resize(k, Vec::new());
        out.variance.resize(k, Vec::new());
        Ok(out)
    }

    pub fn predict_field(&self, d: &DesignPoint) -> Result<EmulationResult> {
        let geom = CaseGeometry::from_design(d);
        self.space.check(d)?;
        let grid = AxisymGrid::for_geometry(&geom, &self.config.grid)?;
        self.predict_field_on(d, &grid)
    }

    /// Prediction on a caller-supplied grid covering `d`'s geometry.
    pub fn predict_field_on(&self, d: &DesignPoint, grid: &AxisymGrid) -> Result<EmulationResult> {
        self.space.check(d)?;
        let geometry = CaseGeometry::from_design(d);
        let classification = self.classify(d)?;
        let part = self.route(classification)?;
        part.uses.fetch_add(1, Ordering::Relaxed);
        let plan = remap_plan(&part.common.grid, &part.common.geometry, grid, &geometry, self.config.idw)?;

        let mut fields = SnapshotSeries::new(grid.clone(), self.steps, self.dt, 0.0)?;
        let mut variance = BTreeMap::new();
        for &var in &self.config.variables {
            let vm = part.variable(var)?;
            let coeffs = self.predict_coefficients(part, var, d)?;
            let (mean_common, var_common) = assemble(&vm.basis, &coeffs, self.steps)?;
            let mut mean = Vec::with_capacity(self.steps * grid.len());
            let mut var_field = Vec::with_capacity(self.steps * grid.len());
            for t in 0..self.steps {
                mean.extend(plan.apply(&mean_common[t])?);
                var_field.extend(plan.apply(&var_common[t])?);
            }
            fields.insert(var, mean)?;
            variance.insert(var, var_field);
        }
        let field_metrics = if fields.has(Variable::Density) {
            extract_film_metrics(&fields.mean_field(Variable::Density)?, grid, &geometry).ok()
        } else {
            None
        };
        Ok(EmulationResult {
            design: d.clone(),
            geometry,
            classification,
            partition: part.label,
            fields,
            variance,
            thickness: self.predict_scalar(Response::Thickness, d)?,
            angle: self.predict_scalar(Response::Angle, d)?,
            field_metrics,
        })
    }
}

/// Mean and variance snapshots on the common grid from coefficient predictions;
/// modes are treated as independent.
pub fn assemble(basis: &CpodBasis, coeffs: &CoefficientPrediction, steps: usize) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    if coeffs.mean.len() != basis.k() || coeffs.variance.len() != basis.k() {
        return Err(Error::ShapeMismatch(format!("{} coefficient rows for {} modes", coeffs.mean.len(), basis.k())));
    }
    (0..steps)
        .into_par_iter()
        .map(|t| {
            let beta: Vec<f64> = coeffs.mean.iter().map(|row| row[t]).collect();
            let mean = basis.reconstruct_snapshot(&beta)?;
            let mut var = vec![0.0; basis.nodes()];
            for (phi, row) in basis.modes.iter().zip(&coeffs.variance) {
                let v = row[t].max(0.0);
                var.iter_mut().zip(phi).for_each(|(acc, p)| *acc += v * p * p);
            }
            Ok((mean, var))
        })
        .collect::<Result<Vec<_>>>()
        .map(|pairs| pairs.into_iter().unzip())
}
