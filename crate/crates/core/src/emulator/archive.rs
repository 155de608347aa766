//! Model archive directory.
//!
//! ```text
//! manifest.json
//! <partition>/common_grid.bin
//! <partition>/maps.json
//! <partition>/basis_<var>.bin
//! <partition>/coeffs_<var>.bin
//! <partition>/gp_<var>.bin
//! ```
//!
//! GP factorizations are rebuilt from the stored hyperparameters and training
//! coefficients, so a loaded model predicts bit-identically to the saved one.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::AtomicUsize;

use serde::{Deserialize, Serialize};

use super::{CaseMetrics, EmulatorConfig, EmulatorModel, PartitionLabel, PartitionModel, VariableModel};
use crate::common_grid::{CommonGrid, RegionMap};
use crate::design::{DesignPoint, DesignSpace};
use crate::error::{Error, Result};
use crate::field::{CaseGeometry, RegionBox, Variable};
use crate::kriging::{GpModel, GpParams};
use crate::pod::CpodBasis;
use crate::store::{
    decode_basis, decode_coeffs, decode_gp_params, decode_grid, encode_basis, encode_coeffs, encode_gp_params,
    encode_grid, BasisRecord,
};
use crate::tree::TreeNode;

pub const MANIFEST_FILE: &str = "manifest.json";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    crate_version: String,
    config: EmulatorConfig,
    space: DesignSpace,
    steps: usize,
    dt: f64,
    designs: Vec<DesignPoint>,
    metrics: Vec<CaseMetrics>,
    tree: Option<TreeNode>,
    partitions: Vec<PartitionEntry>,
    thickness_gp: GpParams,
    angle_gp: GpParams,
}

#[derive(Debug, Serialize, Deserialize)]
struct PartitionEntry {
    label: PartitionLabel,
    cases: Vec<usize>,
    /// Retained modes per variable.
    modes: BTreeMap<Variable, usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MapsFile {
    common_geometry: CaseGeometry,
    source_case: usize,
    common_boxes: [RegionBox; 5],
    cases: Vec<CaseMapEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CaseMapEntry {
    case: usize,
    boxes: [RegionBox; 5],
    map: RegionMap,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::ModelMissing(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn var_file(prefix: &str, var: Variable) -> String {
    format!("{prefix}_{}.bin", var.name())
}

/// Writes the model archive under `dir`, creating it if needed.
pub fn save_model(model: &EmulatorModel, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let p = model.space.dim();
    for part in &model.partitions {
        let pdir = dir.join(part.label.name());
        fs::create_dir_all(&pdir)?;
        fs::write(pdir.join("common_grid.bin"), encode_grid(&part.common.grid)?)?;
        let maps = MapsFile {
            common_geometry: part.common.geometry,
            source_case: part.common.source_case,
            common_boxes: part.common.boxes(),
            cases: part
                .cases
                .iter()
                .zip(&part.maps)
                .map(|(&case, map)| CaseMapEntry { case, boxes: map.target, map: map.clone() })
                .collect(),
        };
        write_json(&pdir.join("maps.json"), &maps)?;
        for (&var, vm) in &part.variables {
            let b = &vm.basis;
            let rec = BasisRecord {
                mean_field: b.mean_field.clone(),
                modes: b.modes.clone(),
                eigenvalues: b.eigenvalues.clone(),
                quadrature: b.quadrature.clone(),
                total_energy: b.total_energy,
                centered: b.centered,
            };
            fs::write(pdir.join(var_file("basis", var)), encode_basis(&rec)?)?;
            fs::write(pdir.join(var_file("coeffs", var)), encode_coeffs(&vm.coeffs)?)?;
            let params: Vec<GpParams> = vm.gps.iter().map(|g| g.params.clone()).collect();
            fs::write(pdir.join(var_file("gp", var)), encode_gp_params(&params, p)?)?;
        }
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        config: model.config.clone(),
        space: model.space.clone(),
        steps: model.steps,
        dt: model.dt,
        designs: model.designs.clone(),
        metrics: model.metrics.clone(),
        tree: model.tree.clone(),
        partitions: model
            .partitions
            .iter()
            .map(|p| PartitionEntry {
                label: p.label,
                cases: p.cases.clone(),
                modes: p.variables.iter().map(|(v, m)| (*v, m.basis.k())).collect(),
            })
            .collect(),
        thickness_gp: model.thickness_gp.params.clone(),
        angle_gp: model.angle_gp.params.clone(),
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)
}

fn load_partition(dir: &Path, entry: &PartitionEntry, x_all: &[Vec<f64>], steps: usize) -> Result<PartitionModel> {
    let pdir = dir.join(entry.label.name());
    let read = |name: &str| fs::read(pdir.join(name)).map_err(|e| Error::ModelMissing(format!("{}/{name}: {e}", pdir.display())));
    let grid = decode_grid(&read("common_grid.bin")?)?;
    let maps: MapsFile = read_json(&pdir.join("maps.json"))?;
    let common = CommonGrid { grid, geometry: maps.common_geometry, source_case: maps.source_case };
    let x: Vec<Vec<f64>> = entry
        .cases
        .iter()
        .map(|&i| x_all.get(i).cloned().ok_or_else(|| Error::Format(format!("partition case {i} out of range"))))
        .collect::<Result<_>>()?;
    let mut variables = BTreeMap::new();
    for (&var, &k) in &entry.modes {
        let rec = decode_basis(&read(&var_file("basis", var))?)?;
        let coeffs = decode_coeffs(&read(&var_file("coeffs", var))?)?;
        let params = decode_gp_params(&read(&var_file("gp", var))?)?;
        if rec.modes.len() != k || coeffs.modes != k || coeffs.cases != x.len() || coeffs.steps != steps {
            return Err(Error::Format(format!("{}: {var} archive shapes disagree with the manifest", pdir.display())));
        }
        if params.len() != k * steps || rec.mean_field.len() != common.grid.len() {
            return Err(Error::Format(format!("{}: {var} record counts disagree", pdir.display())));
        }
        let mut cum = 0.0;
        let energy_fraction = rec
            .eigenvalues
            .iter()
            .map(|l| {
                cum += l;
                (cum / rec.total_energy).min(1.0)
            })
            .collect();
        let basis = CpodBasis {
            variable: var,
            common: common.clone(),
            mean_field: rec.mean_field,
            modes: rec.modes,
            eigenvalues: rec.eigenvalues,
            energy_fraction,
            total_energy: rec.total_energy,
            quadrature: rec.quadrature,
            centered: rec.centered,
        };
        let gps = params
            .iter()
            .enumerate()
            .map(|(j, gp)| {
                let (kk, t) = (j / steps, j % steps);
                let y: Vec<f64> = (0..coeffs.cases).map(|i| coeffs.get(kk, i, t)).collect();
                GpModel::from_params(&x, &y, gp)
            })
            .collect::<Result<_>>()?;
        variables.insert(var, VariableModel { basis, coeffs, gps });
    }
    let maps = maps.cases.into_iter().map(|c| c.map).collect();
    Ok(PartitionModel { label: entry.label, cases: entry.cases.clone(), common, maps, variables, uses: AtomicUsize::new(0) })
}

pub fn load_model(dir: &Path) -> Result<EmulatorModel> {
    let m: Manifest = read_json(&dir.join(MANIFEST_FILE))?;
    if m.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!("archive format {} (expected {FORMAT_VERSION})", m.format_version)));
    }
    if m.metrics.len() != m.designs.len() {
        return Err(Error::Format("manifest metrics and designs disagree".into()));
    }
    let x = super::normalized_rows(&m.space, &m.designs)?;
    let partitions = m.partitions.iter().map(|e| load_partition(dir, e, &x, m.steps)).collect::<Result<_>>()?;
    let thickness: Vec<f64> = m.metrics.iter().map(|c| c.thickness).collect();
    let angle: Vec<f64> = m.metrics.iter().map(|c| c.angle).collect();
    Ok(EmulatorModel {
        thickness_gp: GpModel::from_params(&x, &thickness, &m.thickness_gp)?,
        angle_gp: GpModel::from_params(&x, &angle, &m.angle_gp)?,
        space: m.space,
        config: m.config,
        designs: m.designs,
        metrics: m.metrics,
        tree: m.tree,
        partitions,
        steps: m.steps,
        dt: m.dt,
    })
}
