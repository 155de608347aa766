//! Prediction payload shared by `cpodem predict` and `POST /api/predict`.

use std::fs;
use std::path::Path;

use cpodem_core::design::{DesignPoint, DesignSpace, NormalizedDesign};
use cpodem_core::emulator::{EmulationResult, PartitionLabel, ScalarEstimate};
use cpodem_core::field::Variable;
use cpodem_core::oracle::FlowClass;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Physical,
    Normalized,
}

/// Design values as submitted, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRequest {
    pub design: Vec<f64>,
    #[serde(default)]
    pub units: Units,
}

/// The bound a rejected design violates, in the units it was submitted in.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsViolation {
    pub param: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DesignRejection {
    Dimension { expected: usize, got: usize },
    OutOfBounds(BoundsViolation),
}

impl std::fmt::Display for DesignRejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Dimension { expected, got } => write!(f, "expected {expected} design values, got {got}"),
            Self::OutOfBounds(b) => write!(f, "parameter `{}` = {} outside [{}, {}]", b.param, b.value, b.lo, b.hi),
        }
    }
}

impl DesignRequest {
    pub fn resolve(&self, space: &DesignSpace) -> Result<DesignPoint, DesignRejection> {
        if self.design.len() != space.dim() {
            return Err(DesignRejection::Dimension { expected: space.dim(), got: self.design.len() });
        }
        let bounds: Vec<(f64, f64)> = match self.units {
            Units::Physical => space.params().iter().map(|p| (p.lo, p.hi)).collect(),
            Units::Normalized => vec![(0.0, 1.0); space.dim()],
        };
        if let Some(v) = first_violation(space, &self.design, &bounds) {
            return Err(DesignRejection::OutOfBounds(v));
        }
        Ok(match self.units {
            Units::Physical => DesignPoint(self.design.clone()),
            Units::Normalized => {
                let n = NormalizedDesign::new(self.design.clone()).expect("coordinates checked");
                space.denormalize(&n).expect("coordinates checked")
            }
        })
    }
}

fn first_violation(space: &DesignSpace, values: &[f64], bounds: &[(f64, f64)]) -> Option<BoundsViolation> {
    space.params().iter().zip(values).zip(bounds).find_map(|((p, &v), &(lo, hi))| {
        (!(v >= lo && v <= hi)).then(|| BoundsViolation { param: p.name.clone(), value: v, lo, hi })
    })
}

/// SHA-256 over every file of a model archive, in sorted relative-path order.
pub fn archive_hash(dir: &Path) -> std::io::Result<String> {
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    files.sort();
    let mut h = Sha256::new();
    for rel in files {
        h.update(rel.as_bytes());
        h.update([0]);
        let bytes = fs::read(dir.join(&rel))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex(&h.finalize()))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("walk stays under root");
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Handle for one prediction: the model hash and the design's exact bits.
pub fn prediction_id(model_hash: &str, design: &DesignPoint) -> String {
    let mut h = Sha256::new();
    h.update(model_hash.as_bytes());
    for v in design.values() {
        h.update(v.to_bits().to_le_bytes());
    }
    hex(&h.finalize()[..12])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMetricsSummary {
    pub thickness: f64,
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHandles {
    pub nx: usize,
    pub nr: usize,
    pub steps: usize,
    pub dt: f64,
    pub variables: Vec<Variable>,
    /// Axial and radial node coordinates (mm).
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    /// Fill in `{variable}` and `{t}`; append `?kind=variance` or `?kind=ci` for the UQ maps.
    pub frame: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictSummary {
    pub id: String,
    pub design: Vec<f64>,
    pub normalized: Vec<f64>,
    pub classification: FlowClass,
    pub partition: PartitionLabel,
    pub thickness: ScalarEstimate,
    pub angle: ScalarEstimate,
    /// Traced on the emulated time-mean density, when the model has density.
    pub field_metrics: Option<FieldMetricsSummary>,
    pub fields: FieldHandles,
}

impl PredictSummary {
    pub fn new(id: String, space: &DesignSpace, r: &EmulationResult) -> cpodem_core::Result<Self> {
        let grid = &r.fields.grid;
        Ok(Self {
            id: id.clone(),
            design: r.design.values().to_vec(),
            normalized: space.normalize(&r.design)?.coords().to_vec(),
            classification: r.classification,
            partition: r.partition,
            thickness: r.thickness,
            angle: r.angle,
            field_metrics: r.field_metrics.as_ref().map(|m| FieldMetricsSummary { thickness: m.thickness, angle: m.angle }),
            fields: FieldHandles {
                nx: grid.nx(),
                nr: grid.nr(),
                steps: r.fields.steps(),
                dt: r.fields.dt,
                variables: r.fields.variables().collect(),
                x: grid.x.clone(),
                r: grid.r.clone(),
                frame: format!("/api/field/{id}/{{variable}}/{{t}}"),
            },
        })
    }

    /// Serialized body; the same bytes are printed by the CLI and served over HTTP.
    pub fn to_json(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("summary serializes");
        v.push(b'\n');
        v
    }
}
