//! Design points, the design space they live in, and the affine map onto the
//! unit hypercube.
//!
//! A [`DesignSpace`] is plain data: an ordered list of named parameters with
//! bounds. The five-parameter swirl-injector space ships as
//! `data/design_space.txt` and is available through
//! [`DesignSpace::injector`]. Units are carried as labels only.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INJECTOR_SPACE: &str = include_str!("../data/design_space.txt");

/// Index of each injector parameter in the default space.
pub const IDX_LENGTH: usize = 0;
pub const IDX_RADIUS: usize = 1;
pub const IDX_THETA: usize = 2;
pub const IDX_DELTA: usize = 3;
pub const IDX_HEADEND: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub unit: String,
}

impl Parameter {
    pub fn span(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpace {
    params: Vec<Parameter>,
}

impl DesignSpace {
    pub fn new(params: Vec<Parameter>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidSpace("no parameters".into()));
        }
        for (i, p) in params.iter().enumerate() {
            if !(p.lo.is_finite() && p.hi.is_finite() && p.lo < p.hi) {
                return Err(Error::InvalidSpace(format!(
                    "parameter `{}` needs lo < hi, got [{}, {}]",
                    p.name, p.lo, p.hi
                )));
            }
            if params[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::InvalidSpace(format!("duplicate parameter `{}`", p.name)));
            }
        }
        Ok(Self { params })
    }

    /// The swirl-injector space (L, R_n, theta, delta, dL).
    pub fn injector() -> Self {
        INJECTOR_SPACE.parse().expect("bundled design space is valid")
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn lower(&self) -> DesignPoint {
        DesignPoint(self.params.iter().map(|p| p.lo).collect())
    }

    pub fn upper(&self) -> DesignPoint {
        DesignPoint(self.params.iter().map(|p| p.hi).collect())
    }

    /// Checks a point against the bounds, returning the first violation.
    pub fn check(&self, d: &DesignPoint) -> Result<()> {
        if d.0.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: d.0.len() });
        }
        for (p, &v) in self.params.iter().zip(&d.0) {
            // Allow for last-bit roundoff from denormalize.
            let slack = 1e-12 * p.span();
            if !(v >= p.lo - slack && v <= p.hi + slack) {
                return Err(Error::OutOfBounds { param: p.name.clone(), value: v, lo: p.lo, hi: p.hi });
            }
        }
        Ok(())
    }

    pub fn normalize(&self, d: &DesignPoint) -> Result<NormalizedDesign> {
        self.check(d)?;
        let coords = self
            .params
            .iter()
            .zip(&d.0)
            .map(|(p, &v)| ((v - p.lo) / p.span()).clamp(0.0, 1.0))
            .collect();
        Ok(NormalizedDesign(coords))
    }

    pub fn denormalize(&self, n: &NormalizedDesign) -> Result<DesignPoint> {
        if n.0.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: n.0.len() });
        }
        let mut out = Vec::with_capacity(self.dim());
        for (p, &u) in self.params.iter().zip(&n.0) {
            if !(0.0..=1.0).contains(&u) {
                return Err(Error::OutOfBounds { param: p.name.clone(), value: u, lo: 0.0, hi: 1.0 });
            }
            out.push(p.lo + u * p.span());
        }
        Ok(DesignPoint(out))
    }

    /// Euclidean distance between two designs after normalization.
    pub fn normalized_distance(&self, a: &DesignPoint, b: &DesignPoint) -> Result<f64> {
        let na = self.normalize(a)?;
        let nb = self.normalize(b)?;
        Ok(na.distance(&nb))
    }

    /// Scales each coordinate by `1 + fraction_k`.
    pub fn offset_design(&self, d: &DesignPoint, fractions: &[f64]) -> Result<DesignPoint> {
        if fractions.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: fractions.len() });
        }
        self.check(d)?;
        let out = DesignPoint(d.0.iter().zip(fractions).map(|(v, f)| v * (1.0 + f)).collect());
        self.check(&out)?;
        Ok(out)
    }

    pub fn to_config_string(&self) -> String {
        let mut s = String::from("# name lo hi unit\n");
        for p in &self.params {
            s.push_str(&format!("{} {} {} {}\n", p.name, p.lo, p.hi, p.unit));
        }
        s
    }
}

impl FromStr for DesignSpace {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut params = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::InvalidSpace(format!(
                    "line {}: expected `name lo hi unit`, got `{line}`",
                    lineno + 1
                )));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::InvalidSpace(format!("line {}: bad number `{s}`", lineno + 1)))
            };
            params.push(Parameter {
                name: fields[0].to_string(),
                lo: num(fields[1])?,
                hi: num(fields[2])?,
                unit: fields[3].to_string(),
            });
        }
        DesignSpace::new(params)
    }
}

/// A design in physical units, ordered as the parameters of its space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint(pub Vec<f64>);

impl DesignPoint {
    pub fn injector(length: f64, radius: f64, theta: f64, delta: f64, headend: f64) -> Self {
        Self(vec![length, radius, theta, delta, headend])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn length(&self) -> f64 {
        self.0[IDX_LENGTH]
    }
    pub fn radius(&self) -> f64 {
        self.0[IDX_RADIUS]
    }
    pub fn theta(&self) -> f64 {
        self.0[IDX_THETA]
    }
    pub fn delta(&self) -> f64 {
        self.0[IDX_DELTA]
    }
    pub fn headend(&self) -> f64 {
        self.0[IDX_HEADEND]
    }
}

impl fmt::Display for DesignPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| format!("{v}")).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for DesignPoint {
    type Err = Error;

    /// Accepts comma- or whitespace-separated numbers.
    fn from_str(s: &str) -> Result<Self> {
        let vals: std::result::Result<Vec<f64>, _> = s
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect();
        match vals {
            Ok(v) if !v.is_empty() => Ok(Self(v)),
            _ => Err(Error::Format(format!("cannot parse design `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedDesign(Vec<f64>);

impl NormalizedDesign {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some((k, &v)) = coords.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfBounds { param: format!("x{}", k + 1), value: v, lo: 0.0, hi: 1.0 });
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn distance(&self, other: &NormalizedDesign) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}
