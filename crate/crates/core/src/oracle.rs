//! Closed-form synthetic swirl-injector flowfields.
//!
//! A liquid sheet with interface radius `r_f(x)` sits at `R_n - h` inside the
//! injector and spreads at angle `alpha` downstream. Swirling designs keep the
//! cone; jet-like designs flare at `alpha` over a short distance and then run
//! straight, so the two classes differ in mid- and far-field structure. A
//! traveling surface wave at `f_wave` perturbs the interface and the pressure.
//! Every quantity is an explicit function of the five design parameters.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::{DesignPoint, DesignSpace, IDX_DELTA, IDX_LENGTH, IDX_THETA};
use crate::error::Result;
use crate::field::{AxisymGrid, CaseGeometry, GridSpec, SnapshotSeries, Variable};

/// Spreading angle separating jet-like from swirling flow (degrees).
pub const SWIRL_THRESHOLD_DEG: f64 = 30.0;
/// Fixed propellant mass flow (kg/s).
pub const MASS_FLOW: f64 = 0.15;
pub const LIQUID_DENSITY: f64 = 1000.0;
pub const AMBIENT_DENSITY: f64 = 130.0;
pub const COLD_TEMPERATURE: f64 = 120.0;
pub const AMBIENT_TEMPERATURE: f64 = 300.0;
/// Chamber pressure, 100 atm (Pa).
pub const CHAMBER_PRESSURE: f64 = 100.0 * 101_325.0;
/// Peak swirl velocity at the injector wall for theta at its upper bound (m/s).
pub const SWIRL_VELOCITY: f64 = 30.0;
/// Smallest film thickness as a fraction of R_n.
const MIN_THICKNESS_RATIO: f64 = 0.02;
/// Length of the jet flare in injector radii.
pub const JET_FLARE_RADII: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowClass {
    Jet,
    Swirl,
}

impl FlowClass {
    pub fn from_angle(alpha_deg: f64) -> Self {
        if alpha_deg > SWIRL_THRESHOLD_DEG {
            FlowClass::Swirl
        } else {
            FlowClass::Jet
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FlowClass::Jet => "jet",
            FlowClass::Swirl => "swirl",
        }
    }
}

impl std::fmt::Display for FlowClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleTruth {
    /// Film thickness (mm).
    pub h: f64,
    /// Spreading angle (degrees).
    pub alpha: f64,
    /// Surface-wave frequency (Hz).
    pub f_wave: f64,
    pub label: FlowClass,
}

pub fn oracle_metrics(d: &DesignPoint, s: &DesignSpace) -> Result<OracleTruth> {
    let n = s.normalize(d)?;
    let c = n.coords();
    let (l, th, dn) = (c[IDX_LENGTH], c[IDX_THETA], c[IDX_DELTA]);
    let alpha = 20.0 + 30.0 * th - 18.0 * dn + 2.0 * (1.0 - l);
    let ratio = (0.10 + 0.25 * dn - 0.10 * th + 0.03 * l).max(MIN_THICKNESS_RATIO);
    let h = d.radius() * ratio;
    let f_wave = 2000.0 * (1.0 + 0.5 * th);
    Ok(OracleTruth { h, alpha, f_wave, label: FlowClass::from_angle(alpha) })
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Everything needed to evaluate the fields of one design pointwise.
#[derive(Debug, Clone, Copy)]
pub struct OracleFlow {
    pub geom: CaseGeometry,
    pub truth: OracleTruth,
    /// Normalized tangential inlet angle.
    pub theta_n: f64,
    /// Surface-wave phase offset (rad).
    pub phase: f64,
}

impl OracleFlow {
    pub fn new(d: &DesignPoint, s: &DesignSpace, seed: u64) -> Result<Self> {
        let truth = oracle_metrics(d, s)?;
        let theta_n = s.normalize(d)?.coords()[IDX_THETA];
        let phase = 2.0 * PI * ChaCha8Rng::seed_from_u64(seed).random::<f64>();
        Ok(Self { geom: CaseGeometry::from_design(d), truth, theta_n, phase })
    }

    /// Mean interface radius (mm).
    pub fn interface(&self, x: f64) -> f64 {
        let base = self.geom.radius - self.truth.h;
        let down = (x - self.geom.exit()).max(0.0);
        let run = match self.truth.label {
            FlowClass::Swirl => down,
            FlowClass::Jet => down.min(JET_FLARE_RADII * self.geom.radius),
        };
        base + run * self.truth.alpha.to_radians().tan()
    }

    fn wave(&self, x: f64, t: f64) -> f64 {
        (2.0 * PI * self.truth.f_wave * t - 2.0 * PI * x / (4.0 * self.truth.h) + self.phase).sin()
    }

    /// Interface radius including the traveling surface wave.
    pub fn wavy_interface(&self, x: f64, t: f64) -> f64 {
        self.interface(x) + 0.1 * self.truth.h * self.wave(x, t)
    }

    /// Dense-phase fraction in [0, 1]; 1 well inside the sheet, 0 on the ambient side.
    fn dense_fraction(&self, x: f64, r: f64, t: f64) -> f64 {
        logistic((self.wavy_interface(x, t) - r) / (0.15 * self.truth.h))
    }

    pub fn temperature(&self, x: f64, r: f64, t: f64) -> f64 {
        AMBIENT_TEMPERATURE - (AMBIENT_TEMPERATURE - COLD_TEMPERATURE) * self.dense_fraction(x, r, t)
    }

    pub fn density(&self, x: f64, r: f64, t: f64) -> f64 {
        density_from_temperature(self.temperature(x, r, t))
    }

    pub fn pressure(&self, x: f64, t: f64) -> f64 {
        let decay = (-(x - self.geom.exit()).max(0.0) / self.geom.length).exp();
        CHAMBER_PRESSURE + 0.01 * CHAMBER_PRESSURE * self.wave(x, t) * decay
    }

    /// Bulk film velocity fixing the mass flow through an annulus of thickness h (m/s).
    pub fn film_velocity(&self) -> f64 {
        let area_m2 = 2.0 * PI * self.geom.radius * self.truth.h * 1e-6;
        MASS_FLOW / (LIQUID_DENSITY * area_m2)
    }

    /// Half-cosine profile across the dense core, from the axis to the wavy
    /// interface, scaled so its radial line integral equals h times the bulk
    /// film velocity.
    pub fn axial_velocity(&self, x: f64, r: f64, t: f64) -> f64 {
        let rf = self.wavy_interface(x, t);
        if r >= rf {
            return 0.0;
        }
        let z = r / rf - 0.5;
        self.film_velocity() * 0.5 * PI * (self.truth.h / rf) * (PI * z).cos()
    }

    /// Rankine-type swirl: solid body inside R_n, free vortex outside, decaying downstream.
    pub fn azimuthal_velocity(&self, x: f64, r: f64) -> f64 {
        let rn = self.geom.radius;
        let profile = if r <= rn { r / rn } else { rn / r };
        let decay = (-(x - self.geom.exit()).max(0.0) / self.geom.length).exp();
        SWIRL_VELOCITY * self.theta_n * profile * decay
    }
}

pub fn density_from_temperature(temp: f64) -> f64 {
    let frac = (AMBIENT_TEMPERATURE - temp) / (AMBIENT_TEMPERATURE - COLD_TEMPERATURE);
    AMBIENT_DENSITY + (LIQUID_DENSITY - AMBIENT_DENSITY) * frac
}

/// Settings for sampling oracle fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub grid: GridSpec,
    pub steps: usize,
    /// Sampling interval (s).
    pub dt: f64,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self { grid: GridSpec::default(), steps: 64, dt: 30e-6 }
    }
}

pub fn oracle_fields(d: &DesignPoint, s: &DesignSpace, sampling: &SamplingSpec, seed: u64) -> Result<SnapshotSeries> {
    oracle_fields_for(d, s, sampling, seed, &Variable::ALL)
}

/// Like [`oracle_fields`], restricted to a subset of variables.
pub fn oracle_fields_for(
    d: &DesignPoint,
    s: &DesignSpace,
    sampling: &SamplingSpec,
    seed: u64,
    vars: &[Variable],
) -> Result<SnapshotSeries> {
    let flow = OracleFlow::new(d, s, seed)?;
    let grid = AxisymGrid::for_geometry(&flow.geom, &sampling.grid)?;
    let n = grid.len();
    let coords: Vec<(f64, f64)> = (0..n).map(|i| grid.coords(i)).collect();
    let mut series = SnapshotSeries::new(grid, sampling.steps, sampling.dt, 0.0)?;
    for &var in vars {
        let mut data = Vec::with_capacity(sampling.steps * n);
        for k in 0..sampling.steps {
            let t = k as f64 * sampling.dt;
            data.extend(coords.iter().map(|&(x, r)| match var {
                Variable::Temperature => flow.temperature(x, r, t),
                Variable::Density => flow.density(x, r, t),
                Variable::Pressure => flow.pressure(x, t),
                Variable::AxialVelocity => flow.axial_velocity(x, r, t),
                Variable::AzimuthalVelocity => flow.azimuthal_velocity(x, r),
            }));
        }
        series.insert(var, data)?;
    }
    Ok(series)
}
