use std::path::PathBuf;

use cpodem_core::design::DesignSpace;
use cpodem_core::emulator::EmulatorConfig;
use cpodem_core::field::{GridSpec, Variable};
use cpodem_core::kriging::DEFAULT_NUGGET;
use cpodem_core::oracle::SamplingSpec;
use cpodem_core::pod::DEFAULT_ENERGY_TARGET;

use crate::usage;

pub const DEFAULT_PORT: u16 = 8080;

/// Settings shared by the subcommands; each one reads the fields it needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// `name lo hi unit` lines; the bundled injector space when absent.
    pub space_file: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub energy_target: f64,
    pub nugget: f64,
    pub seed: u64,
    pub partitioned: bool,
    pub sampling: SamplingSpec,
    pub port: u16,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            space_file: None,
            corpus: None,
            energy_target: DEFAULT_ENERGY_TARGET,
            nugget: DEFAULT_NUGGET,
            seed: 0,
            partitioned: true,
            sampling: SamplingSpec::default(),
            port: DEFAULT_PORT,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.energy_target > 0.0 && self.energy_target <= 1.0) {
            return usage("--energy-target", format!("{} is outside (0, 1]", self.energy_target));
        }
        if !(self.nugget >= 0.0 && self.nugget.is_finite()) {
            return usage("--nugget", format!("{} must be a finite non-negative number", self.nugget));
        }
        if self.port == 0 {
            return usage("--port", "0 is not a valid port");
        }
        let g = &self.sampling.grid;
        if g.nx < 2 || g.nr < 2 {
            return usage("--nx/--nr", "need at least two nodes per axis");
        }
        if self.sampling.steps < 2 {
            return usage("--steps", "need at least two time steps");
        }
        if !(self.sampling.dt > 0.0 && self.sampling.dt.is_finite()) {
            return usage("--dt", format!("{} must be positive", self.sampling.dt));
        }
        Ok(())
    }

    pub fn space(&self) -> anyhow::Result<DesignSpace> {
        match &self.space_file {
            None => Ok(DesignSpace::injector()),
            Some(p) => DesignSpace::from_file(p).or_else(|e| usage("--space", format!("{}: {e}", p.display()))),
        }
    }

    pub fn emulator_config(&self, variables: Vec<Variable>) -> EmulatorConfig {
        let mut cfg = EmulatorConfig { variables, partitioned: self.partitioned, grid: self.sampling.grid, ..Default::default() };
        cfg.pod.energy_target = self.energy_target;
        cfg.kriging.nugget = self.nugget;
        cfg.kriging.seed = self.seed;
        cfg
    }

    pub fn grid(&self) -> GridSpec {
        self.sampling.grid
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn invariants_enforced() {
        let bad = [
            RunConfig { energy_target: 0.0, ..Default::default() },
            RunConfig { energy_target: 1.5, ..Default::default() },
            RunConfig { port: 0, ..Default::default() },
            RunConfig { nugget: -1.0, ..Default::default() },
        ];
        for cfg in bad {
            let err = cfg.validate().unwrap_err();
            assert!(err.downcast_ref::<crate::UsageError>().is_some(), "{cfg:?}");
        }
        RunConfig { energy_target: 1.0, ..Default::default() }.validate().unwrap();
    }

    #[test]
    fn emulator_config_carries_settings() {
        let rc = RunConfig { energy_target: 0.9, nugget: 0.0, seed: 4, partitioned: false, ..Default::default() };
        let cfg = rc.emulator_config(vec![Variable::Density]);
        assert_eq!(cfg.pod.energy_target, 0.9);
        assert_eq!(cfg.kriging.nugget, 0.0);
        assert_eq!(cfg.kriging.seed, 4);
        assert!(!cfg.partitioned);
    }
}
