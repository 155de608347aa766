use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cpodem_core::field::{GridSpec, Variable};
use cpodem_core::kriging::DEFAULT_NUGGET;
use cpodem_core::oracle::SamplingSpec;
use cpodem_core::pod::DEFAULT_ENERGY_TARGET;

use crate::config::{RunConfig, DEFAULT_PORT};

#[derive(Debug, Parser)]
#[command(name = "cpodem", version, about = "Common-POD + kriging flowfield emulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// MaxPro Latin-hypercube design, written as normalized TSV.
    Doe(DoeArgs),
    /// Oracle corpus for a design file.
    Simulate(SimulateArgs),
    /// Sobol' indices of film thickness or spreading angle.
    Sensitivity(SensitivityArgs),
    /// Jet/swirl label of one design from a serialized tree.
    Classify(ClassifyArgs),
    /// Train an emulator archive from a corpus.
    Train(TrainArgs),
    /// Emulate one design.
    Predict(PredictArgs),
    /// Compare an emulated design against a reference case.
    Report(ReportArgs),
    /// Serve a model archive over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ResponseArg {
    Thickness,
    Angle,
}

#[derive(Debug, Args)]
pub struct SpaceArg {
    /// Design-space file (`name lo hi unit` per line); defaults to the injector space.
    #[arg(long)]
    pub space: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SamplingArgs {
    #[arg(long, default_value_t = GridSpec::default().nx)]
    pub nx: usize,
    #[arg(long, default_value_t = GridSpec::default().nr)]
    pub nr: usize,
    /// Snapshots per case.
    #[arg(long, default_value_t = SamplingSpec::default().steps)]
    pub steps: usize,
    /// Sampling interval (s).
    #[arg(long, default_value_t = SamplingSpec::default().dt)]
    pub dt: f64,
}

impl SamplingArgs {
    fn spec(&self) -> SamplingSpec {
        SamplingSpec { grid: GridSpec { nx: self.nx, nr: self.nr, ..GridSpec::default() }, steps: self.steps, dt: self.dt }
    }
}

#[derive(Debug, Args)]
pub struct DoeArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub p: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Annealing sweeps per restart.
    #[arg(long)]
    pub iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Normalized design TSV as written by `doe`.
    #[arg(long)]
    pub design: PathBuf,
    /// Corpus directory to create.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated variables; all when omitted.
    #[arg(long, value_delimiter = ',')]
    pub variables: Vec<Variable>,
    #[command(flatten)]
    pub space: SpaceArg,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[arg(long, value_enum)]
    pub response: ResponseArg,
    /// Base sample count.
    #[arg(long, default_value_t = 4096)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// TSV output; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Evaluate the response through a trained model instead of the oracle.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub space: SpaceArg,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Tree JSON, or a model archive holding `tree.json`.
    #[arg(long)]
    pub tree: PathBuf,
    /// Five comma- or space-separated values.
    #[arg(long, allow_hyphen_values = true)]
    pub design: String,
    /// Interpret `--design` as normalized coordinates.
    #[arg(long)]
    pub normalized: bool,
    #[command(flatten)]
    pub space: SpaceArg,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Archive directory to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ENERGY_TARGET)]
    pub energy_target: f64,
    #[arg(long, default_value_t = DEFAULT_NUGGET)]
    pub nugget: f64,
    /// Seeds the kriging multi-start.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train one pooled model instead of jet/swirl partitions.
    #[arg(long)]
    pub pooled: bool,
    /// Comma-separated variables; all variables in the corpus when omitted.
    #[arg(long, value_delimiter = ',')]
    pub variables: Vec<Variable>,
    /// Prediction grid.
    #[arg(long, default_value_t = GridSpec::default().nx)]
    pub nx: usize,
    #[arg(long, default_value_t = GridSpec::default().nr)]
    pub nr: usize,
    #[command(flatten)]
    pub space: SpaceArg,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub design: String,
    #[arg(long)]
    pub normalized: bool,
    /// Write the emulated case (fields plus variance) to this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub design: String,
    #[arg(long)]
    pub normalized: bool,
    /// Reference case directory (as written by `simulate`).
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = cpodem_core::diagnostics::DEFAULT_PROBES)]
    pub probes: usize,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Base sample count for `/api/sensitivity`.
    #[arg(long, default_value_t = 4096)]
    pub sobol_n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cached predictions kept in memory.
    #[arg(long, default_value_t = 32)]
    pub cache: usize,
    /// Directory of static files (the explorer bundle) served at `/`.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
}

impl SimulateArgs {
    pub fn run_config(&self) -> RunConfig {
        RunConfig { space_file: self.space.space.clone(), seed: self.seed, sampling: self.sampling.spec(), ..Default::default() }
    }
}

impl TrainArgs {
    pub fn run_config(&self) -> RunConfig {
        let mut sampling = SamplingSpec::default();
        sampling.grid.nx = self.nx;
        sampling.grid.nr = self.nr;
        RunConfig {
            space_file: self.space.space.clone(),
            corpus: Some(self.corpus.clone()),
            energy_target: self.energy_target,
            nugget: self.nugget,
            seed: self.seed,
            partitioned: !self.pooled,
            sampling,
            ..Default::default()
        }
    }
}

impl ServeArgs {
    pub fn run_config(&self) -> RunConfig {
        RunConfig { seed: self.seed, port: self.port, ..Default::default() }
    }
}
