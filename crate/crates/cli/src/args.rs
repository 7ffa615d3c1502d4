use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "hetnas",
    version,
    about = "Hybrid CNN/ViT design-space exploration for NPU + CIM accelerators"
)]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to the available parallelism. Does not change results.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Directory receiving the outputs and the run manifest.
    #[arg(long, global = true, default_value = "hetnas-out")]
    pub output_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "verb")]
pub enum Command {
    /// Schedule one subnet or network and compare it with NPU-only execution.
    Estimate(EstimateArgs),
    /// Evolutionary search for the accuracy/cost Pareto front.
    Search(SearchArgs),
    /// Count CIM input reads with and without multi-CU deduplication.
    SimulateCim(SimulateCimArgs),
    /// Inspect a search space: cardinality, extreme and random subnets.
    Space(SpaceArgs),
    /// Fit a saturating throughput curve to measured (workload, rate) samples.
    Calibrate(CalibrateArgs),
    /// Rerun the invocation recorded in a manifest and check its outputs.
    Replay(ReplayArgs),
}

impl Command {
    pub fn verb(&self) -> &'static str {
        match self {
            Command::Estimate(_) => "estimate",
            Command::Search(_) => "search",
            Command::SimulateCim(_) => "simulate-cim",
            Command::Space(_) => "space",
            Command::Calibrate(_) => "calibrate",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostObjective {
    Latency,
    Energy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrontObjective {
    Latency,
    Energy,
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateKind {
    Synthetic,
    Lookup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extreme {
    Smallest,
    Largest,
    Random,
}

/// Options shared by the verbs that cost networks.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HwArgs {
    /// Hardware description (JSON); the bundled sample profile when omitted.
    #[arg(long)]
    pub hw: Option<PathBuf>,
    /// Override the number of CIM macros.
    #[arg(long)]
    pub macros: Option<u32>,
    /// Override the compute units per macro.
    #[arg(long)]
    pub cus: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateArgs {
    /// Subnet choice (JSON), or `@smallest` / `@largest` of the space.
    #[arg(long, conflicts_with = "network", required_unless_present = "network")]
    pub choice: Option<String>,
    /// Materialized network (JSON).
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// Search space (JSON) the choice refers to; the default space when omitted.
    #[arg(long)]
    pub space: Option<PathBuf>,
    #[command(flatten)]
    pub hw: HwArgs,
    #[arg(long, value_enum, default_value_t = CostObjective::Latency)]
    pub objective: CostObjective,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchArgs {
    #[arg(long)]
    pub space: Option<PathBuf>,
    #[command(flatten)]
    pub hw: HwArgs,
    #[arg(long, value_enum, default_value_t = FrontObjective::Latency)]
    pub objective: FrontObjective,
    /// Discard subnets slower than this many seconds.
    #[arg(long, conflicts_with = "max_energy")]
    pub max_latency: Option<f64>,
    /// Discard subnets needing more than this many nanojoules.
    #[arg(long)]
    pub max_energy: Option<f64>,
    #[arg(long, default_value_t = 256)]
    pub population: usize,
    #[arg(long, default_value_t = 60)]
    pub generations: usize,
    #[arg(long, default_value_t = 0.1)]
    pub mutation_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    pub crossover_rate: f64,
    #[arg(long, value_enum, default_value_t = SurrogateKind::Synthetic)]
    pub surrogate: SurrogateKind,
    /// `choice_key,accuracy` CSV for the lookup surrogate.
    #[arg(long, required_if_eq("surrogate", "lookup"))]
    pub accuracy_csv: Option<PathBuf>,
    /// MAC scale of the synthetic surrogate.
    #[arg(long, default_value_t = 1e6)]
    pub macs_scale: f64,
    #[arg(long, default_value_t = 100_000)]
    pub cache_capacity: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateCimArgs {
    /// Kernel size, `K` or `KHxKW`.
    #[arg(long, default_value = "3")]
    pub kernel: String,
    #[arg(long, default_value_t = 1)]
    pub stride: u32,
    /// Input map `H` or `HxW`; one output group when omitted.
    #[arg(long)]
    pub input: Option<String>,
    /// Compute units per macro.
    #[arg(long, default_value_t = 4)]
    pub cu: u32,
    /// `row` or `tile:RxC`.
    #[arg(long, default_value = "row")]
    pub layout: String,
    /// Also tabulate n_cu = 1..=N (row layout) into sweep.csv.
    #[arg(long)]
    pub sweep: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceArgs {
    #[arg(long)]
    pub space: Option<PathBuf>,
    /// Print the number of distinct subnets.
    #[arg(long)]
    pub cardinality: bool,
    /// Write subnet choices to choices.json.
    #[arg(long, value_enum)]
    pub emit: Option<Extreme>,
    /// Number of random choices for `--emit random`.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateArgs {
    /// `workload,rate` CSV.
    #[arg(long)]
    pub samples: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
}
