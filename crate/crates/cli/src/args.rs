use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{CountList, RealList};

#[derive(Debug, Parser)]
#[command(
    name = "cmm",
    version,
    about = "Error analysis of cooperative map matching: simulation campaigns, closed-form predictions and fleet accuracy maps",
    after_help = "Exit codes: 0 success, 1 runtime failure, 2 usage error."
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Master RNG seed for randomized commands (unsigned 64-bit integer); generated and printed when absent
    #[arg(long, global = true, display_order = 100, value_name = "INT")]
    pub seed: Option<u64>,
    /// Worker threads (count) [default: one per core]
    #[arg(long, global = true, display_order = 100, value_name = "COUNT")]
    pub workers: Option<usize>,
    /// Run directory receiving every output file (path) [default: cmm-out]
    #[arg(long, global = true, display_order = 100, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Flat `key = value` file; keys are flag names without dashes (path)
    #[arg(long, global = true, display_order = 100, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo campaign of the CMM error versus fleet size
    Simulate(SimulateArgs),
    /// Closed-form expected squared error over a fleet-size sweep
    Asymptotics(AsymptoticsArgs),
    /// Uniform-versus-perturbed angle density comparison
    Optimality(OptimalityArgs),
    /// Sorted per-fleet expected squared errors for random road angles
    Distribution(DistributionArgs),
    /// Fit of the geometric constant of the uniform-angle bias term
    Calibrate(CalibrateArgs),
    /// Kolmogorov-Smirnov tests of the road-normal gap law
    Gaps(GapsArgs),
    /// Fleet accuracy pipeline
    #[command(subcommand)]
    Fleet(FleetCommand),
    /// Re-run a manifest and compare output digests
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CaseArg {
    Orthogonal,
    Uniform,
    Fourier,
    WeightedOrthogonal,
    WeightedUniform,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Road-angle configuration and estimator [default: orthogonal]
    #[arg(long, value_enum)]
    pub case: Option<CaseArg>,
    /// Fleet sizes (vehicles), comma list; `a,b,...,c` expands a progression [default: 4,8,...,100]
    #[arg(long, value_name = "LIST")]
    pub n: Option<CountList>,
    /// Non-common error standard deviation (meters) [default: 0.3]
    #[arg(long, value_name = "METERS")]
    pub sigma: Option<f64>,
    /// Road half width (meters) [default: 2]
    #[arg(long, value_name = "METERS")]
    pub w: Option<f64>,
    /// Outer Monte Carlo samples per fleet size (count) [default: 5000]
    #[arg(long, value_name = "COUNT")]
    pub samples: Option<usize>,
    /// Points for the Monte Carlo centroid cross-check, 0 disables it (count) [default: 0]
    #[arg(long, value_name = "COUNT")]
    pub mc_samples: Option<usize>,
    /// Single-mode perturbation amplitude for the fourier case (1/radian) [default: 0.02]
    #[arg(long, value_name = "AMPLITUDE")]
    pub epsilon: Option<f64>,
    /// Hypothesis grid cells per side for weighted cases (count) [default: 201]
    #[arg(long, value_name = "COUNT")]
    pub grid: Option<usize>,
    /// Bound both sides of every lane instead of one
    #[arg(long)]
    pub two_sided: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct AsymptoticsArgs {
    /// Fleet sizes (vehicles), comma list with optional `...` [default: 10,20,...,200]
    #[arg(long, value_name = "LIST")]
    pub n: Option<CountList>,
    /// Road half width (meters) [default: 2]
    #[arg(long, value_name = "METERS")]
    pub w: Option<f64>,
    /// Non-common error standard deviation (meters) [default: 0.3]
    #[arg(long, value_name = "METERS")]
    pub sigma: Option<f64>,
    /// Single-mode perturbation amplitude for the fourier column (1/radian) [default: 0]
    #[arg(long, value_name = "AMPLITUDE")]
    pub epsilon: Option<f64>,
    /// Table printed on stdout; both files are always written [default: csv]
    #[arg(long, value_enum)]
    pub format: Option<TableFormat>,
}

#[derive(Debug, Args)]
pub struct OptimalityArgs {
    /// Perturbation amplitudes, comma list (1/radian) [default: 0,0.01,0.02,0.03,0.04]
    #[arg(long, value_name = "LIST")]
    pub epsilon: Option<RealList>,
    /// Fleet size (vehicles) [default: 200]
    #[arg(long, value_name = "COUNT")]
    pub n: Option<usize>,
    /// Road half width (meters) [default: 2]
    #[arg(long, value_name = "METERS")]
    pub w: Option<f64>,
    /// Monte Carlo samples per amplitude (count) [default: 5000]
    #[arg(long, value_name = "COUNT")]
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DistributionArgs {
    /// Fleet sizes (vehicles), comma list with optional `...` [default: 10,11,...,20]
    #[arg(long, value_name = "LIST")]
    pub n: Option<CountList>,
    /// Road half width (meters) [default: 2]
    #[arg(long, value_name = "METERS")]
    pub w: Option<f64>,
    /// Non-common error variance (square meters) [default: 0.5]
    #[arg(long, value_name = "M2")]
    pub sigma_sq: Option<f64>,
    /// Random angle sets per fleet size (count) [default: 10000]
    #[arg(long, value_name = "COUNT")]
    pub samples: Option<usize>,
    /// Bound both sides of every lane instead of one
    #[arg(long)]
    pub two_sided: bool,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Fleet sizes (vehicles), comma list with optional `...` [default: 50,100,200,400]
    #[arg(long, value_name = "LIST")]
    pub n: Option<CountList>,
    /// Road half width (meters) [default: 2]
    #[arg(long, value_name = "METERS")]
    pub w: Option<f64>,
    /// Random angle sets per fleet size (count) [default: 2000]
    #[arg(long, value_name = "COUNT")]
    pub samples: Option<usize>,
    /// Bound both sides of every lane instead of one
    #[arg(long)]
    pub two_sided: bool,
}

#[derive(Debug, Args)]
pub struct GapsArgs {
    /// Fleet size (vehicles) [default: 100]
    #[arg(long, value_name = "COUNT")]
    pub n: Option<usize>,
    /// Independent angle sets (count) [default: 5000]
    #[arg(long, value_name = "COUNT")]
    pub draws: Option<usize>,
    /// Single-mode perturbation amplitude; 0 keeps uniform angles (1/radian) [default: 0]
    #[arg(long, value_name = "AMPLITUDE")]
    pub epsilon: Option<f64>,
    /// Bound both sides of every lane instead of one
    #[arg(long)]
    pub two_sided: bool,
}

#[derive(Debug, Subcommand)]
pub enum FleetCommand {
    /// Validate a trip CSV and write it in the planar layout
    Ingest(IngestArgs),
    /// Generate Poisson traffic on a grid city
    Synth(SynthArgs),
    /// Per-cell vehicle counts and heading histograms
    Density(DensityArgs),
    /// Per-cell RMS CMM error from a density grid
    Evaluate(EvaluateArgs),
    /// Write accuracy tables, heatmaps and summaries
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Trip CSV, planar (x_m, y_m, heading_rad) or lat/lon (lat, lon, heading_deg) (path)
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Latitude of the local frame origin (degrees) [default: first valid row]
    #[arg(long, value_name = "DEGREES", allow_hyphen_values = true)]
    pub origin_lat: Option<f64>,
    /// Longitude of the local frame origin (degrees) [default: first valid row]
    #[arg(long, value_name = "DEGREES", allow_hyphen_values = true)]
    pub origin_lon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Flat,
    Diurnal,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// City side length (meters) [default: 3000]
    #[arg(long, value_name = "METERS")]
    pub extent: Option<f64>,
    /// Street spacing (meters) [default: 250]
    #[arg(long, value_name = "METERS")]
    pub spacing: Option<f64>,
    /// Probe vehicles per hour on each central block (vehicles/hour) [default: 3]
    #[arg(long, value_name = "RATE")]
    pub center_intensity: Option<f64>,
    /// Probe vehicles per hour on each outer block (vehicles/hour) [default: 0.4]
    #[arg(long, value_name = "RATE")]
    pub margin_intensity: Option<f64>,
    /// Radius of the busy center (meters) [default: 700]
    #[arg(long, value_name = "METERS")]
    pub center_radius: Option<f64>,
    /// Simulated days (count) [default: 3]
    #[arg(long, value_name = "COUNT")]
    pub days: Option<u32>,
    /// Hour-of-day intensity shape [default: diurnal]
    #[arg(long, value_enum)]
    pub profile: Option<ProfileArg>,
    /// First midnight (UTC seconds since the epoch) [default: 0]
    #[arg(long, value_name = "SECONDS")]
    pub start: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    /// Planar trip CSV (path)
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Grid cell side (meters) [default: 200]
    #[arg(long, value_name = "METERS")]
    pub cell_size: Option<f64>,
    /// Empty border added around the trips (meters) [default: 0]
    #[arg(long, value_name = "METERS")]
    pub padding: Option<f64>,
    /// One-hour windows kept: all, hour:H (0-23 UTC), weekday:D (0 = Monday), month:M (1-12) [default: all]
    #[arg(long, value_name = "FILTER")]
    pub filter: Option<String>,
    /// Multiplier from probe vehicles to all vehicles (ratio) [default: 33.33, i.e. 1/0.03]
    #[arg(long, value_name = "RATIO")]
    pub scale_factor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Density grid JSON written by `fleet density` (path)
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Communication radius (meters) [default: 1609.344]
    #[arg(long, value_name = "METERS")]
    pub comm_radius: Option<f64>,
    /// Non-common error variance (square meters) [default: 0.5]
    #[arg(long, value_name = "M2")]
    pub noise_variance: Option<f64>,
    /// Fleet realizations per cell (count) [default: 200]
    #[arg(long, value_name = "COUNT")]
    pub realizations: Option<usize>,
    /// Road half width (meters) [default: 2]
    #[arg(long, value_name = "METERS")]
    pub w: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Svg,
    Json,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Accuracy grid JSON written by `fleet evaluate` (path)
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Artifacts to write, comma list [default: csv,svg,json]
    #[arg(long, value_enum, value_delimiter = ',')]
    pub format: Vec<ExportFormat>,
    /// Time-bucket label in the JSON summary (text) [default: all]
    #[arg(long, value_name = "TEXT")]
    pub label: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run (path)
    pub manifest: PathBuf,
}
