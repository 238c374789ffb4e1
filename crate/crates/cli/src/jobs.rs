//! Fully resolved runs and their execution.
//!
//! A `Job` holds every parameter a command needs, so a manifest that stores
//! it is enough to repeat the run.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use cmm_core::asymptotics::{fourier_expected_sq_error, orthogonal_leading_order, uniform_expected_sq_error, FourierSpectrum};
use cmm_core::error_models::{AngleDistribution, FourierDensity};
use cmm_core::experiments::{
    calibrate_uniform_constant, error_distribution, gap_distribution_test, orthogonal_counts, run_campaign,
    verify_optimality, CampaignCase, CampaignSpec,
};
use cmm_core::fleet::{
    diurnal_profile, estimate_density, evaluate_accuracy, export_accuracy_csv, export_accuracy_svg, export_trips,
    ingest_trips_path, summarize_accuracy, synth_fleet, AccuracyGrid, AccuracySummary, DensityGrid, EvalParams,
    GeoOrigin, GridCity, GridSpec, SynthSpec, TimeFilter, TripFormat, DEFAULT_CELL_SIZE, DEFAULT_COMM_RADIUS,
    DEFAULT_NOISE_VARIANCE, DEFAULT_REALIZATIONS, DEFAULT_SCALE_FACTOR,
};
use cmm_core::Vec2;
use serde::{Deserialize, Serialize};

use crate::args::{
    AsymptoticsArgs, CalibrateArgs, CaseArg, Command, DensityArgs, DistributionArgs, EvaluateArgs, ExportArgs,
    ExportFormat, FleetCommand, GapsArgs, IngestArgs, OptimalityArgs, ProfileArg, SimulateArgs, SynthArgs,
    TableFormat,
};
use crate::config::{Config, CountList, RealList};
use crate::failure::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsJob {
    pub n: Vec<usize>,
    pub w: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub format: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityJob {
    pub epsilon: Vec<f64>,
    pub n: usize,
    pub w: f64,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionJob {
    pub n: Vec<usize>,
    pub w: f64,
    pub sigma_sq: f64,
    pub samples: usize,
    pub two_sided: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateJob {
    pub n: Vec<usize>,
    pub w: f64,
    pub samples: usize,
    pub two_sided: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapsJob {
    pub n: usize,
    pub draws: usize,
    pub epsilon: f64,
    pub two_sided: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestJob {
    pub input: PathBuf,
    pub origin: Option<GeoOrigin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthJob {
    pub city: GridCity,
    pub days: u32,
    pub hourly_profile: [f64; 24],
    pub start_timestamp: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityJob {
    pub input: PathBuf,
    pub cell_size: f64,
    pub padding: f64,
    pub filter: TimeFilter,
    pub scale_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateJob {
    pub input: PathBuf,
    pub params: EvalParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportJob {
    pub input: PathBuf,
    pub formats: Vec<ExportFormat>,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "params", rename_all = "kebab-case")]
pub enum Job {
    Simulate(CampaignSpec),
    Asymptotics(AsymptoticsJob),
    Optimality(OptimalityJob),
    Distribution(DistributionJob),
    Calibrate(CalibrateJob),
    Gaps(GapsJob),
    FleetIngest(IngestJob),
    FleetSynth(SynthJob),
    FleetDensity(DensityJob),
    FleetEvaluate(EvaluateJob),
    FleetExport(ExportJob),
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Simulate(_) => "simulate",
            Job::Asymptotics(_) => "asymptotics",
            Job::Optimality(_) => "optimality",
            Job::Distribution(_) => "distribution",
            Job::Calibrate(_) => "calibrate",
            Job::Gaps(_) => "gaps",
            Job::FleetIngest(_) => "fleet-ingest",
            Job::FleetSynth(_) => "fleet-synth",
            Job::FleetDensity(_) => "fleet-density",
            Job::FleetEvaluate(_) => "fleet-evaluate",
            Job::FleetExport(_) => "fleet-export",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Job::Simulate(s) => Some(s.seed),
            Job::Optimality(j) => Some(j.seed),
            Job::Distribution(j) => Some(j.seed),
            Job::Calibrate(j) => Some(j.seed),
            Job::Gaps(j) => Some(j.seed),
            Job::FleetSynth(j) => Some(j.seed),
            Job::FleetEvaluate(j) => Some(j.params.seed),
            Job::Asymptotics(_) | Job::FleetIngest(_) | Job::FleetDensity(_) | Job::FleetExport(_) => None,
        }
    }

    pub fn inputs(&self) -> Vec<&Path> {
        match self {
            Job::FleetIngest(j) => vec![&j.input],
            Job::FleetDensity(j) => vec![&j.input],
            Job::FleetEvaluate(j) => vec![&j.input],
            Job::FleetExport(j) => vec![&j.input],
            _ => vec![],
        }
    }
}

fn seed_or_fresh(config: &Config, flag: Option<u64>) -> Result<u64, Failure> {
    match config.opt(flag, "seed")? {
        Some(s) => Ok(s),
        None => {
            let s: u64 = rand::random();
            eprintln!("seed: {s}");
            Ok(s)
        }
    }
}

fn input_path(config: &Config, flag: Option<PathBuf>) -> Result<PathBuf, Failure> {
    let p: PathBuf = config
        .opt(flag, "input")?
        .ok_or_else(|| Failure::Usage("--input is required".into()))?;
    std::path::absolute(&p).map_err(|e| Failure::Usage(format!("bad input path {}: {e}", p.display())))
}

fn positive(name: &str, v: f64) -> Result<f64, Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Failure::Usage(format!("--{name} must be positive, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<f64, Failure> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Failure::Usage(format!("--{name} must be >= 0, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<usize, Failure> {
    if v >= min {
        Ok(v)
    } else {
        Err(Failure::Usage(format!("--{name} must be >= {min}, got {v}")))
    }
}

fn parse_filter(s: &str) -> Result<TimeFilter, Failure> {
    let bad = || Failure::Usage(format!("bad --filter '{s}': use all, hour:H, weekday:D or month:M"));
    if s == "all" {
        return Ok(TimeFilter::All);
    }
    let (kind, value) = s.split_once(':').ok_or_else(bad)?;
    let v: u32 = value.parse().map_err(|_| bad())?;
    match kind {
        "hour" if v < 24 => Ok(TimeFilter::Hour(v)),
        "weekday" if v < 7 => Ok(TimeFilter::Weekday(v)),
        "month" if (1..=12).contains(&v) => Ok(TimeFilter::Month(v)),
        _ => Err(bad()),
    }
}

/// Builds the job for `command`, taking each value from the flag, then the
/// config file, then the default.
pub fn resolve(command: &Command, seed: Option<u64>, config: &Config) -> Result<Job, Failure> {
    match command {
        Command::Simulate(a) => resolve_simulate(a, seed, config),
        Command::Asymptotics(a) => resolve_asymptotics(a, config),
        Command::Optimality(a) => resolve_optimality(a, seed, config),
        Command::Distribution(a) => resolve_distribution(a, seed, config),
        Command::Calibrate(a) => resolve_calibrate(a, seed, config),
        Command::Gaps(a) => resolve_gaps(a, seed, config),
        Command::Fleet(FleetCommand::Ingest(a)) => resolve_ingest(a, config),
        Command::Fleet(FleetCommand::Synth(a)) => resolve_synth(a, seed, config),
        Command::Fleet(FleetCommand::Density(a)) => resolve_density(a, config),
        Command::Fleet(FleetCommand::Evaluate(a)) => resolve_evaluate(a, seed, config),
        Command::Fleet(FleetCommand::Export(a)) => resolve_export(a, config),
        Command::Replay(_) => Err(Failure::Usage("replay is not a job".into())),
    }
}

fn resolve_simulate(a: &SimulateArgs, seed: Option<u64>, c: &Config) -> Result<Job, Failure> {
    let case = c.choice(a.case, "case", CaseArg::Orthogonal)?;
    let epsilon = c.opt(a.epsilon, "epsilon")?;
    if epsilon.is_some() && case != CaseArg::Fourier {
        return Err(Failure::Usage("--epsilon only applies to --case fourier".into()));
    }
    let case = match case {
        CaseArg::Orthogonal => CampaignCase::Orthogonal,
        CaseArg::Uniform => CampaignCase::Uniform,
        CaseArg::Fourier => CampaignCase::Fourier {
            density: FourierDensity::single_mode(epsilon.unwrap_or(0.02)).map_err(|e| Failure::Usage(e.to_string()))?,
        },
        CaseArg::WeightedOrthogonal => CampaignCase::WeightedOrthogonal,
        CaseArg::WeightedUniform => CampaignCase::WeightedUniform,
    };
    let spec = CampaignSpec {
        case,
        n_values: c.get(a.n.clone(), "n", CountList((1..=25).map(|k| 4 * k).collect()))?.0,
        w: c.get(a.w, "w", 2.0)?,
        sigma: c.get(a.sigma, "sigma", 0.3)?,
        outer_samples: c.get(a.samples, "samples", 5000)?,
        mc_samples: c.get(a.mc_samples, "mc-samples", 0)?,
        two_sided: c.switch(a.two_sided, "two-sided")?,
        grid_resolution: c.get(a.grid, "grid", 201)?,
        seed: seed_or_fresh(c, seed)?,
    };
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(Job::Simulate(spec))
}

fn resolve_asymptotics(a: &AsymptoticsArgs, c: &Config) -> Result<Job, Failure> {
    let format = c.choice(a.format, "format", TableFormat::Csv)?;
    let n = c.get(a.n.clone(), "n", CountList((1..=20).map(|k| 10 * k).collect()))?.0;
    if let Some(bad) = n.iter().find(|&&v| v < 3) {
        return Err(Failure::Usage(format!("fleet sizes must be >= 3, got {bad}")));
    }
    let epsilon = c.get(a.epsilon, "epsilon", 0.0)?;
    FourierDensity::single_mode(epsilon).map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(Job::Asymptotics(AsymptoticsJob {
        n,
        w: positive("w", c.get(a.w, "w", 2.0)?)?,
        sigma: non_negative("sigma", c.get(a.sigma, "sigma", 0.3)?)?,
        epsilon,
        format: format.to_possible_value().expect("not skipped").get_name().to_string(),
    }))
}

fn resolve_optimality(a: &OptimalityArgs, seed: Option<u64>, c: &Config) -> Result<Job, Failure> {
    let epsilon = c.get(a.epsilon.clone(), "epsilon", RealList(vec![0.0, 0.01, 0.02, 0.03, 0.04]))?.0;
    for &e in &epsilon {
        FourierDensity::single_mode(e).map_err(|err| Failure::Usage(err.to_string()))?;
    }
    Ok(Job::Optimality(OptimalityJob {
        epsilon,
        n: at_least("n", c.get(a.n, "n", 200)?, 3)?,
        w: positive("w", c.get(a.w, "w", 2.0)?)?,
        samples: at_least("samples", c.get(a.samples, "samples", 5000)?, 2)?,
        seed: seed_or_fresh(c, seed)?,
    }))
}

fn resolve_distribution(a: &DistributionArgs, seed: Option<u64>, c: &Config) -> Result<Job, Failure> {
    Ok(Job::Distribution(DistributionJob {
        n: c.get(a.n.clone(), "n", CountList((10..=20).collect()))?.0,
        w: positive("w", c.get(a.w, "w", 2.0)?)?,
        sigma_sq: non_negative("sigma-sq", c.get(a.sigma_sq, "sigma-sq", 0.5)?)?,
        samples: at_least("samples", c.get(a.samples, "samples", 10_000)?, 1)?,
        two_sided: c.switch(a.two_sided, "two-sided")?,
        seed: seed_or_fresh(c, seed)?,
    }))
}

fn resolve_calibrate(a: &CalibrateArgs, seed: Option<u64>, c: &Config) -> Result<Job, Failure> {
    let n = c.get(a.n.clone(), "n", CountList(vec![50, 100, 200, 400]))?.0;
    if n.len() < 2 {
        return Err(Failure::Usage("--n needs at least two fleet sizes".into()));
    }
    Ok(Job::Calibrate(CalibrateJob {
        n,
        w: positive("w", c.get(a.w, "w", 2.0)?)?,
        samples: at_least("samples", c.get(a.samples, "samples", 2000)?, 2)?,
        two_sided: c.switch(a.two_sided, "two-sided")?,
        seed: seed_or_fresh(c, seed)?,
    }))
}

fn resolve_gaps(a: &GapsArgs, seed: Option<u64>, c: &Config) -> Result<Job, Failure> {
    let epsilon = c.get(a.epsilon, "epsilon", 0.0)?;
    FourierDensity::single_mode(epsilon).map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(Job::Gaps(GapsJob {
        n: at_least("n", c.get(a.n, "n", 100)?, 10)?,
        draws: at_least("draws", c.get(a.draws, "draws", 5000)?, 10)?,
        epsilon,
        two_sided: c.switch(a.two_sided, "two-sided")?,
        seed: seed_or_fresh(c, seed)?,
    }))
}

fn resolve_ingest(a: &IngestArgs, c: &Config) -> Result<Job, Failure> {
    let input = input_path(c, a.input.clone())?;
    let lat = c.opt(a.origin_lat, "origin-lat")?;
    let lon = c.opt(a.origin_lon, "origin-lon")?;
    let origin = match (lat, lon) {
        (Some(lat_deg), Some(lon_deg)) => Some(GeoOrigin { lat_deg, lon_deg }),
        (None, None) => None,
        _ => return Err(Failure::Usage("--origin-lat and --origin-lon go together".into())),
    };
    Ok(Job::FleetIngest(IngestJob { input, origin }))
}

fn resolve_synth(a: &SynthArgs, seed: Option<u64>, c: &Config) -> Result<Job, Failure> {
    let city = GridCity {
        extent: positive("extent", c.get(a.extent, "extent", 3000.0)?)?,
        spacing: positive("spacing", c.get(a.spacing, "spacing", 250.0)?)?,
        center_intensity: non_negative("center-intensity", c.get(a.center_intensity, "center-intensity", 3.0)?)?,
        margin_intensity: non_negative("margin-intensity", c.get(a.margin_intensity, "margin-intensity", 0.4)?)?,
        center_radius: non_negative("center-radius", c.get(a.center_radius, "center-radius", 700.0)?)?,
    };
    city.segments().map_err(|e| Failure::Usage(e.to_string()))?;
    let hourly_profile = match c.choice(a.profile, "profile", ProfileArg::Diurnal)? {
        ProfileArg::Flat => [1.0; 24],
        ProfileArg::Diurnal => diurnal_profile(),
    };
    Ok(Job::FleetSynth(SynthJob {
        city,
        days: c.get(a.days, "days", 3)?,
        hourly_profile,
        start_timestamp: non_negative("start", c.get(a.start, "start", 0.0)?)?,
        seed: seed_or_fresh(c, seed)?,
    }))
}

fn resolve_density(a: &DensityArgs, c: &Config) -> Result<Job, Failure> {
    Ok(Job::FleetDensity(DensityJob {
        input: input_path(c, a.input.clone())?,
        cell_size: positive("cell-size", c.get(a.cell_size, "cell-size", DEFAULT_CELL_SIZE)?)?,
        padding: non_negative("padding", c.get(a.padding, "padding", 0.0)?)?,
        filter: parse_filter(&c.get(a.filter.clone(), "filter", "all".to_string())?)?,
        scale_factor: positive("scale-factor", c.get(a.scale_factor, "scale-factor", DEFAULT_SCALE_FACTOR)?)?,
    }))
}

fn resolve_evaluate(a: &EvaluateArgs, seed: Option<u64>, c: &Config) -> Result<Job, Failure> {
    Ok(Job::FleetEvaluate(EvaluateJob {
        input: input_path(c, a.input.clone())?,
        params: EvalParams {
            comm_radius: non_negative("comm-radius", c.get(a.comm_radius, "comm-radius", DEFAULT_COMM_RADIUS)?)?,
            noise_variance: non_negative(
                "noise-variance",
                c.get(a.noise_variance, "noise-variance", DEFAULT_NOISE_VARIANCE)?,
            )?,
            realizations: at_least(
                "realizations",
                c.get(a.realizations, "realizations", DEFAULT_REALIZATIONS)?,
                1,
            )?,
            w: positive("w", c.get(a.w, "w", 2.0)?)?,
            seed: seed_or_fresh(c, seed)?,
        },
    }))
}

fn resolve_export(a: &ExportArgs, c: &Config) -> Result<Job, Failure> {
    let from_file: Option<String> = c.opt(None, "format")?;
    let mut formats = if !a.format.is_empty() {
        a.format.clone()
    } else if let Some(list) = from_file {
        list.split(',')
            .map(|s| ExportFormat::from_str(s.trim(), true).map_err(|e| Failure::Usage(format!("config format: {e}"))))
            .collect::<Result<_, _>>()?
    } else {
        vec![ExportFormat::Csv, ExportFormat::Svg, ExportFormat::Json]
    };
    formats.sort();
    formats.dedup();
    Ok(Job::FleetExport(ExportJob {
        input: input_path(c, a.input.clone())?,
        formats,
        label: c.get(a.label.clone(), "label", "all".to_string())?,
    }))
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    let path = out.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", path.display())))
}

fn write_text(out: &Path, name: &str, text: &str) -> Result<(), Failure> {
    let mut f = create(out, name)?;
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(out, name, &text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let file = File::open(path).map_err(|e| Failure::Runtime(format!("cannot open {}: {e}", path.display())))?;
    serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| Failure::Runtime(format!("{} is not a valid input: {e}", path.display())))
}

fn cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsRow {
    #[serde(rename = "N")]
    pub n: usize,
    /// Round-robin orthogonal roads; `None` where a direction has fewer than two vehicles.
    pub orthogonal: Option<f64>,
    pub uniform_geometric: f64,
    pub uniform_noise: f64,
    pub uniform_total: f64,
    pub fourier_total: f64,
}

pub fn asymptotics_table(job: &AsymptoticsJob) -> Result<Vec<AsymptoticsRow>, Failure> {
    let spectrum = FourierSpectrum::from_density(&FourierDensity::single_mode(job.epsilon)?);
    job.n
        .iter()
        .map(|&n| {
            let uniform = uniform_expected_sq_error(n, job.w, &vec![job.sigma; n])?;
            let orthogonal = if job.sigma == 0.0 {
                Some(0.0)
            } else {
                orthogonal_leading_order(&orthogonal_counts(n), job.sigma).ok()
            };
            Ok(AsymptoticsRow {
                n,
                orthogonal,
                uniform_geometric: uniform.geometric,
                uniform_noise: uniform.noise,
                uniform_total: uniform.total(),
                fourier_total: fourier_expected_sq_error(n, job.w, &spectrum) + uniform.noise,
            })
        })
        .collect()
}

fn asymptotics_csv(rows: &[AsymptoticsRow]) -> String {
    let mut s = String::from("N,orthogonal,uniform_geometric,uniform_noise,uniform_total,fourier_total\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.n,
            r.orthogonal.map_or(String::new(), |v| v.to_string()),
            r.uniform_geometric,
            r.uniform_noise,
            r.uniform_total,
            r.fourier_total
        );
    }
    s
}

/// Runs `job`, writing into `out`; returns the names of the files written.
pub fn execute(job: &Job, out: &Path) -> Result<Vec<String>, Failure> {
    match job {
        Job::Simulate(spec) => {
            let result = run_campaign(spec)?;
            result.write_csv(create(out, "simulate.csv")?)?;
            Ok(vec!["simulate.csv".into()])
        }
        Job::Asymptotics(j) => {
            let rows = asymptotics_table(j)?;
            let csv = asymptotics_csv(&rows);
            write_text(out, "asymptotics.csv", &csv)?;
            write_json(out, "asymptotics.json", &rows)?;
            if j.format == "json" {
                println!("{}", serde_json::to_string_pretty(&rows)?);
            } else {
                print!("{csv}");
            }
            Ok(vec!["asymptotics.csv".into(), "asymptotics.json".into()])
        }
        Job::Optimality(j) => {
            let rows = verify_optimality(&j.epsilon, j.n, j.w, j.samples, j.seed)?;
            let mut s = String::from("epsilon,mc_mean,stderr,ci95_lo,ci95_hi,predictor,ratio_to_uniform,rejection_rate\n");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{}",
                    r.epsilon,
                    cell(r.mc_mean),
                    cell(r.stderr),
                    cell(r.ci95.0),
                    cell(r.ci95.1),
                    cell(r.predictor),
                    cell(r.ratio_to_uniform),
                    r.rejection_rate
                );
            }
            write_text(out, "optimality.csv", &s)?;
            Ok(vec!["optimality.csv".into()])
        }
        Job::Distribution(j) => {
            let dists = error_distribution(&j.n, j.w, j.sigma_sq, j.samples, j.two_sided, j.seed)?;
            let mut files = Vec::new();
            let mut summary = String::from("N,median,median_ci99_lo,median_ci99_hi,p90,rejection_rate\n");
            for d in &dists {
                let name = format!("distribution-N{}.csv", d.n);
                let mut s = String::from("e_sq_m2\n");
                for v in &d.sorted {
                    let _ = writeln!(s, "{v}");
                }
                write_text(out, &name, &s)?;
                files.push(name);
                let (lo, hi) = d.median_ci99();
                let _ = writeln!(
                    summary,
                    "{},{},{},{},{},{}",
                    d.n,
                    d.median(),
                    lo,
                    hi,
                    d.quantile(0.9),
                    d.rejection_rate
                );
            }
            write_text(out, "distribution-summary.csv", &summary)?;
            files.push("distribution-summary.csv".into());
            Ok(files)
        }
        Job::Calibrate(j) => {
            let result = calibrate_uniform_constant(&j.n, j.w, j.samples, j.two_sided, j.seed)?;
            let mut s = String::from("N,constant,stderr\n");
            for p in &result.points {
                let _ = writeln!(s, "{},{},{}", p.n, p.constant, p.stderr);
            }
            write_text(out, "calibration.csv", &s)?;
            write_json(out, "calibration.json", &result)?;
            println!(
                "constant {:.6e} (95% CI {:.6e} .. {:.6e}); candidate {:.6}: {}",
                result.constant,
                result.ci95.0,
                result.ci95.1,
                result.mode_candidate,
                if result.matches_mode_candidate { "match" } else { "no match" }
            );
            Ok(vec!["calibration.csv".into(), "calibration.json".into()])
        }
        Job::Gaps(j) => {
            let dist = if j.epsilon == 0.0 {
                AngleDistribution::Uniform
            } else {
                AngleDistribution::Fourier(FourierDensity::single_mode(j.epsilon)?)
            };
            let result = gap_distribution_test(j.n, &dist, j.draws, j.two_sided, j.seed)?;
            write_json(out, "gaps.json", &result)?;
            Ok(vec!["gaps.json".into()])
        }
        Job::FleetIngest(j) => {
            let report = ingest_trips_path(&j.input, j.origin)?;
            if report.records.is_empty() {
                return Err(Failure::Runtime(format!("no trip records in {}", j.input.display())));
            }
            export_trips(&report.records, create(out, "trips.csv")?)?;
            #[derive(Serialize)]
            struct Summary {
                records: usize,
                total_rows: usize,
                malformed_rows: usize,
                wrapped_headings: usize,
                format: Option<TripFormat>,
                origin: Option<GeoOrigin>,
            }
            write_json(
                out,
                "ingest.json",
                &Summary {
                    records: report.records.len(),
                    total_rows: report.total_rows,
                    malformed_rows: report.malformed_rows,
                    wrapped_headings: report.wrapped_headings,
                    format: report.format,
                    origin: report.origin,
                },
            )?;
            println!(
                "{} records ({} malformed rows skipped, {} headings wrapped)",
                report.records.len(),
                report.malformed_rows,
                report.wrapped_headings
            );
            Ok(vec!["trips.csv".into(), "ingest.json".into()])
        }
        Job::FleetSynth(j) => {
            let spec = SynthSpec {
                segments: j.city.segments()?,
                hourly_profile: j.hourly_profile,
                days: j.days,
                start_timestamp: j.start_timestamp,
                seed: j.seed,
            };
            let records = synth_fleet(&spec)?;
            export_trips(&records, create(out, "trips.csv")?)?;
            println!("{} records", records.len());
            Ok(vec!["trips.csv".into()])
        }
        Job::FleetDensity(j) => {
            let report = ingest_trips_path(&j.input, None)?;
            if report.records.is_empty() {
                return Err(Failure::Runtime(format!("no trip records in {}", j.input.display())));
            }
            let mut grid = GridSpec::covering(&report.records, j.cell_size)?;
            let pad = (j.padding / j.cell_size).ceil() as usize;
            grid.origin = grid.origin - Vec2::new(pad as f64, pad as f64) * j.cell_size;
            grid.nx += 2 * pad;
            grid.ny += 2 * pad;
            let density = estimate_density(&report.records, &grid, j.filter, j.scale_factor)?;
            write_json(out, "density.json", &density)?;
            Ok(vec!["density.json".into()])
        }
        Job::FleetEvaluate(j) => {
            let density: DensityGrid = read_json(&j.input)?;
            let acc = evaluate_accuracy(&density, &j.params)?;
            write_json(out, "accuracy.json", &acc)?;
            let flagged = acc.cells.iter().filter(|c| c.flag).count();
            println!("{} cells, {} flagged", acc.cells.len(), flagged);
            Ok(vec!["accuracy.json".into()])
        }
        Job::FleetExport(j) => {
            let acc: AccuracyGrid = read_json(&j.input)?;
            let mut files = Vec::new();
            for f in &j.formats {
                match f {
                    ExportFormat::Csv => {
                        let mut w = create(out, "accuracy.csv")?;
                        export_accuracy_csv(&acc, &mut w)?;
                        w.flush()?;
                        files.push("accuracy.csv".into());
                    }
                    ExportFormat::Svg => {
                        let mut w = create(out, "accuracy.svg")?;
                        export_accuracy_svg(&acc, &mut w)?;
                        w.flush()?;
                        files.push("accuracy.svg".into());
                    }
                    ExportFormat::Json => {
                        let summary = AccuracySummary {
                            buckets: vec![summarize_accuracy(&j.label, &acc)],
                        };
                        let mut w = create(out, "summary.json")?;
                        summary.write_json(&mut w)?;
                        w.flush()?;
                        files.push("summary.json".into());
                    }
                }
            }
            Ok(files)
        }
    }
}
