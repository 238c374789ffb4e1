//! Simulation campaigns over fleet size.
//!
//! Every outer sample draws its own RNG substream keyed by `(seed, N, k)`, so
//! results do not depend on how samples are spread over workers.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    fourier_expected_sq_error, gumbel_params_leading, orthogonal_expected_sq_error, uniform_expected_sq_error,
    FourierSpectrum,
};
use crate::error::{Error, Result};
use crate::error_models::{
    circle_gap_cdf, gap_cdf_asymptotic, gap_cdf_uniform_exact, AngleDistribution, FourierDensity, NoiseModel,
};
use crate::estimators::{
    centroid_mc_with, estimate_hard, estimate_weighted, expected_sq_error_linear, group_orthogonal,
    linearize_analytic, orthogonal_error_closed_form, FleetScenario, WeightedGrid,
};
use crate::geometry::{canonical_angle, sort_angles, tangent_polygon, HalfPlane};
use crate::rng::{mix, streams, substream};
use crate::stats::{ks_one_sample, larger_at, line_fit, KsOutcome, LineFit, Summary, Z95};

/// Give up on a sample after this many consecutive unbounded or empty draws.
const MAX_ATTEMPTS: u64 = 10_000;
/// Rows whose rejection rate exceeds this are flagged.
pub const REJECTION_FLAG_RATE: f64 = 0.01;
pub const DIRECTED_CONSTANT: f64 = 2.0 / 9.0;
pub const UNDIRECTED_CONSTANT: f64 = 8.0 / 9.0;

/// Road configuration and estimator of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CampaignCase {
    /// Vehicles assigned round-robin to the four axis directions.
    Orthogonal,
    Uniform,
    Fourier { density: FourierDensity },
    WeightedOrthogonal,
    WeightedUniform,
}

impl CampaignCase {
    pub fn name(&self) -> &'static str {
        match self {
            CampaignCase::Orthogonal => "orthogonal",
            CampaignCase::Uniform => "uniform",
            CampaignCase::Fourier { .. } => "fourier",
            CampaignCase::WeightedOrthogonal => "weighted-orthogonal",
            CampaignCase::WeightedUniform => "weighted-uniform",
        }
    }

    fn is_weighted(&self) -> bool {
        matches!(self, CampaignCase::WeightedOrthogonal | CampaignCase::WeightedUniform)
    }

    /// Normal angles for `n` vehicles.
    fn draw_normals<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            CampaignCase::Orthogonal | CampaignCase::WeightedOrthogonal => {
                Ok((0..n).map(|i| (i % 4) as f64 * FRAC_PI_2).collect())
            }
            CampaignCase::Uniform | CampaignCase::WeightedUniform => AngleDistribution::Uniform.draw(n, rng),
            CampaignCase::Fourier { density } => Ok((0..n).map(|_| density.draw(rng)).collect()),
        }
    }
}

/// Vehicles per axis direction under round-robin assignment.
pub fn orthogonal_counts(n: usize) -> [usize; 4] {
    let mut c = [n / 4; 4];
    for slot in c.iter_mut().take(n % 4) {
        *slot += 1;
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub case: CampaignCase,
    pub n_values: Vec<usize>,
    /// Road half width, meters.
    pub w: f64,
    /// Non-common error standard deviation, meters.
    pub sigma: f64,
    pub outer_samples: usize,
    /// Samples for the Monte Carlo centroid path; 0 disables it.
    pub mc_samples: usize,
    pub two_sided: bool,
    /// Cells per side of the weighted-estimator grid.
    pub grid_resolution: usize,
    pub seed: u64,
}

impl CampaignSpec {
    pub fn new(case: CampaignCase, n_values: Vec<usize>, sigma: f64, seed: u64) -> Self {
        Self {
            case,
            n_values,
            w: 2.0,
            sigma,
            outer_samples: 5000,
            mc_samples: 10_000,
            two_sided: false,
            grid_resolution: 201,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.outer_samples == 0 {
            return Err(Error::InvalidInput("outer_samples must be >= 1".into()));
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(Error::InvalidInput("N values must be non-empty and positive".into()));
        }
        if !(self.w > 0.0 && self.w.is_finite()) {
            return Err(Error::InvalidInput(format!("half width must be positive, got {}", self.w)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if self.case.is_weighted() && self.grid_resolution == 0 {
            return Err(Error::InvalidInput("grid resolution must be positive".into()));
        }
        Ok(())
    }

    /// Closed-form prediction of the mean squared error at `n`; NaN where the
    /// formula does not apply.
    pub fn asymptotic(&self, n: usize) -> f64 {
        match &self.case {
            CampaignCase::Orthogonal | CampaignCase::WeightedOrthogonal => {
                if self.sigma == 0.0 {
                    return 0.0;
                }
                let counts = orthogonal_counts(n);
                let params: Result<Vec<_>> = counts.iter().map(|&c| gumbel_params_leading(c, self.sigma)).collect();
                match params {
                    Ok(p) => orthogonal_expected_sq_error(&[p[0], p[1], p[2], p[3]]),
                    Err(_) => f64::NAN,
                }
            }
            CampaignCase::Uniform | CampaignCase::WeightedUniform => {
                uniform_expected_sq_error(n, self.w, &vec![self.sigma; n]).map_or(f64::NAN, |p| p.total())
            }
            CampaignCase::Fourier { density } => {
                match uniform_expected_sq_error(n, self.w, &vec![self.sigma; n]) {
                    Ok(p) => fourier_expected_sq_error(n, self.w, &FourierSpectrum::from_density(density)) + p.noise,
                    Err(_) => f64::NAN,
                }
            }
        }
    }
}

/// One row of a campaign table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRow {
    pub n: usize,
    pub mean_sq_error: f64,
    /// Sample std over `√outer_samples`.
    pub stderr: f64,
    pub asymptotic: f64,
    pub rejection_rate: f64,
    /// Closed-form path (orthogonal roads only).
    pub exact_mean_sq_error: Option<f64>,
    /// Largest per-sample gap between the closed form and the polygon path.
    pub exact_max_abs_diff: Option<f64>,
    pub mc_mean_sq_error: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub flagged: bool,
}

impl CampaignRow {
    pub fn summary(&self) -> Summary {
        Summary {
            mean: self.mean_sq_error,
            stderr: self.stderr,
            n: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub spec: CampaignSpec,
    pub rows: Vec<CampaignRow>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl CampaignResult {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record([
            "case",
            "N",
            "mean_sq_error",
            "stderr",
            "asymptotic",
            "rejection_rate",
            "exact_mean_sq_error",
            "mc_mean_sq_error",
            "flagged",
        ])?;
        for r in &self.rows {
            wtr.write_record([
                self.spec.case.name().to_string(),
                r.n.to_string(),
                r.mean_sq_error.to_string(),
                r.stderr.to_string(),
                r.asymptotic.to_string(),
                r.rejection_rate.to_string(),
                fmt_opt(r.exact_mean_sq_error),
                fmt_opt(r.mc_mean_sq_error),
                r.flagged.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// JSON run manifest: the spec, the crate version and the seed.
    pub fn write_manifest<W: Write>(&self, writer: W) -> Result<()> {
        let manifest = serde_json::json!({
            "spec": self.spec,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.spec.seed,
        });
        serde_json::to_writer_pretty(writer, &manifest)?;
        Ok(())
    }

    pub fn row(&self, n: usize) -> Option<&CampaignRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    /// True when the mean falls significantly between every pair of consecutive rows.
    pub fn decreasing_at(&self, z: f64) -> bool {
        self.rows.windows(2).all(|p| larger_at(&p[1].summary(), &p[0].summary(), z))
    }

    /// Slope of `ln mean` against `ln N`.
    pub fn log_log_slope(&self) -> LineFit {
        let x: Vec<f64> = self.rows.iter().map(|r| (r.n as f64).ln()).collect();
        let y: Vec<f64> = self.rows.iter().map(|r| r.mean_sq_error.ln()).collect();
        let e: Vec<f64> = self.rows.iter().map(|r| r.stderr / r.mean_sq_error).collect();
        line_fit(&x, &y, &e)
    }
}

/// Runs `f` on a pool with `workers` threads (0 = one per core).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

struct SampleOutcome {
    sq_error: f64,
    exact: Option<f64>,
    mc: Option<f64>,
    rejected: u64,
}

fn build_scenario(spec: &CampaignSpec, normals: &[f64]) -> Result<FleetScenario> {
    FleetScenario::from_normal_angles(normals, spec.w, NoiseModel::uniform(normals.len(), spec.sigma)?, spec.two_sided)
}

fn run_sample(spec: &CampaignSpec, n: usize, k: usize) -> Result<SampleOutcome> {
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = substream(spec.seed, streams::CAMPAIGN, mix(&[n as u64, k as u64, attempt]));
        let normals = spec.case.draw_normals(n, &mut rng)?;
        let scenario = build_scenario(spec, &normals)?;
        let draws = scenario.noise().draw(&mut rng);
        let hard = match estimate_hard(&scenario, &draws) {
            Ok(r) => r,
            Err(Error::Unbounded) => continue,
            Err(e) => return Err(e),
        };
        if !hard.feasible && !spec.case.is_weighted() {
            continue;
        }
        let sq_error = if spec.case.is_weighted() {
            let grid = WeightedGrid {
                resolution: spec.grid_resolution,
                ..WeightedGrid::default_for(&scenario)
            };
            estimate_weighted(&scenario, &draws, &grid)?.squared_error
        } else {
            hard.squared_error
        };
        let exact = if spec.case == CampaignCase::Orthogonal {
            let planes = scenario.planes();
            let angles: Vec<f64> = planes.iter().map(|p| p.plane.normal_angle()).collect();
            let groups = group_orthogonal(&angles, &scenario.projections(&draws)?)?;
            Some(orthogonal_error_closed_form(&groups)?)
        } else {
            None
        };
        let mc = if spec.mc_samples > 0 && !spec.case.is_weighted() {
            let planes: Vec<HalfPlane> = scenario.hypothesis_planes(&draws)?.into_iter().map(|(p, _)| p).collect();
            let c = centroid_mc_with(&planes, spec.mc_samples, &mut rng)?;
            Some((scenario.common_error() - c).norm_sq())
        } else {
            None
        };
        return Ok(SampleOutcome {
            sq_error,
            exact,
            mc,
            rejected: attempt,
        });
    }
    Err(Error::DegenerateRegion(format!(
        "no bounded feasible draw for N={n} after {MAX_ATTEMPTS} attempts"
    )))
}

fn summarize_row(spec: &CampaignSpec, n: usize, outcomes: Vec<SampleOutcome>) -> CampaignRow {
    let sq: Vec<f64> = outcomes.iter().map(|o| o.sq_error).collect();
    let s = Summary::of(&sq);
    let rejected: u64 = outcomes.iter().map(|o| o.rejected).sum();
    let rejection_rate = rejected as f64 / (rejected as f64 + outcomes.len() as f64);
    let exact: Option<Vec<f64>> = outcomes.iter().map(|o| o.exact).collect();
    let mc: Option<Vec<f64>> = outcomes.iter().map(|o| o.mc).collect();
    let exact_max_abs_diff = exact
        .as_ref()
        .map(|ex| ex.iter().zip(&sq).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    let mc_summary = mc.as_deref().map(Summary::of);
    CampaignRow {
        n,
        mean_sq_error: s.mean,
        stderr: s.stderr,
        asymptotic: spec.asymptotic(n),
        rejection_rate,
        exact_mean_sq_error: exact.as_deref().map(crate::stats::mean),
        exact_max_abs_diff,
        mc_mean_sq_error: mc_summary.map(|m| m.mean),
        mc_stderr: mc_summary.map(|m| m.stderr),
        flagged: rejection_rate > REJECTION_FLAG_RATE,
    }
}

/// Runs every `N` of the campaign on the current rayon pool.
pub fn run_campaign(spec: &CampaignSpec) -> Result<CampaignResult> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(spec.n_values.len());
    for &n in &spec.n_values {
        let outcomes = (0..spec.outer_samples)
            .into_par_iter()
            .map(|k| run_sample(spec, n, k))
            .collect::<Result<Vec<_>>>()?;
        rows.push(summarize_row(spec, n, outcomes));
    }
    Ok(CampaignResult {
        spec: spec.clone(),
        rows,
    })
}

/// Sorted per-draw `E_X[e²]` at one fleet size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDistribution {
    pub n: usize,
    pub sorted: Vec<f64>,
    pub rejection_rate: f64,
}

impl ErrorDistribution {
    pub fn quantile(&self, q: f64) -> f64 {
        crate::stats::quantile_sorted(&self.sorted, q)
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    /// Distribution-free 99% interval for the median from order statistics.
    pub fn median_ci99(&self) -> (f64, f64) {
        let n = self.sorted.len() as f64;
        let half = 2.575_829_303_548_901 * n.sqrt() / 2.0;
        let lo = ((n / 2.0 - half).floor().max(0.0)) as usize;
        let hi = ((n / 2.0 + half).ceil() as usize).min(self.sorted.len() - 1);
        (self.sorted[lo], self.sorted[hi])
    }
}

/// For each `N`, draws uniform road angles `samples` times and evaluates the
/// linearized expected squared error with noise variance `sigma_sq`.
pub fn error_distribution(
    n_values: &[usize],
    w: f64,
    sigma_sq: f64,
    samples: usize,
    two_sided: bool,
    seed: u64,
) -> Result<Vec<ErrorDistribution>> {
    if samples == 0 || !(sigma_sq >= 0.0) || !(w > 0.0) {
        return Err(Error::InvalidInput("need samples >= 1, sigma² >= 0 and w > 0".into()));
    }
    let sigma = sigma_sq.sqrt();
    let mut out = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let outcomes = (0..samples)
            .into_par_iter()
            .map(|k| -> Result<(f64, u64)> {
                for attempt in 0..MAX_ATTEMPTS {
                    let mut rng = substream(seed, streams::CAMPAIGN, mix(&[n as u64, k as u64, attempt, 1]));
                    let normals = AngleDistribution::Uniform.draw(n, &mut rng)?;
                    let scenario =
                        FleetScenario::from_normal_angles(&normals, w, NoiseModel::uniform(n, sigma)?, two_sided)?;
                    match linearize_analytic(&scenario) {
                        Ok(m) => return Ok((expected_sq_error_linear(&m, scenario.noise())?, attempt)),
                        Err(Error::Unbounded) => continue,
                        Err(e) => return Err(e),
                    }
                }
                Err(Error::DegenerateRegion(format!("no bounded draw for N={n}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let rejected: u64 = outcomes.iter().map(|o| o.1).sum();
        let mut sorted: Vec<f64> = outcomes.into_iter().map(|o| o.0).collect();
        sorted.sort_by(|a, b| a.total_cmp(b));
        out.push(ErrorDistribution {
            n,
            rejection_rate: rejected as f64 / (rejected as f64 + samples as f64),
            sorted,
        });
    }
    Ok(out)
}

/// Exact `e₀²` of the tangent polygon for normals drawn from `dist`, resampling
/// unbounded draws. Returns the value and the number of rejections.
fn sample_e0_sq(dist: &AngleDistribution, n: usize, w: f64, two_sided: bool, seed: u64, key: &[u64]) -> Result<(f64, u64)> {
    for attempt in 0..MAX_ATTEMPTS {
        let mut words = key.to_vec();
        words.push(attempt);
        let mut rng = substream(seed, streams::ANGLES, mix(&words));
        let mut normals = dist.draw(n, &mut rng)?;
        if two_sided {
            let opposite: Vec<f64> = normals.iter().map(|a| canonical_angle(a + PI)).collect();
            normals.extend(opposite);
        }
        match tangent_polygon(&sort_angles(&normals), w) {
            Ok(poly) => return Ok((poly.centroid().norm_sq(), attempt)),
            Err(Error::Unbounded) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::DegenerateRegion(format!("no bounded draw for N={n}")))
}

/// Per-N estimate of `N·E[e₀²]/w²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub n: usize,
    pub constant: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub two_sided: bool,
    pub points: Vec<CalibrationPoint>,
    /// Least-squares constant (mean of the per-N constants).
    pub constant: f64,
    pub ci95: (f64, f64),
    /// Regression of the per-N constant on `1/N`.
    pub trend: LineFit,
    /// `(label, value)` for the directed and undirected candidates.
    pub candidates: Vec<(String, f64)>,
    /// Candidate belonging to this normal convention.
    pub mode_candidate: f64,
    pub matches_mode_candidate: bool,
}

impl CalibrationResult {
    pub fn slope_consistent_with_zero(&self) -> bool {
        self.trend.slope.abs() <= Z95 * self.trend.slope_stderr
    }
}

/// Fits `c` in `E[e₀²] ≈ c·w²/N` at zero noise.
pub fn calibrate_uniform_constant(
    n_values: &[usize],
    w: f64,
    samples: usize,
    two_sided: bool,
    seed: u64,
) -> Result<CalibrationResult> {
    if n_values.len() < 2 || samples < 2 {
        return Err(Error::InvalidInput("calibration needs >= 2 fleet sizes and >= 2 samples".into()));
    }
    let mut points = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let vals = (0..samples)
            .into_par_iter()
            .map(|k| sample_e0_sq(&AngleDistribution::Uniform, n, w, two_sided, seed, &[n as u64, k as u64, 2]).map(|v| v.0))
            .collect::<Result<Vec<_>>>()?;
        let scale = n as f64 / (w * w);
        let s = Summary::of(&vals);
        points.push(CalibrationPoint {
            n,
            constant: s.mean * scale,
            stderr: s.stderr * scale,
        });
    }
    let k = points.len() as f64;
    let constant = points.iter().map(|p| p.constant).sum::<f64>() / k;
    let se = points.iter().map(|p| p.stderr * p.stderr).sum::<f64>().sqrt() / k;
    let ci95 = (constant - Z95 * se, constant + Z95 * se);
    let x: Vec<f64> = points.iter().map(|p| 1.0 / p.n as f64).collect();
    let y: Vec<f64> = points.iter().map(|p| p.constant).collect();
    let e: Vec<f64> = points.iter().map(|p| p.stderr).collect();
    let mode_candidate = if two_sided { UNDIRECTED_CONSTANT } else { DIRECTED_CONSTANT };
    Ok(CalibrationResult {
        two_sided,
        trend: line_fit(&x, &y, &e),
        points,
        constant,
        ci95,
        candidates: vec![
            ("directed 2/9".to_string(), DIRECTED_CONSTANT),
            ("undirected 8/9".to_string(), UNDIRECTED_CONSTANT),
        ],
        mode_candidate,
        matches_mode_candidate: ci95.0 <= mode_candidate && mode_candidate <= ci95.1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapTestResult {
    pub n: usize,
    pub draws: usize,
    pub two_sided: bool,
    /// Against the exact circle-spacing law (uniform angles only).
    pub circle_law: Option<KsOutcome>,
    /// Exponential law on gaps below three times its mean.
    pub exponential_small_gap: KsOutcome,
    /// `π·Beta(1, N)` law as printed.
    pub beta_law: KsOutcome,
    pub alpha: f64,
}

impl GapTestResult {
    pub fn circle_law_passes(&self) -> Option<bool> {
        self.circle_law.map(|k| k.passes(self.alpha))
    }

    pub fn exponential_passes(&self) -> bool {
        self.exponential_small_gap.passes(self.alpha)
    }

    pub fn beta_law_passes(&self) -> bool {
        self.beta_law.passes(self.alpha)
    }
}

/// KS tests of the gap that follows one vehicle's normal. Each draw
/// contributes the gap after the first drawn angle, so samples are independent.
pub fn gap_distribution_test(
    n: usize,
    dist: &AngleDistribution,
    draws: usize,
    two_sided: bool,
    seed: u64,
) -> Result<GapTestResult> {
    if n < 10 {
        return Err(Error::InvalidInput(format!("gap test needs N >= 10, got {n}")));
    }
    if draws < 10 {
        return Err(Error::InvalidInput("gap test needs at least 10 draws".into()));
    }
    dist.validate()?;
    let samples = (0..draws)
        .into_par_iter()
        .map(|k| -> Result<(f64, f64)> {
            let mut rng = substream(seed, streams::ANGLES, mix(&[n as u64, k as u64, 3]));
            let mut normals = dist.draw(n, &mut rng)?;
            if two_sided {
                let opposite: Vec<f64> = normals.iter().map(|a| canonical_angle(a + PI)).collect();
                normals.extend(opposite);
            }
            let first = normals[0];
            let gap = normals
                .iter()
                .skip(1)
                .map(|a| canonical_angle(a - first))
                .filter(|g| *g > 0.0)
                .fold(TAU, f64::min);
            let density = match dist {
                AngleDistribution::Fourier(f) => f.density(first),
                _ => 1.0 / TAU,
            };
            Ok((gap, density))
        })
        .collect::<Result<Vec<_>>>()?;
    let gaps: Vec<f64> = samples.iter().map(|s| s.0).collect();

    let circle_law = matches!(dist, AngleDistribution::Uniform).then(|| {
        if two_sided {
            // opposite normals pair up: N uniform points on a circle of length π
            ks_one_sample(&gaps, |g| circle_gap_cdf(g, n, PI))
        } else {
            ks_one_sample(&gaps, |g| circle_gap_cdf(g, n, TAU))
        }
    });

    // Exponential law conditioned on g < 3/rate; the rate uses the local density.
    let transformed: Vec<f64> = samples
        .iter()
        .filter_map(|&(g, p)| {
            let cut = 3.0 / (2.0 * n as f64 * p);
            (g < cut).then(|| gap_cdf_asymptotic(g, n, p) / gap_cdf_asymptotic(cut, n, p))
        })
        .collect();
    let exponential_small_gap = ks_one_sample(&transformed, |u| u.clamp(0.0, 1.0));
    let beta_law = ks_one_sample(&gaps, |g| gap_cdf_uniform_exact(g, n));
    Ok(GapTestResult {
        n,
        draws,
        two_sided,
        circle_law,
        exponential_small_gap,
        beta_law,
        alpha: 0.01,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalityRow {
    pub epsilon: f64,
    pub mc_mean: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    /// Perturbative prediction for this spectrum.
    pub predictor: f64,
    /// MC mean over the `ε = 0` MC mean.
    pub ratio_to_uniform: f64,
    pub rejection_rate: f64,
}

/// Compares MC `E[e₀²]` under the single-mode density `1/2π + 2ε cos θ` with
/// the Fourier predictor, for each `ε`. Every `ε` reuses the same substreams,
/// so the ratio column is a common-random-numbers comparison.
pub fn verify_optimality(epsilons: &[f64], n: usize, w: f64, samples: usize, seed: u64) -> Result<Vec<OptimalityRow>> {
    if samples < 2 {
        return Err(Error::InvalidInput("need at least 2 samples".into()));
    }
    let run = |eps: f64| -> Result<(Summary, f64, f64)> {
        let density = FourierDensity::single_mode(eps)?;
        let dist = AngleDistribution::Fourier(density.clone());
        let vals = (0..samples)
            .into_par_iter()
            .map(|k| sample_e0_sq(&dist, n, w, false, seed, &[n as u64, k as u64, 4]))
            .collect::<Result<Vec<_>>>()?;
        let rejected: u64 = vals.iter().map(|v| v.1).sum();
        let xs: Vec<f64> = vals.into_iter().map(|v| v.0).collect();
        let predictor = fourier_expected_sq_error(n, w, &FourierSpectrum::from_density(&density));
        Ok((Summary::of(&xs), predictor, rejected as f64 / (rejected as f64 + samples as f64)))
    };
    let (baseline, _, _) = run(0.0)?;
    epsilons
        .iter()
        .map(|&eps| {
            let (s, predictor, rejection_rate) = run(eps)?;
            Ok(OptimalityRow {
                epsilon: eps,
                mc_mean: s.mean,
                stderr: s.stderr,
                ci95: s.ci95(),
                predictor,
                ratio_to_uniform: s.mean / baseline.mean,
                rejection_rate,
            })
        })
        .collect()
}

/// True when each row's MC mean is significantly above the previous one.
pub fn increasing_in_epsilon(rows: &[OptimalityRow], z: f64) -> bool {
    rows.windows(2).all(|p| {
        let a = Summary { mean: p[0].mc_mean, stderr: p[0].stderr, n: 0 };
        let b = Summary { mean: p[1].mc_mean, stderr: p[1].stderr, n: 0 };
        larger_at(&a, &b, z)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(case: CampaignCase, n_values: Vec<usize>, sigma: f64) -> CampaignSpec {
        CampaignSpec {
            outer_samples: 40,
            mc_samples: 0,
            ..CampaignSpec::new(case, n_values, sigma, 11)
        }
    }

    #[test]
    fn round_robin_counts() {
        assert_eq!(orthogonal_counts(8), [2; 4]);
        assert_eq!(orthogonal_counts(10), [3, 3, 2, 2]);
    }

    #[test]
    fn orthogonal_zero_noise_is_exact() {
        let r = run_campaign(&small(CampaignCase::Orthogonal, vec![4, 8, 40], 0.0)).unwrap();
        for row in &r.rows {
            assert!(row.mean_sq_error < 1e-24);
            assert_eq!(row.asymptotic, 0.0);
            assert_eq!(row.rejection_rate, 0.0);
        }
    }

    #[test]
    fn orthogonal_paths_agree() {
        let spec = CampaignSpec {
            mc_samples: 2000,
            ..small(CampaignCase::Orthogonal, vec![20], 0.3)
        };
        let r = run_campaign(&spec).unwrap();
        let row = &r.rows[0];
        assert!(row.exact_max_abs_diff.unwrap() < 1e-12);
        let mc = row.mc_mean_sq_error.unwrap();
        assert!((mc - row.mean_sq_error).abs() < 0.2 * row.mean_sq_error + 0.005, "{row:?}");
    }

    #[test]
    fn deterministic_across_workers() {
        let spec = small(CampaignCase::Uniform, vec![6, 12], 0.3);
        let a = with_workers(1, || run_campaign(&spec)).unwrap().unwrap();
        let b = with_workers(3, || run_campaign(&spec)).unwrap().unwrap();
        assert_eq!(a.to_csv_string().unwrap(), b.to_csv_string().unwrap());
        assert!(a.rows[0].rejection_rate > 0.0);
    }

    #[test]
    fn csv_layout() {
        let r = run_campaign(&small(CampaignCase::Uniform, vec![10], 0.0)).unwrap();
        let csv = r.to_csv_string().unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "case,N,mean_sq_error,stderr,asymptotic,rejection_rate,exact_mean_sq_error,mc_mean_sq_error,flagged"
        );
        assert!(lines.next().unwrap().starts_with("uniform,10,"));
        let mut m = Vec::new();
        r.write_manifest(&mut m).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&m).unwrap();
        assert_eq!(v["seed"], 11);
    }

    #[test]
    fn invalid_spec() {
        let mut s = small(CampaignCase::Uniform, vec![10], 0.0);
        s.outer_samples = 0;
        assert!(run_campaign(&s).is_err());
    }

    #[test]
    fn zero_noise_distribution_is_geometric() {
        let d = error_distribution(&[12], 2.0, 0.0, 50, false, 1).unwrap();
        assert_eq!(d[0].sorted.len(), 50);
        assert!(d[0].sorted.windows(2).all(|p| p[0] <= p[1]));
        let two = error_distribution(&[12], 2.0, 0.0, 50, true, 1).unwrap();
        assert!(two[0].sorted.iter().all(|v| *v < 1e-20));
    }

    #[test]
    fn two_sided_constant_is_smaller() {
        let a = calibrate_uniform_constant(&[50, 100], 2.0, 200, false, 5).unwrap();
        let b = calibrate_uniform_constant(&[50, 100], 2.0, 200, true, 5).unwrap();
        assert!(b.constant < a.constant);
        assert_eq!(a.candidates.len(), 2);
        assert_eq!(a.mode_candidate, DIRECTED_CONSTANT);
        assert_eq!(b.mode_candidate, UNDIRECTED_CONSTANT);
    }

    #[test]
    fn circle_law_holds_for_uniform_angles() {
        for two_sided in [false, true] {
            let r = gap_distribution_test(20, &AngleDistribution::Uniform, 4000, two_sided, 2).unwrap();
            assert!(r.circle_law_passes().unwrap(), "{r:?}");
        }
    }

    #[test]
    fn optimality_baseline() {
        let rows = verify_optimality(&[0.0], 30, 2.0, 200, 3).unwrap();
        assert_eq!(rows[0].ratio_to_uniform, 1.0);
        assert!(FourierDensity::single_mode(1.0).is_err());
        assert!(verify_optimality(&[1.0], 30, 2.0, 200, 3).is_err());
    }
}
