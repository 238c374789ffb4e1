//! Fleet-scale accuracy maps.
//!
//! Trips are binned into a square grid and one-hour windows. Each cell gets
//! an expected vehicle count and a heading histogram. Accuracy at a cell is
//! obtained by sampling fleets from every cell within communication range and
//! evaluating the linearized expected squared error.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Datelike, Timelike};
use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::error_models::NoiseModel;
use crate::estimators::{expected_sq_error_linear, linearize_analytic, FleetScenario};
use crate::geometry::{canonical_angle, Vec2};
use crate::rng::{mix, streams, substream};

pub const HEADING_BINS: usize = 16;
/// Probe vehicles are taken to be 3% of all traffic.
pub const DEFAULT_SCALE_FACTOR: f64 = 1.0 / 0.03;
pub const DEFAULT_CELL_SIZE: f64 = 200.0;
/// One mile, meters.
pub const DEFAULT_COMM_RADIUS: f64 = 1609.344;
/// Square meters.
pub const DEFAULT_NOISE_VARIANCE: f64 = 0.5;
pub const DEFAULT_REALIZATIONS: usize = 200;
/// Ingestion fails when more than this share of rows is malformed.
pub const MAX_MALFORMED_FRACTION: f64 = 0.1;
const EARTH_RADIUS_M: f64 = 6_371_008.8;
const WINDOW_SECONDS: f64 = 3600.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub device_id: String,
    /// UTC seconds.
    pub timestamp: f64,
    /// Local planar frame, meters.
    pub position: Vec2,
    /// Radians in `[0, 2π)`.
    pub heading: f64,
}

/// Reference point of the local tangent-plane frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoOrigin {
    pub lat_deg: f64,
    pub lon_deg: f64,
}

impl GeoOrigin {
    /// Equirectangular projection to meters east/north of the origin.
    pub fn project(&self, lat_deg: f64, lon_deg: f64) -> Vec2 {
        let lat0 = self.lat_deg.to_radians();
        Vec2::new(
            EARTH_RADIUS_M * (lon_deg - self.lon_deg).to_radians() * lat0.cos(),
            EARTH_RADIUS_M * (lat_deg - self.lat_deg).to_radians(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TripFormat {
    /// `device_id,timestamp_utc,lat,lon,heading_deg`
    LatLon,
    /// `device_id,timestamp_utc,x_m,y_m,heading_rad`
    Planar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub records: Vec<TripRecord>,
    pub total_rows: usize,
    pub malformed_rows: usize,
    /// Headings outside `[0, 2π)` that were wrapped.
    pub wrapped_headings: usize,
    pub format: Option<TripFormat>,
    /// Origin used for lat/lon input.
    pub origin: Option<GeoOrigin>,
}

fn detect_format(headers: &csv::StringRecord) -> Result<TripFormat> {
    let h: Vec<&str> = headers.iter().map(str::trim).collect();
    match h.as_slice() {
        ["device_id", "timestamp_utc", "lat", "lon", "heading_deg"] => Ok(TripFormat::LatLon),
        ["device_id", "timestamp_utc", "x_m", "y_m", "heading_rad"] => Ok(TripFormat::Planar),
        _ => Err(Error::InvalidInput(format!("unrecognized trip header: {}", h.join(",")))),
    }
}

/// Streams trip rows. For lat/lon input the origin defaults to the first valid row.
pub fn ingest_trips<R: Read>(reader: R, origin: Option<GeoOrigin>) -> Result<IngestReport> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut report = IngestReport {
        records: Vec::new(),
        total_rows: 0,
        malformed_rows: 0,
        wrapped_headings: 0,
        format: None,
        origin,
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Ok(report);
    }
    let format = detect_format(&headers)?;
    report.format = Some(format);
    for row in rdr.records() {
        report.total_rows += 1;
        let row = match row {
            Ok(r) if r.len() == 5 => r,
            _ => {
                report.malformed_rows += 1;
                continue;
            }
        };
        let nums: Option<Vec<f64>> = (1..5).map(|i| row[i].trim().parse::<f64>().ok().filter(|v| v.is_finite())).collect();
        let device_id = row[0].trim();
        let Some(nums) = nums.filter(|_| !device_id.is_empty()) else {
            report.malformed_rows += 1;
            continue;
        };
        let (position, raw_heading) = match format {
            TripFormat::Planar => (Vec2::new(nums[1], nums[2]), nums[3]),
            TripFormat::LatLon => {
                if !(-90.0..=90.0).contains(&nums[1]) || !(-180.0..=180.0).contains(&nums[2]) {
                    report.malformed_rows += 1;
                    continue;
                }
                let o = *report.origin.get_or_insert(GeoOrigin {
                    lat_deg: nums[1],
                    lon_deg: nums[2],
                });
                (o.project(nums[1], nums[2]), nums[3].to_radians())
            }
        };
        if !(0.0..TAU).contains(&raw_heading) {
            report.wrapped_headings += 1;
        }
        report.records.push(TripRecord {
            device_id: device_id.to_string(),
            timestamp: nums[0],
            position,
            heading: canonical_angle(raw_heading),
        });
    }
    if report.total_rows > 0 && report.malformed_rows as f64 > MAX_MALFORMED_FRACTION * report.total_rows as f64 {
        return Err(Error::TooManyMalformed {
            malformed: report.malformed_rows,
            total: report.total_rows,
        });
    }
    Ok(report)
}

pub fn ingest_trips_path(path: &Path, origin: Option<GeoOrigin>) -> Result<IngestReport> {
    ingest_trips(std::fs::File::open(path)?, origin)
}

/// Writes records in the planar layout; `ingest_trips` reads them back unchanged.
pub fn export_trips<W: Write>(records: &[TripRecord], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["device_id", "timestamp_utc", "x_m", "y_m", "heading_rad"])?;
    for r in records {
        wtr.write_record([
            r.device_id.clone(),
            r.timestamp.to_string(),
            r.position.x.to_string(),
            r.position.y.to_string(),
            r.heading.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Straight road piece with its traffic intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: Vec2,
    pub end: Vec2,
    /// Expected probe vehicles per hour at profile weight 1.
    pub intensity: f64,
    /// Vehicles travel both ways; half of them are reversed.
    pub two_way: bool,
}

impl Segment {
    pub fn heading(&self) -> f64 {
        let d = self.end - self.start;
        canonical_angle(d.y.atan2(d.x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub segments: Vec<Segment>,
    /// Intensity multiplier for each hour of day.
    pub hourly_profile: [f64; 24],
    pub days: u32,
    /// UTC seconds of the first midnight.
    pub start_timestamp: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn flat(segments: Vec<Segment>, days: u32, seed: u64) -> Self {
        Self {
            segments,
            hourly_profile: [1.0; 24],
            days,
            start_timestamp: 0.0,
            seed,
        }
    }
}

/// Hourly weights with a trough near 03:00 (0.15) and a peak near 15:00 (1.0).
pub fn diurnal_profile() -> [f64; 24] {
    let mut profile = [0.0; 24];
    for (h, p) in profile.iter_mut().enumerate() {
        *p = 0.575 - 0.425 * ((h as f64 - 3.0) / 24.0 * TAU).cos();
    }
    profile
}

/// Poisson traffic on each segment for every hour of every day.
pub fn synth_fleet(spec: &SynthSpec) -> Result<Vec<TripRecord>> {
    if spec.segments.is_empty() {
        return Err(Error::InvalidInput("network needs at least one segment".into()));
    }
    if spec.segments.iter().any(|s| !(s.intensity >= 0.0 && s.intensity.is_finite()))
        || spec.hourly_profile.iter().any(|p| !(*p >= 0.0 && p.is_finite()))
    {
        return Err(Error::InvalidInput("intensities and profile weights must be finite and >= 0".into()));
    }
    let mut out = Vec::new();
    for day in 0..spec.days {
        for hour in 0..24u32 {
            for (s, seg) in spec.segments.iter().enumerate() {
                let lambda = seg.intensity * spec.hourly_profile[hour as usize];
                if lambda <= 0.0 {
                    continue;
                }
                let mut rng = substream(spec.seed, streams::FLEET_SYNTH, mix(&[s as u64, day as u64, hour as u64]));
                let count = Poisson::new(lambda)
                    .map_err(|e| Error::InvalidInput(e.to_string()))?
                    .sample(&mut rng) as u64;
                let base = spec.start_timestamp + day as f64 * 86_400.0 + hour as f64 * WINDOW_SECONDS;
                for k in 0..count {
                    let t: f64 = rng.random();
                    let mut heading = seg.heading();
                    if seg.two_way && rng.random::<bool>() {
                        heading = canonical_angle(heading + std::f64::consts::PI);
                    }
                    out.push(TripRecord {
                        device_id: format!("s{s}-d{day}-h{hour}-{k}"),
                        timestamp: base + rng.random::<f64>() * WINDOW_SECONDS,
                        position: seg.start + (seg.end - seg.start) * t,
                        heading,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Square city of orthogonal two-way streets, busier near the middle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCity {
    /// Side length, meters.
    pub extent: f64,
    /// Street spacing, meters.
    pub spacing: f64,
    /// Vehicles per hour on blocks within `center_radius` of the middle.
    pub center_intensity: f64,
    pub margin_intensity: f64,
    pub center_radius: f64,
}

impl GridCity {
    /// One segment per block edge.
    pub fn segments(&self) -> Result<Vec<Segment>> {
        if !(self.spacing > 0.0 && self.extent >= self.spacing) {
            return Err(Error::InvalidInput("grid city needs 0 < spacing <= extent".into()));
        }
        let k = (self.extent / self.spacing).round() as usize;
        let mid = Vec2::new(self.extent / 2.0, self.extent / 2.0);
        let mut segs = Vec::new();
        for line in 0..=k {
            for block in 0..k {
                let a = line as f64 * self.spacing;
                let (b0, b1) = (block as f64 * self.spacing, (block + 1) as f64 * self.spacing);
                for (start, end) in [(Vec2::new(b0, a), Vec2::new(b1, a)), (Vec2::new(a, b0), Vec2::new(a, b1))] {
                    let centre = (start + end) * 0.5;
                    let intensity = if (centre - mid).norm() <= self.center_radius {
                        self.center_intensity
                    } else {
                        self.margin_intensity
                    };
                    segs.push(Segment {
                        start,
                        end,
                        intensity,
                        two_way: true,
                    });
                }
            }
        }
        Ok(segs)
    }
}

/// Square cells anchored at `origin` (lower-left corner).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Vec2,
    pub cell_size: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    /// Smallest grid of `cell_size` cells covering every record.
    pub fn covering(records: &[TripRecord], cell_size: f64) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidInput("no records to cover".into()));
        }
        if !(cell_size > 0.0) {
            return Err(Error::InvalidInput("cell size must be positive".into()));
        }
        let (mut lo, mut hi) = (records[0].position, records[0].position);
        for r in records {
            lo = Vec2::new(lo.x.min(r.position.x), lo.y.min(r.position.y));
            hi = Vec2::new(hi.x.max(r.position.x), hi.y.max(r.position.y));
        }
        let origin = Vec2::new((lo.x / cell_size).floor() * cell_size, (lo.y / cell_size).floor() * cell_size);
        Ok(Self {
            origin,
            cell_size,
            nx: ((hi.x - origin.x) / cell_size).floor() as usize + 1,
            ny: ((hi.y - origin.y) / cell_size).floor() as usize + 1,
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_of(&self, p: Vec2) -> Option<usize> {
        let i = ((p.x - self.origin.x) / self.cell_size).floor();
        let j = ((p.y - self.origin.y) / self.cell_size).floor();
        (i >= 0.0 && j >= 0.0 && (i as usize) < self.nx && (j as usize) < self.ny)
            .then(|| j as usize * self.nx + i as usize)
    }

    /// `(column, row)` of a flat cell index.
    pub fn indices(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    pub fn center(&self, cell: usize) -> Vec2 {
        let (i, j) = self.indices(cell);
        self.origin + Vec2::new((i as f64 + 0.5) * self.cell_size, (j as f64 + 0.5) * self.cell_size)
    }
}

/// Which one-hour windows enter the average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum TimeFilter {
    All,
    /// Hour of day, 0–23 UTC.
    Hour(u32),
    /// 0 = Monday.
    Weekday(u32),
    /// 1–12.
    Month(u32),
}

impl TimeFilter {
    pub fn matches(&self, window_start: f64) -> bool {
        let Some(t) = DateTime::from_timestamp(window_start.floor() as i64, 0) else {
            return false;
        };
        match *self {
            TimeFilter::All => true,
            TimeFilter::Hour(h) => t.hour() == h,
            TimeFilter::Weekday(d) => t.weekday().num_days_from_monday() == d,
            TimeFilter::Month(m) => t.month() == m,
        }
    }

    pub fn label(&self) -> String {
        match self {
            TimeFilter::All => "all".into(),
            TimeFilter::Hour(h) => format!("hour-{h:02}"),
            TimeFilter::Weekday(d) => format!("weekday-{d}"),
            TimeFilter::Month(m) => format!("month-{m:02}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCell {
    /// Expected vehicles present in one hour.
    pub expected_count: f64,
    /// Heading probabilities over `HEADING_BINS` bins; all zero for an empty cell.
    pub histogram: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub grid: GridSpec,
    pub cells: Vec<DensityCell>,
    /// Number of one-hour windows averaged.
    pub windows: usize,
    pub filter: TimeFilter,
    pub scale_factor: f64,
}

impl DensityGrid {
    /// Same layout with every count multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        for c in &mut out.cells {
            c.expected_count *= k;
        }
        out
    }

    pub fn total_count(&self) -> f64 {
        self.cells.iter().map(|c| c.expected_count).sum()
    }
}

fn heading_bin(heading: f64) -> usize {
    ((canonical_angle(heading) / TAU * HEADING_BINS as f64) as usize).min(HEADING_BINS - 1)
}

/// Averages per-window counts of distinct devices in each cell over the
/// matching windows between the first and last record, then scales.
pub fn estimate_density(
    records: &[TripRecord],
    grid: &GridSpec,
    filter: TimeFilter,
    scale_factor: f64,
) -> Result<DensityGrid> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no trip records".into()));
    }
    if !(scale_factor > 0.0 && scale_factor.is_finite()) {
        return Err(Error::InvalidInput("scale factor must be positive".into()));
    }
    let window_of = |t: f64| (t / WINDOW_SECONDS).floor() as i64;
    let first = records.iter().map(|r| window_of(r.timestamp)).min().expect("non-empty");
    let last = records.iter().map(|r| window_of(r.timestamp)).max().expect("non-empty");
    let windows = (first..=last)
        .filter(|w| filter.matches(*w as f64 * WINDOW_SECONDS))
        .count();
    if windows == 0 {
        return Err(Error::InvalidInput(format!("no time window matches filter {}", filter.label())));
    }
    // (window, cell, device) -> heading of the first sighting
    let mut seen: BTreeMap<(i64, usize, &str), f64> = BTreeMap::new();
    for r in records {
        let w = window_of(r.timestamp);
        if !filter.matches(w as f64 * WINDOW_SECONDS) {
            continue;
        }
        if let Some(cell) = grid.cell_of(r.position) {
            seen.entry((w, cell, r.device_id.as_str())).or_insert(r.heading);
        }
    }
    if seen.is_empty() {
        return Err(Error::InvalidInput("no records inside the grid after filtering".into()));
    }
    let mut counts = vec![0usize; grid.len()];
    let mut hist = vec![vec![0.0; HEADING_BINS]; grid.len()];
    for ((_, cell, _), heading) in &seen {
        counts[*cell] += 1;
        hist[*cell][heading_bin(*heading)] += 1.0;
    }
    let cells = counts
        .into_iter()
        .zip(hist)
        .map(|(c, mut h)| {
            if c > 0 {
                h.iter_mut().for_each(|v| *v /= c as f64);
            }
            DensityCell {
                expected_count: c as f64 * scale_factor / windows as f64,
                histogram: h,
            }
        })
        .collect();
    Ok(DensityGrid {
        grid: *grid,
        cells,
        windows,
        filter,
        scale_factor,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    /// Meters.
    pub comm_radius: f64,
    /// Non-common error variance, square meters.
    pub noise_variance: f64,
    pub realizations: usize,
    /// Road half width, meters.
    pub w: f64,
    pub seed: u64,
}

impl EvalParams {
    pub fn new(seed: u64) -> Self {
        Self {
            comm_radius: DEFAULT_COMM_RADIUS,
            noise_variance: DEFAULT_NOISE_VARIANCE,
            realizations: DEFAULT_REALIZATIONS,
            w: 2.0,
            seed,
        }
    }
}

/// JSON has no NaN; missing values travel as `null`.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCell {
    /// RMS error over valid realizations, meters; NaN when none was valid.
    #[serde(with = "nan_as_null")]
    pub j_mean: f64,
    /// Spread of the per-realization RMS error, meters.
    #[serde(with = "nan_as_null")]
    pub j_std: f64,
    /// Empty cell, or too few vehicles for a bounded constraint set in most realizations.
    pub flag: bool,
    pub valid_realizations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyGrid {
    pub grid: GridSpec,
    pub cells: Vec<AccuracyCell>,
}

fn eval_cell(density: &DensityGrid, neighbours: &[usize], cell: usize, params: &EvalParams) -> AccuracyCell {
    let sigma = params.noise_variance.sqrt();
    let samplers: Vec<(f64, Option<WeightedIndex<f64>>)> = neighbours
        .iter()
        .map(|&c| {
            let d = &density.cells[c];
            (d.expected_count, WeightedIndex::new(d.histogram.iter().copied()).ok())
        })
        .collect();
    let bin = TAU / HEADING_BINS as f64;
    let mut per_realization = Vec::with_capacity(params.realizations);
    for r in 0..params.realizations {
        let mut rng = substream(params.seed, streams::FLEET_EVAL, mix(&[cell as u64, r as u64]));
        let mut headings = Vec::new();
        for (lambda, index) in &samplers {
            let (Some(index), true) = (index, *lambda > 0.0) else { continue };
            let count = Poisson::new(*lambda).map(|p| p.sample(&mut rng) as usize).unwrap_or(0);
            for _ in 0..count {
                let k = index.sample(&mut rng);
                headings.push(canonical_angle((k as f64 + rng.random::<f64>()) * bin));
            }
        }
        let value = (|| -> Result<f64> {
            if headings.len() < 3 {
                return Err(Error::Unbounded);
            }
            let noise = NoiseModel::uniform(headings.len(), sigma)?;
            let scenario = FleetScenario::from_driving_angles(&headings, params.w, noise, false)?;
            let model = linearize_analytic(&scenario)?;
            expected_sq_error_linear(&model, scenario.noise())
        })();
        if let Ok(v) = value {
            per_realization.push(v);
        }
    }
    let valid = per_realization.len();
    // no vehicle is ever seen in an empty cell, so there is nothing to localize
    let flag = 2 * valid < params.realizations || density.cells[cell].expected_count == 0.0;
    if valid == 0 {
        return AccuracyCell {
            j_mean: f64::NAN,
            j_std: f64::NAN,
            flag: true,
            valid_realizations: 0,
        };
    }
    let rms: Vec<f64> = per_realization.iter().map(|v| v.sqrt()).collect();
    AccuracyCell {
        j_mean: crate::stats::mean(&per_realization).sqrt(),
        j_std: crate::stats::std_dev(&rms),
        flag,
        valid_realizations: valid,
    }
}

/// J statistics for every cell, evaluated in parallel.
pub fn evaluate_accuracy(density: &DensityGrid, params: &EvalParams) -> Result<AccuracyGrid> {
    if params.realizations == 0 {
        return Err(Error::InvalidInput("need at least one realization".into()));
    }
    if !(params.comm_radius >= 0.0 && params.noise_variance >= 0.0 && params.w > 0.0) {
        return Err(Error::InvalidInput("radius and variance must be >= 0, w > 0".into()));
    }
    let g = density.grid;
    let cells = (0..g.len())
        .into_par_iter()
        .map(|cell| {
            let c = g.center(cell);
            let neighbours: Vec<usize> = (0..g.len())
                .filter(|&o| (g.center(o) - c).norm() <= params.comm_radius)
                .collect();
            eval_cell(density, &neighbours, cell, params)
        })
        .collect();
    Ok(AccuracyGrid { grid: g, cells })
}

/// Mean J and mean J spread over unflagged cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketSummary {
    pub label: String,
    #[serde(with = "nan_as_null")]
    pub mean: f64,
    #[serde(with = "nan_as_null")]
    pub std: f64,
    pub cells: usize,
    pub flagged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub buckets: Vec<BucketSummary>,
}

impl AccuracySummary {
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }
}

pub fn summarize_accuracy(label: &str, grid: &AccuracyGrid) -> BucketSummary {
    let ok: Vec<&AccuracyCell> = grid.cells.iter().filter(|c| !c.flag).collect();
    let mean = |f: fn(&AccuracyCell) -> f64| {
        if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|c| f(c)).sum::<f64>() / ok.len() as f64
        }
    };
    BucketSummary {
        label: label.to_string(),
        mean: mean(|c| c.j_mean),
        std: mean(|c| c.j_std),
        cells: grid.cells.len(),
        flagged: grid.cells.len() - ok.len(),
    }
}

pub fn export_accuracy_csv<W: Write>(grid: &AccuracyGrid, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["cell_x", "cell_y", "j_mean_m", "j_std_m", "flag"])?;
    for (k, c) in grid.cells.iter().enumerate() {
        let (i, j) = grid.grid.indices(k);
        wtr.write_record([
            i.to_string(),
            j.to_string(),
            c.j_mean.to_string(),
            c.j_std.to_string(),
            u8::from(c.flag).to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Blue (accurate) to red (poor) ramp between the smallest and largest J.
fn ramp(t: f64) -> (u8, u8, u8) {
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    let g = (255.0 * (1.0 - (2.0 * t - 1.0).abs()) * 0.8).round() as u8;
    (r, g, b)
}

/// Heatmap with north up; flagged cells are black.
pub fn export_accuracy_svg<W: Write>(grid: &AccuracyGrid, mut writer: W) -> Result<()> {
    const PX: usize = 12;
    let g = grid.grid;
    let (lo, hi) = grid
        .cells
        .iter()
        .filter(|c| !c.flag && c.j_mean.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), c| (a.min(c.j_mean), b.max(c.j_mean)));
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        g.nx * PX,
        g.ny * PX,
        g.nx * PX,
        g.ny * PX
    );
    for (k, c) in grid.cells.iter().enumerate() {
        let (i, j) = g.indices(k);
        let fill = if c.flag || !c.j_mean.is_finite() {
            "#000000".to_string()
        } else {
            let t = if hi > lo { (c.j_mean - lo) / (hi - lo) } else { 0.0 };
            let (r, gg, b) = ramp(t);
            format!("#{r:02x}{gg:02x}{b:02x}")
        };
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{PX}" height="{PX}" fill="{fill}"><title>J={:.4} m</title></rect>"#,
            i * PX,
            (g.ny - 1 - j) * PX,
            c.j_mean
        );
    }
    s.push_str("</svg>\n");
    writer.write_all(s.as_bytes())?;
    Ok(())
}

/// Cells with zero expected vehicle count.
pub fn empty_cells(density: &DensityGrid) -> BTreeSet<usize> {
    density
        .cells
        .iter()
        .enumerate()
        .filter(|(_, c)| c.expected_count == 0.0)
        .map(|(k, _)| k)
        .collect()
}
