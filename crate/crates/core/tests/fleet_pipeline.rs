use std::collections::BTreeMap;
use std::f64::consts::TAU;

use cmm_core::fleet::{
    empty_cells, estimate_density, evaluate_accuracy, export_accuracy_csv, export_accuracy_svg, export_trips, ingest_trips,
    summarize_accuracy, synth_fleet, AccuracyGrid, AccuracySummary, DensityCell, DensityGrid, EvalParams, GridCity,
    GridSpec, Segment, SynthSpec, TimeFilter, TripRecord, DEFAULT_SCALE_FACTOR, HEADING_BINS,
};
use cmm_core::stats::{chi_square_p_value, quantile_sorted};
use cmm_core::Vec2;
use statrs::distribution::{Binomial, Discrete, DiscreteCDF, Poisson};

fn city() -> GridCity {
    GridCity {
        extent: 2000.0,
        spacing: 200.0,
        center_intensity: 6.0,
        margin_intensity: 1.5,
        center_radius: 600.0,
    }
}

fn city_records(days: u32, seed: u64) -> Vec<TripRecord> {
    synth_fleet(&SynthSpec::flat(city().segments().unwrap(), days, seed)).unwrap()
}

#[test]
fn large_export_ingest_round_trip() {
    let segs = city().segments().unwrap();
    let mut spec = SynthSpec::flat(segs, 1, 7);
    spec.start_timestamp = 1_500_000_000.0;
    let mut records = synth_fleet(&spec).unwrap();
    while records.len() < 100_000 {
        spec.seed += 1;
        records.extend(synth_fleet(&spec).unwrap());
    }
    records.truncate(100_000);

    let mut buf = Vec::new();
    export_trips(&records, &mut buf).unwrap();
    let report = ingest_trips(buf.as_slice(), None).unwrap();
    assert_eq!(report.total_rows, 100_000);
    assert_eq!(report.malformed_rows, 0);
    assert_eq!(report.records, records);

    let mut again = Vec::new();
    export_trips(&report.records, &mut again).unwrap();
    assert_eq!(buf, again);
}

#[test]
fn segment_counts_follow_poisson() {
    let lambdas = [0.7, 3.0, 12.0];
    let segments: Vec<Segment> = lambdas
        .iter()
        .enumerate()
        .map(|(i, &l)| Segment {
            start: Vec2::new(0.0, 100.0 * i as f64),
            end: Vec2::new(500.0, 100.0 * i as f64),
            intensity: l,
            two_way: false,
        })
        .collect();
    let days = 60;
    let records = synth_fleet(&SynthSpec::flat(segments, days, 2024)).unwrap();

    // device ids carry the (segment, day, hour) window they were drawn in
    let mut counts: BTreeMap<(usize, String), u64> = BTreeMap::new();
    for r in &records {
        let (seg, rest) = r.device_id[1..].split_once('-').unwrap();
        let window = rest.rsplit_once('-').unwrap().0.to_string();
        *counts.entry((seg.parse().unwrap(), window)).or_default() += 1;
    }
    let windows = (days * 24) as usize;
    for (s, &lambda) in lambdas.iter().enumerate() {
        let mut per_window: Vec<u64> = counts.iter().filter(|((k, _), _)| *k == s).map(|(_, &c)| c).collect();
        per_window.resize(windows, 0);

        let dist = Poisson::new(lambda).unwrap();
        // merge categories so each expected count is at least 5
        let top = (0..).find(|&k| windows as f64 * dist.sf(k) < 5.0).unwrap();
        let mut observed = vec![0.0; top as usize + 1];
        for &c in &per_window {
            observed[c.min(top) as usize] += 1.0;
        }
        let mut expected: Vec<f64> = (0..top).map(|k| windows as f64 * dist.pmf(k)).collect();
        expected.push(windows as f64 * (1.0 - dist.cdf(top - 1)));
        while expected.len() > 2 && expected[0] < 5.0 {
            expected[1] += expected.remove(0);
            observed[1] += observed.remove(0);
        }
        let p = chi_square_p_value(&observed, &expected, 0);
        assert!(p > 0.01, "segment {s} (lambda {lambda}): chi-square p = {p}");
    }
}

#[test]
fn identical_weekdays_average_to_one_day() {
    let monday = 1_696_204_800.0; // 2023-10-02 00:00 UTC
    let segs = city().segments().unwrap();
    let mut spec = SynthSpec::flat(segs, 1, 11);
    spec.start_timestamp = monday;
    let day: Vec<TripRecord> = synth_fleet(&spec).unwrap();
    let mut two_weeks = day.clone();
    two_weeks.extend(day.iter().map(|r| TripRecord {
        device_id: format!("{}-b", r.device_id),
        timestamp: r.timestamp + 7.0 * 86_400.0,
        ..r.clone()
    }));
    let grid = GridSpec::covering(&day, 200.0).unwrap();
    let filter = TimeFilter::Weekday(0);
    let one = estimate_density(&day, &grid, filter, DEFAULT_SCALE_FACTOR).unwrap();
    let both = estimate_density(&two_weeks, &grid, filter, DEFAULT_SCALE_FACTOR).unwrap();
    assert_eq!(both.windows, 2 * one.windows);
    for (a, b) in one.cells.iter().zip(&both.cells) {
        assert!((a.expected_count - b.expected_count).abs() <= 1e-12 * a.expected_count.max(1.0));
        for (x, y) in a.histogram.iter().zip(&b.histogram) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
}

#[test]
fn scale_factor_multiplies_counts() {
    let records = city_records(1, 3);
    let grid = GridSpec::covering(&records, 200.0).unwrap();
    let raw = estimate_density(&records, &grid, TimeFilter::All, 1.0).unwrap();
    let scaled = estimate_density(&records, &grid, TimeFilter::All, DEFAULT_SCALE_FACTOR).unwrap();
    for (a, b) in raw.cells.iter().zip(&scaled.cells) {
        assert!((b.expected_count - a.expected_count * 100.0 / 3.0).abs() <= 1e-9 * b.expected_count.max(1.0));
    }
}

fn city_density() -> DensityGrid {
    let records = city_records(2, 5);
    let grid = GridSpec::covering(&records, 200.0).unwrap();
    estimate_density(&records, &grid, TimeFilter::All, 1.0).unwrap()
}

fn params(seed: u64) -> EvalParams {
    EvalParams {
        comm_radius: 300.0,
        realizations: 40,
        ..EvalParams::new(seed)
    }
}

#[test]
fn doubling_density_does_not_raise_median_rms_error() {
    let density = city_density();
    let base = evaluate_accuracy(&density, &params(1)).unwrap();
    let doubled = evaluate_accuracy(&density.scaled(2.0), &params(1)).unwrap();
    let pairs: Vec<(f64, f64)> = base
        .cells
        .iter()
        .zip(&doubled.cells)
        .filter(|(a, b)| !a.flag && !b.flag)
        .map(|(a, b)| (a.j_mean, b.j_mean))
        .collect();
    assert!(pairs.len() > 20, "only {} comparable cells", pairs.len());

    let mut a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    assert!(quantile_sorted(&b, 0.5) <= quantile_sorted(&a, 0.5));

    // sign test: more cells getting worse than chance would allow at 1%
    let worse = pairs.iter().filter(|(x, y)| y > x).count() as u64;
    let binom = Binomial::new(0.5, pairs.len() as u64).unwrap();
    let p = 1.0 - binom.cdf(worse.saturating_sub(1));
    assert!(p > 0.01, "{worse} of {} cells worse, p = {p}", pairs.len());
}

fn single_cell(histogram: Vec<f64>, count: f64) -> DensityGrid {
    DensityGrid {
        grid: GridSpec {
            origin: Vec2::ZERO,
            cell_size: 200.0,
            nx: 1,
            ny: 1,
        },
        cells: vec![DensityCell {
            expected_count: count,
            histogram,
        }],
        windows: 1,
        filter: TimeFilter::All,
        scale_factor: 1.0,
    }
}

fn spread_histogram(bins: usize) -> Vec<f64> {
    let step = HEADING_BINS / bins;
    (0..HEADING_BINS)
        .map(|k| if k % step == 0 { 1.0 / bins as f64 } else { 0.0 })
        .collect()
}

#[test]
fn rms_error_falls_with_heading_diversity() {
    let p = EvalParams {
        realizations: 400,
        ..EvalParams::new(8)
    };
    let j: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&bins| evaluate_accuracy(&single_cell(spread_histogram(bins), 40.0), &p).unwrap().cells[0].j_mean)
        .collect();
    assert!(j[0] > j[1] && j[1] > j[2], "J by diversity: {j:?}");
}

#[test]
fn empty_cells_are_flagged() {
    let records = city_records(1, 6);
    let mut grid = GridSpec::covering(&records, 250.0).unwrap();
    grid.origin = grid.origin - Vec2::new(500.0, 500.0);
    grid.nx += 4;
    grid.ny += 4;
    let density = estimate_density(&records, &grid, TimeFilter::All, 1.0).unwrap();
    let empty = empty_cells(&density);
    assert!(empty.len() >= 4 * grid.nx - 4);
    let acc = evaluate_accuracy(&density, &params(2)).unwrap();
    for k in empty {
        assert!(acc.cells[k].flag, "empty cell {k} not flagged");
    }
}

#[test]
fn evaluation_is_deterministic() {
    let density = city_density();
    let a = evaluate_accuracy(&density, &params(9)).unwrap();
    let b = evaluate_accuracy(&density, &params(9)).unwrap();
    let bytes = |g: &AccuracyGrid| {
        let mut csv = Vec::new();
        export_accuracy_csv(g, &mut csv).unwrap();
        let mut svg = Vec::new();
        export_accuracy_svg(g, &mut svg).unwrap();
        (csv, svg)
    };
    assert_eq!(bytes(&a), bytes(&b));
}

#[test]
fn summary_json_round_trips() {
    let density = city_density();
    let grid = evaluate_accuracy(&density, &params(4)).unwrap();
    let summary = AccuracySummary {
        buckets: vec![summarize_accuracy("all", &grid), summarize_accuracy("again", &grid)],
    };
    let mut buf = Vec::new();
    summary.write_json(&mut buf).unwrap();
    let back = AccuracySummary::read_json(buf.as_slice()).unwrap();
    assert_eq!(back, summary);
}

#[test]
fn headings_cover_full_turn_after_ingest() {
    let csv = "device_id,timestamp_utc,x_m,y_m,heading_rad\na,0,1,2,7.0\nb,1,1,2,-1.0\n";
    let report = ingest_trips(csv.as_bytes(), None).unwrap();
    assert_eq!(report.wrapped_headings, 2);
    for r in &report.records {
        assert!((0.0..TAU).contains(&r.heading));
    }
}
