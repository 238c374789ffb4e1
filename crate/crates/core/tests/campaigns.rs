use std::f64::consts::PI;

use cmm_core::error_models::FourierDensity;
use cmm_core::estimators::centroid_mc;
use cmm_core::experiments::{run_campaign, with_workers, CampaignCase, CampaignSpec};
use cmm_core::geometry::{halfplane_intersection, HalfPlane};
use cmm_core::stats::{line_fit, Summary, Z99_ONE_SIDED};

fn small(case: CampaignCase, n_values: Vec<usize>, sigma: f64, seed: u64) -> CampaignSpec {
    CampaignSpec {
        outer_samples: 200,
        mc_samples: 0,
        ..CampaignSpec::new(case, n_values, sigma, seed)
    }
}

#[test]
fn rerun_gives_identical_csv() {
    let cases = [
        CampaignCase::Orthogonal,
        CampaignCase::Uniform,
        CampaignCase::Fourier {
            density: FourierDensity::single_mode(0.02).unwrap(),
        },
    ];
    for case in cases {
        let spec = small(case, vec![12, 40], 0.5, 77);
        let a = run_campaign(&spec).unwrap().to_csv_string().unwrap();
        let b = run_campaign(&spec).unwrap().to_csv_string().unwrap();
        let c = with_workers(2, || run_campaign(&spec)).unwrap().unwrap().to_csv_string().unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }
}

#[test]
fn mean_error_falls_with_n() {
    for case in [CampaignCase::Orthogonal, CampaignCase::Uniform] {
        let spec = CampaignSpec {
            outer_samples: 600,
            ..small(case, vec![10, 40, 160], 1.0, 5)
        };
        let result = run_campaign(&spec).unwrap();
        assert!(result.decreasing_at(Z99_ONE_SIDED), "{}", result.to_csv_string().unwrap());
    }
}

#[test]
fn uniform_decays_faster_than_orthogonal() {
    let ns = vec![16, 32, 64, 128];
    let ortho = run_campaign(&small(CampaignCase::Orthogonal, ns.clone(), 1.0, 3)).unwrap();
    let uni = run_campaign(&small(CampaignCase::Uniform, ns, 1.0, 3)).unwrap();
    let (so, su) = (ortho.log_log_slope(), uni.log_log_slope());
    assert!(su.slope < so.slope, "uniform {} vs orthogonal {}", su.slope, so.slope);
}

#[test]
fn weighted_error_falls_with_n() {
    let spec = CampaignSpec {
        outer_samples: 150,
        grid_resolution: 81,
        ..small(CampaignCase::WeightedUniform, vec![10, 40], 0.5, 21)
    };
    let result = run_campaign(&spec).unwrap();
    let lo: Summary = result.row(10).unwrap().summary();
    let hi: Summary = result.row(40).unwrap().summary();
    assert!(hi.mean < lo.mean, "N=10 {} vs N=40 {}", lo.mean, hi.mean);
}

#[test]
fn monte_carlo_centroid_converges_at_root_n() {
    // regular hexagon offset from the origin; exact centroid from the clipper
    let planes: Vec<HalfPlane> = (0..6)
        .map(|k| {
            let phi = k as f64 * PI / 3.0 + 0.2;
            HalfPlane::new(phi, 1.0 + 0.3 * phi.cos())
        })
        .collect();
    let exact = halfplane_intersection(&planes).into_result().unwrap().centroid();
    let sizes = [500usize, 2000, 8000, 32000];
    let mut log_n = Vec::new();
    let mut log_rmse = Vec::new();
    for &n in &sizes {
        let sq: Vec<f64> = (0..60u64)
            .map(|s| (centroid_mc(&planes, n, s * 7919 + n as u64).unwrap() - exact).norm_sq())
            .collect();
        log_n.push((n as f64).ln());
        log_rmse.push((sq.iter().sum::<f64>() / sq.len() as f64).sqrt().ln());
    }
    let fit = line_fit(&log_n, &log_rmse, &vec![1.0; sizes.len()]);
    assert!(fit.slope > -0.6 && fit.slope < -0.4, "slope {}", fit.slope);
}
