//! Small statistics toolkit: summary moments, Kolmogorov-Smirnov tests and
//! the normal CDF.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;
/// One-sided 99% normal quantile.
pub const Z99_ONE_SIDED: f64 = 2.326_347_874_040_841;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64).sqrt()
}

pub fn std_err(xs: &[f64]) -> f64 {
    std_dev(xs) / (xs.len() as f64).sqrt()
}

/// Linear-interpolated quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    sorted[lo] * (1.0 - t) + sorted[hi] * t
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `ln Φ(z)`, accurate far into the lower tail.
pub fn ln_normal_cdf(z: f64) -> f64 {
    if z > -5.0 {
        normal_cdf(z).ln()
    } else {
        // Mills-ratio expansion: Φ(z) ≈ φ(z)/|z| · (1 - 1/z² + 3/z⁴ - 15/z⁶)
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        -0.5 * z2 - (-z).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + series.ln()
    }
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Outcome of a Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

impl KsOutcome {
    /// True when the null hypothesis survives at level `alpha`.
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }
}

/// One-sample KS test of `sample` against a continuous `cdf`.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> KsOutcome {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / nf - f).max(f - i as f64 / nf);
    }
    let en = nf.sqrt();
    KsOutcome {
        statistic: d,
        p_value: kolmogorov_sf((en + 0.12 + 0.11 / en) * d),
        n,
    }
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsOutcome {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(|x, y| x.total_cmp(y));
    xb.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (xa.len(), xb.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < na && j < nb {
        let x = xa[i].min(xb[j]);
        while i < na && xa[i] <= x {
            i += 1;
        }
        while j < nb && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let en = (na as f64 * nb as f64 / (na + nb) as f64).sqrt();
    KsOutcome {
        statistic: d,
        p_value: kolmogorov_sf((en + 0.12 + 0.11 / en) * d),
        n: na.min(nb),
    }
}

/// Pearson chi-square p-value for observed vs expected counts.
pub fn chi_square_p_value(observed: &[f64], expected: &[f64], fitted_params: usize) -> f64 {
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = (observed.len() - 1 - fitted_params) as f64;
    1.0 - ChiSquared::new(dof).expect("positive degrees of freedom").cdf(stat)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        Self {
            mean: mean(xs),
            stderr: std_err(xs),
            n: xs.len(),
        }
    }

    /// Normal-approximation 95% interval.
    pub fn ci95(&self) -> (f64, f64) {
        (self.mean - Z95 * self.stderr, self.mean + Z95 * self.stderr)
    }
}

/// One-sided z-test that `hi` has a larger mean than `lo`.
pub fn larger_at(lo: &Summary, hi: &Summary, z: f64) -> bool {
    let se = (lo.stderr * lo.stderr + hi.stderr * hi.stderr).sqrt();
    if se == 0.0 {
        return hi.mean > lo.mean;
    }
    (hi.mean - lo.mean) / se > z
}

/// Ordinary least-squares line `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    /// Standard error of the slope propagated from per-point errors.
    pub slope_stderr: f64,
}

/// OLS fit where each `y` carries its own standard error `y_err`; the slope
/// error is propagated linearly from those.
pub fn line_fit(x: &[f64], y: &[f64], y_err: &[f64]) -> LineFit {
    let xm = mean(x);
    let ym = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - xm) * (v - xm)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let slope = sxy / sxx;
    let var: f64 = x
        .iter()
        .zip(y_err)
        .map(|(a, e)| (a - xm) * (a - xm) * e * e)
        .sum();
    LineFit {
        intercept: ym - slope * xm,
        slope,
        slope_stderr: var.sqrt() / sxx,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_relative_eq!(mean(&xs), 2.5);
        assert_relative_eq!(std_dev(&xs), (5.0f64 / 3.0).sqrt());
        assert_relative_eq!(quantile_sorted(&xs, 0.5), 2.5);
        assert_relative_eq!(quantile_sorted(&xs, 1.0), 4.0);
    }

    #[test]
    fn normal_cdf_values() {
        assert_relative_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(normal_cdf(1.959963984540054), 0.975, epsilon = 1e-10);
        for z in [-4.9, -5.0, -5.1, -8.0] {
            let direct = normal_cdf(z).ln();
            assert_relative_eq!(ln_normal_cdf(z), direct, max_relative = 1e-4);
        }
        assert!(ln_normal_cdf(-60.0).is_finite());
    }

    #[test]
    fn line_fit_exact() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        let f = line_fit(&x, &y, &[0.1; 4]);
        assert_relative_eq!(f.slope, 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.slope_stderr, 0.1 / 5.0f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn z_comparison() {
        let a = Summary { mean: 1.0, stderr: 0.1, n: 100 };
        let b = Summary { mean: 1.5, stderr: 0.1, n: 100 };
        assert!(larger_at(&a, &b, Z99_ONE_SIDED));
        assert!(!larger_at(&b, &a, Z99_ONE_SIDED));
    }

    #[test]
    fn kolmogorov_known_quantile() {
        // P(K > 1.3581) = 0.05
        assert_relative_eq!(kolmogorov_sf(1.3581), 0.05, epsilon = 1e-4);
        assert_relative_eq!(kolmogorov_sf(1.6276), 0.01, epsilon = 1e-4);
    }

    #[test]
    fn ks_detects_shift() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_one_sample(&xs, |x| x.clamp(0.0, 1.0)).passes(0.01));
        assert!(!ks_one_sample(&xs, |x| (x * x).clamp(0.0, 1.0)).passes(0.01));
        let shifted: Vec<f64> = xs.iter().map(|x| x + 0.2).collect();
        assert!(!ks_two_sample(&xs, &shifted).passes(0.01));
        assert!(ks_two_sample(&xs, &xs).passes(0.01));
    }
}
