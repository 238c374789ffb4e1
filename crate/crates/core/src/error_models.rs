//! Random models for the non-common GNSS error and for road directions.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::{Read, Write};

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{canonical_angle, sort_angles, Vec2};
use crate::rng::{streams, substream};

/// Grid used to validate Fourier densities and size the rejection envelope.
pub const FOURIER_GRID: usize = 4096;

/// Per-vehicle standard deviations of the composite non-common error.
///
/// Lane deviation is folded into the same zero-mean Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    sigmas: Vec<f64>,
}

impl NoiseModel {
    pub fn new(sigmas: Vec<f64>) -> Result<Self> {
        if let Some(bad) = sigmas.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidInput(format!("sigma must be finite and >= 0, got {bad}")));
        }
        Ok(Self { sigmas })
    }

    pub fn uniform(n: usize, sigma: f64) -> Result<Self> {
        Self::new(vec![sigma; n])
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    pub fn max_sigma(&self) -> f64 {
        self.sigmas.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(self.sigmas.iter().map(|s| s * k).collect())
    }

    /// One independent 2D Gaussian per vehicle.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec2> {
        self.sigmas
            .iter()
            .map(|&s| {
                let x: f64 = rng.sample(StandardNormal);
                let y: f64 = rng.sample(StandardNormal);
                Vec2::new(s * x, s * y)
            })
            .collect()
    }
}

pub fn sample_noncommon(model: &NoiseModel, n: usize, seed: u64) -> Result<Vec<Vec2>> {
    if n != model.len() {
        return Err(Error::InvalidInput(format!("asked for {n} draws from a {}-vehicle model", model.len())));
    }
    Ok(model.draw(&mut substream(seed, streams::NONCOMMON, 0)))
}

/// Complex Fourier coefficient `C_m`; `C_{-m}` is its conjugate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierCoefficient {
    pub re: f64,
    pub im: f64,
}

impl FourierCoefficient {
    pub fn real(re: f64) -> Self {
        Self { re, im: 0.0 }
    }

    pub fn norm_sq(&self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

/// `p(θ) = 1/2π + 2 Σ_m Re(C_m e^{imθ})`, validated nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierDensity {
    coefficients: Vec<FourierCoefficient>,
    envelope: f64,
}

impl FourierDensity {
    /// `coefficients[k]` is `C_{k+1}`.
    pub fn new(coefficients: Vec<FourierCoefficient>) -> Result<Self> {
        if coefficients.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidDistribution("non-finite Fourier coefficient".into()));
        }
        let mut this = Self { coefficients, envelope: 0.0 };
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for k in 0..FOURIER_GRID {
            let p = this.density(k as f64 * TAU / FOURIER_GRID as f64);
            lo = lo.min(p);
            hi = hi.max(p);
        }
        if lo < -1e-12 {
            return Err(Error::InvalidDistribution(format!("density reaches {lo:.3e} < 0")));
        }
        // grid maximum misses the true peak by O(h²); pad the envelope
        this.envelope = hi * (1.0 + 1e-3);
        Ok(this)
    }

    /// Single real cosine mode: `p(θ) = 1/2π + 2ε cos θ`.
    pub fn single_mode(epsilon: f64) -> Result<Self> {
        Self::new(vec![FourierCoefficient::real(epsilon)])
    }

    pub fn coefficients(&self) -> &[FourierCoefficient] {
        &self.coefficients
    }

    pub fn density(&self, theta: f64) -> f64 {
        let mut p = 1.0 / TAU;
        for (k, c) in self.coefficients.iter().enumerate() {
            let m = (k + 1) as f64;
            let (s, co) = (m * theta).sin_cos();
            p += 2.0 * (c.re * co - c.im * s);
        }
        p
    }

    /// `Σ |C_m|²`.
    pub fn power(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sq()).sum()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let theta = rng.random::<f64>() * TAU;
            let u = rng.random::<f64>() * self.envelope;
            if u <= self.density(theta) {
                return theta;
            }
        }
    }
}

/// Equal-width histogram over `[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleHistogram {
    probabilities: Vec<f64>,
}

impl AngleHistogram {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidDistribution("empty histogram".into()));
        }
        if probabilities.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidDistribution("negative or non-finite bin".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidDistribution(format!("bins sum to {total}, expected 1")));
        }
        Ok(Self { probabilities })
    }

    /// Normalizes raw nonnegative counts.
    pub fn from_counts(counts: &[f64]) -> Result<Self> {
        let total: f64 = counts.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidDistribution("histogram has no mass".into()));
        }
        Self::new(counts.iter().map(|c| c / total).collect())
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn bin_width(&self) -> f64 {
        TAU / self.probabilities.len() as f64
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.bin_width()
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        self.probabilities
            .iter()
            .filter(|p| **p > 0.0)
            .map(|p| -p * p.ln())
            .sum()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["angle_bin_center", "probability"])?;
        for (k, p) in self.probabilities.iter().enumerate() {
            w.write_record([self.bin_center(k).to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut rows: Vec<(f64, f64)> = Vec::new();
        for rec in r.deserialize() {
            let (center, p): (f64, f64) = rec?;
            rows.push((center, p));
        }
        let m = rows.len();
        if m == 0 {
            return Err(Error::InvalidDistribution("empty histogram file".into()));
        }
        let width = TAU / m as f64;
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (k, (center, _)) in rows.iter().enumerate() {
            if (center - (k as f64 + 0.5) * width).abs() > 1e-6 * width.max(1.0) {
                return Err(Error::InvalidDistribution(format!(
                    "bin {k} center {center} does not match {m} equal bins"
                )));
            }
        }
        Self::new(rows.into_iter().map(|(_, p)| p).collect())
    }

    fn draw<R: Rng + ?Sized>(&self, index: &WeightedIndex<f64>, rng: &mut R) -> f64 {
        let k = index.sample(rng);
        canonical_angle((k as f64 + rng.random::<f64>()) * self.bin_width())
    }
}

/// Law of the road direction angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AngleDistribution {
    Uniform,
    /// Weights over the four directions `0, π/2, π, 3π/2`.
    Orthogonal { weights: [f64; 4] },
    Fourier(FourierDensity),
    Empirical(AngleHistogram),
}

impl AngleDistribution {
    pub fn orthogonal_equal() -> Self {
        AngleDistribution::Orthogonal { weights: [0.25; 4] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AngleDistribution::Orthogonal { weights } => {
                if weights.iter().any(|w| !(*w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::InvalidDistribution("orthogonal weights must be >= 0 with positive sum".into()));
                }
                Ok(())
            }
            AngleDistribution::Fourier(f) => FourierDensity::new(f.coefficients.clone()).map(|_| ()),
            AngleDistribution::Empirical(h) => AngleHistogram::new(h.probabilities.clone()).map(|_| ()),
            AngleDistribution::Uniform => Ok(()),
        }
    }

    /// `n` independent draws in draw order.
    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            AngleDistribution::Uniform => Ok((0..n).map(|_| rng.random::<f64>() * TAU).collect()),
            AngleDistribution::Orthogonal { weights } => {
                let index = WeightedIndex::new(weights.iter().copied())
                    .map_err(|e| Error::InvalidDistribution(e.to_string()))?;
                Ok((0..n).map(|_| index.sample(rng) as f64 * FRAC_PI_2).collect())
            }
            AngleDistribution::Fourier(f) => Ok((0..n).map(|_| f.draw(rng)).collect()),
            AngleDistribution::Empirical(h) => {
                let index = WeightedIndex::new(h.probabilities.iter().copied())
                    .map_err(|e| Error::InvalidDistribution(e.to_string()))?;
                Ok((0..n).map(|_| h.draw(&index, rng)).collect())
            }
        }
    }
}

/// `N` draws sorted ascending.
pub fn sample_angles(dist: &AngleDistribution, n: usize, seed: u64) -> Result<Vec<f64>> {
    dist.validate()?;
    let draws = dist.draw(n, &mut substream(seed, streams::ANGLES, 0))?;
    Ok(sort_angles(&draws))
}

/// Circular increments between consecutive sorted angles.
#[derive(Debug, Clone, PartialEq)]
pub struct GapSet {
    gaps: Vec<f64>,
}

impl GapSet {
    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn len(&self) -> usize {
        self.gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.gaps.iter().copied().fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.gaps.iter().sum()
    }
}

/// `θ̃ᵢ = θᵢ₊₁ − θᵢ`, closing with `θ₁ − θ_N + 2π`.
pub fn angle_gaps(sorted_angles: &[f64]) -> Result<GapSet> {
    if sorted_angles.is_empty() {
        return Err(Error::InvalidInput("no angles".into()));
    }
    if sorted_angles.iter().any(|a| !(0.0..TAU).contains(a)) {
        return Err(Error::InvalidInput("angles must lie in [0, 2π)".into()));
    }
    if sorted_angles.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("angles must be sorted ascending".into()));
    }
    let n = sorted_angles.len();
    let mut gaps: Vec<f64> = sorted_angles.windows(2).map(|w| w[1] - w[0]).collect();
    // The closing gap is taken as the remainder so the set sums to 2π.
    let interior: f64 = gaps.iter().sum();
    gaps.push(TAU - interior);
    debug_assert_eq!(gaps.len(), n);
    Ok(GapSet { gaps })
}

/// Exponential nearest-neighbour gap density `2Np·exp(−2Np·θ̃)`.
pub fn gap_pdf_asymptotic(gap: f64, n: usize, p: f64) -> f64 {
    if gap < 0.0 {
        return 0.0;
    }
    let rate = 2.0 * n as f64 * p;
    rate * (-rate * gap).exp()
}

pub fn gap_cdf_asymptotic(gap: f64, n: usize, p: f64) -> f64 {
    if gap <= 0.0 {
        return 0.0;
    }
    1.0 - (-2.0 * n as f64 * p * gap).exp()
}

/// `(N/π)(1 − θ̃/π)^{N−1}` on `[0, π]`, zero elsewhere.
pub fn gap_pdf_uniform_exact(gap: f64, n: usize) -> f64 {
    if !(0.0..=PI).contains(&gap) {
        return 0.0;
    }
    n as f64 / PI * (1.0 - gap / PI).powi(n as i32 - 1)
}

pub fn gap_cdf_uniform_exact(gap: f64, n: usize) -> f64 {
    if gap <= 0.0 {
        0.0
    } else if gap >= PI {
        1.0
    } else {
        1.0 - (1.0 - gap / PI).powi(n as i32)
    }
}

/// Gap following a given point among `points` uniform points on a circle of
/// length `circumference`: `1 − (1 − g/L)^{points−1}`.
pub fn circle_gap_cdf(gap: f64, points: usize, circumference: f64) -> f64 {
    if gap <= 0.0 {
        0.0
    } else if gap >= circumference {
        1.0
    } else {
        1.0 - (1.0 - gap / circumference).powi(points as i32 - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_one_sample, ks_two_sample, mean};
    use approx::assert_relative_eq;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            let x = a + k as f64 * h;
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn zero_sigma_gives_zero_vectors() {
        let m = NoiseModel::uniform(5, 0.0).unwrap();
        assert!(sample_noncommon(&m, 5, 1).unwrap().iter().all(|v| *v == Vec2::ZERO));
        assert!(NoiseModel::new(vec![-0.1]).is_err());
        assert!(sample_noncommon(&m, 4, 1).is_err());
    }

    #[test]
    fn noncommon_variance() {
        let m = NoiseModel::uniform(1_000_000, 0.3).unwrap();
        let draws = sample_noncommon(&m, 1_000_000, 11).unwrap();
        let xs: Vec<f64> = draws.iter().map(|v| v.x).collect();
        let ys: Vec<f64> = draws.iter().map(|v| v.y).collect();
        for comp in [xs, ys] {
            let var = comp.iter().map(|x| x * x).sum::<f64>() / comp.len() as f64;
            assert!((var - 0.09).abs() / 0.09 < 0.005, "variance {var}");
        }
    }

    #[test]
    fn noncommon_is_deterministic() {
        let m = NoiseModel::uniform(16, 0.5).unwrap();
        let a = sample_noncommon(&m, 16, 99).unwrap();
        let b = sample_noncommon(&m, 16, 99).unwrap();
        assert_eq!(a.iter().map(|v| v.x.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.x.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn uniform_angles_ks() {
        let a = sample_angles(&AngleDistribution::Uniform, 1_000_000, 5).unwrap();
        assert!(a.windows(2).all(|w| w[0] <= w[1]));
        let ks = ks_one_sample(&a, |x| (x / TAU).clamp(0.0, 1.0));
        assert!(ks.statistic < 0.01, "{ks:?}");
    }

    #[test]
    fn orthogonal_counts_binomial() {
        let n = 4000;
        let a = sample_angles(&AngleDistribution::orthogonal_equal(), n, 3).unwrap();
        for k in 0..4 {
            let target = k as f64 * FRAC_PI_2;
            let count = a.iter().filter(|x| (**x - target).abs() < 1e-12).count() as f64;
            // Binomial(4000, 1/4): sd ≈ 27.4; allow 4 sd
            assert!((count - 1000.0).abs() < 4.0 * 27.4, "direction {k}: {count}");
        }
    }

    #[test]
    fn fourier_density_at_zero() {
        let f = FourierDensity::single_mode(1.0 / (4.0 * PI)).unwrap();
        assert_relative_eq!(f.density(0.0), 1.0 / PI, max_relative = 1e-12);
        let dist = AngleDistribution::Fourier(f);
        let a = sample_angles(&dist, 1_000_000, 8).unwrap();
        let half = 0.05;
        let near = a.iter().filter(|x| **x < half || **x > TAU - half).count() as f64;
        let density = near / (a.len() as f64 * 2.0 * half);
        assert!((density - 1.0 / PI).abs() / (1.0 / PI) < 0.03, "density {density}");
    }

    #[test]
    fn negative_fourier_density_rejected() {
        assert!(matches!(
            FourierDensity::single_mode(0.1),
            Err(Error::InvalidDistribution(_))
        ));
    }

    #[test]
    fn zero_spectrum_matches_uniform_sampler() {
        let f = AngleDistribution::Fourier(FourierDensity::new(vec![FourierCoefficient::real(0.0); 3]).unwrap());
        let a = sample_angles(&f, 100_000, 21).unwrap();
        let b = sample_angles(&AngleDistribution::Uniform, 100_000, 22).unwrap();
        assert!(ks_two_sample(&a, &b).passes(0.01));
    }

    #[test]
    fn gaps_basic() {
        let g = angle_gaps(&[0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2]).unwrap();
        for x in g.gaps() {
            assert_relative_eq!(*x, FRAC_PI_2, epsilon = 1e-15);
        }
        let g = angle_gaps(&[0.0, PI]).unwrap();
        assert_eq!(g.gaps(), &[PI, PI]);
        assert!(angle_gaps(&[1.0, 0.5]).is_err());
        assert!(angle_gaps(&[]).is_err());
    }

    #[test]
    fn random_gaps_mean_and_sum() {
        for seed in 0..20 {
            let a = sample_angles(&AngleDistribution::Uniform, 1000, seed).unwrap();
            let g = angle_gaps(&a).unwrap();
            assert!((g.sum() - TAU).abs() < 1e-12);
            assert!(g.gaps().iter().all(|x| *x >= 0.0));
            let m = mean(g.gaps());
            assert!((m - TAU / 1000.0).abs() / (TAU / 1000.0) < 0.05);
        }
    }

    #[test]
    fn gap_pdf_asymptotic_moments() {
        let (n, p) = (50usize, 1.0 / TAU);
        assert_relative_eq!(gap_pdf_asymptotic(0.0, n, p), 2.0 * n as f64 * p);
        let upper = 60.0 / (2.0 * n as f64 * p);
        let total = simpson(|x| gap_pdf_asymptotic(x, n, p), 0.0, upper, 20_000);
        assert!((total - 1.0).abs() < 1e-9, "{total}");
        let m2 = simpson(|x| x * x * gap_pdf_asymptotic(x, n, p), 0.0, upper, 20_000);
        let expected = 1.0 / (2.0 * (n as f64 * p).powi(2));
        assert_relative_eq!(m2, expected, max_relative = 1e-8);
    }

    #[test]
    fn gap_pdf_uniform_exact_moments() {
        let n = 30usize;
        assert_relative_eq!(gap_pdf_uniform_exact(0.0, n), n as f64 / PI);
        assert_eq!(gap_pdf_uniform_exact(-0.1, n), 0.0);
        assert_eq!(gap_pdf_uniform_exact(3.5, n), 0.0);
        let total = simpson(|x| gap_pdf_uniform_exact(x, n), 0.0, PI, 20_000);
        assert_relative_eq!(total, 1.0, epsilon = 1e-10);
        let m2 = simpson(|x| x * x * gap_pdf_uniform_exact(x, n), 0.0, PI, 20_000);
        let nf = n as f64;
        assert_relative_eq!(m2, 2.0 * PI * PI / ((nf + 1.0) * (nf + 2.0)), max_relative = 1e-9);
    }

    #[test]
    fn gap_pdfs_agree_for_small_gaps() {
        let n = 1000usize;
        let p = 1.0 / TAU;
        for k in 0..=30 {
            let g = k as f64 * 0.1 / n as f64;
            let a = gap_pdf_asymptotic(g, n, p);
            let b = gap_pdf_uniform_exact(g, n);
            assert!((a - b).abs() / b < 0.02, "g={g}: {a} vs {b}");
        }
    }

    #[test]
    fn histogram_csv_round_trip() {
        let h = AngleHistogram::from_counts(&[1.0, 0.0, 3.0, 4.0]).unwrap();
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let back = AngleHistogram::read_csv(buf.as_slice()).unwrap();
        assert_eq!(h, back);
        assert!(AngleHistogram::new(vec![0.5, 0.4]).is_err());
    }

    #[test]
    fn empirical_sampler_respects_bins() {
        let h = AngleHistogram::new(vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let a = sample_angles(&AngleDistribution::Empirical(h), 1000, 1).unwrap();
        assert!(a.iter().all(|x| (FRAC_PI_2..PI).contains(x)));
    }
}
