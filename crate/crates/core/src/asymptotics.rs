//! Closed-form expectations of the squared CMM error.
//!
//! Orthogonal roads: the error is governed by the maximum projection in each
//! of the four normal directions, whose law tends to a Gumbel distribution.
//! Uniform road angles: the expected squared error decays like `1/N`.
//! Perturbing the uniform law by Fourier modes raises the predicted error.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::error_models::FourierDensity;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Location and scale of a Gumbel law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GumbelParams {
    pub mu: f64,
    pub beta: f64,
}

impl GumbelParams {
    pub fn new(mu: f64, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidInput(format!("invalid Gumbel params mu={mu}, beta={beta}")));
        }
        Ok(Self { mu, beta })
    }

    pub fn mean(&self) -> f64 {
        self.mu + EULER_GAMMA * self.beta
    }

    pub fn variance(&self) -> f64 {
        PI * PI / 6.0 * self.beta * self.beta
    }
}

/// Leading-order constants for the maximum of `n` i.i.d. `N(0, σ²)`:
/// `μ = σ√(2 ln n)`, `β = σ/√(2 ln n)`.
pub fn gumbel_params_leading(n: usize, sigma: f64) -> Result<GumbelParams> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 samples for a maximum, got {n}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidInput(format!("sigma must be positive, got {sigma}")));
    }
    let root = (2.0 * (n as f64).ln()).sqrt();
    GumbelParams::new(sigma * root, sigma / root)
}

/// Expected squared error for orthogonal roads given the Gumbel law of the
/// maximum projection along each normal (`0, π/2, π, 3π/2` in that order).
pub fn orthogonal_expected_sq_error(params: &[GumbelParams; 4]) -> f64 {
    let [p1, p2, p3, p4] = params;
    let spread: f64 = params.iter().map(|p| p.beta * p.beta).sum::<f64>() * PI * PI / 24.0;
    let dx = p1.mu - p3.mu + EULER_GAMMA * (p1.beta - p3.beta);
    let dy = p2.mu - p4.mu + EULER_GAMMA * (p2.beta - p4.beta);
    spread + 0.25 * dx * dx + 0.25 * dy * dy
}

/// `(π²σ²/48) Σⱼ 1/ln Nⱼ`.
pub fn orthogonal_leading_order(counts: &[usize; 4], sigma: f64) -> Result<f64> {
    if let Some(n) = counts.iter().find(|n| **n < 2) {
        return Err(Error::InvalidInput(format!("every direction needs >= 2 vehicles, got {n}")));
    }
    let sum: f64 = counts.iter().map(|&n| 1.0 / (n as f64).ln()).sum();
    Ok(PI * PI * sigma * sigma / 48.0 * sum)
}

/// Geometric and noise parts of the uniform-angle prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformPrediction {
    /// `2w²/(9N)`
    pub geometric: f64,
    /// `3Σσᵢ²/(2N²)`
    pub noise: f64,
}

impl UniformPrediction {
    pub fn total(&self) -> f64 {
        self.geometric + self.noise
    }
}

pub fn uniform_expected_sq_error(n: usize, w: f64, sigmas: &[f64]) -> Result<UniformPrediction> {
    if n < 3 {
        return Err(Error::InvalidInput(format!("uniform prediction needs N >= 3, got {n}")));
    }
    let nf = n as f64;
    let sum_var: f64 = sigmas.iter().map(|s| s * s).sum();
    Ok(UniformPrediction {
        geometric: 2.0 * w * w / (9.0 * nf),
        noise: 3.0 * sum_var / (2.0 * nf * nf),
    })
}

/// Squared magnitudes `|C_m|²` of a perturbing Fourier spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierSpectrum {
    power: Vec<f64>,
}

impl FourierSpectrum {
    pub fn new(power: Vec<f64>) -> Result<Self> {
        if power.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidInput("spectrum entries must be finite and >= 0".into()));
        }
        Ok(Self { power })
    }

    pub fn zero() -> Self {
        Self { power: Vec::new() }
    }

    pub fn from_density(density: &FourierDensity) -> Self {
        Self {
            power: density.coefficients().iter().map(|c| c.norm_sq()).collect(),
        }
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    pub fn total(&self) -> f64 {
        self.power.iter().sum()
    }
}

/// Predicted `E[e₀²]` for angles drawn from a Fourier-perturbed uniform law.
///
/// Uses `(w²/(36Nπ³))(8π³ + 32π⁵ Σ|C_m|²) = (2w²/9N)(1 + 4π² Σ|C_m|²)`.
/// The commonly printed prefactor `w²/(36Nπ²)` would give `2πw²/(9N)` at a
/// zero spectrum, inconsistent with the uniform-angle result; the `π³`
/// denominator is the one that reproduces it.
pub fn fourier_expected_sq_error(n: usize, w: f64, spectrum: &FourierSpectrum) -> f64 {
    2.0 * w * w / (9.0 * n as f64) * (1.0 + 4.0 * PI * PI * spectrum.total())
}
