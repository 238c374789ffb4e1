//! CMM estimators of the common GNSS error.
//!
//! The hard estimator takes the centroid of the intersection of all road
//! constraints in common-error hypothesis space. The resulting error equals
//! the centroid of the constraint polygon perturbed by each vehicle's
//! non-common error, which is what the linearized model expands around.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::error_models::NoiseModel;
use crate::geometry::{
    canonical_angle, cmm_error_geometric, halfplane_intersection, HalfPlane, Intersection, RoadConstraint, Side,
    Vec2,
};
use crate::rng::{streams, substream};
use crate::stats::{ln_normal_cdf, normal_cdf};

/// Central-difference step for the sensitivity matrix, relative to `w`.
pub const FD_STEP_REL: f64 = 1e-4;

/// One plane of a scenario, in error space: `{e : e·n ≤ offset}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioPlane {
    pub plane: HalfPlane,
    pub vehicle: usize,
    /// `+1` for the constraint's own normal, `-1` for the opposite side of a strip.
    pub sign: f64,
}

/// N vehicles, their noise scales and the true common error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetScenario {
    constraints: Vec<RoadConstraint>,
    noise: NoiseModel,
    common_error: Vec2,
    two_sided: bool,
}

impl FleetScenario {
    pub fn new(constraints: Vec<RoadConstraint>, noise: NoiseModel, common_error: Vec2, two_sided: bool) -> Result<Self> {
        if constraints.is_empty() {
            return Err(Error::InvalidInput("scenario needs at least one vehicle".into()));
        }
        if constraints.len() != noise.len() {
            return Err(Error::InvalidInput(format!(
                "{} constraints but {} noise scales",
                constraints.len(),
                noise.len()
            )));
        }
        if !common_error.is_finite() {
            return Err(Error::InvalidInput("non-finite common error".into()));
        }
        Ok(Self {
            constraints,
            noise,
            common_error,
            two_sided,
        })
    }

    /// Vehicles on lanes through the origin with the given driving angles.
    pub fn from_driving_angles(angles: &[f64], w: f64, noise: NoiseModel, two_sided: bool) -> Result<Self> {
        let constraints = angles
            .iter()
            .map(|&a| RoadConstraint::new(Vec2::ZERO, a, w, Side::Left))
            .collect::<Result<Vec<_>>>()?;
        Self::new(constraints, noise, Vec2::ZERO, two_sided)
    }

    /// Vehicles whose outward normals are the given angles.
    pub fn from_normal_angles(normals: &[f64], w: f64, noise: NoiseModel, two_sided: bool) -> Result<Self> {
        let driving: Vec<f64> = normals.iter().map(|&a| canonical_angle(a - FRAC_PI_2)).collect();
        Self::from_driving_angles(&driving, w, noise, two_sided)
    }

    pub fn constraints(&self) -> &[RoadConstraint] {
        &self.constraints
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn common_error(&self) -> Vec2 {
        self.common_error
    }

    pub fn two_sided(&self) -> bool {
        self.two_sided
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn with_common_error(&self, common_error: Vec2) -> Self {
        Self {
            common_error,
            ..self.clone()
        }
    }

    pub fn with_noise(&self, noise: NoiseModel) -> Result<Self> {
        Self::new(self.constraints.clone(), noise, self.common_error, self.two_sided)
    }

    /// Rotates every road by `alpha` (common error included).
    pub fn rotated(&self, alpha: f64) -> Self {
        let constraints = self
            .constraints
            .iter()
            .map(|c| RoadConstraint {
                lane_center: c.lane_center.rotated(alpha),
                driving_angle: canonical_angle(c.driving_angle + alpha),
                ..*c
            })
            .collect();
        Self {
            constraints,
            noise: self.noise.clone(),
            common_error: self.common_error.rotated(alpha),
            two_sided: self.two_sided,
        }
    }

    fn side_of(&self, c: &RoadConstraint) -> Side {
        if self.two_sided {
            Side::Both
        } else {
            c.side
        }
    }

    /// Unperturbed constraint planes in error space, offsets `w`.
    pub fn planes(&self) -> Vec<ScenarioPlane> {
        let mut out = Vec::with_capacity(self.constraints.len() * if self.two_sided { 2 } else { 1 });
        for (i, c) in self.constraints.iter().enumerate() {
            let normals = c.normal_angles_for(self.side_of(c));
            let primary = c.normal_angles_for(match self.side_of(c) {
                Side::Right => Side::Right,
                _ => Side::Left,
            })[0];
            for phi in normals {
                let sign = if (phi - primary).abs() < 1e-12 { 1.0 } else { -1.0 };
                out.push(ScenarioPlane {
                    plane: HalfPlane::new(phi, c.half_width),
                    vehicle: i,
                    sign,
                });
            }
        }
        out
    }

    /// `x̃ᴺᵢ·n` for every plane.
    pub fn projections(&self, draws: &[Vec2]) -> Result<Vec<f64>> {
        if draws.len() != self.len() {
            return Err(Error::InvalidInput(format!("{} draws for {} vehicles", draws.len(), self.len())));
        }
        Ok(self
            .planes()
            .iter()
            .map(|p| draws[p.vehicle].dot(p.plane.normal()))
            .collect())
    }

    /// GNSS fix of each vehicle: `x^L + x^C + x̃ᴺ`.
    pub fn gnss_positions(&self, draws: &[Vec2]) -> Vec<Vec2> {
        self.constraints
            .iter()
            .zip(draws)
            .map(|(c, d)| c.lane_center + self.common_error + *d)
            .collect()
    }

    /// Constraint planes in common-error hypothesis space built from the observed fixes.
    pub fn hypothesis_planes(&self, draws: &[Vec2]) -> Result<Vec<(HalfPlane, usize)>> {
        if draws.len() != self.len() {
            return Err(Error::InvalidInput(format!("{} draws for {} vehicles", draws.len(), self.len())));
        }
        let fixes = self.gnss_positions(draws);
        Ok(self
            .planes()
            .iter()
            .map(|p| {
                let c = &self.constraints[p.vehicle];
                let n = p.plane.normal();
                // (x^G − x^L − τ)·n ≤ w  ⇔  τ·(−n) ≤ w − (x^G − x^L)·n
                let offset = c.half_width - (fixes[p.vehicle] - c.lane_center).dot(n);
                (HalfPlane::new(p.plane.normal_angle() + PI, offset), p.vehicle)
            })
            .collect())
    }
}

/// Output of a single-epoch estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub estimate: Vec2,
    /// `x^C − ĉ`
    pub error: Vec2,
    pub squared_error: f64,
    /// False when the constraint intersection is empty; the vectors are NaN then.
    pub feasible: bool,
}

impl EstimateResult {
    fn from_estimate(estimate: Vec2, truth: Vec2) -> Self {
        let error = truth - estimate;
        Self {
            estimate,
            error,
            squared_error: error.norm_sq(),
            feasible: true,
        }
    }

    fn infeasible() -> Self {
        let nan = Vec2::new(f64::NAN, f64::NAN);
        Self {
            estimate: nan,
            error: nan,
            squared_error: f64::NAN,
            feasible: false,
        }
    }
}

/// Centroid of the feasible set of the common error.
pub fn estimate_hard(scenario: &FleetScenario, draws: &[Vec2]) -> Result<EstimateResult> {
    let planes: Vec<HalfPlane> = scenario.hypothesis_planes(draws)?.into_iter().map(|(p, _)| p).collect();
    match halfplane_intersection(&planes) {
        Intersection::Bounded(r) => Ok(EstimateResult::from_estimate(r.centroid(), scenario.common_error)),
        Intersection::Empty => Ok(EstimateResult::infeasible()),
        Intersection::Unbounded => Err(Error::Unbounded),
    }
}

/// CMM error computed directly as the centroid of the perturbed constraint polygon.
pub fn error_via_perturbed_region(scenario: &FleetScenario, draws: &[Vec2]) -> Result<Vec2> {
    let planes: Vec<HalfPlane> = scenario.planes().iter().map(|p| p.plane).collect();
    cmm_error_geometric(&planes, &scenario.projections(draws)?)
}

/// Monte Carlo centroid with a uniform proposal over the region's bounding box.
pub fn centroid_mc(planes: &[HalfPlane], n_samples: usize, seed: u64) -> Result<Vec2> {
    centroid_mc_with(planes, n_samples, &mut substream(seed, streams::CENTROID_MC, 0))
}

pub fn centroid_mc_with<R: Rng + ?Sized>(planes: &[HalfPlane], n_samples: usize, rng: &mut R) -> Result<Vec2> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("need at least one Monte Carlo sample".into()));
    }
    let region = match halfplane_intersection(planes) {
        Intersection::Bounded(r) => r,
        Intersection::Empty => return Err(Error::DegenerateRegion("constraint intersection is empty".into())),
        Intersection::Unbounded => return Err(Error::Unbounded),
    };
    let bb = region.bounding_box();
    let normals: Vec<(Vec2, f64)> = planes.iter().map(|p| (p.normal(), p.offset())).collect();
    let mut acc = Vec2::ZERO;
    let mut accepted = 0usize;
    for _ in 0..n_samples {
        let p = Vec2::new(
            bb.min.x + rng.random::<f64>() * bb.width(),
            bb.min.y + rng.random::<f64>() * bb.height(),
        );
        if normals.iter().all(|(n, d)| p.dot(*n) <= *d) {
            acc += p;
            accepted += 1;
        }
    }
    if accepted == 0 {
        return Err(Error::DegenerateRegion(format!("no sample out of {n_samples} landed in the region")));
    }
    Ok(acc / accepted as f64)
}

/// Squared error for orthogonal roads from the largest projection along each
/// of the normals `0, π/2, π, 3π/2`.
pub fn orthogonal_error_closed_form(projections_by_direction: &[Vec<f64>; 4]) -> Result<f64> {
    let mut x = [0.0; 4];
    for (j, group) in projections_by_direction.iter().enumerate() {
        x[j] = group
            .iter()
            .copied()
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
            .ok_or(Error::Unbounded)?;
    }
    let [x1, x2, x3, x4] = x;
    Ok((x1 * x1 + x2 * x2 + x3 * x3 + x4 * x4 - 2.0 * x1 * x3 - 2.0 * x2 * x4) / 4.0)
}

/// Buckets per-plane projections by the orthogonal normal they belong to.
pub fn group_orthogonal(normal_angles: &[f64], projections: &[f64]) -> Result<[Vec<f64>; 4]> {
    let mut groups: [Vec<f64>; 4] = Default::default();
    for (&phi, &x) in normal_angles.iter().zip(projections) {
        let k = (canonical_angle(phi) / FRAC_PI_2).round();
        if (canonical_angle(phi) - k * FRAC_PI_2).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("normal {phi} is not axis aligned")));
        }
        groups[(k as usize) % 4].push(x);
    }
    Ok(groups)
}

/// First-order expansion of the CMM error around the unperturbed polygon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizedModel {
    pub e0: Vec2,
    pub s0: f64,
    /// Column `i` of the 2×N sensitivity matrix, `S₀ ∂e/∂X̃ᵢ`.
    pub c: Vec<Vec2>,
    /// Expected `‖X̃‖∞` over `2πw/N`.
    pub validity_ratio: f64,
}

impl LinearizedModel {
    pub fn predict(&self, projections: &[f64]) -> Vec2 {
        let mut shift = Vec2::ZERO;
        for (ci, x) in self.c.iter().zip(projections) {
            shift += *ci * *x;
        }
        self.e0 + shift / self.s0
    }
}

/// Sensitivity matrix by central differences with step `h = 1e-4·w`.
pub fn linearize(scenario: &FleetScenario) -> Result<LinearizedModel> {
    let w = scenario.constraints.iter().map(|c| c.half_width).fold(0.0, f64::max);
    linearize_with_step(scenario, FD_STEP_REL * w)
}

pub fn linearize_with_step(scenario: &FleetScenario, h: f64) -> Result<LinearizedModel> {
    let sp = scenario.planes();
    let planes: Vec<HalfPlane> = sp.iter().map(|p| p.plane).collect();
    let region = halfplane_intersection(&planes).into_result()?;
    let e0 = region.centroid();
    let s0 = region.area();
    let n = scenario.len();
    let mut proj = vec![0.0; sp.len()];
    let mut c = Vec::with_capacity(n);
    for i in 0..n {
        let mut eval = |step: f64| -> Result<Vec2> {
            for (k, p) in sp.iter().enumerate() {
                proj[k] = if p.vehicle == i { p.sign * step } else { 0.0 };
            }
            cmm_error_geometric(&planes, &proj)
        };
        let plus = eval(h)?;
        let minus = eval(-h)?;
        c.push((plus - minus) * (s0 / (2.0 * h)));
    }
    Ok(LinearizedModel {
        e0,
        s0,
        c,
        validity_ratio: validity_ratio(scenario),
    })
}

/// Sensitivity matrix from edge lengths and midpoints of the tangent polygon.
///
/// Moving plane `p` outward by `δ` adds a strip of area `L_p δ` centred on the
/// edge midpoint `m_p`, so `S₀ ∂e/∂d_p = L_p (m_p − e₀)`. Requires a common
/// half width; runs in `O(N log N)`.
pub fn linearize_analytic(scenario: &FleetScenario) -> Result<LinearizedModel> {
    let w = scenario.constraints[0].half_width;
    if scenario.constraints.iter().any(|c| c.half_width != w) {
        return Err(Error::InvalidInput("analytic linearization needs a common half width".into()));
    }
    let sp = scenario.planes();
    let (e0, s0, grads) = tangent_sensitivities(&sp.iter().map(|p| p.plane.normal_angle()).collect::<Vec<_>>(), w)?;
    let mut c = vec![Vec2::ZERO; scenario.len()];
    for (p, g) in sp.iter().zip(grads) {
        // offset of plane p moves by −sign·X̃ᵢ
        c[p.vehicle] += g * (-p.sign);
    }
    Ok(LinearizedModel {
        e0,
        s0,
        c,
        validity_ratio: validity_ratio(scenario),
    })
}

/// Centroid, area and per-plane `S₀ ∂e/∂d` of the polygon tangent to a circle
/// of radius `w`. Planes are given by normal angle in any order.
pub fn tangent_sensitivities(normal_angles: &[f64], w: f64) -> Result<(Vec2, f64, Vec<Vec2>)> {
    let m = normal_angles.len();
    if m < 3 {
        return Err(Error::Unbounded);
    }
    let mut order: Vec<usize> = (0..m).collect();
    let angles: Vec<f64> = normal_angles.iter().map(|&a| canonical_angle(a)).collect();
    order.sort_by(|&a, &b| angles[a].total_cmp(&angles[b]));
    let sorted: Vec<f64> = order.iter().map(|&k| angles[k]).collect();
    let gaps = crate::error_models::angle_gaps(&sorted)?;
    if gaps.max() >= PI {
        return Err(Error::Unbounded);
    }
    let g = gaps.gaps();
    let vertices: Vec<Vec2> = sorted
        .iter()
        .zip(g)
        .map(|(t, gap)| Vec2::from_angle(t + 0.5 * gap) * (w / (0.5 * gap).cos()))
        .collect();
    let region = crate::geometry::ConvexRegion::from_vertices_unchecked(vertices.clone());
    let s0 = region.area();
    let e0 = region.centroid();
    let mut grads = vec![Vec2::ZERO; m];
    for k in 0..m {
        let prev = (k + m - 1) % m;
        let a = vertices[prev];
        let b = vertices[k];
        let len = w * ((0.5 * g[prev]).tan() + (0.5 * g[k]).tan());
        let mid = (a + b) * 0.5;
        grads[order[k]] = (mid - e0) * len;
    }
    Ok((e0, s0, grads))
}

/// `E_X[e²] ≈ e₀² + tr(LᵀCᵀCL)/S₀²` with `L = diag(σ)`.
pub fn expected_sq_error_linear(model: &LinearizedModel, noise: &NoiseModel) -> Result<f64> {
    if model.c.len() != noise.len() {
        return Err(Error::InvalidInput(format!(
            "model has {} columns, noise has {} vehicles",
            model.c.len(),
            noise.len()
        )));
    }
    let trace: f64 = model
        .c
        .iter()
        .zip(noise.sigmas())
        .map(|(c, s)| s * s * c.norm_sq())
        .sum();
    Ok(model.e0.norm_sq() + trace / (model.s0 * model.s0))
}

/// `E‖X̃‖∞` over `2πw/N`, with `X̃ᵢ ~ N(0, σᵢ²)`.
pub fn validity_ratio(scenario: &FleetScenario) -> f64 {
    let n = scenario.len() as f64;
    let w = scenario.constraints.iter().map(|c| c.half_width).fold(0.0, f64::max);
    expected_max_abs(scenario.noise.sigmas()) / (2.0 * PI * w / n)
}

/// `E[max |Xᵢ|]` for independent zero-mean Gaussians, by quadrature of the survival function.
pub fn expected_max_abs(sigmas: &[f64]) -> f64 {
    let smax = sigmas.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0.0;
    }
    // equal scales share one CDF evaluation
    let mut groups: Vec<(f64, i32)> = Vec::new();
    let mut sorted: Vec<f64> = sigmas.iter().copied().filter(|s| *s > 0.0).collect();
    sorted.sort_by(|a, b| a.total_cmp(b));
    for s in sorted {
        match groups.last_mut() {
            Some((v, k)) if *v == s => *k += 1,
            _ => groups.push((s, 1)),
        }
    }
    let upper = 12.0 * smax;
    let steps = 4000;
    let h = upper / steps as f64;
    let survival = |x: f64| {
        let cdf: f64 = groups
            .iter()
            .map(|&(s, k)| (2.0 * normal_cdf(x / s) - 1.0).powi(k))
            .product();
        1.0 - cdf
    };
    let mut sum = survival(0.0) + survival(upper);
    for k in 1..steps {
        sum += if k % 2 == 1 { 4.0 } else { 2.0 } * survival(k as f64 * h);
    }
    sum * h / 3.0
}

/// Hypothesis grid for the weighted estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedGrid {
    pub half_extent: f64,
    /// Cells per side.
    pub resolution: usize,
    /// `None` centres the grid on the mean observed offset `x^G − x^L`.
    pub center: Option<Vec2>,
}

impl WeightedGrid {
    /// `R = 4·max σ + w`, 201×201 cells.
    pub fn default_for(scenario: &FleetScenario) -> Self {
        let w = scenario.constraints.iter().map(|c| c.half_width).fold(0.0, f64::max);
        Self {
            half_extent: 4.0 * scenario.noise.max_sigma() + w,
            resolution: 201,
            center: None,
        }
    }

    pub fn cell_size(&self) -> f64 {
        2.0 * self.half_extent / self.resolution as f64
    }
}

/// Log weights below the running maximum by more than this are dropped.
const LOG_WEIGHT_CUTOFF: f64 = 60.0;

/// Soft estimator: every grid hypothesis `τ` is weighted by
/// `Πᵢ Φ(marginᵢ(τ)/σᵢ)` and the estimate is the weighted mean.
pub fn estimate_weighted(scenario: &FleetScenario, draws: &[Vec2], grid: &WeightedGrid) -> Result<EstimateResult> {
    if grid.resolution == 0 || !(grid.half_extent > 0.0) {
        return Err(Error::InvalidInput("weighted grid needs positive extent and resolution".into()));
    }
    let planes = scenario.hypothesis_planes(draws)?;
    let sigmas = scenario.noise.sigmas();
    let center = grid.center.unwrap_or_else(|| {
        let fixes = scenario.gnss_positions(draws);
        let sum = scenario
            .constraints
            .iter()
            .zip(&fixes)
            .fold(Vec2::ZERO, |acc, (c, x)| acc + (*x - c.lane_center));
        sum / scenario.len() as f64
    });
    let terms: Vec<(Vec2, f64, f64)> = planes
        .iter()
        .map(|(p, v)| (p.normal(), p.offset(), sigmas[*v]))
        .collect();
    let cell = grid.cell_size();
    let start = center - Vec2::new(grid.half_extent, grid.half_extent) + Vec2::new(0.5 * cell, 0.5 * cell);

    let mut logw = vec![f64::NEG_INFINITY; grid.resolution * grid.resolution];
    let mut best = f64::NEG_INFINITY;
    for j in 0..grid.resolution {
        for i in 0..grid.resolution {
            let tau = start + Vec2::new(i as f64 * cell, j as f64 * cell);
            let mut acc = 0.0;
            for (n, d, s) in &terms {
                let margin = d - tau.dot(*n);
                acc += if *s > 0.0 {
                    let z = margin / s;
                    if z > 8.5 {
                        0.0
                    } else {
                        ln_normal_cdf(z)
                    }
                } else if margin >= 0.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                };
                if acc < best - LOG_WEIGHT_CUTOFF {
                    break;
                }
            }
            logw[j * grid.resolution + i] = acc;
            best = best.max(acc);
        }
    }
    if !best.is_finite() {
        return Err(Error::NumericallyDegenerate("every hypothesis has zero weight".into()));
    }
    let mut total = 0.0;
    let mut acc = Vec2::ZERO;
    for j in 0..grid.resolution {
        for i in 0..grid.resolution {
            let lw = logw[j * grid.resolution + i];
            if lw < best - LOG_WEIGHT_CUTOFF {
                continue;
            }
            let wgt = (lw - best).exp();
            total += wgt;
            acc += (start + Vec2::new(i as f64 * cell, j as f64 * cell)) * wgt;
        }
    }
    Ok(EstimateResult::from_estimate(acc / total, scenario.common_error))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error_models::{sample_angles, AngleDistribution};
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn orthogonal_scenario(sigma: f64) -> FleetScenario {
        let normals = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];
        FleetScenario::from_normal_angles(&normals, 2.0, NoiseModel::uniform(4, sigma).unwrap(), false).unwrap()
    }

    /// Draws whose projection on each vehicle's normal is the given value.
    fn draws_for(scenario: &FleetScenario, proj: &[f64]) -> Vec<Vec2> {
        scenario
            .planes()
            .iter()
            .zip(proj)
            .map(|(p, x)| p.plane.normal() * *x)
            .collect()
    }

    #[test]
    fn hard_estimate_orthogonal_rectangle() {
        let s = orthogonal_scenario(0.1);
        let draws = draws_for(&s, &[0.1, 0.2, -0.1, 0.0]);
        let r = estimate_hard(&s, &draws).unwrap();
        assert!(r.feasible);
        assert_relative_eq!(r.error.x, -0.1, epsilon = 1e-12);
        assert_relative_eq!(r.error.y, -0.1, epsilon = 1e-12);
        assert_relative_eq!(r.squared_error, 0.02, epsilon = 1e-12);
        let direct = error_via_perturbed_region(&s, &draws).unwrap();
        assert!((direct - r.error).norm() < 1e-9);
    }

    #[test]
    fn hard_estimate_symmetric_zero_noise() {
        let normals: Vec<f64> = (0..12).map(|k| k as f64 * TAU / 12.0).collect();
        let s = FleetScenario::from_normal_angles(&normals, 2.0, NoiseModel::uniform(12, 0.0).unwrap(), false).unwrap();
        let r = estimate_hard(&s, &[Vec2::ZERO; 12]).unwrap();
        assert!(r.error.norm() < 1e-12);
    }

    #[test]
    fn common_error_shift_is_absorbed() {
        let s = orthogonal_scenario(0.1);
        let draws = draws_for(&s, &[0.1, 0.2, -0.1, 0.0]);
        let base = estimate_hard(&s, &draws).unwrap();
        let delta = Vec2::new(13.5, -7.25);
        let shifted = estimate_hard(&s.with_common_error(delta), &draws).unwrap();
        assert!((shifted.estimate - base.estimate - delta).norm() < 1e-9);
        assert!((shifted.error - base.error).norm() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let s = orthogonal_scenario(1.0);
        // pushes the x-constraints past each other: 2 - 3 < -(2 - 2.5)
        let draws = draws_for(&s, &[3.0, 0.0, 2.5, 0.0]);
        let r = estimate_hard(&s, &draws).unwrap();
        assert!(!r.feasible);
        assert!(r.squared_error.is_nan());
        let two = FleetScenario::from_normal_angles(&[0.0, 1.0], 2.0, NoiseModel::uniform(2, 0.0).unwrap(), false).unwrap();
        assert!(matches!(estimate_hard(&two, &[Vec2::ZERO; 2]), Err(Error::Unbounded)));
    }

    #[test]
    fn mc_centroid_square() {
        let planes: Vec<HalfPlane> = (0..4).map(|k| HalfPlane::new(k as f64 * FRAC_PI_2, 2.0)).collect();
        let c = centroid_mc(&planes, 100_000, 3).unwrap();
        assert!(c.x.abs() < 0.02 && c.y.abs() < 0.02, "{c:?}");
    }

    #[test]
    fn mc_centroid_degenerate() {
        let planes: Vec<HalfPlane> = (0..4).map(|k| HalfPlane::new(k as f64 * FRAC_PI_2, 0.0)).collect();
        assert!(matches!(centroid_mc(&planes, 1000, 1), Err(Error::DegenerateRegion(_))));
        assert!(centroid_mc(&planes[..2], 1000, 1).is_err());
    }

    #[test]
    fn closed_form_values() {
        let zeros: [Vec<f64>; 4] = [vec![0.0], vec![0.0], vec![0.0], vec![0.0]];
        assert_eq!(orthogonal_error_closed_form(&zeros).unwrap(), 0.0);
        let x: [Vec<f64>; 4] = [vec![0.1, -0.3], vec![0.2], vec![-0.1, -0.5], vec![0.0]];
        assert_relative_eq!(orthogonal_error_closed_form(&x).unwrap(), 0.02, epsilon = 1e-15);
        let empty: [Vec<f64>; 4] = [vec![0.1], vec![], vec![0.0], vec![0.0]];
        assert!(matches!(orthogonal_error_closed_form(&empty), Err(Error::Unbounded)));
    }

    #[test]
    fn linearize_square() {
        let m = linearize(&orthogonal_scenario(0.1)).unwrap();
        assert_relative_eq!(m.s0, 16.0, epsilon = 1e-9);
        assert!(m.e0.norm() < 1e-12);
        // pushing the x-normal plane in by δ moves the centroid by −δ/2 along x
        assert_relative_eq!(m.c[0].x, -8.0, max_relative = 1e-6);
        assert!(m.c[0].y.abs() < 1e-6);
    }

    #[test]
    fn analytic_matches_finite_differences() {
        for seed in 0..10 {
            let normals = sample_angles(&AngleDistribution::Uniform, 15, seed).unwrap();
            for two_sided in [false, true] {
                let s = FleetScenario::from_normal_angles(&normals, 2.0, NoiseModel::uniform(15, 0.05).unwrap(), two_sided)
                    .unwrap();
                // small step: near-coincident normals leave edges shorter than the default step
                let (fd, an) = match (linearize_with_step(&s, 1e-7), linearize_analytic(&s)) {
                    (Ok(a), Ok(b)) => (a, b),
                    (Err(Error::Unbounded), Err(Error::Unbounded)) => continue,
                    other => panic!("routes disagree: {other:?}"),
                };
                assert_relative_eq!(fd.s0, an.s0, max_relative = 1e-9);
                assert!((fd.e0 - an.e0).norm() < 1e-9);
                for (a, b) in fd.c.iter().zip(&an.c) {
                    assert!((*a - *b).norm() < 1e-5 * (1.0 + b.norm()), "{a:?} vs {b:?}");
                }
            }
        }
    }

    #[test]
    fn expected_sq_error_linear_cases() {
        let normals = sample_angles(&AngleDistribution::Uniform, 20, 4).unwrap();
        let s = FleetScenario::from_normal_angles(&normals, 2.0, NoiseModel::uniform(20, 0.1).unwrap(), false).unwrap();
        let m = linearize(&s).unwrap();
        let zero = expected_sq_error_linear(&m, &NoiseModel::uniform(20, 0.0).unwrap()).unwrap();
        assert_relative_eq!(zero, m.e0.norm_sq());
        let a = expected_sq_error_linear(&m, s.noise()).unwrap() - zero;
        let b = expected_sq_error_linear(&m, &s.noise().scaled(3.0).unwrap()).unwrap() - zero;
        assert_relative_eq!(b, 9.0 * a, max_relative = 1e-12);
        assert!(a >= 0.0);
    }

    #[test]
    fn validity_ratio_definition() {
        let s = orthogonal_scenario(0.0);
        assert_eq!(validity_ratio(&s), 0.0);
        // E|Z| = sqrt(2/π) for a single Gaussian
        assert_relative_eq!(expected_max_abs(&[1.0]), (2.0 / PI).sqrt(), max_relative = 1e-8);
    }

    #[test]
    fn weighted_symmetric_zero_noise() {
        let normals: Vec<f64> = (0..8).map(|k| k as f64 * TAU / 8.0).collect();
        let s = FleetScenario::from_normal_angles(&normals, 2.0, NoiseModel::uniform(8, 0.3).unwrap(), false).unwrap();
        let grid = WeightedGrid::default_for(&s);
        let r = estimate_weighted(&s, &[Vec2::ZERO; 8], &grid).unwrap();
        assert!(r.error.norm() < grid.cell_size(), "{r:?}");
    }

    #[test]
    fn weighted_tends_to_hard_as_sigma_vanishes() {
        let s = orthogonal_scenario(1e-3);
        let draws = draws_for(&s, &[0.1, 0.2, -0.1, 0.0]);
        let hard = estimate_hard(&s, &draws).unwrap();
        let grid = WeightedGrid::default_for(&s);
        let soft = estimate_weighted(&s, &draws, &grid).unwrap();
        let diff = (soft.estimate - hard.estimate).norm();
        assert!(diff < 2.0 * grid.cell_size(), "diff {diff}, cell {}", grid.cell_size());
    }
}
