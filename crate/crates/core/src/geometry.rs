//! Planar geometry of road constraints.
//!
//! A road constraint seen from the common-error hypothesis space is a
//! half-plane `{τ : τ·n(φ) ≤ d}`. The feasible set of the common error is the
//! intersection of all of them, and the CMM estimate is its centroid.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::error_models::angle_gaps;

/// Planar vector in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `angle` radians from the x axis.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { x: c, y: s }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn rotated(self, alpha: f64) -> Self {
        let (s, c) = alpha.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, k: f64) -> Vec2 {
        Vec2::new(self.x / k, self.y / k)
    }
}

/// Maps an angle onto `[0, 2π)`.
pub fn canonical_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Canonicalizes and sorts ascending. The sort is stable, so ties keep input order.
pub fn sort_angles(angles: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = angles.iter().map(|&a| canonical_angle(a)).collect();
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

/// `{τ : τ·n(φ) ≤ d}` with `n(φ) = (cos φ, sin φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    normal_angle: f64,
    offset: f64,
}

impl HalfPlane {
    pub fn new(normal_angle: f64, offset: f64) -> Self {
        Self {
            normal_angle: canonical_angle(normal_angle),
            offset,
        }
    }

    pub fn normal_angle(&self) -> f64 {
        self.normal_angle
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn normal(&self) -> Vec2 {
        Vec2::from_angle(self.normal_angle)
    }

    /// Signed distance to the boundary, positive inside.
    pub fn margin(&self, p: Vec2) -> f64 {
        self.offset - p.dot(self.normal())
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.margin(p) >= 0.0
    }

    pub fn with_offset(&self, offset: f64) -> Self {
        Self { offset, ..*self }
    }
}

/// Which side(s) of the lane the constraint bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Both,
}

/// One vehicle's straight road segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadConstraint {
    pub lane_center: Vec2,
    pub driving_angle: f64,
    pub half_width: f64,
    pub side: Side,
}

impl RoadConstraint {
    pub fn new(lane_center: Vec2, driving_angle: f64, half_width: f64, side: Side) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidInput(format!("half width must be positive, got {half_width}")));
        }
        if !lane_center.is_finite() || !driving_angle.is_finite() {
            return Err(Error::InvalidInput("non-finite road constraint".into()));
        }
        Ok(Self {
            lane_center,
            driving_angle: canonical_angle(driving_angle),
            half_width,
            side,
        })
    }

    /// Outward normal angles: `θ + π/2` on the left, `θ − π/2` on the right.
    pub fn normal_angles(&self) -> Vec<f64> {
        self.normal_angles_for(self.side)
    }

    pub fn normal_angles_for(&self, side: Side) -> Vec<f64> {
        let left = canonical_angle(self.driving_angle + PI / 2.0);
        let right = canonical_angle(self.driving_angle - PI / 2.0);
        match side {
            Side::Left => vec![left],
            Side::Right => vec![right],
            Side::Both => vec![left, right],
        }
    }
}

/// Axis-aligned box, min and max corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min: Vec2,
    pub max: Vec2,
}

impl BoundingBox {
    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

/// Bounded convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexRegion {
    vertices: Vec<Vec2>,
}

impl ConvexRegion {
    /// Validates orientation and convexity (up to a relative tolerance).
    pub fn from_vertices(vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::DegenerateRegion(format!("{} vertices", vertices.len())));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateRegion("non-finite vertex".into()));
        }
        let region = Self { vertices };
        let area = region.area();
        if !(area > 0.0) {
            return Err(Error::DegenerateRegion(format!("signed area {area}")));
        }
        let scale = region.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
        let n = region.vertices.len();
        for i in 0..n {
            let a = region.vertices[i];
            let b = region.vertices[(i + 1) % n];
            let c = region.vertices[(i + 2) % n];
            if (b - a).cross(c - b) < -1e-9 * scale * scale {
                return Err(Error::DegenerateRegion("polygon is not convex".into()));
            }
        }
        Ok(region)
    }

    pub(crate) fn from_vertices_unchecked(vertices: Vec<Vec2>) -> Self {
        Self { vertices }
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    /// Shoelace area.
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        let origin = self.vertices[0];
        let mut twice = 0.0;
        for i in 0..n {
            let a = self.vertices[i] - origin;
            let b = self.vertices[(i + 1) % n] - origin;
            twice += a.cross(b);
        }
        0.5 * twice
    }

    /// Area-weighted centroid.
    pub fn centroid(&self) -> Vec2 {
        // Shift to the first vertex to limit cancellation for far-away polygons.
        let n = self.vertices.len();
        let origin = self.vertices[0];
        let mut twice_area = 0.0;
        let mut acc = Vec2::ZERO;
        for i in 0..n {
            let a = self.vertices[i] - origin;
            let b = self.vertices[(i + 1) % n] - origin;
            let cr = a.cross(b);
            twice_area += cr;
            acc += (a + b) * cr;
        }
        origin + acc / (3.0 * twice_area)
    }

    pub fn bounding_box(&self) -> BoundingBox {
        let mut min = self.vertices[0];
        let mut max = self.vertices[0];
        for v in &self.vertices[1..] {
            min.x = min.x.min(v.x);
            min.y = min.y.min(v.y);
            max.x = max.x.max(v.x);
            max.y = max.y.max(v.y);
        }
        BoundingBox { min, max }
    }

    pub fn translated(&self, delta: Vec2) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&v| v + delta).collect(),
        }
    }
}

pub fn region_area(r: &ConvexRegion) -> f64 {
    r.area()
}

pub fn region_centroid(r: &ConvexRegion) -> Vec2 {
    r.centroid()
}

/// Outcome of intersecting a set of half-planes.
#[derive(Debug, Clone, PartialEq)]
pub enum Intersection {
    Bounded(ConvexRegion),
    Empty,
    Unbounded,
}

impl Intersection {
    pub fn into_result(self) -> Result<ConvexRegion> {
        match self {
            Intersection::Bounded(r) => Ok(r),
            Intersection::Empty => Err(Error::Empty),
            Intersection::Unbounded => Err(Error::Unbounded),
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, Intersection::Bounded(_))
    }
}

/// Box side relative to the largest plane offset.
const BOX_SCALE: f64 = 1e6;
/// Vertex merge tolerance relative to the largest plane offset.
const MERGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EdgeSource {
    Box,
    Plane(usize),
}

/// Intersects half-planes by clipping a large box with each of them in turn.
///
/// Each polygon edge remembers which plane (or box side) produced it; any box
/// edge left at the end means the intersection is unbounded. Surviving
/// vertices are recomputed as exact line-line intersections so that the
/// long box edges do not leak rounding error into the result.
pub fn halfplane_intersection(planes: &[HalfPlane]) -> Intersection {
    assert!(!planes.is_empty(), "halfplane_intersection needs at least one plane");
    let scale = planes.iter().map(|p| p.offset.abs()).fold(0.0, f64::max);
    let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
    let tol = MERGE_TOL * scale;
    let half = BOX_SCALE * scale;

    let mut poly: Vec<(Vec2, EdgeSource)> = vec![
        (Vec2::new(-half, -half), EdgeSource::Box),
        (Vec2::new(half, -half), EdgeSource::Box),
        (Vec2::new(half, half), EdgeSource::Box),
        (Vec2::new(-half, half), EdgeSource::Box),
    ];
    let mut next = Vec::with_capacity(planes.len() + 4);

    for (idx, plane) in planes.iter().enumerate() {
        let n = plane.normal();
        let d = plane.offset;
        // Fast reject: plane is redundant if every vertex is inside.
        let f: Vec<f64> = poly.iter().map(|(v, _)| v.dot(n) - d).collect();
        if f.iter().all(|&x| x <= tol) {
            continue;
        }
        next.clear();
        let m = poly.len();
        for k in 0..m {
            let (a, src) = poly[k];
            let (b, _) = poly[(k + 1) % m];
            let (fa, fb) = (f[k], f[(k + 1) % m]);
            let a_in = fa <= tol;
            let b_in = fb <= tol;
            match (a_in, b_in) {
                (true, true) => next.push((a, src)),
                (true, false) => {
                    next.push((a, src));
                    let t = (fa / (fa - fb)).clamp(0.0, 1.0);
                    next.push((a + (b - a) * t, EdgeSource::Plane(idx)));
                }
                (false, true) => {
                    let t = (fa / (fa - fb)).clamp(0.0, 1.0);
                    next.push((a + (b - a) * t, src));
                }
                (false, false) => {}
            }
        }
        std::mem::swap(&mut poly, &mut next);
        merge_close(&mut poly, tol);
        if poly.len() < 3 {
            return Intersection::Empty;
        }
    }

    if poly.iter().any(|(_, s)| *s == EdgeSource::Box) {
        return Intersection::Unbounded;
    }

    // vertex k starts edge k and ends edge k-1
    let m = poly.len();
    let mut vertices = Vec::with_capacity(m);
    for k in 0..m {
        let prev = poly[(k + m - 1) % m].1;
        let cur = poly[k].1;
        let v = match (prev, cur) {
            (EdgeSource::Plane(i), EdgeSource::Plane(j)) if i != j => {
                line_intersection(&planes[i], &planes[j]).unwrap_or(poly[k].0)
            }
            _ => poly[k].0,
        };
        vertices.push(v);
    }
    let region = ConvexRegion::from_vertices_unchecked(vertices);
    let area = region.area();
    if !(area > tol * tol) {
        return Intersection::Empty;
    }
    Intersection::Bounded(region)
}

fn merge_close(poly: &mut Vec<(Vec2, EdgeSource)>, tol: f64) {
    if poly.len() < 2 {
        return;
    }
    let mut out: Vec<(Vec2, EdgeSource)> = Vec::with_capacity(poly.len());
    for &(v, s) in poly.iter() {
        match out.last_mut() {
            // Drop the zero-length edge: keep the earlier vertex, adopt the later edge.
            Some(last) if (last.0 - v).norm() <= tol => last.1 = s,
            _ => out.push((v, s)),
        }
    }
    // the wrap-around edge from the last vertex into out[0] has zero length
    while out.len() >= 2 && (out[0].0 - out[out.len() - 1].0).norm() <= tol {
        out.pop();
    }
    *poly = out;
}

fn line_intersection(a: &HalfPlane, b: &HalfPlane) -> Option<Vec2> {
    let na = a.normal();
    let nb = b.normal();
    let det = na.cross(nb);
    if det.abs() < 1e-14 {
        return None;
    }
    let x = (a.offset * nb.y - b.offset * na.y) / det;
    let y = (na.x * b.offset - nb.x * a.offset) / det;
    Some(Vec2::new(x, y))
}

/// Centroid of the constraint polygon after each plane is pushed inward by
/// the projection of that vehicle's non-common error onto its normal.
///
/// `projections[i]` is `x̃ᴺᵢ·nᵢ`; the perturbed offset is `dᵢ − projections[i]`.
pub fn cmm_error_geometric(planes: &[HalfPlane], projections: &[f64]) -> Result<Vec2> {
    if planes.len() != projections.len() {
        return Err(Error::InvalidInput(format!(
            "{} planes but {} projections",
            planes.len(),
            projections.len()
        )));
    }
    let perturbed: Vec<HalfPlane> = planes
        .iter()
        .zip(projections)
        .map(|(p, &x)| p.with_offset(p.offset - x))
        .collect();
    Ok(halfplane_intersection(&perturbed).into_result()?.centroid())
}

/// Polygon circumscribing a circle of radius `w` with the given outward normals.
///
/// Built directly from the angle gaps: the vertex between consecutive normals
/// lies on their bisector at distance `w / cos(gap/2)`. Normals with a zero
/// gap share an edge and contribute no extra vertex.
pub fn tangent_polygon(sorted_normal_angles: &[f64], w: f64) -> Result<ConvexRegion> {
    let gaps = angle_gaps(sorted_normal_angles)?;
    if gaps.max() >= PI {
        return Err(Error::Unbounded);
    }
    let mut vertices = Vec::with_capacity(gaps.len());
    for (theta, g) in sorted_normal_angles.iter().zip(gaps.gaps()) {
        if *g <= 1e-12 {
            continue;
        }
        let half = 0.5 * g;
        vertices.push(Vec2::from_angle(theta + half) * (w / half.cos()));
    }
    if vertices.len() < 3 {
        return Err(Error::Unbounded);
    }
    Ok(ConvexRegion::from_vertices_unchecked(vertices))
}

/// `Σ w² tan(gap/2)`, the area of the tangent polygon.
pub fn tangent_polygon_area(sorted_normal_angles: &[f64], w: f64) -> Result<f64> {
    let gaps = angle_gaps(sorted_normal_angles)?;
    if gaps.max() >= PI {
        return Err(Error::Unbounded);
    }
    Ok(gaps.gaps().iter().map(|g| w * w * (0.5 * g).tan()).sum())
}

/// Leading-order squared centroid offset of the tangent polygon.
///
/// The polygon splits into one kite per gap; kite `i` has area `w² tan(θ̃ᵢ/2)`
/// and first moment `(2/3) w³ tan(θ̃ᵢ/2)` along its axis, the bisector of the
/// gap. The moments are summed and divided by the disk area `S₀ = πw²`.
pub fn e0_squared_formula(sorted_normal_angles: &[f64], w: f64) -> Result<f64> {
    let gaps = angle_gaps(sorted_normal_angles)?;
    if gaps.max() >= PI {
        return Err(Error::Unbounded);
    }
    let mut moment = Vec2::ZERO;
    for (theta, g) in sorted_normal_angles.iter().zip(gaps.gaps()) {
        let axis = Vec2::from_angle(theta + 0.5 * g);
        moment += axis * (2.0 / 3.0 * w.powi(3) * (0.5 * g).tan());
    }
    let s0 = PI * w * w;
    Ok(moment.norm_sq() / (s0 * s0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn square_planes(d: f64) -> Vec<HalfPlane> {
        (0..4).map(|k| HalfPlane::new(k as f64 * FRAC_PI_2, d)).collect()
    }

    #[test]
    fn box_from_four_planes() {
        let r = halfplane_intersection(&square_planes(2.0)).into_result().unwrap();
        assert_eq!(r.vertices().len(), 4);
        assert_relative_eq!(r.area(), 16.0, epsilon = 1e-12);
        for v in r.vertices() {
            assert_relative_eq!(v.x.abs(), 2.0, epsilon = 1e-12);
            assert_relative_eq!(v.y.abs(), 2.0, epsilon = 1e-12);
        }
        assert!(r.centroid().norm() < 1e-12);
    }

    #[test]
    fn two_planes_unbounded() {
        let planes = [HalfPlane::new(0.0, 2.0), HalfPlane::new(FRAC_PI_2, 2.0)];
        assert_eq!(halfplane_intersection(&planes), Intersection::Unbounded);
    }

    #[test]
    fn equilateral_tangent_triangle() {
        let planes: Vec<_> = (0..3).map(|k| HalfPlane::new(k as f64 * TAU / 3.0, 2.0)).collect();
        let r = halfplane_intersection(&planes).into_result().unwrap();
        assert_eq!(r.vertices().len(), 3);
        assert_relative_eq!(r.area(), 12.0 * 3f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn antiparallel_infeasible_is_empty() {
        let planes = [HalfPlane::new(0.0, -1.0), HalfPlane::new(PI, 0.5)];
        assert_eq!(halfplane_intersection(&planes), Intersection::Empty);
        let mut closed = square_planes(2.0);
        closed.push(HalfPlane::new(0.0, -2.5));
        assert_eq!(halfplane_intersection(&closed), Intersection::Empty);
    }

    #[test]
    fn half_circle_normals_unbounded() {
        let planes: Vec<_> = (0..10).map(|k| HalfPlane::new(k as f64 * 0.3, 1.0)).collect();
        assert_eq!(halfplane_intersection(&planes), Intersection::Unbounded);
        // a gap of exactly π is still unbounded (half-strip)
        let planes = [HalfPlane::new(0.0, 1.0), HalfPlane::new(FRAC_PI_2, 1.0), HalfPlane::new(PI, 1.0)];
        assert_eq!(halfplane_intersection(&planes), Intersection::Unbounded);
    }

    #[test]
    fn area_and_centroid_basics() {
        let unit = ConvexRegion::from_vertices(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap();
        assert_relative_eq!(region_area(&unit), 1.0);
        let tri = ConvexRegion::from_vertices(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(3.0, 0.0),
            Vec2::new(0.0, 3.0),
        ])
        .unwrap();
        let c = region_centroid(&tri);
        assert_relative_eq!(c.x, 1.0, epsilon = 1e-14);
        assert_relative_eq!(c.y, 1.0, epsilon = 1e-14);
        let rect = ConvexRegion::from_vertices(vec![
            Vec2::new(-2.1, -2.0),
            Vec2::new(1.9, -2.0),
            Vec2::new(1.9, 1.8),
            Vec2::new(-2.1, 1.8),
        ])
        .unwrap();
        let c = rect.centroid();
        assert_relative_eq!(c.x, -0.1, epsilon = 1e-12);
        assert_relative_eq!(c.y, -0.1, epsilon = 1e-12);
    }

    #[test]
    fn rejects_clockwise_and_tiny_inputs() {
        assert!(ConvexRegion::from_vertices(vec![Vec2::ZERO, Vec2::new(1.0, 0.0)]).is_err());
        let cw = vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)];
        assert!(ConvexRegion::from_vertices(cw).is_err());
    }

    #[test]
    fn geometric_error_rectangle() {
        let e = cmm_error_geometric(&square_planes(2.0), &[0.1, 0.2, -0.1, 0.0]).unwrap();
        assert_relative_eq!(e.x, -0.1, epsilon = 1e-12);
        assert_relative_eq!(e.y, -0.1, epsilon = 1e-12);
        assert_relative_eq!(e.norm_sq(), 0.02, epsilon = 1e-12);
        let zero = cmm_error_geometric(&square_planes(2.0), &[0.0; 4]).unwrap();
        assert!(zero.norm() < 1e-12);
    }

    #[test]
    fn symmetric_64_gon_has_zero_error() {
        let planes: Vec<_> = (0..64).map(|k| HalfPlane::new(k as f64 * TAU / 64.0, 2.0)).collect();
        let e = cmm_error_geometric(&planes, &[0.0; 64]).unwrap();
        assert!(e.norm() < 1e-12, "{e:?}");
    }

    #[test]
    fn geometric_error_length_mismatch() {
        assert!(matches!(
            cmm_error_geometric(&square_planes(2.0), &[0.0; 3]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn tangent_area_closed_forms() {
        let sq = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];
        assert_relative_eq!(tangent_polygon_area(&sq, 2.0).unwrap(), 16.0, max_relative = 1e-12);
        let tri = [0.0, TAU / 3.0, 2.0 * TAU / 3.0];
        assert_relative_eq!(tangent_polygon_area(&tri, 2.0).unwrap(), 12.0 * 3f64.sqrt(), max_relative = 1e-12);
        let many: Vec<f64> = (0..360).map(|k| k as f64 * TAU / 360.0).collect();
        let a = tangent_polygon_area(&many, 2.0).unwrap();
        assert!((a - 4.0 * PI).abs() / (4.0 * PI) < 1e-4);
        assert!(matches!(tangent_polygon_area(&[0.0, 1.0], 2.0), Err(Error::Unbounded)));
    }

    #[test]
    fn tangent_polygon_matches_clipping() {
        let angles = sort_angles(&[0.1, 1.3, 2.0, 2.9, 4.1, 5.0, 5.9]);
        let fast = tangent_polygon(&angles, 2.0).unwrap();
        let planes: Vec<_> = angles.iter().map(|&a| HalfPlane::new(a, 2.0)).collect();
        let slow = halfplane_intersection(&planes).into_result().unwrap();
        assert_relative_eq!(fast.area(), slow.area(), max_relative = 1e-12);
        assert!((fast.centroid() - slow.centroid()).norm() < 1e-12);
    }

    #[test]
    fn e0_formula_symmetric_sets_vanish() {
        for n in [3usize, 4, 7, 50] {
            let a: Vec<f64> = (0..n).map(|k| k as f64 * TAU / n as f64).collect();
            assert!(e0_squared_formula(&a, 2.0).unwrap() < 1e-24);
        }
    }

    #[test]
    fn road_constraint_normals() {
        let c = RoadConstraint::new(Vec2::ZERO, 0.0, 2.0, Side::Left).unwrap();
        assert_relative_eq!(c.normal_angles()[0], FRAC_PI_2);
        let c = RoadConstraint::new(Vec2::ZERO, 0.0, 2.0, Side::Right).unwrap();
        assert_relative_eq!(c.normal_angles()[0], 3.0 * FRAC_PI_2);
        let c = RoadConstraint::new(Vec2::ZERO, 0.0, 2.0, Side::Both).unwrap();
        assert_eq!(c.normal_angles().len(), 2);
        assert!(RoadConstraint::new(Vec2::ZERO, 0.0, 0.0, Side::Left).is_err());
    }

    #[test]
    fn angle_canonicalization() {
        assert_eq!(canonical_angle(-1e-18), 0.0);
        assert_relative_eq!(canonical_angle(-FRAC_PI_2), 3.0 * FRAC_PI_2);
        let s = sort_angles(&[3.0, -1.0, 7.0]);
        assert!(s.windows(2).all(|w| w[0] <= w[1]));
    }
}
