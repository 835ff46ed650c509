//! Geometrical optics: ray tracing and the eikonal field.
//!
//! Every ray through the obstacle either misses it or bounces exactly twice
//! and leaves along the incident direction with a fixed extra path `Δ`, so
//! the eikonal field is a finite sum of plane waves, piecewise constant in
//! its branch structure. The closed form below encodes those regions
//! directly; [`eikonal_by_tracing`] rebuilds the same field by tracing rays
//! backwards from the probe point and serves as a cross-check.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScatterError};
use crate::geometry::{mirror, p0, reflect_direction, FaceLabel, Obstacle, Vec3, SQRT3};
use crate::CVec3;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Surface impedance; absorbing when the imaginary part is positive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Impedance(Complex64);

impl Impedance {
    pub fn new(lambda: Complex64) -> Result<Impedance> {
        if !(lambda.re.is_finite() && lambda.im.is_finite()) || lambda.im < 0.0 {
            return Err(ScatterError::InvalidImpedance(lambda));
        }
        Ok(Impedance(lambda))
    }

    pub fn real(lambda: f64) -> Impedance {
        Impedance::new(Complex64::new(lambda, 0.0)).expect("finite real impedance")
    }

    pub fn value(self) -> Complex64 {
        self.0
    }

    /// Reflection factor at the common incidence `n·α = −1/2`.
    pub fn reflection(self) -> Complex64 {
        face_reflection_coefficient(self, -0.5).expect("no pole in the closed upper half plane")
    }
}

/// `A = (i·n_α + λ)/(i·n_α − λ)`.
pub fn face_reflection_coefficient(lambda: Impedance, n_alpha: f64) -> Result<Complex64> {
    let l = lambda.value();
    let num = I * n_alpha + l;
    let den = I * n_alpha - l;
    if den.norm() <= 1e-14 * (1.0 + l.norm()) {
        return Err(ScatterError::PoleAtLambda(l));
    }
    Ok(num / den)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub origin: Vec3,
    pub direction: Vec3,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RayPath {
    pub start: Vec3,
    pub segments: Vec<Segment>,
    /// Faces struck, in order.
    pub hits: Vec<FaceLabel>,
    pub collisions: usize,
    /// Total path length from the source plane.
    pub action: f64,
}

impl RayPath {
    pub fn exit_direction(&self) -> Vec3 {
        self.segments.last().map_or(p0(), |s| s.direction)
    }

    pub fn end(&self) -> Vec3 {
        self.segments.last().map_or(self.start, |s| s.origin + s.direction * s.length)
    }

    /// Path length beyond that of a straight ray to the same exit plane.
    pub fn excess(&self) -> f64 {
        self.action - (self.end().z - self.start.z)
    }
}

struct Hit {
    distance: f64,
    point: Vec3,
    face: usize,
    edge_gap: f64,
}

fn first_hit(obstacle: &Obstacle, origin: &Vec3, dir: &Vec3) -> Option<Hit> {
    let scale = obstacle.width.max(obstacle.depth);
    let mut best: Option<Hit> = None;
    for (i, face) in obstacle.faces.iter().enumerate() {
        let nd = face.normal.dot(dir);
        if nd.abs() < 1e-14 {
            continue;
        }
        let s = (face.plane_offset() - face.normal.dot(origin)) / nd;
        if s <= 1e-12 * scale {
            continue;
        }
        let point = origin + dir * s;
        let gap = face.boundary_distance(&point);
        if gap < -1e-12 * scale {
            continue;
        }
        if best.as_ref().is_none_or(|b| s < b.distance) {
            best = Some(Hit { distance: s, point, face: i, edge_gap: gap });
        }
    }
    best
}

/// Traces the ray entering at `(x0, y0)` on the source plane until it
/// leaves through the bottom plane of the obstacle.
pub fn trace_ray(x0: f64, y0: f64, obstacle: &Obstacle) -> Result<RayPath> {
    let edge_tol = 1e-12 * obstacle.width;
    let start = Vec3::new(x0, y0, -obstacle.source_offset);
    let mut origin = start;
    let mut dir = p0();
    let mut segments = Vec::new();
    let mut hits = Vec::new();
    for _ in 0..16 {
        let Some(hit) = first_hit(obstacle, &origin, &dir) else { break };
        if hit.edge_gap <= edge_tol {
            return Err(ScatterError::EdgeHit { x0, y0 });
        }
        let face = &obstacle.faces[hit.face];
        segments.push(Segment { origin, direction: dir, length: hit.distance });
        hits.push(face.label);
        origin = hit.point;
        dir = reflect_direction(&dir, &face.normal);
    }
    let bottom = obstacle.bottom_z();
    if dir.z > 1e-14 && origin.z < bottom {
        segments.push(Segment { origin, direction: dir, length: (bottom - origin.z) / dir.z });
    }
    let action = segments.iter().map(|s| s.length).sum();
    Ok(RayPath { start, segments, collisions: hits.len(), hits, action })
}

/// One plane-wave branch `amplitude·exp(ik(direction·r + offset))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Branch {
    pub collisions: usize,
    pub amplitude: Complex64,
    pub direction: Vec3,
    pub offset: f64,
}

impl Branch {
    pub fn value(&self, r: &Vec3, k: f64) -> Complex64 {
        self.amplitude * Complex64::cis(k * (self.direction.dot(r) + self.offset))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EikonalValue {
    pub value: Complex64,
    pub gradient: CVec3,
    pub branch_count: usize,
    /// The point lies on a zone boundary (within tolerance).
    pub on_cut: bool,
}

impl EikonalValue {
    fn from_branches(branches: &[Branch], r: &Vec3, k: f64, on_cut: bool) -> EikonalValue {
        let mut value = Complex64::new(0.0, 0.0);
        let mut gradient = CVec3::zeros();
        for b in branches {
            let v = b.value(r, k);
            value += v;
            gradient += b.direction.map(|c| Complex64::new(c, 0.0)) * (I * k * v);
        }
        EikonalValue { value, gradient, branch_count: branches.len(), on_cut }
    }
}

/// Signed margins (positive inside) of the three left-hand regions, for
/// the unit-free section scaled by `w`: the shadow behind the first face,
/// the reflected tube between the face pair, and the strip below the
/// second face.
struct LeftMargins {
    shadow: f64,
    tube: f64,
    below: f64,
}

fn left_margins(r: &Vec3, w: f64, depth: f64) -> LeftMargins {
    let (x, y, z) = (r.x, r.y, r.z);
    let slab = y.min(depth - y);
    let shadow = slab
        .min(x + w / 2.0)
        .min(-w / 4.0 - x)
        .min((z - SQRT3 * (x + w / 2.0)) / 2.0);
    // Tube coordinates: r − A' = u·(1/2, √3/2) + t·(√3/2, 1/2).
    let (vx, vz) = (x + w / 2.0, z);
    let u = SQRT3 * vz - vx;
    let t = SQRT3 * vx - vz;
    let d = SQRT3 * w / 2.0;
    let tube = slab.min(u / 2.0).min((w / 2.0 - u) / 2.0).min(t / 2.0).min((d - t) / 2.0);
    let below = slab.min(x - w / 4.0).min(w / 2.0 - x).min((z - SQRT3 * x) / 2.0);
    LeftMargins { shadow, tube, below }
}

/// Plane-wave branches of the eikonal field at `r`, from the region
/// structure; regions are closed so that points on a boundary take the
/// lit/reflected side.
pub fn eikonal_branches(r: &Vec3, lambda: Impedance, obstacle: &Obstacle) -> Result<(Vec<Branch>, bool)> {
    if obstacle.contains(r) {
        return Err(ScatterError::InsideObstacle { x: r.x, y: r.y, z: r.z });
    }
    let w = obstacle.width;
    let tol = crate::geometry::DEFAULT_ZONE_TOL * w;
    let a = lambda.reflection();
    let t01 = SQRT3 * w / 4.0;
    let left = left_margins(r, w, obstacle.depth);
    let right = left_margins(&mirror(r), w, obstacle.depth);
    let on_cut = [left.shadow, left.tube, left.below, right.shadow, right.tube, right.below]
        .iter()
        .any(|m| m.abs() <= tol);

    let mut branches = Vec::with_capacity(3);
    if left.shadow.max(right.shadow) <= tol {
        branches.push(Branch { collisions: 0, amplitude: Complex64::new(1.0, 0.0), direction: p0(), offset: 0.0 });
    }
    let star_l = obstacle.p0_star_left();
    for (m, star) in [(&left, star_l), (&right, mirror(&star_l))] {
        if m.tube >= -tol {
            branches.push(Branch { collisions: 1, amplitude: a, direction: star, offset: t01 });
        }
    }
    for m in [&left, &right] {
        // The strip below the right face is fed by the left tube.
        if m.below >= -tol {
            branches.push(Branch { collisions: 2, amplitude: a * a, direction: p0(), offset: obstacle.delta });
        }
    }
    Ok((branches, on_cut))
}

/// `Ψ^eik(r)`: incident wave plus all reflected branches.
pub fn eikonal_total_field(r: &Vec3, k: f64, lambda: Impedance, obstacle: &Obstacle) -> Result<EikonalValue> {
    let (branches, on_cut) = eikonal_branches(r, lambda, obstacle)?;
    Ok(EikonalValue::from_branches(&branches, r, k, on_cut))
}

/// `ψ^eik = Ψ^eik − exp(ikz)`.
pub fn eikonal_scattered_field(r: &Vec3, k: f64, lambda: Impedance, obstacle: &Obstacle) -> Result<EikonalValue> {
    let mut v = eikonal_total_field(r, k, lambda, obstacle)?;
    let inc = Complex64::cis(k * r.z);
    v.value -= inc;
    v.gradient[2] -= I * k * inc;
    Ok(v)
}

/// The eikonal field rebuilt by tracing each candidate ray backwards from
/// `r` through the faces.
pub fn eikonal_by_tracing(r: &Vec3, k: f64, lambda: Impedance, obstacle: &Obstacle) -> Result<EikonalValue> {
    if obstacle.contains(r) {
        return Err(ScatterError::InsideObstacle { x: r.x, y: r.y, z: r.z });
    }
    let tol = crate::geometry::DEFAULT_ZONE_TOL * obstacle.width;
    let mut candidates = vec![p0()];
    for face in obstacle.active_faces() {
        let out = reflect_direction(&obstacle.incoming_direction(face.label), &face.normal);
        if !candidates.iter().any(|c| (c - out).norm() < 1e-12) {
            candidates.push(out);
        }
    }
    let mut branches = Vec::new();
    let mut on_cut = false;
    for final_dir in candidates {
        let mut point = *r;
        let mut dir = final_dir;
        let mut amplitude = Complex64::new(1.0, 0.0);
        let mut length = 0.0;
        let mut collisions = 0;
        let mut alive = true;
        loop {
            match first_hit(obstacle, &point, &-dir) {
                None => break,
                Some(hit) => {
                    if hit.edge_gap.abs() <= tol {
                        on_cut = true;
                    }
                    let face = &obstacle.faces[hit.face];
                    let n = face.normal;
                    if n.dot(&dir) <= 0.0 || collisions > 8 {
                        alive = false;
                        break;
                    }
                    let incoming = reflect_direction(&dir, &n);
                    amplitude *= face_reflection_coefficient(lambda, incoming.dot(&n))?;
                    length += hit.distance;
                    collisions += 1;
                    point = hit.point;
                    dir = incoming;
                }
            }
        }
        if !alive || (dir - p0()).norm() > 1e-12 {
            continue;
        }
        // Back to the source plane, then measure the phase from z = 0.
        length += point.z + obstacle.source_offset;
        let phase = length - obstacle.source_offset;
        branches.push(Branch { collisions, amplitude, direction: final_dir, offset: phase - final_dir.dot(r) });
    }
    Ok(EikonalValue::from_branches(&branches, r, k, on_cut))
}
