//! The obstacle: two mirrored triangular prisms with a gap between them.
//!
//! Frame: the plane wave travels along `+z`, the top plane of the obstacle is
//! `z = 0`, the bottom plane is `z = (√3/2)·width`, and the prisms are
//! extruded along `y ∈ [0, depth]`. In the `(x, z)` cross-section the left
//! prism has vertices
//!
//! ```text
//!   A' = (-w/2, 0)   A'' = (-w/4, √3w/4)   A = (-w/2, √3w/2)
//! ```
//!
//! and a lateral vertex pulled inward by `notch·w` at mid-height; the right
//! prism is the mirror image. Rays hitting `A'A''` bounce to `B''B` and leave
//! along `+z` again, and symmetrically on the other side.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScatterError};

pub type Vec3 = Vector3<f64>;
pub type Vec2 = Vector2<f64>;

pub const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Default lateral displacement as a fraction of the width.
pub const DEFAULT_NOTCH: f64 = 0.0375;
/// Default distance from the source plane to the top of the obstacle.
pub const DEFAULT_SOURCE_OFFSET: f64 = 1.0;
/// Default half-width of the zone-boundary band, relative to the width.
pub const DEFAULT_ZONE_TOL: f64 = 1e-9;

/// Incident direction.
pub fn p0() -> Vec3 {
    Vec3::new(0.0, 0.0, 1.0)
}

/// Mirror image `(x, y, z) -> (-x, y, z)`.
pub fn mirror(v: &Vec3) -> Vec3 {
    Vec3::new(-v.x, v.y, v.z)
}

/// Specular reflection of `alpha` in a plane with unit normal `n`.
pub fn reflect_direction(alpha: &Vec3, n: &Vec3) -> Vec3 {
    alpha - n * (2.0 * alpha.dot(n))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceLabel {
    /// Left face struck by the incident wave (`A'A''`).
    FirstLeft,
    /// Right face struck by the incident wave (`B'B''`).
    FirstRight,
    /// Left face struck by rays coming from the right (`A''A`).
    SecondLeft,
    /// Right face struck by rays coming from the left (`B''B`).
    SecondRight,
    Passive,
}

impl FaceLabel {
    pub fn is_active(self) -> bool {
        self != FaceLabel::Passive
    }

    pub fn bounce(self) -> Option<u8> {
        match self {
            FaceLabel::FirstLeft | FaceLabel::FirstRight => Some(1),
            FaceLabel::SecondLeft | FaceLabel::SecondRight => Some(2),
            FaceLabel::Passive => None,
        }
    }
}

/// A planar convex polygon, vertices counterclockwise seen from the normal.
#[derive(Clone, Debug, PartialEq)]
pub struct PolygonFace {
    pub vertices: Vec<Vec3>,
    pub normal: Vec3,
    pub label: FaceLabel,
}

/// Orthonormal parametrisation `q = origin + s·e1 + t·e2` of a rectangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RectFrame {
    pub origin: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
    pub normal: Vec3,
    pub len1: f64,
    pub len2: f64,
}

impl RectFrame {
    pub fn point(&self, s: f64, t: f64) -> Vec3 {
        self.origin + self.e1 * s + self.e2 * t
    }

    /// Returns `(s, t, h)` with `h` the signed height above the plane.
    pub fn coords(&self, r: &Vec3) -> (f64, f64, f64) {
        let d = r - self.origin;
        (d.dot(&self.e1), d.dot(&self.e2), d.dot(&self.normal))
    }

    pub fn area(&self) -> f64 {
        self.len1 * self.len2
    }
}

impl PolygonFace {
    pub fn centroid(&self) -> Vec3 {
        let sum: Vec3 = self.vertices.iter().sum();
        sum / self.vertices.len() as f64
    }

    /// Area via Newell's formula.
    pub fn area(&self) -> f64 {
        0.5 * self.newell().dot(&self.normal).abs()
    }

    /// Unnormalised Newell normal (twice the vector area).
    pub fn newell(&self) -> Vec3 {
        let n = self.vertices.len();
        (0..n).fold(Vec3::zeros(), |acc, i| {
            acc + self.vertices[i].cross(&self.vertices[(i + 1) % n])
        })
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec3, Vec3)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Signed distances from the in-plane projection of `q` to each edge
    /// line, positive on the interior side.
    pub fn edge_distances(&self, q: &Vec3) -> Vec<f64> {
        self.edges()
            .map(|(a, b)| {
                let inward = self.normal.cross(&(b - a)).normalize();
                inward.dot(&(q - a))
            })
            .collect()
    }

    /// Signed in-plane distance to the boundary, positive inside.
    pub fn boundary_distance(&self, q: &Vec3) -> f64 {
        let (u, v) = self.plane_basis();
        let o = self.vertices[0];
        let flat = |p: &Vec3| Vec2::new((p - o).dot(&u), (p - o).dot(&v));
        let poly: Vec<Vec2> = self.vertices.iter().map(flat).collect();
        let p = flat(q);
        let n = poly.len();
        let mut dist = f64::INFINITY;
        let mut inside = false;
        for i in 0..n {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let e = b - a;
            let t = ((p - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
            dist = dist.min((p - a - e * t).norm());
            if (a.y > p.y) != (b.y > p.y) && p.x < a.x + (p.y - a.y) / (b.y - a.y) * e.x {
                inside = !inside;
            }
        }
        if inside { dist } else { -dist }
    }

    /// Orthonormal in-plane axes with `u × v = normal`.
    pub fn plane_basis(&self) -> (Vec3, Vec3) {
        let u = (self.vertices[1] - self.vertices[0]).normalize();
        (u, self.normal.cross(&u))
    }

    pub fn plane_offset(&self) -> f64 {
        self.normal.dot(&self.vertices[0])
    }

    /// The rectangle frame of a four-vertex face with right angles.
    pub fn rect_frame(&self) -> Option<RectFrame> {
        if self.vertices.len() != 4 {
            return None;
        }
        let v = &self.vertices;
        let a = v[1] - v[0];
        let b = v[3] - v[0];
        let (len1, len2) = (a.norm(), b.norm());
        let scale = len1.max(len2);
        if a.dot(&b).abs() > 1e-12 * scale * scale || (v[2] - v[1] - b).norm() > 1e-12 * scale {
            return None;
        }
        Some(RectFrame {
            origin: v[0],
            e1: a / len1,
            e2: b / len2,
            normal: self.normal,
            len1,
            len2,
        })
    }
}

/// Named points of the `(x, z)` cross-section.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Section {
    /// `A'`
    pub left_top: Vec2,
    /// `A''`
    pub left_apex: Vec2,
    /// `A`
    pub left_bottom: Vec2,
    pub left_notch: Vec2,
    /// `B'`
    pub right_top: Vec2,
    /// `B''`
    pub right_apex: Vec2,
    /// `B`
    pub right_bottom: Vec2,
    pub right_notch: Vec2,
    /// `G`, below which the left apex sits.
    pub gap_left: Vec2,
    /// `H`
    pub gap_right: Vec2,
}

impl Section {
    /// Left prism, counterclockwise in the `(x, z)` plane.
    pub fn left_polygon(&self) -> [Vec2; 4] {
        [self.left_top, self.left_apex, self.left_bottom, self.left_notch]
    }

    /// Right prism, counterclockwise in the `(x, z)` plane.
    pub fn right_polygon(&self) -> [Vec2; 4] {
        [self.right_top, self.right_notch, self.right_bottom, self.right_apex]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Obstacle {
    pub faces: Vec<PolygonFace>,
    pub width: f64,
    pub depth: f64,
    pub notch: f64,
    /// Extra optical path of a doubly reflected ray.
    pub delta: f64,
    /// Distance by which the second face is the first one shifted along `p0*`.
    pub d: f64,
    /// Area of the projection onto the `(x, y)` plane.
    pub geom_cross: f64,
    /// The source plane is `z = -source_offset`.
    pub source_offset: f64,
    pub section: Section,
}

pub fn build_obstacle(width: f64, depth: f64, notch: f64) -> Result<Obstacle> {
    if !(width.is_finite() && width > 0.0) {
        return Err(ScatterError::InvalidGeometry(format!("width must be positive, got {width}")));
    }
    if !(depth.is_finite() && depth > 0.0) {
        return Err(ScatterError::InvalidGeometry(format!("depth must be positive, got {depth}")));
    }
    if !(0.0..0.125).contains(&notch) {
        return Err(ScatterError::InvalidGeometry(format!(
            "notch must lie in [0, 1/8) so the apexes stay exposed, got {notch}"
        )));
    }
    let w = width;
    let h = SQRT3 * w / 2.0;
    let section = Section {
        left_top: Vec2::new(-w / 2.0, 0.0),
        left_apex: Vec2::new(-w / 4.0, h / 2.0),
        left_bottom: Vec2::new(-w / 2.0, h),
        left_notch: Vec2::new(-w / 2.0 + notch * w, h / 2.0),
        right_top: Vec2::new(w / 2.0, 0.0),
        right_apex: Vec2::new(w / 4.0, h / 2.0),
        right_bottom: Vec2::new(w / 2.0, h),
        right_notch: Vec2::new(w / 2.0 - notch * w, h / 2.0),
        gap_left: Vec2::new(-w / 4.0, 0.0),
        gap_right: Vec2::new(w / 4.0, 0.0),
    };

    let s = &section;
    let left = [
        (s.left_top, s.left_apex, FaceLabel::FirstLeft),
        (s.left_apex, s.left_bottom, FaceLabel::SecondLeft),
        (s.left_bottom, s.left_notch, FaceLabel::Passive),
        (s.left_notch, s.left_top, FaceLabel::Passive),
    ];
    let right = [
        (s.right_top, s.right_notch, FaceLabel::Passive),
        (s.right_notch, s.right_bottom, FaceLabel::Passive),
        (s.right_bottom, s.right_apex, FaceLabel::SecondRight),
        (s.right_apex, s.right_top, FaceLabel::FirstRight),
    ];
    let mut faces = Vec::with_capacity(12);
    for (p, q, label) in left.iter().chain(right.iter()) {
        faces.push(extrude_segment(*p, *q, depth, *label));
    }
    faces.push(cap(&s.left_polygon(), depth, false));
    faces.push(cap(&s.left_polygon(), depth, true));
    faces.push(cap(&s.right_polygon(), depth, false));
    faces.push(cap(&s.right_polygon(), depth, true));

    let delta = phase_shift_from_section(&section);
    let d = (s.right_apex - s.left_top).norm();
    // Each prism projects onto an x-interval times [0, depth].
    let extent = |poly: [Vec2; 4]| {
        let lo = poly.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let hi = poly.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    };
    let geom_cross = (extent(s.left_polygon()) + extent(s.right_polygon())) * depth;

    Ok(Obstacle {
        faces,
        width,
        depth,
        notch,
        delta,
        d,
        geom_cross,
        source_offset: DEFAULT_SOURCE_OFFSET,
        section,
    })
}

fn to3(p: Vec2, y: f64) -> Vec3 {
    Vec3::new(p.x, y, p.y)
}

/// Rectangle swept by the section edge `p -> q` (interior on its left).
fn extrude_segment(p: Vec2, q: Vec2, depth: f64, label: FaceLabel) -> PolygonFace {
    let e = q - p;
    let normal = Vec3::new(e.y, 0.0, -e.x).normalize();
    PolygonFace {
        vertices: vec![to3(p, 0.0), to3(p, depth), to3(q, depth), to3(q, 0.0)],
        normal,
        label,
    }
}

fn cap(poly: &[Vec2], depth: f64, far: bool) -> PolygonFace {
    // A counterclockwise (x, z) polygon faces -y.
    let (y, normal) = if far { (depth, Vec3::y()) } else { (0.0, -Vec3::y()) };
    let mut vertices: Vec<Vec3> = poly.iter().map(|p| to3(*p, y)).collect();
    if far {
        vertices.reverse();
    }
    PolygonFace { vertices, normal, label: FaceLabel::Passive }
}

fn phase_shift_from_section(s: &Section) -> f64 {
    (s.left_apex - s.gap_left).norm() + (s.right_bottom - s.left_apex).norm()
        - (s.left_bottom - s.left_top).norm()
}

/// `Δ = |GA''| + |A''B| − |A'A|`.
pub fn phase_shift_delta(obstacle: &Obstacle) -> f64 {
    phase_shift_from_section(&obstacle.section)
}

/// `t0 = 2(α·n)(n·r)`, the same for every `r` on a planar face.
pub fn travel_phase_t0(alpha: &Vec3, face: &PolygonFace) -> Result<f64> {
    let an = alpha.dot(&face.normal);
    let values: Vec<f64> = face.vertices.iter().map(|v| 2.0 * an * face.normal.dot(v)).collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo > 1e-10 {
        return Err(ScatterError::NonPlanar { spread: hi - lo });
    }
    Ok(values[0])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZoneLabel {
    Shadow,
    Reflected,
    Outside,
    Boundary,
}

/// Classifies `r` relative to the shadow and reflected zones of `face` lit
/// from direction `alpha`.
pub fn classify_zone(r: &Vec3, alpha: &Vec3, face: &PolygonFace, tol: f64) -> ZoneLabel {
    let n = face.normal;
    let reflected = reflect_direction(alpha, &n);
    let mut label = ZoneLabel::Outside;
    for (dir, zone) in [(*alpha, ZoneLabel::Shadow), (reflected, ZoneLabel::Reflected)] {
        let nd = n.dot(&dir);
        if nd.abs() < 1e-14 {
            continue;
        }
        let height = n.dot(&(r - face.vertices[0]));
        let t = height / nd;
        let foot = r - dir * t;
        let dists = face.edge_distances(&foot);
        let inside = dists.iter().copied().fold(f64::INFINITY, f64::min);
        // Distance to the ruled surface swept from each edge along `dir`,
        // counted only where the foot point runs alongside that edge.
        let lateral = face
            .edges()
            .enumerate()
            .filter(|(i, _)| dists.iter().enumerate().all(|(j, &dj)| j == *i || dj >= -tol))
            .map(|(_, (a, b))| {
                let m = (b - a).cross(&dir);
                let m_norm = m.norm();
                if m_norm < 1e-14 {
                    f64::INFINITY
                } else {
                    (m.dot(&(r - a)) / m_norm).abs()
                }
            })
            .fold(f64::INFINITY, f64::min);
        let near_lateral = lateral <= tol && t > -tol;
        let near_base = height.abs() <= tol && inside >= -tol;
        if near_lateral || near_base {
            return ZoneLabel::Boundary;
        }
        if t > 0.0 && inside > 0.0 && label == ZoneLabel::Outside {
            label = zone;
        }
    }
    label
}

impl Obstacle {
    pub fn standard() -> Obstacle {
        build_obstacle(1.0, 1.0, DEFAULT_NOTCH).expect("default obstacle parameters are valid")
    }

    pub fn with_source_offset(mut self, a: f64) -> Obstacle {
        self.source_offset = a;
        self
    }

    pub fn face(&self, label: FaceLabel) -> &PolygonFace {
        assert!(label.is_active(), "passive faces are not unique");
        self.faces.iter().find(|f| f.label == label).expect("every active face exists")
    }

    pub fn active_faces(&self) -> impl Iterator<Item = &PolygonFace> {
        self.faces.iter().filter(|f| f.label.is_active())
    }

    pub fn bottom_z(&self) -> f64 {
        SQRT3 * self.width / 2.0
    }

    /// Direction after the first bounce off the left face, `(√3/2, 0, 1/2)`.
    pub fn p0_star_left(&self) -> Vec3 {
        reflect_direction(&p0(), &self.face(FaceLabel::FirstLeft).normal)
    }

    /// Direction after the first bounce off the right face, `(−√3/2, 0, 1/2)`.
    pub fn p0_star_right(&self) -> Vec3 {
        reflect_direction(&p0(), &self.face(FaceLabel::FirstRight).normal)
    }

    /// Direction of the rays that illuminate an active face.
    pub fn incoming_direction(&self, label: FaceLabel) -> Vec3 {
        match label {
            FaceLabel::FirstLeft | FaceLabel::FirstRight => p0(),
            FaceLabel::SecondRight => self.p0_star_left(),
            FaceLabel::SecondLeft => self.p0_star_right(),
            FaceLabel::Passive => panic!("passive faces are not illuminated"),
        }
    }

    /// Strict interior test.
    pub fn contains(&self, r: &Vec3) -> bool {
        if r.y <= 0.0 || r.y >= self.depth {
            return false;
        }
        let p = Vec2::new(r.x, r.z);
        inside_ccw(&self.section.left_polygon(), &p) || inside_ccw(&self.section.right_polygon(), &p)
    }

    /// Center of the bounding box.
    pub fn center(&self) -> Vec3 {
        Vec3::new(0.0, self.depth / 2.0, self.bottom_z() / 2.0)
    }

    pub fn to_json(&self) -> ObstacleJson {
        let mut vertices: Vec<[f64; 3]> = Vec::new();
        let mut faces = Vec::with_capacity(self.faces.len());
        for face in &self.faces {
            let indices = face
                .vertices
                .iter()
                .map(|v| {
                    let key = [v.x, v.y, v.z];
                    match vertices.iter().position(|u| {
                        (u[0] - key[0]).abs() < 1e-12 && (u[1] - key[1]).abs() < 1e-12 && (u[2] - key[2]).abs() < 1e-12
                    }) {
                        Some(i) => i,
                        None => {
                            vertices.push(key);
                            vertices.len() - 1
                        }
                    }
                })
                .collect();
            faces.push(FaceJson {
                indices,
                normal: [face.normal.x, face.normal.y, face.normal.z],
                label: face.label,
            });
        }
        ObstacleJson {
            width: self.width,
            depth: self.depth,
            notch: self.notch,
            delta: self.delta,
            d: self.d,
            geom_cross: self.geom_cross,
            vertices,
            faces,
        }
    }
}

/// Strict point-in-polygon test (crossing number; boundary points excluded).
fn inside_ccw(poly: &[Vec2], p: &Vec2) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let e = b - a;
        let w = p - a;
        let t = w.dot(&e) / e.norm_squared();
        if (0.0..=1.0).contains(&t) && (e.x * w.y - e.y * w.x) == 0.0 {
            return false;
        }
        if (a.y > p.y) != (b.y > p.y) && p.x < a.x + (p.y - a.y) / (b.y - a.y) * e.x {
            inside = !inside;
        }
    }
    inside
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceJson {
    pub indices: Vec<usize>,
    pub normal: [f64; 3],
    pub label: FaceLabel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleJson {
    pub width: f64,
    pub depth: f64,
    pub notch: f64,
    pub delta: f64,
    pub d: f64,
    pub geom_cross: f64,
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<FaceJson>,
}
