//! The Kirchhoff approximation `u⁰`, a sum of four single-face blocks
//!
//! ```text
//! Φ = c·[ (ik/4π)(A−1)(n·α)·D + ((A+1)/4π)·N ]
//! ```
//!
//! one per active face, with `α` the direction of the rays that light the
//! face and `c` the amplitude those rays carry when they arrive.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::{classify_zone, travel_phase_t0, FaceLabel, Obstacle, PolygonFace, Vec3, ZoneLabel, DEFAULT_ZONE_TOL};
use crate::potentials::{FaceRule, LayerSums, QuadratureSpec};
use crate::rays::{eikonal_scattered_field, face_reflection_coefficient, Impedance};
use crate::CVec3;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Debug, PartialEq)]
pub struct FaceBlock {
    pub face: PolygonFace,
    pub incoming: Vec3,
    /// Amplitude of the illuminating wave relative to the incident one.
    pub prefactor: Complex64,
    /// Reflection coefficient at this face.
    pub reflection: Complex64,
    pub bounce: u8,
}

impl FaceBlock {
    pub fn n_alpha(&self) -> f64 {
        self.incoming.dot(&self.face.normal)
    }

    /// Coefficients `(c_D, c_N)` with `Φ = c_D·D + c_N·N`.
    fn coefficients(&self, k: f64) -> (Complex64, Complex64) {
        let a = self.reflection;
        let cd = self.prefactor * I * k / (4.0 * PI) * (a - 1.0) * self.n_alpha();
        let cn = self.prefactor * (a + 1.0) / (4.0 * PI);
        (cd, cn)
    }
}

/// The four blocks: each first face lit by `p0`, each second face lit by the
/// wave reflected off the opposite first face.
pub fn face_blocks(obstacle: &Obstacle, k: f64, lambda: Impedance) -> Result<Vec<FaceBlock>> {
    let pairs = [
        (FaceLabel::FirstLeft, FaceLabel::SecondRight),
        (FaceLabel::FirstRight, FaceLabel::SecondLeft),
    ];
    let mut blocks = Vec::with_capacity(4);
    for (first, second) in pairs {
        let f1 = obstacle.face(first);
        let alpha1 = obstacle.incoming_direction(first);
        let a1 = face_reflection_coefficient(lambda, alpha1.dot(&f1.normal))?;
        let t0 = travel_phase_t0(&alpha1, f1)?;
        blocks.push(FaceBlock {
            face: f1.clone(),
            incoming: alpha1,
            prefactor: Complex64::new(1.0, 0.0),
            reflection: a1,
            bounce: 1,
        });
        let f2 = obstacle.face(second);
        let alpha2 = obstacle.incoming_direction(second);
        blocks.push(FaceBlock {
            face: f2.clone(),
            incoming: alpha2,
            prefactor: a1 * Complex64::cis(k * t0),
            reflection: face_reflection_coefficient(lambda, alpha2.dot(&f2.normal))?,
            bounce: 2,
        });
    }
    Ok(blocks)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSample {
    pub position: Vec3,
    pub value: Complex64,
    pub gradient: CVec3,
    pub zone: ZoneLabel,
}

/// `u⁰` with the face quadratures built once and reused for many points.
pub struct KirchhoffField {
    pub obstacle: Obstacle,
    pub k: f64,
    pub lambda: Impedance,
    blocks: Vec<(FaceBlock, FaceRule)>,
}

impl KirchhoffField {
    pub fn new(obstacle: &Obstacle, k: f64, lambda: Impedance, spec: &QuadratureSpec) -> Result<KirchhoffField> {
        let blocks = face_blocks(obstacle, k, lambda)?
            .into_iter()
            .map(|b| {
                let rule = FaceRule::new(&b.face, &b.incoming, k, spec, 0)?;
                Ok((b, rule))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(KirchhoffField { obstacle: obstacle.clone(), k, lambda, blocks })
    }

    pub fn blocks(&self) -> impl Iterator<Item = &FaceBlock> {
        self.blocks.iter().map(|(b, _)| b)
    }

    fn combine(&self, block: &FaceBlock, sums: &LayerSums) -> (Complex64, CVec3) {
        let (cd, cn) = block.coefficients(self.k);
        (cd * sums.d + cn * sums.n, sums.grad_d * cd + sums.grad_n * cn)
    }

    /// `Φ` and `∇Φ` of block `index`.
    pub fn block_value(&self, index: usize, r: &Vec3) -> Result<(Complex64, CVec3)> {
        let (block, rule) = &self.blocks[index];
        Ok(self.combine(block, &rule.sums(r)?))
    }

    /// `u⁰(r)` and its gradient; on an active face the one-sided limit from
    /// the lit side.
    pub fn sample(&self, r: &Vec3) -> Result<FieldSample> {
        let mut value = Complex64::new(0.0, 0.0);
        let mut gradient = CVec3::zeros();
        for (block, rule) in &self.blocks {
            let (v, g) = self.combine(block, &rule.sums(r)?);
            value += v;
            gradient += g;
        }
        Ok(FieldSample { position: *r, value, gradient, zone: self.zone(r) })
    }

    pub fn sample_many(&self, points: &[Vec3]) -> Result<Vec<FieldSample>> {
        points.par_iter().map(|r| self.sample(r)).collect()
    }

    /// Zone of `r` relative to the active faces: boundary first, then
    /// shadow, then reflected.
    pub fn zone(&self, r: &Vec3) -> ZoneLabel {
        let tol = DEFAULT_ZONE_TOL * self.obstacle.width;
        let labels: Vec<ZoneLabel> = self
            .blocks
            .iter()
            .map(|(b, _)| classify_zone(r, &b.incoming, &b.face, tol))
            .collect();
        for want in [ZoneLabel::Boundary, ZoneLabel::Shadow, ZoneLabel::Reflected] {
            if labels.contains(&want) {
                return want;
            }
        }
        ZoneLabel::Outside
    }
}

pub fn phi_face(r: &Vec3, block: &FaceBlock, k: f64, spec: &QuadratureSpec) -> Result<Complex64> {
    let rule = FaceRule::new(&block.face, &block.incoming, k, spec, 0)?;
    let sums = rule.sums(r)?;
    let (cd, cn) = block.coefficients(k);
    Ok(cd * sums.d + cn * sums.n)
}

pub fn u0_field(r: &Vec3, obstacle: &Obstacle, k: f64, lambda: Impedance, spec: &QuadratureSpec) -> Result<FieldSample> {
    KirchhoffField::new(obstacle, k, lambda, spec)?.sample(r)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualReport {
    /// `‖(∂/∂n + kλ)(u⁰ − ψ^eik)‖` over all active faces.
    pub total: f64,
    /// The same norm restricted to the cut-off band `η < 1`.
    pub band: f64,
    /// Area of the band on all active faces.
    pub band_area: f64,
}

/// Radical-inverse (Halton) point in the unit square.
fn halton(i: usize) -> (f64, f64) {
    let radical = |mut n: usize, base: usize| {
        let mut f = 1.0;
        let mut x = 0.0;
        while n > 0 {
            f /= base as f64;
            x += f * (n % base) as f64;
            n /= base;
        }
        x
    };
    (radical(i + 1, 2), radical(i + 1, 3))
}

/// Boundary residual of `u⁰` against the eikonal traces, sampled at
/// `samples` quasi-random points per face. The right faces mirror the left
/// ones, so only the left pair is sampled.
pub fn boundary_residual(obstacle: &Obstacle, k: f64, lambda: Impedance, spec: &QuadratureSpec, samples: usize) -> Result<ResidualReport> {
    let field = KirchhoffField::new(obstacle, k, lambda, spec)?;
    let band = spec.cutoff.band(k);
    let lam = lambda.value();
    let mut total = 0.0;
    let mut band_sq = 0.0;
    let mut band_area = 0.0;
    for label in [FaceLabel::FirstLeft, FaceLabel::SecondLeft] {
        let face = obstacle.face(label);
        let frame = face.rect_frame().expect("active faces are rectangles");
        let points: Vec<Vec3> = (0..samples)
            .map(|i| {
                let (u, v) = halton(i);
                frame.point(u * frame.len1, v * frame.len2)
            })
            .collect();
        let values: Vec<(f64, bool)> = points
            .par_iter()
            .map(|q| -> Result<(f64, bool)> {
                let u = field.sample(q)?;
                let lifted = q + face.normal * (1e-3 * DEFAULT_ZONE_TOL * obstacle.width).max(1e-14);
                let psi = eikonal_scattered_field(&lifted, k, lambda, obstacle)?;
                let n = face.normal;
                let dn = |g: &CVec3| -> Complex64 { (0..3).map(|i| g[i] * n[i]).sum() };
                let res = dn(&u.gradient) - dn(&psi.gradient) + k * lam * (u.value - psi.value);
                let (s, t, _) = frame.coords(q);
                let edge = s.min(frame.len1 - s).min(t).min(frame.len2 - t);
                Ok((res.norm_sqr(), edge < 2.0 * band))
            })
            .collect::<Result<_>>()?;
        let area = frame.area();
        let mean: f64 = values.iter().map(|v| v.0).sum::<f64>() / samples as f64;
        let mean_band: f64 = values.iter().filter(|v| v.1).map(|v| v.0).sum::<f64>() / samples as f64;
        total += 2.0 * area * mean;
        band_sq += 2.0 * area * mean_band;
        let inner = (frame.len1 - 4.0 * band).max(0.0) * (frame.len2 - 4.0 * band).max(0.0);
        band_area += 2.0 * (area - inner);
    }
    Ok(ResidualReport { total: total.sqrt(), band: band_sq.sqrt(), band_area })
}

pub const DEFAULT_RESIDUAL_SAMPLES: usize = 256;

pub fn boundary_residual_norm(obstacle: &Obstacle, k: f64, lambda: Impedance, spec: &QuadratureSpec) -> Result<f64> {
    Ok(boundary_residual(obstacle, k, lambda, spec, DEFAULT_RESIDUAL_SAMPLES)?.total)
}
