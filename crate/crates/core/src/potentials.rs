//! Single- and double-layer potentials over one rectangular face with the
//! density `η(q)·exp(ik α·q)`:
//!
//! ```text
//! D(r) = ∫ η e^{ikα·q} e^{ik|r−q|}/|r−q| dS(q)
//! N(r) = ∫ η e^{ikα·q} ∂/∂n_q (e^{ik|r−q|}/|r−q|) dS(q)
//! ```
//!
//! Far from the face a tensor Gauss rule is used. Within the split radius the
//! rule switches to polar coordinates about the foot point of `r`, so the
//! Jacobian cancels the `1/|r−q|` singularity; radial panels are graded
//! geometrically towards the foot point when `r` is close to the plane.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::cutoff::CutoffProfile;
use crate::error::{Result, ScatterError};
use crate::geometry::{classify_zone, reflect_direction, travel_phase_t0, PolygonFace, RectFrame, Vec3, ZoneLabel};
use crate::quadrature::{ComplexSum, Rule1d};
use crate::CVec3;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub points_per_wavelength: f64,
    /// Switch to the polar rule closer than this; `None` means two
    /// wavelengths.
    pub singular_split_radius: Option<f64>,
    pub max_panels: usize,
    /// Gauss nodes per panel side.
    pub order: usize,
    /// Minimum number of panels across each cut-off band.
    pub band_panels: usize,
    pub cutoff: CutoffProfile,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            points_per_wavelength: 10.0,
            singular_split_radius: None,
            max_panels: 20_000_000,
            order: 8,
            band_panels: 2,
            cutoff: CutoffProfile::default(),
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.points_per_wavelength >= 4.0) {
            return Err(ScatterError::Config(format!(
                "points per wavelength must be at least 4, got {}",
                self.points_per_wavelength
            )));
        }
        if let Some(r) = self.singular_split_radius {
            if !(r > 0.0) {
                return Err(ScatterError::Config(format!("split radius must be positive, got {r}")));
            }
        }
        if self.order == 0 || self.order > 64 {
            return Err(ScatterError::Config(format!("panel order must be in 1..=64, got {}", self.order)));
        }
        if !(self.cutoff.scale > 0.0) {
            return Err(ScatterError::Config("cut-off scale must be positive".into()));
        }
        Ok(())
    }

    pub fn split_radius(&self, k: f64) -> f64 {
        self.singular_split_radius.unwrap_or(2.0 * TAU / k)
    }

    /// Longest panel for an integrand oscillating at most at `k·rate`.
    pub fn panel_length(&self, k: f64, rate: f64) -> f64 {
        self.order as f64 * TAU / (k * rate) / self.points_per_wavelength
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerEvaluation {
    pub value: Complex64,
    pub gradient: CVec3,
    /// Difference to the next refinement level; not a rigorous bound.
    pub est_err: f64,
}

/// `D`, `N` and their gradients at one target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerSums {
    pub d: Complex64,
    pub grad_d: CVec3,
    pub n: Complex64,
    pub grad_n: CVec3,
}

impl Default for LayerSums {
    fn default() -> Self {
        LayerSums {
            d: Complex64::new(0.0, 0.0),
            grad_d: CVec3::zeros(),
            n: Complex64::new(0.0, 0.0),
            grad_n: CVec3::zeros(),
        }
    }
}

/// Quadrature node; the density phase is applied inside the kernel loop.
#[derive(Clone, Copy, Debug)]
struct Node {
    q: Vec3,
    /// `α·q`
    phase: f64,
    /// Quadrature weight times `η(q)`.
    weight: f64,
}

/// Running sums for one panel group.
#[derive(Clone, Copy, Default)]
struct Partial {
    d: ComplexSum,
    gd: [ComplexSum; 3],
    n: ComplexSum,
    g1: ComplexSum,
    gn: [ComplexSum; 3],
}

impl Partial {
    /// Adds the plain sum over `nodes` as one compensated term.
    fn accumulate(&mut self, r: &Vec3, normal: &Vec3, k: f64, nodes: &[Node]) {
        let mut d = Complex64::new(0.0, 0.0);
        let mut gd = [Complex64::new(0.0, 0.0); 3];
        let mut n = Complex64::new(0.0, 0.0);
        let mut g1s = Complex64::new(0.0, 0.0);
        let mut gn = [Complex64::new(0.0, 0.0); 3];
        let k2 = k * k;
        for node in nodes {
            let dv = r - node.q;
            let r2 = dv.norm_squared();
            let rr = r2.sqrt();
            let inv = 1.0 / rr;
            let (s, c) = (k * (node.phase + rr)).sin_cos();
            let e = Complex64::new(c * node.weight, s * node.weight);
            let h = normal.dot(&dv);
            let g = e * inv;
            // ∇_r G = g1·(r − q)
            let g1 = e * Complex64::new(-1.0, k * rr) * (inv * inv * inv);
            // g1'(R)/R
            let g1p = -(e * (k2 * inv) + g1 * 3.0) * (inv * inv);
            d += g;
            n -= g1 * h;
            g1s += g1;
            let hg = g1p * h;
            for i in 0..3 {
                gd[i] += g1 * dv[i];
                gn[i] += hg * dv[i];
            }
        }
        self.d.add(d);
        self.n.add(n);
        self.g1.add(g1s);
        for i in 0..3 {
            self.gd[i].add(gd[i]);
            self.gn[i].add(gn[i]);
        }
    }

    fn finish(&self, normal: &Vec3) -> LayerSums {
        let g1 = self.g1.value();
        LayerSums {
            d: self.d.value(),
            grad_d: CVec3::from_fn(|i, _| self.gd[i].value()),
            n: self.n.value(),
            grad_n: CVec3::from_fn(|i, _| -g1 * normal[i] - self.gn[i].value()),
        }
    }
}

/// Reusable quadrature for one face and one incident direction.
#[derive(Clone, Debug)]
pub struct FaceRule {
    pub frame: RectFrame,
    pub alpha: Vec3,
    pub k: f64,
    spec: QuadratureSpec,
    level: u32,
    band: f64,
    /// Tensor rule, grouped by panel.
    nodes: Vec<Node>,
    group: usize,
}

impl FaceRule {
    pub fn new(face: &PolygonFace, alpha: &Vec3, k: f64, spec: &QuadratureSpec, level: u32) -> Result<FaceRule> {
        spec.validate()?;
        let frame = face.rect_frame().ok_or_else(|| ScatterError::InvalidGeometry("face is not a rectangle".into()))?;
        let band = spec.cutoff.band(k);
        let mut rule = FaceRule {
            frame,
            alpha: *alpha,
            k,
            spec: *spec,
            level,
            band,
            nodes: Vec::new(),
            group: spec.order * spec.order,
        };
        rule.build_tensor()?;
        Ok(rule)
    }

    fn refine(&self) -> f64 {
        (1u32 << self.level) as f64
    }

    fn tangential_rate(&self) -> f64 {
        1.0 + (self.alpha - self.frame.normal * self.alpha.dot(&self.frame.normal)).norm()
    }

    fn panel_length(&self) -> f64 {
        self.spec.panel_length(self.k, self.tangential_rate()) / self.refine()
    }

    fn band_panels(&self) -> usize {
        self.spec.band_panels * (1 << self.level)
    }

    /// Support `[b, L−b]` with flat part `[2b, L−2b]` in one coordinate.
    fn breaks(&self, len: f64) -> Option<Vec<f64>> {
        let b = self.band;
        if 2.0 * b >= len {
            return None;
        }
        if 4.0 * b >= len {
            return Some(vec![b, len / 2.0, len - b]);
        }
        Some(vec![b, 2.0 * b, len - 2.0 * b, len - b])
    }

    fn axis_rule(&self, len: f64) -> Rule1d {
        let mut rule = Rule1d::default();
        let Some(br) = self.breaks(len) else { return rule };
        let max_len = self.panel_length();
        let flat = br.len() == 4;
        for (i, w) in br.windows(2).enumerate() {
            let is_band = !(flat && i == 1);
            let mut count = ((w[1] - w[0]) / max_len).ceil().max(1.0) as usize;
            if is_band {
                count = count.max(self.band_panels());
            }
            rule.push_panels(w[0], w[1], count, self.spec.order);
        }
        rule
    }

    fn build_tensor(&mut self) -> Result<()> {
        let rs = self.axis_rule(self.frame.len1);
        let rt = self.axis_rule(self.frame.len2);
        let panels = rs.panels * rt.panels;
        if panels > self.spec.max_panels {
            return Err(ScatterError::BudgetExceeded { required: panels, budget: self.spec.max_panels });
        }
        let cut = self.spec.cutoff;
        let eta = |x: f64, len: f64| cut.edge_factor(x, self.k) * cut.edge_factor(len - x, self.k);
        let es: Vec<f64> = rs.nodes.iter().map(|&s| eta(s, self.frame.len1)).collect();
        let et: Vec<f64> = rt.nodes.iter().map(|&t| eta(t, self.frame.len2)).collect();
        let order = self.spec.order;
        self.nodes.reserve(rs.len() * rt.len());
        for ps in 0..rs.panels {
            for pt in 0..rt.panels {
                for i in ps * order..(ps + 1) * order {
                    for j in pt * order..(pt + 1) * order {
                        let q = self.frame.point(rs.nodes[i], rt.nodes[j]);
                        self.nodes.push(Node {
                            q,
                            phase: self.alpha.dot(&q),
                            weight: rs.weights[i] * rt.weights[j] * es[i] * et[j],
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Density `η(q)·exp(ik α·q)` at a point of the face.
    pub fn density(&self, q: &Vec3) -> Complex64 {
        let (s, t, _) = self.frame.coords(q);
        Complex64::from_polar(self.spec.cutoff.eta_rect(s, t, &self.frame, self.k), self.k * self.alpha.dot(q))
    }

    pub fn tensor_node_count(&self) -> usize {
        self.nodes.len()
    }

    fn distance_to_face(&self, s: f64, t: f64, h: f64) -> f64 {
        let ds = (-s).max(s - self.frame.len1).max(0.0);
        let dt = (-t).max(t - self.frame.len2).max(0.0);
        (ds * ds + dt * dt + h * h).sqrt()
    }

    fn on_face(&self, s: f64, t: f64, h: f64) -> bool {
        let scale = self.frame.len1.max(self.frame.len2);
        h.abs() <= 1e-12 * scale && s > 0.0 && s < self.frame.len1 && t > 0.0 && t < self.frame.len2
    }

    /// One-sided offset used for traces on the face.
    pub fn trace_offset(&self) -> f64 {
        1e-4 * TAU / self.k
    }

    /// All potentials at `r`. On the face, the one-sided limits from the
    /// normal side are returned, using the exact flat-face jumps.
    pub fn sums(&self, r: &Vec3) -> Result<LayerSums> {
        let (s, t, h) = self.frame.coords(r);
        if self.on_face(s, t, h) {
            // Evaluate just off the face and undo the offset with the exact
            // one-sided normal derivative `∂D/∂n = −2πf`.
            let eps = self.trace_offset();
            let off = self.polar(s, t, eps)?;
            let f = self.density(r);
            let mut grad_d = off.grad_d;
            let n = self.frame.normal.map(|c| Complex64::new(c, 0.0));
            let dn: Complex64 = (0..3).map(|i| grad_d[i] * n[i]).sum();
            grad_d += n * (-2.0 * PI * f - dn);
            let d = off.d + 2.0 * PI * eps * f;
            return Ok(LayerSums { d, grad_d, n: 2.0 * PI * f, grad_n: off.grad_n });
        }
        if self.distance_to_face(s, t, h) < self.spec.split_radius(self.k) {
            return self.polar(s, t, h);
        }
        let mut acc = Partial::default();
        for chunk in self.nodes.chunks(self.group) {
            acc.accumulate(r, &self.frame.normal, self.k, chunk);
        }
        Ok(acc.finish(&self.frame.normal))
    }

    /// Polar rule about the foot point `(ps, pt)` at height `h`.
    fn polar(&self, ps: f64, pt: f64, h: f64) -> Result<LayerSums> {
        let fr = &self.frame;
        let normal = fr.normal;
        let mut acc = Partial::default();
        let (Some(bs), Some(bt)) = (self.breaks(fr.len1), self.breaks(fr.len2)) else {
            return Ok(acc.finish(&normal));
        };
        let support = [bs[0], bs[bs.len() - 1], bt[0], bt[bt.len() - 1]];
        let flat = (bs.len() == 4 && bt.len() == 4).then(|| [bs[1], bs[2], bt[1], bt[2]]);
        let corners = |b: &[f64; 4]| [(b[0], b[2]), (b[1], b[2]), (b[1], b[3]), (b[0], b[3])];
        let angle = |c: (f64, f64)| (c.1 - pt).atan2(c.0 - ps);
        let far = corners(&support)
            .iter()
            .map(|c| (c.0 - ps).hypot(c.1 - pt))
            .fold(0.0, f64::max);

        let mut kinks: Vec<(f64, f64)> = corners(&support).to_vec();
        if let Some(f) = &flat {
            kinks.extend(corners(f));
        }
        let inside = ps > support[0] && ps < support[1] && pt > support[2] && pt < support[3];
        let mut breaks: Vec<f64>;
        if inside {
            let base = angle(kinks[0]);
            breaks = kinks.iter().map(|&c| base + (angle(c) - base).rem_euclid(TAU)).collect();
            breaks.push(base + TAU);
        } else {
            let center = angle(((support[0] + support[1]) / 2.0, (support[2] + support[3]) / 2.0));
            let wrap = |a: f64| (a - center + PI).rem_euclid(TAU) - PI;
            let rel: Vec<f64> = corners(&support).iter().map(|&c| wrap(angle(c))).collect();
            let lo = rel.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = rel.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            breaks = kinks
                .iter()
                .map(|&c| wrap(angle(c)))
                .filter(|a| *a >= lo && *a <= hi)
                .map(|a| center + a)
                .collect();
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

        let max_len = self.panel_length();
        let order = self.spec.order;
        let mut angular = Rule1d::default();
        for w in breaks.windows(2) {
            let count = ((w[1] - w[0]) * far / max_len).ceil().max(1.0) as usize;
            angular.push_panels(w[0], w[1], count, order);
        }
        let radial_estimate = (far / max_len).ceil() as usize + 4 * self.band_panels() + 48;
        let required = angular.panels * radial_estimate;
        if required > self.spec.max_panels {
            return Err(ScatterError::BudgetExceeded { required, budget: self.spec.max_panels });
        }

        let foot = fr.point(ps, pt);
        let alpha_foot = self.alpha.dot(&foot);
        let r = foot + normal * h;
        let cut = self.spec.cutoff;
        let k = self.k;
        let band_panels = self.band_panels();
        let mut nodes: Vec<Node> = Vec::with_capacity(order * 64);
        for (panel, chunk) in angular.nodes.chunks(order).enumerate() {
            nodes.clear();
            for (j, &phi) in chunk.iter().enumerate() {
                let wphi = angular.weights[panel * order + j];
                let (sn, cs) = phi.sin_cos();
                let Some((r0, r1)) = slab(ps, pt, cs, sn, &support) else { continue };
                let mut rb = vec![r0, r1];
                let mut flat_span = None;
                if let Some(f) = &flat {
                    if let Some((f0, f1)) = slab(ps, pt, cs, sn, f) {
                        if f1 > f0 {
                            rb.extend([f0, f1].iter().filter(|&&x| x > r0 && x < r1));
                            flat_span = Some((f0, f1));
                        }
                    }
                }
                let scale = (h * h + r0 * r0).sqrt();
                if scale > 0.0 && scale < max_len {
                    let mut g = scale;
                    while g < max_len && r0 + g < r1 {
                        rb.push(r0 + g);
                        g *= 2.0;
                    }
                }
                rb.sort_by(f64::total_cmp);
                rb.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
                let dir = fr.e1 * cs + fr.e2 * sn;
                let alpha_dir = self.alpha.dot(&dir);
                let mut radial = Rule1d::default();
                for w in rb.windows(2) {
                    let mid = 0.5 * (w[0] + w[1]);
                    let in_flat = flat_span.is_some_and(|(f0, f1)| mid > f0 && mid < f1);
                    let mut count = ((w[1] - w[0]) / max_len).ceil().max(1.0) as usize;
                    if !in_flat {
                        count = count.max(band_panels);
                    }
                    radial.push_panels(w[0], w[1], count, order);
                }
                for (rho, wr) in radial.iter() {
                    let s = ps + rho * cs;
                    let t = pt + rho * sn;
                    let eta = if flat.is_some_and(|f| s >= f[0] && s <= f[1] && t >= f[2] && t <= f[3]) {
                        1.0
                    } else {
                        cut.eta_rect(s, t, fr, k)
                    };
                    if eta == 0.0 {
                        continue;
                    }
                    nodes.push(Node {
                        q: foot + dir * rho,
                        phase: alpha_foot + rho * alpha_dir,
                        weight: wphi * wr * rho * eta,
                    });
                }
            }
            acc.accumulate(&r, &normal, k, &nodes);
        }
        Ok(acc.finish(&normal))
    }
}

/// Parameter interval where the ray `p + ρ(c, s)`, `ρ ≥ 0`, is inside the
/// box `[b0, b1] × [b2, b3]`.
fn slab(ps: f64, pt: f64, c: f64, s: f64, b: &[f64; 4]) -> Option<(f64, f64)> {
    let mut lo: f64 = 0.0;
    let mut hi = f64::INFINITY;
    for (p, d, a, z) in [(ps, c, b[0], b[1]), (pt, s, b[2], b[3])] {
        if d.abs() < 1e-15 {
            if p < a || p > z {
                return None;
            }
        } else {
            let t1 = (a - p) / d;
            let t2 = (z - p) / d;
            lo = lo.max(t1.min(t2));
            hi = hi.min(t1.max(t2));
        }
    }
    (hi > lo).then_some((lo, hi))
}

fn evaluate(r: &Vec3, alpha: &Vec3, face: &PolygonFace, k: f64, spec: &QuadratureSpec) -> Result<(LayerSums, LayerSums)> {
    let coarse = FaceRule::new(face, alpha, k, spec, 0)?.sums(r)?;
    let fine = FaceRule::new(face, alpha, k, spec, 1)?.sums(r)?;
    Ok((coarse, fine))
}

fn check_k(k: f64) -> Result<()> {
    if !(k >= 1.0 && k.is_finite()) {
        return Err(ScatterError::Config(format!("wavenumber must be at least 1, got {k}")));
    }
    Ok(())
}

/// `D(r)` and `∇D(r)` with a refinement error estimate.
pub fn single_layer_d(r: &Vec3, alpha: &Vec3, face: &PolygonFace, k: f64, spec: &QuadratureSpec) -> Result<LayerEvaluation> {
    check_k(k)?;
    let (c, f) = evaluate(r, alpha, face, k, spec)?;
    Ok(LayerEvaluation { value: f.d, gradient: f.grad_d, est_err: (f.d - c.d).norm() })
}

/// `N(r)` and `∇N(r)` with a refinement error estimate.
pub fn double_layer_n(r: &Vec3, alpha: &Vec3, face: &PolygonFace, k: f64, spec: &QuadratureSpec) -> Result<LayerEvaluation> {
    check_k(k)?;
    let (c, f) = evaluate(r, alpha, face, k, spec)?;
    Ok(LayerEvaluation { value: f.n, gradient: f.grad_n, est_err: (f.n - c.n).norm() })
}

/// One-sided normal derivative of `D` on the face, `−2π η e^{ikα·r}`.
pub fn single_layer_dn_d_on_face(r: &Vec3, alpha: &Vec3, face: &PolygonFace, k: f64, spec: &QuadratureSpec) -> Complex64 {
    let eta = spec.cutoff.eta(r, k, face);
    -2.0 * PI * eta * Complex64::cis(k * alpha.dot(r))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    D,
    N,
    /// Normal derivative of `N`.
    DnN,
}

/// Leading-order large-`k` value of a layer potential.
pub fn layer_asymptotic_oracle(r: &Vec3, alpha: &Vec3, face: &PolygonFace, k: f64, which: LayerKind) -> Result<Complex64> {
    let n = face.normal;
    let na = alpha.dot(&n);
    let scale = face.vertices.iter().map(|v| (v - face.vertices[0]).norm()).fold(0.0, f64::max);
    let tol = crate::geometry::DEFAULT_ZONE_TOL * scale;
    let plane = n.dot(&(r - face.vertices[0]));
    let on_face = plane.abs() <= tol && face.boundary_distance(r) > tol;
    let incident = Complex64::cis(k * alpha.dot(r));
    if on_face {
        return Ok(match which {
            LayerKind::D => 2.0 * PI / (I * k * na) * incident,
            LayerKind::N => 2.0 * PI * incident,
            LayerKind::DnN => -2.0 * PI * I * k * na * incident,
        });
    }
    let star = reflect_direction(alpha, &n);
    let t0 = travel_phase_t0(alpha, face)?;
    let reflected = Complex64::cis(k * (t0 + star.dot(r)));
    Ok(match classify_zone(r, alpha, face, tol) {
        ZoneLabel::Boundary => return Err(ScatterError::ZoneAmbiguous { tol }),
        ZoneLabel::Outside => Complex64::new(0.0, 0.0),
        ZoneLabel::Shadow => match which {
            LayerKind::D => 2.0 * PI / (I * k * na) * incident,
            LayerKind::N => -2.0 * PI * incident,
            LayerKind::DnN => -2.0 * PI * I * k * na * incident,
        },
        ZoneLabel::Reflected => match which {
            LayerKind::D => 2.0 * PI / (I * k * na) * reflected,
            LayerKind::N => 2.0 * PI * reflected,
            LayerKind::DnN => 2.0 * PI * I * k * star.dot(&n) * reflected,
        },
    })
}
