//! Far field of `u⁰` and the cross sections built from it.
//!
//! Two independent routes:
//!
//! * the closed form: both blocks of one face pair share the polygon integral
//!   `I(θ) = ∫_{M₁} η e^{ik(p₀−θ)·q} dS`, so
//!   `𝓛∞(θ) = (ik/4π)·Ψ(θ)·I(θ)` and `𝓡∞(θ) = 𝓛∞(θ̄)`;
//! * Green's representation on an enclosing cube,
//!   `u∞(θ) = −(1/4π) ∫_Q [∂u/∂n + ik(n·θ)u] e^{−ikθ·r} dS`, fed by the
//!   near-field evaluator.
//!
//! The normalisation is `u ~ e^{ik|r|}/|r| · u∞(r̂)`, so `σ = ‖u∞‖²` and
//! `(4π/k)·Im u∞(p₀) = +σ` (optical theorem) for real impedances.

use std::f64::consts::{FRAC_PI_3, FRAC_PI_8, PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutoff::{profile, CutoffProfile};
use crate::error::{Result, ScatterError};
use crate::geometry::{mirror, p0, FaceLabel, Obstacle, PolygonFace, RectFrame, Vec3};
use crate::kirchhoff::KirchhoffField;
use crate::quadrature::{ComplexSum, KahanSum, Rule1d};
use crate::rays::Impedance;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `(1/2)|A²e^{ikΔ} − 1|²`, the large-`k` limit of the total cross section.
pub fn sigma_asymptotic(k: f64, lambda: Impedance, delta: f64) -> f64 {
    let a = lambda.reflection();
    0.5 * (a * a * Complex64::cis(k * delta) - 1.0).norm_sqr()
}

/// `sin(x)/x`, accurate near zero.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `∫_a^c e^{iωs} ds`.
fn exp_integral(omega: f64, a: f64, c: f64) -> Complex64 {
    Complex64::cis(omega * 0.5 * (a + c)) * ((c - a) * sinc(0.5 * omega * (c - a)))
}

/// `∫_P e^{iκ·q} dS` over a planar polygon with `η = 1`, reduced to its
/// edges by the divergence theorem.
pub fn polygon_fourier(face: &PolygonFace, kappa: &Vec3) -> Complex64 {
    let n = face.normal;
    let kn = kappa.dot(&n);
    let kt = kappa - n * kn;
    let k2 = kt.norm_squared();
    let phase = Complex64::cis(kn * face.plane_offset());
    if k2 < 1e-20 {
        return phase * face.area();
    }
    // e^{iκ_t·q} = div(−iκ_t e^{iκ_t·q}/|κ_t|²) in the plane.
    let mut sum = Complex64::new(0.0, 0.0);
    for (a, b) in face.edges() {
        let e = b - a;
        let outward = e.cross(&n).normalize();
        let mid = (a + b) * 0.5;
        let along = kt.dot(&e);
        let edge = Complex64::cis(kt.dot(&mid)) * (e.norm() * sinc(0.5 * along));
        sum += edge * kt.dot(&outward);
    }
    phase * (-I / k2) * sum
}

/// `∫_0^L h(s)·h(L−s)·e^{iωs} ds` for the edge step `h(s) = profile(s/b − 1)`.
#[derive(Clone, Debug)]
struct StripTransform {
    len: f64,
    band: f64,
    /// `(x, w·p(x))` on `[0, 1]`.
    nodes: Vec<(f64, f64)>,
}

impl StripTransform {
    fn new(len: f64, band: f64, k: f64) -> StripTransform {
        // The band integrand oscillates at most ~2kb radians over [0, 1].
        let panels = ((2.0 * k * band) / 4.0).ceil().max(2.0) as usize;
        let mut rule = Rule1d::default();
        rule.push_panels(0.0, 1.0, panels, 16);
        let nodes = rule.iter().map(|(x, w)| (x, w * profile(x))).collect();
        StripTransform { len, band, nodes }
    }

    fn eval(&self, omega: f64) -> Complex64 {
        let (b, l) = (self.band, self.len);
        if 4.0 * b > l {
            return self.direct(omega);
        }
        let wb = omega * b;
        let (mut c, mut s) = (KahanSum::default(), KahanSum::default());
        for &(x, wp) in &self.nodes {
            let (sn, cs) = (wb * x).sin_cos();
            c.add(wp * cs);
            s.add(wp * sn);
        }
        let (c, s) = (c.value(), s.value());
        // B(±ω) = b·e^{±iωb}·(C ± iS)
        let plus = Complex64::cis(wb) * Complex64::new(c, s) * b;
        let minus = Complex64::cis(-wb) * Complex64::new(c, -s) * b;
        plus + exp_integral(omega, 2.0 * b, l - 2.0 * b) + Complex64::cis(omega * l) * minus
    }

    /// Plain composite quadrature, used when the two bands overlap.
    fn direct(&self, omega: f64) -> Complex64 {
        let (b, l) = (self.band, self.len);
        if 2.0 * b >= l {
            return Complex64::new(0.0, 0.0);
        }
        let mut rule = Rule1d::default();
        let panels = ((omega.abs() * (l - 2.0 * b)) / 4.0).ceil().max(4.0) as usize;
        rule.push_panels(b, l - b, panels, 16);
        let mut sum = ComplexSum::default();
        for (s, w) in rule.iter() {
            let eta = profile(s / b - 1.0) * profile((l - s) / b - 1.0);
            sum.add(Complex64::cis(omega * s) * (w * eta));
        }
        sum.value()
    }
}

/// The closed-form far field of `u⁰` for one wavenumber.
///
/// The polygon integral does not depend on the impedance, so one instance
/// serves every `λ` at this `k`.
#[derive(Clone, Debug)]
pub struct ClosedForm {
    pub k: f64,
    frame: RectFrame,
    normal: Vec3,
    star: Vec3,
    d: f64,
    s1: StripTransform,
    s2: StripTransform,
}

impl ClosedForm {
    pub fn new(obstacle: &Obstacle, k: f64, cutoff: &CutoffProfile) -> Result<ClosedForm> {
        if !(k >= 1.0 && k.is_finite()) {
            return Err(ScatterError::Config(format!("wavenumber must be at least 1, got {k}")));
        }
        let face = obstacle.face(FaceLabel::FirstLeft);
        let frame = face
            .rect_frame()
            .ok_or_else(|| ScatterError::InvalidGeometry("active face is not a rectangle".into()))?;
        let band = cutoff.band(k);
        Ok(ClosedForm {
            k,
            normal: face.normal,
            star: obstacle.p0_star_left(),
            d: obstacle.d,
            s1: StripTransform::new(frame.len1, band, k),
            s2: StripTransform::new(frame.len2, band, k),
            frame,
        })
    }

    /// `∫_{M₁} η e^{ik(p₀−θ)·q} dS`.
    pub fn polygon_integral(&self, theta: &Vec3) -> Complex64 {
        let kappa = (p0() - theta) * self.k;
        let f = &self.frame;
        Complex64::cis(kappa.dot(&f.origin)) * self.s1.eval(kappa.dot(&f.e1)) * self.s2.eval(kappa.dot(&f.e2))
    }

    /// `Ψ(θ)` for reflection coefficient `a`.
    pub fn psi(&self, theta: &Vec3, a: Complex64) -> Complex64 {
        let np0 = p0().dot(&self.normal);
        let nt = theta.dot(&self.normal);
        let shift = Complex64::cis(self.k * self.d * (1.0 - self.star.dot(theta)));
        (a - 1.0) * np0 - (a + 1.0) * nt + a * shift * ((a - 1.0) * np0 + (a + 1.0) * nt)
    }

    /// `𝓛∞(θ)`.
    pub fn left(&self, theta: &Vec3, a: Complex64) -> Complex64 {
        I * self.k / (4.0 * PI) * self.psi(theta, a) * self.polygon_integral(theta)
    }

    /// `𝓛∞(θ) + 𝓛∞(θ̄)`.
    pub fn amplitude(&self, theta: &Vec3, lambda: Impedance) -> Complex64 {
        let a = lambda.reflection();
        self.left(theta, a) + self.left(&mirror(theta), a)
    }
}

pub fn far_amplitude_closed_form(theta: &Vec3, k: f64, lambda: Impedance, obstacle: &Obstacle) -> Result<Complex64> {
    Ok(ClosedForm::new(obstacle, k, &CutoffProfile::default())?.amplitude(theta, lambda))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    /// Node spacing in the caps, in units of `1/k`.
    pub cap_spacing: f64,
    /// Node spacing elsewhere, in units of `1/k`.
    pub bulk_spacing: f64,
    /// Azimuthal nodes per unit of the bandwidth `2kR·sin ϑ`.
    pub phi_oversample: f64,
    pub order: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions { cap_spacing: 0.75, bulk_spacing: 2.0, phi_oversample: 0.8, order: 8 }
    }
}

/// Product rule on the unit sphere in rings about `p₀`, refined in caps
/// around `p₀` and around the ring through `p₀*`.
#[derive(Clone, Debug)]
pub struct SphericalGrid {
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub cap_radius: f64,
    /// Largest polar spacing inside the forward cap.
    pub cap_step: f64,
}

/// `min(π/8, 40/k)`.
pub fn cap_radius(k: f64) -> f64 {
    FRAC_PI_8.min(40.0 / k)
}

impl SphericalGrid {
    /// `radius` bounds the scatterer about the expansion center; it sets the
    /// angular bandwidth `~2kR` of `|u∞|²`.
    pub fn new(k: f64, radius: f64, opts: &GridOptions) -> Result<SphericalGrid> {
        if !(opts.cap_spacing > 0.0 && opts.bulk_spacing > 0.0 && opts.phi_oversample > 0.0) || opts.order == 0 {
            return Err(ScatterError::Config("grid spacings and order must be positive".into()));
        }
        let rc = cap_radius(k);
        let breaks = [0.0, rc, FRAC_PI_3 - rc, FRAC_PI_3 + rc, PI];
        let mut polar = Rule1d::default();
        let mut cap_step: f64 = 0.0;
        for (i, w) in breaks.windows(2).enumerate() {
            let fine = i == 0 || i == 2;
            let spacing = if fine { opts.cap_spacing } else { opts.bulk_spacing } / k;
            let count = ((w[1] - w[0]) / (spacing * opts.order as f64)).ceil().max(1.0) as usize;
            polar.push_panels(w[0], w[1], count, opts.order);
            if i == 0 {
                cap_step = (w[1] - w[0]) / (count * opts.order) as f64;
            }
        }
        // The forward lobe is ~4π/(k·2R) wide.
        let lobe = 2.0 * PI / (k * radius);
        if 8.0 * cap_step > lobe {
            return Err(ScatterError::LobeUnresolved { spacing: cap_step, lobe });
        }
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (th, wt) in polar.iter() {
            let (st, ct) = th.sin_cos();
            let n_phi = (opts.phi_oversample * 2.0 * k * radius * st).ceil() as usize + 16;
            let n_phi = n_phi + n_phi % 2;
            let wp = TAU / n_phi as f64;
            for j in 0..n_phi {
                let (sp, cp) = (wp * j as f64).sin_cos();
                nodes.push(Vec3::new(st * cp, st * sp, ct));
                weights.push(wt * st * wp);
            }
        }
        Ok(SphericalGrid { nodes, weights, cap_radius: rc, cap_step })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, values: impl Fn(usize, &Vec3) -> f64) -> f64 {
        let mut sum = KahanSum::default();
        for (i, (n, w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            sum.add(w * values(i, n));
        }
        sum.value()
    }
}

/// Radius of the smallest ball about `obstacle.center()` holding every vertex.
pub fn bounding_radius(obstacle: &Obstacle) -> f64 {
    let c = obstacle.center();
    obstacle
        .faces
        .iter()
        .flat_map(|f| f.vertices.iter())
        .map(|v| (v - c).norm())
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeOptions {
    /// Half the edge of the cube, centered on the obstacle.
    pub half_width: f64,
    pub points_per_wavelength: f64,
    pub order: usize,
}

impl Default for CubeOptions {
    fn default() -> Self {
        CubeOptions { half_width: 1.2, points_per_wavelength: 5.0, order: 8 }
    }
}

#[derive(Clone, Copy, Debug)]
struct SurfaceNode {
    r: Vec3,
    normal: Vec3,
    weight: f64,
    value: Complex64,
    /// `∂u/∂n`
    dn: Complex64,
}

/// `u⁰` and `∂u⁰/∂n` sampled on an enclosing cube.
#[derive(Clone, Debug)]
pub struct SurfaceField {
    pub k: f64,
    pub center: Vec3,
    pub half_width: f64,
    nodes: Vec<SurfaceNode>,
    /// Number of near-field evaluations actually performed.
    pub evaluations: usize,
}

impl SurfaceField {
    /// Samples the cube. The obstacle is symmetric under `x → −x` and under
    /// reflection in its mid-plane `y = D/2`, so one quarter of the nodes is
    /// evaluated and the rest are images.
    pub fn compute(field: &KirchhoffField, opts: &CubeOptions) -> Result<SurfaceField> {
        let o = &field.obstacle;
        let k = field.k;
        let c = o.center();
        let a = opts.half_width;
        let lo = o.faces.iter().flat_map(|f| f.vertices.iter()).fold(Vec3::repeat(f64::INFINITY), |m, v| m.inf(v));
        let hi = o.faces.iter().flat_map(|f| f.vertices.iter()).fold(Vec3::repeat(f64::NEG_INFINITY), |m, v| m.sup(v));
        if (0..3).any(|i| c[i] - a >= lo[i] || c[i] + a <= hi[i]) {
            return Err(ScatterError::Config(format!("cube of half-width {a} does not enclose the obstacle")));
        }
        if !(opts.points_per_wavelength > 0.0) || opts.order == 0 {
            return Err(ScatterError::Config("cube rule needs positive density and order".into()));
        }
        let max_len = opts.order as f64 * TAU / k / opts.points_per_wavelength;
        let half = |lo: f64, hi: f64| {
            let mut r = Rule1d::default();
            r.push_panels(lo, hi, ((hi - lo) / max_len).ceil().max(1.0) as usize, opts.order);
            r
        };
        let pos = half(0.0, a);
        let full = {
            let mut r = half(-a, 0.0);
            let p = half(0.0, a);
            r.nodes.extend(p.nodes);
            r.weights.extend(p.weights);
            r
        };
        // Representatives: x > 0 and y > c.y.
        let mut reps: Vec<(Vec3, Vec3, f64)> = Vec::new();
        for (v, wv) in pos.iter() {
            for (z, wz) in full.iter() {
                reps.push((c + Vec3::new(a, v, z), Vec3::x(), wv * wz));
            }
        }
        for (x, wx) in pos.iter() {
            for (z, wz) in full.iter() {
                reps.push((c + Vec3::new(x, a, z), Vec3::y(), wx * wz));
            }
            for (y, wy) in pos.iter() {
                reps.push((c + Vec3::new(x, y, a), Vec3::z(), wx * wy));
                reps.push((c + Vec3::new(x, y, -a), -Vec3::z(), wx * wy));
            }
        }
        let points: Vec<Vec3> = reps.iter().map(|r| r.0).collect();
        let samples = field.sample_many(&points)?;
        let mut nodes = Vec::with_capacity(4 * reps.len());
        for ((r, n, w), s) in reps.iter().zip(&samples) {
            for (fx, fy) in [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
                let flip = Vec3::new(fx, fy, 1.0);
                let image = c + (r - c).component_mul(&flip);
                let normal = n.component_mul(&flip);
                let dn: Complex64 = (0..3).map(|i| s.gradient[i] * (flip[i] * normal[i])).sum();
                nodes.push(SurfaceNode { r: image, normal, weight: *w, value: s.value, dn });
            }
        }
        Ok(SurfaceField { k, center: c, half_width: a, nodes, evaluations: points.len() })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Total area covered by the rule (`24a²` for an exact cube rule).
    pub fn area(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    /// `−(1/4π) ∫_Q [∂u/∂n + ik(n·θ)u] e^{−ikθ·r} dS`.
    pub fn far_amplitude(&self, theta: &Vec3) -> Complex64 {
        let k = self.k;
        let mut sum = ComplexSum::default();
        for n in &self.nodes {
            let integrand = n.dn + I * k * n.normal.dot(theta) * n.value;
            sum.add(integrand * Complex64::cis(-k * theta.dot(&n.r)) * n.weight);
        }
        -sum.value() / (4.0 * PI)
    }

    /// `(1/k)·Im ∫_Q (∂u/∂n)·ū dS`.
    pub fn sigma(&self) -> f64 {
        let mut sum = KahanSum::default();
        for n in &self.nodes {
            sum.add(n.weight * (n.dn * n.value.conj()).im);
        }
        sum.value() / self.k
    }
}

/// Far-field amplitude by the surface route for a single direction.
pub fn far_amplitude_surface(theta: &Vec3, surface: &SurfaceField) -> Complex64 {
    surface.far_amplitude(theta)
}

/// Far-field values on a sphere grid, plus optionally the cube samples.
#[derive(Clone, Debug)]
pub struct FarField {
    pub k: f64,
    pub lambda: Impedance,
    pub grid: SphericalGrid,
    pub values: Vec<Complex64>,
    pub forward: Complex64,
    pub surface: Option<Arc<SurfaceField>>,
}

impl FarField {
    pub fn closed_form(obstacle: &Obstacle, k: f64, lambda: Impedance, cutoff: &CutoffProfile, opts: &GridOptions) -> Result<FarField> {
        let cf = ClosedForm::new(obstacle, k, cutoff)?;
        let grid = SphericalGrid::new(k, bounding_radius(obstacle), opts)?;
        let values: Vec<Complex64> = grid.nodes.par_iter().map(|t| cf.amplitude(t, lambda)).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ScatterError::Config("non-finite far-field value".into()));
        }
        let forward = cf.amplitude(&p0(), lambda);
        Ok(FarField { k, lambda, grid, values, forward, surface: None })
    }

    pub fn with_surface(mut self, surface: Arc<SurfaceField>) -> FarField {
        self.surface = Some(surface);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Grid,
    Surface,
}

pub fn total_cross_section(ff: &FarField, route: Route) -> Result<f64> {
    match route {
        Route::Grid => Ok(ff.grid.integrate(|i, _| ff.values[i].norm_sqr())),
        Route::Surface => ff
            .surface
            .as_ref()
            .map(|s| s.sigma())
            .ok_or_else(|| ScatterError::Config("no surface samples attached to this far field".into())),
    }
}

/// `∫ (1 − θ·p₀)|u∞|² dS`.
pub fn transport_cross_section(ff: &FarField) -> f64 {
    let p = p0();
    ff.grid.integrate(|i, t| (1.0 - t.dot(&p)) * ff.values[i].norm_sqr())
}

/// `∫ φ(θ)|u∞(θ)|² dS`.
pub fn forward_concentration(ff: &FarField, phi: impl Fn(&Vec3) -> f64) -> f64 {
    ff.grid.integrate(|i, t| phi(t) * ff.values[i].norm_sqr())
}

/// `|(4π/k)·Im u∞(p₀)| − σ`; the optical theorem makes this vanish for
/// real impedances, so only magnitudes are compared.
pub fn optical_theorem_check(ff: &FarField, sigma: f64) -> Result<f64> {
    if ff.lambda.value().im != 0.0 {
        return Err(ScatterError::Config("the optical theorem check needs a real impedance".into()));
    }
    Ok((4.0 * PI / ff.k * ff.forward.im).abs() - sigma)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionReport {
    pub k: f64,
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub sigma_grid: f64,
    pub sigma_surface: Option<f64>,
    pub sigma_asym: f64,
    pub sigma_transport: f64,
    pub forward_re: f64,
    pub forward_im: f64,
}

impl CrossSectionReport {
    pub fn from_far_field(ff: &FarField, obstacle: &Obstacle) -> Result<CrossSectionReport> {
        let sigma_surface = match ff.surface {
            Some(_) => Some(total_cross_section(ff, Route::Surface)?),
            None => None,
        };
        Ok(CrossSectionReport {
            k: ff.k,
            lambda_re: ff.lambda.value().re,
            lambda_im: ff.lambda.value().im,
            sigma_grid: total_cross_section(ff, Route::Grid)?,
            sigma_surface,
            sigma_asym: sigma_asymptotic(ff.k, ff.lambda, obstacle.delta),
            sigma_transport: transport_cross_section(ff),
            forward_re: ff.forward.re,
            forward_im: ff.forward.im,
        })
    }
}
