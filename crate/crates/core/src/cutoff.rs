//! Smooth edge cut-off `η(k, q)` on a face.
//!
//! `η` vanishes within `b(k) = ℓ·k^{-1/4}` of the edges, equals one beyond
//! `2b(k)`, and switches between the two with a C^∞ step built from
//! `exp(−1/x)`. On a convex face it is the product of one step per edge
//! line, which agrees with the distance-to-boundary definition wherever the
//! step is flat and keeps the factor smooth near corners.

use serde::{Deserialize, Serialize};

use crate::geometry::{PolygonFace, RectFrame, Vec3};

/// Exponent of the band width, `b(k) ∝ k^{-1/4}`.
pub const DELTA: f64 = 0.25;

/// Default band length scale `ℓ` in `b(k) = ℓ·k^{-1/4}`.
///
/// With `ℓ = 1` the cut-off swallows a unit-width obstacle's faces entirely
/// for every `k < 256`; this value keeps the band a small fraction of the
/// face at desk-scale frequencies.
pub const DEFAULT_BAND_SCALE: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub delta: f64,
    pub scale: f64,
}

impl Default for CutoffProfile {
    fn default() -> Self {
        CutoffProfile { delta: DELTA, scale: DEFAULT_BAND_SCALE }
    }
}

impl CutoffProfile {
    pub fn with_scale(scale: f64) -> CutoffProfile {
        CutoffProfile { delta: DELTA, scale }
    }

    /// Inner band width `b(k)`; `η = 0` closer than this to an edge.
    pub fn band(&self, k: f64) -> f64 {
        self.scale * k.powf(-self.delta)
    }

    /// Step factor for a single edge at signed distance `dist`.
    pub fn edge_factor(&self, dist: f64, k: f64) -> f64 {
        profile(dist / self.band(k) - 1.0)
    }

    pub fn eta(&self, q: &Vec3, k: f64, face: &PolygonFace) -> f64 {
        let b = self.band(k);
        face.edge_distances(q).into_iter().map(|d| profile(d / b - 1.0)).product()
    }

    /// `η` at rectangle coordinates `(s, t)`.
    pub fn eta_rect(&self, s: f64, t: f64, frame: &RectFrame, k: f64) -> f64 {
        let b = self.band(k);
        let f = |d: f64| profile(d / b - 1.0);
        f(s) * f(frame.len1 - s) * f(t) * f(frame.len2 - t)
    }

    /// `∫_0^L h(s)·h(L−s) ds` for the one-dimensional factor pair.
    pub fn strip_integral(&self, len: f64, k: f64) -> f64 {
        let b = self.band(k);
        assert!(len >= 4.0 * b, "bands overlap");
        len - 3.0 * b
    }
}

/// Smooth step: 0 for `x ≤ 0`, 1 for `x ≥ 1`, C^∞ everywhere.
pub fn profile(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        1.0 / (1.0 + (1.0 / x - 1.0 / (1.0 - x)).exp())
    }
}

/// `profile` and its first four derivatives.
pub fn profile_jet(x: f64) -> [f64; 5] {
    let mut out = [0.0; 5];
    if x <= 0.0 {
        return out;
    }
    if x >= 1.0 {
        out[0] = 1.0;
        return out;
    }
    let g = 1.0 / x - 1.0 / (1.0 - x);
    if g.abs() > 700.0 {
        out[0] = if g > 0.0 { 0.0 } else { 1.0 };
        return out;
    }
    let var = Jet::variable(x);
    let one = Jet::constant(1.0);
    let g = var.recip() - (one - var).recip();
    // Keep the exponential bounded: 1/(1+e^g) = e^{-g}/(1+e^{-g}).
    let p = if g.0[0] > 0.0 {
        let s = (Jet::constant(0.0) - g).exp();
        s * (one + s).recip()
    } else {
        (one + g.exp()).recip()
    };
    let mut factorial = 1.0;
    for (m, slot) in out.iter_mut().enumerate() {
        if m > 0 {
            factorial *= m as f64;
        }
        *slot = p.0[m] * factorial;
    }
    out
}

/// Truncated Taylor series `Σ c_m ε^m`, `m ≤ 4`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Jet([f64; 5]);

impl Jet {
    fn constant(c: f64) -> Jet {
        Jet([c, 0.0, 0.0, 0.0, 0.0])
    }

    fn variable(x: f64) -> Jet {
        Jet([x, 1.0, 0.0, 0.0, 0.0])
    }

    fn recip(self) -> Jet {
        // Solve (self)·r = 1 term by term.
        let a = self.0;
        let mut r = [0.0; 5];
        r[0] = 1.0 / a[0];
        for m in 1..5 {
            let s: f64 = (1..=m).map(|j| a[j] * r[m - j]).sum();
            r[m] = -s / a[0];
        }
        Jet(r)
    }

    fn exp(self) -> Jet {
        // e' = a'·e, so m·e_m = Σ j·a_j·e_{m−j}.
        let a = self.0;
        let mut e = [0.0; 5];
        e[0] = a[0].exp();
        for m in 1..5 {
            let s: f64 = (1..=m).map(|j| j as f64 * a[j] * e[m - j]).sum();
            e[m] = s / m as f64;
        }
        Jet(e)
    }
}

impl std::ops::Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|i| self.0[i] + o.0[i]))
    }
}

impl std::ops::Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|i| self.0[i] - o.0[i]))
    }
}

impl std::ops::Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|m| (0..=m).map(|j| self.0[j] * o.0[m - j]).sum()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FaceLabel;
    use crate::quadrature::composite_rule;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// A 4 × 3 rectangle in the plane z = 0.
    fn big_face() -> PolygonFace {
        PolygonFace {
            vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(4.0, 0.0, 0.0),
                Vec3::new(4.0, 3.0, 0.0),
                Vec3::new(0.0, 3.0, 0.0),
            ],
            normal: Vec3::z(),
            label: FaceLabel::Passive,
        }
    }

    #[test]
    fn profile_endpoints_and_symmetry() {
        assert_eq!(profile(0.0), 0.0);
        assert_eq!(profile(1.0), 1.0);
        assert_eq!(profile(-3.0), 0.0);
        assert_eq!(profile(7.0), 1.0);
        assert_abs_diff_eq!(profile(0.5), 0.5, epsilon = 1e-15);
        for x in [0.1, 0.3, 0.77] {
            assert_abs_diff_eq!(profile(x) + profile(1.0 - x), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn eta_examples_at_unit_scale() {
        let cut = CutoffProfile::with_scale(1.0);
        let face = big_face();
        let k = 16.0;
        let b = 16f64.powf(-0.25);
        let q = Vec3::new(1.1 * b, 1.5, 0.0);
        let v = cut.eta(&q, k, &face);
        assert!(v > 0.0 && v < 1.0);
        for kk in [16.0, 81.0, 256.0] {
            let b = cut.band(kk);
            assert_eq!(cut.eta(&Vec3::new(2.0 * b, 1.5, 0.0), kk, &face), 1.0);
            assert_eq!(cut.eta(&Vec3::new(2.0, 1.5, 0.0), kk, &face), 1.0);
            assert_eq!(cut.eta(&Vec3::new(b, 1.5, 0.0), kk, &face), 0.0);
            assert_eq!(cut.eta(&Vec3::new(0.3 * b, 0.3 * b, 0.0), kk, &face), 0.0);
        }
    }

    #[test]
    fn jet_matches_finite_differences() {
        let h = 1e-3;
        for x in [0.2, 0.45, 0.5, 0.71, 0.9] {
            let jet = profile_jet(x);
            let f = |i: i32| profile(x + i as f64 * h);
            let d1 = (f(1) - f(-1)) / (2.0 * h);
            let d2 = (f(1) - 2.0 * f(0) + f(-1)) / (h * h);
            let d3 = (f(2) - 2.0 * f(1) + 2.0 * f(-1) - f(-2)) / (2.0 * h.powi(3));
            let d4 = (f(2) - 4.0 * f(1) + 6.0 * f(0) - 4.0 * f(-1) + f(-2)) / h.powi(4);
            assert_abs_diff_eq!(jet[0], f(0), epsilon = 1e-15);
            assert!((jet[1] - d1).abs() < 1e-4 * (1.0 + d1.abs()), "x={x}");
            assert!((jet[2] - d2).abs() < 1e-3 * (1.0 + d2.abs()), "x={x}");
            assert!((jet[3] - d3).abs() < 1e-2 * (1.0 + d3.abs()), "x={x}");
            assert!((jet[4] - d4).abs() < 5e-2 * (1.0 + d4.abs()), "x={x}");
        }
    }

    /// `sup |d^m η / dx^m| · k^{-m/4}` along a line crossing the band.
    fn scaled_sup(cut: &CutoffProfile, k: f64, m: usize) -> f64 {
        let b = cut.band(k);
        (0..=4000)
            .map(|i| {
                let d = b * (1.0 + i as f64 / 4000.0);
                profile_jet(d / b - 1.0)[m].abs() / b.powi(m as i32)
            })
            .fold(0.0, f64::max)
            * k.powf(-(m as f64) / 4.0)
    }

    #[test]
    fn derivative_growth_is_k_to_the_m_over_4() {
        let cut = CutoffProfile::with_scale(1.0);
        for m in 1..=4 {
            let lo = scaled_sup(&cut, 16.0, m);
            let hi = scaled_sup(&cut, 256.0, m);
            assert!(lo > 0.0);
            assert!((hi / lo - 1.0).abs() < 1e-9, "m={m}: {lo} vs {hi}");
            // Finite differences of η itself agree with the jet scaling.
            let k: f64 = 256.0;
            let b = cut.band(k);
            let face = big_face();
            let step = 1e-3 * b;
            let x0 = 1.37 * b;
            let f = |dx: f64| cut.eta(&Vec3::new(x0 + dx, 1.5, 0.0), k, &face);
            let fd = (f(step) - f(-step)) / (2.0 * step);
            let jet = profile_jet(x0 / b - 1.0)[1] / b;
            assert!((fd - jet).abs() < 1e-5 * jet.abs());
        }
    }

    #[test]
    fn mass_defect_is_perimeter_times_band() {
        let face = big_face();
        let frame = face.rect_frame().unwrap();
        for scale in [1.0, 0.3] {
            let cut = CutoffProfile::with_scale(scale);
            for k in [16.0, 256.0, 4096.0] {
                let b = cut.band(k);
                let breaks_s = [0.0, b, 2.0 * b, 4.0 - 2.0 * b, 4.0 - b, 4.0];
                let breaks_t = [0.0, b, 2.0 * b, 3.0 - 2.0 * b, 3.0 - b, 3.0];
                let rs = composite_rule(&breaks_s, 0.5, 16);
                let rt = composite_rule(&breaks_t, 0.5, 16);
                let mut defect = 0.0;
                for (s, ws) in rs.iter() {
                    for (t, wt) in rt.iter() {
                        defect += ws * wt * (1.0 - cut.eta_rect(s, t, &frame, k));
                    }
                }
                // ∫ h(s)h(L−s) ds = L − 3b exactly, since profile(x) + profile(1−x) = 1.
                let exact = 12.0 - (4.0 - 3.0 * b) * (3.0 - 3.0 * b);
                assert!((defect - exact).abs() < 1e-10, "k={k}: {defect} vs {exact}");
                assert!(defect <= 3.0 * 14.0 * b);
                assert_abs_diff_eq!(cut.strip_integral(4.0, k), 4.0 - 3.0 * b, epsilon = 1e-15);
            }
        }
    }

    proptest! {
        #[test]
        fn profile_is_monotone(a in -0.5..1.5f64, b in -0.5..1.5f64) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(profile(lo) <= profile(hi));
            prop_assert!((0.0..=1.0).contains(&profile(a)));
        }

        #[test]
        fn eta_lies_in_unit_interval(x in 0.0..4.0f64, y in 0.0..3.0f64, k in 1.0..1e4f64) {
            let v = CutoffProfile::with_scale(1.0).eta(&Vec3::new(x, y, 0.0), k, &big_face());
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
