//! Gauss–Legendre panels and compensated sums.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;

const MAX_CACHED: usize = 128;

static RULES: [OnceLock<Vec<(f64, f64)>>; MAX_CACHED + 1] = [const { OnceLock::new() }; MAX_CACHED + 1];

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> &'static [(f64, f64)] {
    assert!((1..=MAX_CACHED).contains(&n), "rule order {n} out of range");
    RULES[n].get_or_init(|| {
        let rule = GaussLegendre::new(NonZeroUsize::new(n).expect("n > 0"));
        let mut pairs = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs
    })
}

/// A one-dimensional composite rule.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub panels: usize,
}

impl Rule1d {
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Appends `count` equal Gauss panels covering `[a, b]`.
    pub fn push_panels(&mut self, a: f64, b: f64, count: usize, order: usize) {
        if b <= a || count == 0 {
            return;
        }
        let rule = gauss_legendre(order);
        let h = (b - a) / count as f64;
        for p in 0..count {
            let lo = a + p as f64 * h;
            for &(x, w) in rule {
                self.nodes.push(lo + 0.5 * h * (x + 1.0));
                self.weights.push(0.5 * h * w);
            }
        }
        self.panels += count;
    }
}

/// Composite rule over sorted breakpoints with panels no longer than
/// `max_len`.
pub fn composite_rule(breaks: &[f64], max_len: f64, order: usize) -> Rule1d {
    let mut rule = Rule1d::default();
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b > a {
            let count = ((b - a) / max_len).ceil().max(1.0) as usize;
            rule.push_panels(a, b, count, order);
        }
    }
    rule
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ComplexSum {
    re: KahanSum,
    im: KahanSum,
}

impl ComplexSum {
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}
