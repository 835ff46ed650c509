use num_complex::Complex64;
use polyscatter::farfield::{total_cross_section, FarField, GridOptions, Route};
use polyscatter::rays::Impedance;
use polyscatter::sweep::SweepConfig;
use polyscatter::Obstacle;

fn sigma_curve(lambda: Impedance, k_min: f64, k_max: f64, samples: usize) -> (Vec<f64>, Vec<f64>) {
    let o = Obstacle::standard();
    let ks = SweepConfig::new(k_min, k_max, samples, lambda).wavenumbers();
    let sigmas = ks
        .iter()
        .map(|&k| {
            let ff = FarField::closed_form(&o, k, lambda, &Default::default(), &GridOptions::default()).unwrap();
            total_cross_section(&ff, Route::Grid).unwrap()
        })
        .collect();
    (ks, sigmas)
}

/// Strongest angular frequency of `σ(k)` by a direct DFT scan.
fn dominant_frequency(ks: &[f64], sigmas: &[f64]) -> f64 {
    let mean = sigmas.iter().sum::<f64>() / sigmas.len() as f64;
    let power = |w: f64| {
        ks.iter()
            .zip(sigmas)
            .map(|(k, s)| (s - mean) * Complex64::cis(-w * k))
            .sum::<Complex64>()
            .norm()
    };
    (1..400).map(|i| 0.01 * i as f64).max_by(|a, b| power(*a).total_cmp(&power(*b))).unwrap()
}

#[test]
fn lossless_cross_section_oscillates_between_zero_and_two() {
    let (ks, sigmas) = sigma_curve(Impedance::real(0.0), 14.0, 90.0, 200);
    let max = sigmas.iter().cloned().fold(f64::MIN, f64::max);
    let min = sigmas.iter().cloned().fold(f64::MAX, f64::min);
    assert!(max > 1.6 && max < 2.4, "max {max}");
    assert!(min < 0.5, "min {min}");
    let delta = 3f64.sqrt() / 4.0;
    let w = dominant_frequency(&ks, &sigmas);
    // σ_asym = 1 − cos(kΔ): angular frequency Δ in k, period 2π/Δ.
    assert!((w - delta).abs() < 0.05, "dominant frequency {w}, expected {delta}");
    assert!(sigmas.iter().all(|&s| s >= 0.0));
}

#[test]
fn absorption_damps_the_oscillation() {
    let lossy = Impedance::new(Complex64::new(0.3, 0.2)).unwrap();
    let (_, a) = sigma_curve(Impedance::real(0.0), 60.0, 90.0, 40);
    let (_, b) = sigma_curve(lossy, 60.0, 90.0, 40);
    let swing = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
    let amp = lossy.reflection().norm_sqr();
    assert!(amp < 1.0);
    assert!(swing(&b) < 0.75 * swing(&a), "{} vs {}", swing(&b), swing(&a));
}
