//! Closed-form and statistical oracles for the forward model and the fit.

use std::f64::consts::PI;

use eplab_core::fit::{fit_spectrum, FitConfig};
use eplab_core::synth::{
    add_noise, smatrix_from_internal, synth_spectrum, CouplingSet, NoiseSpec, SpectrumMeta,
    SyntheticFamily,
};
use eplab_core::{EffHamiltonian, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// One isolated mode coupled to both antennas: |S21|² is a Lorentzian of FWHM 2π(W1² + W2²).
#[test]
fn isolated_mode_has_lorentzian_transmission() {
    let (e, w1, w2) = (100.0, 0.21, 0.33);
    let internal = EffHamiltonian::from_pauli(c(e, 0.0), c(500.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)).unwrap();
    let w = CouplingSet::antenna([[w1, 0.0], [w2, 0.0]]).unwrap();
    let t2 = |f: f64| smatrix_from_internal(&internal, &w, f).unwrap().get(1, 0).norm_sqr();
    let gamma = 2.0 * PI * (w1 * w1 + w2 * w2);

    let peak = t2(e);
    let expected_peak = (4.0 * PI * w1 * w2 / gamma).powi(2);
    assert!((peak - expected_peak).abs() < 1e-12, "{peak} vs {expected_peak}");

    // half-height crossing on each side by bisection
    let cross = |mut lo: f64, mut hi: f64| {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (t2(mid) > 0.5 * peak) == (t2(lo) > 0.5 * peak) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let fwhm = cross(e, e + 10.0 * gamma) - cross(e, e - 10.0 * gamma);
    assert!((fwhm.abs() - gamma).abs() < 1e-9 * gamma, "fwhm {fwhm} vs {gamma}");
}

#[test]
fn unitarity_without_dissipation() {
    let internal = EffHamiltonian::from_pauli(c(99.0, 0.0), c(101.0, 0.0), c(0.7, 0.0), c(0.3, 0.0)).unwrap();
    let w = CouplingSet::antenna([[0.2, 0.1], [-0.05, 0.3]]).unwrap();
    for k in 0..50 {
        let s = smatrix_from_internal(&internal, &w, 95.0 + 0.2 * k as f64).unwrap();
        let p = s.adjoint() * s;
        let dev = (p - eplab_core::Mat2::identity()).max_abs();
        assert!(dev < 1e-12, "S†S − 1 = {dev}");
    }
}

#[test]
fn noise_has_the_requested_spread() {
    let fam = SyntheticFamily::b38();
    let clean = fam.spectrum_at(1.8, 41.7, &NoiseSpec::noiseless()).unwrap();
    let sigma = 0.01;
    let noisy = fam.spectrum_at(1.8, 41.7, &NoiseSpec::gaussian(sigma, 17)).unwrap();
    let mut xs = Vec::new();
    for (a, b) in noisy.s.iter().zip(&clean.s) {
        for i in 0..2 {
            for j in 0..2 {
                let d = a.get(i, j) - b.get(i, j);
                xs.push(d.re);
                xs.push(d.im);
            }
        }
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((std / sigma - 1.0).abs() < 0.05, "std {std}");
    assert!(mean.abs() < 5.0 * sigma / n.sqrt(), "mean {mean}");
}

#[test]
fn noise_streams_are_independent_and_reproducible() {
    let fam = SyntheticFamily::b0();
    let a = fam.spectrum_at(1.7, 41.2, &NoiseSpec::gaussian(0.01, 3)).unwrap();
    let b = fam.spectrum_at(1.7, 41.2, &NoiseSpec::gaussian(0.01, 3)).unwrap();
    let c2 = fam.spectrum_at(1.7, 41.2, &NoiseSpec::gaussian(0.01, 3).with_stream(1)).unwrap();
    assert_eq!(a, b);
    assert!(a.max_deviation(&c2) > 0.0);
}

#[test]
fn fit_residual_matches_noise_level() {
    let fam = SyntheticFamily::b38();
    for (k, sigma) in [0.002, 0.005, 0.02].into_iter().enumerate() {
        let sp = fam.spectrum_at(1.9, 41.9, &NoiseSpec::gaussian(sigma, k as u64)).unwrap();
        let fit = fit_spectrum(&sp, &FitConfig::default(), None).unwrap();
        assert!((fit.residual_rms / sigma - 1.0).abs() < 0.1, "sigma {sigma}: rms {}", fit.residual_rms);
    }
}

#[test]
fn add_noise_leaves_zero_sigma_untouched() {
    let h = EffHamiltonian::from_pauli(c(99.5, -0.2), c(100.5, -0.3), c(0.4, -0.05), c(0.0, 0.0)).unwrap();
    let w = CouplingSet::antenna([[0.1, 0.05], [0.02, 0.12]]).unwrap();
    let sp = synth_spectrum(&h, &w, 100.0, 4.0, 0.01, &NoiseSpec::noiseless(), SpectrumMeta::default()).unwrap();
    let mut s = sp.s.clone();
    add_noise(&mut s, &NoiseSpec::gaussian(0.0, 5));
    assert_eq!(s, sp.s);
}
