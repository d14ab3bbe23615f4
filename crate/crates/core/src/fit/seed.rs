//! Starting points for the S-matrix fit.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fit::params::{pack, Antenna, N_PARAMS};
use crate::model::Mat2;
use crate::synth::Spectrum;
use crate::{EffHamiltonian, C64};

const TWO_PI: f64 = std::f64::consts::TAU;

/// Robust estimate of the per-component noise level from second differences of all
/// eight real S components (`std(Δ²x) = √6 σ` for white noise).
pub fn noise_floor(spec: &Spectrum) -> f64 {
    let n = spec.len();
    if n < 3 {
        return 0.0;
    }
    let comp = |m: &Mat2<f64>, k: usize| {
        let z = m.m[k / 4][(k / 2) % 2];
        if k % 2 == 0 {
            z.re
        } else {
            z.im
        }
    };
    let mut d: Vec<f64> = Vec::with_capacity(8 * (n - 2));
    for w in spec.s.windows(3) {
        for k in 0..8 {
            d.push((comp(&w[2], k) - 2.0 * comp(&w[1], k) + comp(&w[0], k)).abs());
        }
    }
    let mid = d.len() / 2;
    let (_, med, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    *med / (0.674_489_75 * 6f64.sqrt())
}

/// A resolved resonance: position, full width at half height of `‖S − 1‖²`, sample index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub f: f64,
    pub width: f64,
    pub index: usize,
}

/// Outcome of peak picking.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedReport {
    pub params: [f64; N_PARAMS],
    pub peaks: Vec<Peak>,
    /// True when only one peak was found and the doublet was split symmetrically.
    pub fallback: bool,
}

/// `‖S − 1‖_F²` per frequency, smoothed by a centred moving average of half-width `k`.
fn response(spec: &Spectrum, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = spec
        .s
        .iter()
        .map(|m| {
            let d = *m - Mat2::identity();
            d.m.iter().flatten().map(|z| z.norm_sqr()).sum()
        })
        .collect();
    let n = raw.len();
    let mut pre = vec![0.0; n + 1];
    for i in 0..n {
        pre[i + 1] = pre[i] + raw[i];
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(k);
            let hi = (i + k + 1).min(n);
            (pre[hi] - pre[lo]) / (hi - lo) as f64
        })
        .collect()
}

fn local_maxima(a: &[f64]) -> Vec<(usize, f64)> {
    // (index, prominence)
    let n = a.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if a[i] > a[i - 1] {
            // plateau handling: walk to the end of equal values
            let mut j = i;
            while j + 1 < n && a[j + 1] == a[i] {
                j += 1;
            }
            if j + 1 < n && a[j + 1] < a[i] {
                let peak = a[i];
                let mut left_min = peak;
                let mut l = i;
                while l > 0 && a[l - 1] <= peak {
                    l -= 1;
                    left_min = left_min.min(a[l]);
                }
                let mut right_min = peak;
                let mut r = j;
                while r + 1 < n && a[r + 1] <= peak {
                    r += 1;
                    right_min = right_min.min(a[r]);
                }
                out.push(((i + j) / 2, peak - left_min.max(right_min)));
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Full width at half height around `idx`, searching no further than `lo..=hi`.
/// A side that does not drop to half height is mirrored from the other side.
fn half_height_width(freqs: &[f64], a: &[f64], idx: usize, lo: usize, hi: usize) -> Option<f64> {
    let half = 0.5 * a[idx];
    let cross = |from: usize, to: usize| -> Option<f64> {
        let mut i = from;
        while i != to {
            let next = if to > from { i + 1 } else { i - 1 };
            if a[next] < half {
                let t = (a[i] - half) / (a[i] - a[next]);
                return Some((freqs[i] + t * (freqs[next] - freqs[i]) - freqs[idx]).abs());
            }
            i = next;
        }
        None
    };
    match (cross(idx, lo), cross(idx, hi)) {
        (Some(l), Some(r)) => Some(l + r),
        (Some(l), None) => Some(2.0 * l),
        (None, Some(r)) => Some(2.0 * r),
        (None, None) => None,
    }
}

/// Peak-picking seed. Positions and widths come from the maxima of `‖S − 1‖²`,
/// antenna couplings from the reflection dip depths at each peak, and `h1` starts at
/// 10% of `|e1 − e2|`. A single peak is split symmetrically.
pub fn seed_initializer(spec: &Spectrum) -> Result<SeedReport> {
    let sigma = noise_floor(spec);
    let step = spec.step();
    let k = ((0.05 / step).round() as usize).clamp(1, spec.len() / 20 + 1);
    let a = response(spec, k);
    let amax = a.iter().copied().fold(0.0, f64::max);
    let noise_level = 8.0 * sigma * sigma;
    if !(amax > 1e-10 + 50.0 * noise_level) {
        return Err(Error::Unresolvable);
    }
    let mut maxima: Vec<(usize, f64)> = local_maxima(&a)
        .into_iter()
        .filter(|&(i, p)| a[i] >= 0.02 * amax && p >= 0.02 * amax && p > 10.0 * noise_level / (k as f64).sqrt())
        .collect();
    maxima.sort_by(|x, y| y.1.total_cmp(&x.1));
    maxima.truncate(2);
    maxima.sort_by_key(|m| m.0);
    let n = spec.len();
    let mut peaks = Vec::new();
    match maxima[..] {
        [(i, _), (j, _)] => {
            let valley = (i..=j).min_by(|&x, &y| a[x].total_cmp(&a[y])).unwrap_or(i);
            for (idx, lo, hi) in [(i, 0, valley), (j, valley, n - 1)] {
                let w = half_height_width(&spec.freqs, &a, idx, lo, hi).ok_or(Error::Unresolvable)?;
                peaks.push(Peak { f: spec.freqs[idx], width: w, index: idx });
            }
        }
        [(i, _)] => {
            let w = half_height_width(&spec.freqs, &a, i, 0, n - 1).ok_or(Error::Unresolvable)?;
            peaks.push(Peak { f: spec.freqs[i], width: w, index: i });
        }
        _ => {
            // global maximum without a clean local peak (e.g. at the grid edge)
            let i = (0..n).max_by(|&x, &y| a[x].total_cmp(&a[y])).unwrap_or(0);
            let w = half_height_width(&spec.freqs, &a, i, 0, n - 1).ok_or(Error::Unresolvable)?;
            peaks.push(Peak { f: spec.freqs[i], width: w, index: i });
        }
    }
    let fallback = peaks.len() == 1;
    let (modes, at): (Vec<(f64, f64)>, Vec<usize>) = if fallback {
        let p = peaks[0];
        (vec![(p.f + 0.25 * p.width, 0.5 * p.width), (p.f - 0.25 * p.width, 0.5 * p.width)], vec![p.index, p.index])
    } else {
        (peaks.iter().map(|p| (p.f, p.width)).collect(), peaks.iter().map(|p| p.index).collect())
    };
    let mut wa: Antenna = [[0.0; 2]; 2];
    for (j, (&(_, gamma), &idx)) in modes.iter().zip(&at).enumerate() {
        for (x, row) in wa.iter_mut().enumerate() {
            let depth = (1.0 - spec.s[idx].m[x][x].norm_sqr()).clamp(0.0, 0.99);
            let gamma_a = 0.5 * gamma * (1.0 - (1.0 - depth).sqrt());
            row[j] = (gamma_a.max(1e-6 * gamma) / TWO_PI).sqrt();
        }
    }
    let e1 = C64::new(modes[0].0, -0.5 * modes[0].1);
    let e2 = C64::new(modes[1].0, -0.5 * modes[1].1);
    let off = 0.1 * (e1 - e2).norm();
    let h = EffHamiltonian::from_pauli(e1, e2, C64::new(off, 0.0), C64::new(0.0, 0.0))?;
    Ok(SeedReport { params: pack(&h, &wa)?, peaks, fallback })
}

/// Direct estimate from the linear relation `M(f)⁻¹ = f·A − B` with `M = (1 − S)/(2πi)`,
/// `A = (Wa Waᵀ)⁻¹` and `B = Wa⁻ᵀ H Wa⁻¹`, solved as `f M A − M B = 1` in least squares over
/// frequencies where `M` is large. Needs all four S entries; `None` if the estimate is not
/// physical (`A` not positive definite).
pub fn algebraic_seed(spec: &Spectrum) -> Option<[f64; N_PARAMS]> {
    let scale = C64::new(0.0, -1.0 / TWO_PI);
    let ms: Vec<Mat2<f64>> = spec.s.iter().map(|s| (Mat2::identity() - *s).scale(scale)).collect();
    let norms: Vec<f64> = ms.iter().map(|m| m.m.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect();
    let nmax = norms.iter().copied().fold(0.0, f64::max);
    if !(nmax > 0.0) {
        return None;
    }
    let imax = norms.iter().position(|&x| x == nmax)?;
    let f_ref = spec.freqs[imax];
    let sel: Vec<usize> = (0..spec.len()).filter(|&i| norms[i] >= 0.05 * nmax).collect();
    if sel.len() < 4 {
        return None;
    }
    // unknowns: a11, a12, a22, then B entries (re, im) in row-major order
    let rows = sel.len() * 8;
    let mut lhs = DMatrix::<f64>::zeros(rows, 11);
    let mut rhs = DVector::<f64>::zeros(rows);
    let i_unit = C64::new(0.0, 1.0);
    for (n, &fi) in sel.iter().enumerate() {
        let m = &ms[fi];
        let f = spec.freqs[fi] - f_ref;
        // weight rows by 1/‖M‖ so that all selected frequencies count comparably
        let wgt = 1.0 / norms[fi];
        for x in 0..2 {
            for y in 0..2 {
                let mut coef = [C64::new(0.0, 0.0); 11];
                for k in 0..2 {
                    let fm = m.m[x][k] * f;
                    match (k, y) {
                        (0, 0) => coef[0] += fm,
                        (1, 1) => coef[2] += fm,
                        _ => coef[1] += fm,
                    }
                    let col = 3 + 2 * (2 * k + y);
                    coef[col] -= m.m[x][k];
                    coef[col + 1] -= m.m[x][k] * i_unit;
                }
                let target = if x == y { 1.0 } else { 0.0 };
                let r = n * 8 + 2 * (2 * x + y);
                for (c, v) in coef.iter().enumerate() {
                    lhs[(r, c)] = v.re * wgt;
                    lhs[(r + 1, c)] = v.im * wgt;
                }
                rhs[r] = target * wgt;
            }
        }
    }
    let sol = lhs.svd(true, true).solve(&rhs, 1e-12).ok()?;
    let (a11, a12, a22) = (sol[0], sol[1], sol[2]);
    let det = a11 * a22 - a12 * a12;
    if !(a11 > 0.0 && det > 0.0) {
        return None;
    }
    // G = A⁻¹ and its lower Cholesky factor is Wa (W12 = 0)
    let (g11, g12, g22) = (a22 / det, -a12 / det, a11 / det);
    let l11 = g11.sqrt();
    let l21 = g12 / l11;
    let l22 = (g22 - l21 * l21).max(0.0).sqrt();
    if !(l22 > 0.0) {
        return None;
    }
    let wa: Antenna = [[l11, 0.0], [l21, l22]];
    let b = |k: usize| C64::new(sol[3 + 2 * k], sol[4 + 2 * k]);
    let bm = Mat2::new(b(0), b(1), b(2), b(3));
    let w = Mat2::from_real(l11, 0.0, l21, l22);
    let hm = w.transpose() * bm * w + Mat2::scalar(C64::new(f_ref, 0.0));
    let h = EffHamiltonian::from_matrix(&hm).ok()?;
    pack(&h, &wa).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{dissipative_completion, synth_spectrum, NoiseSpec, SpectrumMeta};

    fn spectrum(h: &EffHamiltonian, sigma: f64) -> Spectrum {
        let w = dissipative_completion(h, [[0.18, 0.06], [0.05, 0.17]]).unwrap();
        synth_spectrum(h, &w, 100.0, 40.0, 0.01, &NoiseSpec::gaussian(sigma, 3), SpectrumMeta::default()).unwrap()
    }

    #[test]
    fn noise_floor_estimates_sigma() {
        let h = EffHamiltonian::from_pauli(C64::new(101.0, -0.5), C64::new(99.0, -0.7), C64::new(0.2, 0.0), C64::new(0.0, 0.0))
            .unwrap();
        let est = noise_floor(&spectrum(&h, 0.01));
        assert!((est / 0.01 - 1.0).abs() < 0.05, "{est}");
        assert!(noise_floor(&spectrum(&h, 0.0)) < 1e-6);
    }

    #[test]
    fn algebraic_seed_is_exact_without_noise() {
        let h = EffHamiltonian::from_pauli(C64::new(100.5, -0.5), C64::new(99.6, -1.2), C64::new(0.3, -0.25), C64::new(0.1, 0.0))
            .unwrap();
        let p = algebraic_seed(&spectrum(&h, 0.0)).unwrap();
        let (hs, _) = crate::fit::params::unpack(&p).unwrap();
        let d = hs.eigenvalues().distance(&h.eigenvalues());
        assert!(d < 1e-6, "{d}");
    }

    #[test]
    fn flat_spectrum_is_unresolvable() {
        let freqs: Vec<f64> = (0..401).map(|i| 90.0 + 0.05 * i as f64).collect();
        let s = vec![Mat2::identity(); freqs.len()];
        let spec = Spectrum::new(freqs, s, SpectrumMeta::default(), NoiseSpec::default()).unwrap();
        assert!(matches!(seed_initializer(&spec), Err(Error::Unresolvable)));
    }
}
