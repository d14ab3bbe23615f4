//! Two-parameter synthetic families `H^eff(s, δ)` with a planted exceptional point.
//!
//! Every entry is affine in `(s − s*, δ − δ*)`; the coefficients live in JSON presets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::EffHamiltonian;
use crate::scan::grid::ParamGrid;
use crate::synth::coupling::CouplingSet;
use crate::synth::spectrum::{synth_spectrum, NoiseSpec, Spectrum, SpectrumMeta};
use crate::C64;

const PRESETS: [(&str, &str); 2] = [
    ("b38", include_str!("../../presets/b38.json")),
    ("b0", include_str!("../../presets/b0.json")),
];

/// Complex coefficient triple `c0 + ds·(s − s*) + dd·(δ − δ*)`, each as `[re, im]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineEntry {
    pub c0: [f64; 2],
    pub ds: [f64; 2],
    pub dd: [f64; 2],
}

impl AffineEntry {
    pub fn eval(&self, x: f64, y: f64) -> C64 {
        let c = |v: [f64; 2]| C64::new(v[0], v[1]);
        c(self.c0) + c(self.ds) * x + c(self.dd) * y
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyEntries {
    pub e1: AffineEntry,
    pub e2: AffineEntry,
    pub h1: AffineEntry,
    pub h2: AffineEntry,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpLocation {
    pub s_mm: f64,
    pub delta_mm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub s_min: f64,
    pub s_max: f64,
    pub delta_min: f64,
    pub delta_max: f64,
}

/// `τ(s, δ) = atan(num/den)` with both affine in `(s − s*, δ − δ*)` as `[c0, ds, dd]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauProfile {
    pub num: [f64; 3],
    pub den: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumDefaults {
    pub center_mhz: f64,
    pub span_mhz: f64,
    pub step_mhz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticFamily {
    pub schema_version: u32,
    pub name: String,
    pub b_mt: f64,
    pub ep: EpLocation,
    pub bounds: Bounds,
    /// Default analysis window.
    pub window: ParamGrid,
    pub entries: FamilyEntries,
    /// Antenna couplings `W_aμ`; dissipative rows are derived per point.
    pub antenna: [[f64; 2]; 2],
    pub tau_profile: TauProfile,
    pub spectrum: SpectrumDefaults,
}

impl SyntheticFamily {
    pub fn preset_names() -> Vec<&'static str> {
        PRESETS.iter().map(|p| p.0).collect()
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS
            .iter()
            .find(|p| p.0 == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown family preset {name:?} (known: b38, b0)")))?;
        Self::from_json(text)
    }

    pub fn b38() -> Self {
        Self::preset("b38").expect("shipped preset is valid")
    }

    pub fn b0() -> Self {
        Self::preset("b0").expect("shipped preset is valid")
    }

    /// Parses and validates a family. Passivity is checked at the four corners of the
    /// bounds, which covers the whole rectangle since the dissipation Gram matrix is affine.
    pub fn from_json(text: &str) -> Result<Self> {
        let fam: SyntheticFamily = serde_json::from_str(text)?;
        fam.validate()?;
        Ok(fam)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != 1 {
            return Err(Error::Format(format!("unsupported family schema_version {}", self.schema_version)));
        }
        let b = &self.bounds;
        if !(b.s_min < b.s_max && b.delta_min < b.delta_max) {
            return Err(Error::InvalidArgument("family bounds not ordered".into()));
        }
        self.window.validate()?;
        if !self.contains(self.ep.s_mm, self.ep.delta_mm) {
            return Err(Error::InvalidArgument("planted EP lies outside the family bounds".into()));
        }
        for (s, d) in [(b.s_min, b.delta_min), (b.s_min, b.delta_max), (b.s_max, b.delta_min), (b.s_max, b.delta_max)] {
            self.family_at(s, d)?;
        }
        Ok(())
    }

    pub fn contains(&self, s: f64, delta: f64) -> bool {
        let b = &self.bounds;
        let tol = 1e-9;
        s.is_finite()
            && delta.is_finite()
            && s >= b.s_min - tol
            && s <= b.s_max + tol
            && delta >= b.delta_min - tol
            && delta <= b.delta_max + tol
    }

    fn offsets(&self, s: f64, delta: f64) -> Result<(f64, f64)> {
        if !self.contains(s, delta) {
            return Err(Error::OutOfBounds { s, delta });
        }
        Ok((s - self.ep.s_mm, delta - self.ep.delta_mm))
    }

    /// The planted effective Hamiltonian.
    pub fn hamiltonian_at(&self, s: f64, delta: f64) -> Result<EffHamiltonian> {
        let (x, y) = self.offsets(s, delta)?;
        let e = &self.entries;
        EffHamiltonian::from_pauli(e.e1.eval(x, y), e.e2.eval(x, y), e.h1.eval(x, y), e.h2.eval(x, y))
    }

    /// Effective Hamiltonian and full couplings. The dissipative rows carry whatever width the
    /// antennas do not: `Σ_diss W Wᵀ = −K/π − Wa Waᵀ` with `K` the real symmetric part of the
    /// anti-Hermitian part of `H^eff`.
    pub fn family_at(&self, s: f64, delta: f64) -> Result<(EffHamiltonian, CouplingSet)> {
        let h = self.hamiltonian_at(s, delta)?;
        let w = dissipative_completion(&h, self.antenna).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::InvalidArgument(format!("family {} at ({s}, {delta}): {m}", self.name)),
            e => e,
        })?;
        Ok((h, w))
    }

    pub fn tau_at(&self, s: f64, delta: f64) -> Result<f64> {
        let (x, y) = self.offsets(s, delta)?;
        let a = |c: [f64; 3]| c[0] + c[1] * x + c[2] * y;
        let (num, den) = (a(self.tau_profile.num), a(self.tau_profile.den));
        if den == 0.0 {
            return Ok(if num == 0.0 { 0.0 } else { num.signum() * std::f64::consts::FRAC_PI_2 });
        }
        Ok((num / den).atan())
    }

    pub fn meta_at(&self, s: f64, delta: f64) -> SpectrumMeta {
        SpectrumMeta { s_mm: s, delta_mm: delta, b_mt: self.b_mt }
    }

    /// Spectrum on the family's default frequency grid.
    pub fn spectrum_at(&self, s: f64, delta: f64, noise: &NoiseSpec) -> Result<Spectrum> {
        let (h, w) = self.family_at(s, delta)?;
        let d = &self.spectrum;
        synth_spectrum(&h, &w, d.center_mhz, d.span_mhz, d.step_mhz, noise, self.meta_at(s, delta))
    }

    /// Spectra for every grid point, in grid order. Point `k` draws from noise stream `k`,
    /// so the result does not depend on scheduling.
    pub fn spectra_on_grid(&self, grid: &ParamGrid, sigma: f64, seed: u64) -> Vec<Result<Spectrum>> {
        (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let (s, d) = grid.point_at(k);
                self.spectrum_at(s, d, &NoiseSpec::gaussian(sigma, seed).with_stream(k as u64))
            })
            .collect()
    }
}

/// Completes antenna couplings `wa` with two dissipative rows so that `H^eff` is reproduced.
pub fn dissipative_completion(heff: &EffHamiltonian, wa: [[f64; 2]; 2]) -> Result<CouplingSet> {
    CouplingSet::with_dissipation(wa, dissipation_gram(heff, wa)?)
}

/// `−K/π − Wa Waᵀ`, the Gram matrix the dissipative channels must supply.
pub fn dissipation_gram(heff: &EffHamiltonian, wa: [[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let pi = std::f64::consts::PI;
    let ga = CouplingSet::antenna(wa)?.antenna_gram();
    let k = [[heff.e1().im, heff.h1().im], [heff.h1().im, heff.e2().im]];
    let mut g = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            g[i][j] = -k[i][j] / pi - ga[i][j];
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_plant_eps() {
        for (fam, s, d) in [(SyntheticFamily::b38(), 1.72, 41.78), (SyntheticFamily::b0(), 1.68, 41.19)] {
            let (h, w) = fam.family_at(s, d).unwrap();
            assert!(h.is_ep(1e-12, 1e-6), "{}", fam.name);
            assert_eq!(w.channels(), 4);
        }
    }

    #[test]
    fn b0_is_complex_symmetric() {
        let fam = SyntheticFamily::b0();
        for (s, d) in [(1.68, 41.19), (1.3, 40.8), (2.8, 42.3)] {
            assert_eq!(fam.hamiltonian_at(s, d).unwrap().h2(), C64::new(0.0, 0.0));
            assert_eq!(fam.tau_at(s, d).unwrap(), 0.0);
        }
    }

    #[test]
    fn out_of_bounds() {
        let fam = SyntheticFamily::b38();
        assert!(matches!(fam.family_at(0.5, 41.78), Err(Error::OutOfBounds { .. })));
        assert!(matches!(fam.family_at(1.72, f64::NAN), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn unknown_preset_and_unknown_keys() {
        assert!(SyntheticFamily::preset("b12").is_err());
        let mut v: serde_json::Value = serde_json::from_str(PRESETS[0].1).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(SyntheticFamily::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn completion_reproduces_widths() {
        let fam = SyntheticFamily::b38();
        let (h, w) = fam.family_at(1.9, 42.5).unwrap();
        let internal = w.internal(&h);
        let m = internal.matrix();
        // internal Hamiltonian is Hermitian
        assert!((m - m.adjoint()).max_abs() < 1e-12);
    }
}
