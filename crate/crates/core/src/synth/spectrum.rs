//! Sampled S-matrix spectra, the additive noise model, and the CSV + JSON sidecar format.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Mat2;
use crate::EffHamiltonian;
use crate::synth::coupling::CouplingSet;
use crate::synth::smatrix::smatrix_at;
use crate::C64;

pub const SPECTRUM_HEADER: [&str; 9] = [
    "f_MHz", "reS11", "imS11", "reS12", "imS12", "reS21", "imS21", "reS22", "imS22",
];

pub const DEFAULT_SPAN_MHZ: f64 = 40.0;
pub const DEFAULT_STEP_MHZ: f64 = 0.01;
const MAX_GRID_POINTS: f64 = 1e7;

/// Additive i.i.d. complex Gaussian noise on every S entry; real and imaginary parts each
/// get standard deviation `sigma`. `stream` selects an independent ChaCha stream under `seed`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        NoiseSpec { sigma, seed, stream: 0 }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        NoiseSpec { stream, ..self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct SpectrumMeta {
    pub s_mm: f64,
    pub delta_mm: f64,
    pub b_mt: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub s: Vec<Mat2<f64>>,
    pub meta: SpectrumMeta,
    pub noise: NoiseSpec,
}

/// JSON sidecar next to each spectrum CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub schema_version: u32,
    pub s_mm: f64,
    pub delta_mm: f64,
    #[serde(rename = "B_mT")]
    pub b_mt: f64,
    pub seed: u64,
    pub sigma: f64,
    #[serde(default)]
    pub stream: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// Uniform grid `start + i·step`, `i = 0..n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrequencyGrid {
    pub start: f64,
    pub step: f64,
    pub n: usize,
}

impl FrequencyGrid {
    /// Grid of width `span` centred on `f0`. A span that is not a multiple of `step` is truncated.
    pub fn centered(f0: f64, span: f64, step: f64) -> Result<Self> {
        if !(f0.is_finite() && span.is_finite() && step.is_finite()) || span <= 0.0 || step <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "frequency grid needs finite span > 0 and step > 0 (span {span}, step {step})"
            )));
        }
        let ratio = span / step;
        if ratio > MAX_GRID_POINTS {
            return Err(Error::InvalidArgument(format!("span/step = {ratio:e} exceeds 1e7")));
        }
        let intervals = (ratio + 1e-9).floor() as usize;
        Ok(FrequencyGrid {
            start: f0 - 0.5 * intervals as f64 * step,
            step,
            n: intervals + 1,
        })
    }

    pub fn frequency(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.frequency(i)).collect()
    }
}

impl Spectrum {
    /// Validates the grid: at least two points, strictly ascending, uniform to `1e-9`
    /// of the step (plus a few ulps of the absolute frequency).
    pub fn new(freqs: Vec<f64>, s: Vec<Mat2<f64>>, meta: SpectrumMeta, noise: NoiseSpec) -> Result<Self> {
        if freqs.len() != s.len() {
            return Err(Error::Format(format!("{} frequencies but {} S samples", freqs.len(), s.len())));
        }
        if freqs.len() < 2 {
            return Err(Error::Format("spectrum needs at least two frequencies".into()));
        }
        if !freqs.iter().all(|f| f.is_finite()) || !s.iter().all(|m| m.is_finite()) {
            return Err(Error::Format("non-finite spectrum value".into()));
        }
        let n = freqs.len();
        let step = (freqs[n - 1] - freqs[0]) / (n - 1) as f64;
        if step <= 0.0 {
            return Err(Error::Format("frequency grid not ascending".into()));
        }
        for (i, w) in freqs.windows(2).enumerate() {
            let d = w[1] - w[0];
            let tol = 1e-9 * step + 8.0 * f64::EPSILON * w[1].abs();
            if d <= 0.0 || (d - step).abs() > tol {
                return Err(Error::Format(format!(
                    "frequency grid not uniform/ascending at row {}: step {d} vs {step}",
                    i + 1
                )));
            }
        }
        Ok(Spectrum { freqs, s, meta, noise })
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn span(&self) -> f64 {
        self.freqs[self.freqs.len() - 1] - self.freqs[0]
    }

    pub fn step(&self) -> f64 {
        self.span() / (self.freqs.len() - 1) as f64
    }

    /// Largest entry-wise deviation from another spectrum on the same grid.
    pub fn max_deviation(&self, other: &Spectrum) -> f64 {
        self.s
            .iter()
            .zip(&other.s)
            .map(|(a, b)| (*a - *b).max_abs())
            .fold(0.0, f64::max)
    }

    pub fn sidecar(&self, config_hash: Option<&str>) -> Sidecar {
        Sidecar {
            schema_version: 1,
            s_mm: self.meta.s_mm,
            delta_mm: self.meta.delta_mm,
            b_mt: self.meta.b_mt,
            seed: self.noise.seed,
            sigma: self.noise.sigma,
            stream: self.noise.stream,
            config_hash: config_hash.map(str::to_owned),
        }
    }

    /// Writes `path` (CSV) and the sidecar next to it (same stem, `.json`).
    pub fn write(&self, path: &Path, config_hash: Option<&str>) -> Result<()> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        w.write_record(SPECTRUM_HEADER)?;
        let mut row = Vec::with_capacity(9);
        for (f, m) in self.freqs.iter().zip(&self.s) {
            row.clear();
            // Debug formatting is the shortest representation that round-trips exactly
            row.push(format!("{f:?}"));
            for z in [m.m[0][0], m.m[0][1], m.m[1][0], m.m[1][1]] {
                row.push(format!("{:?}", z.re));
                row.push(format!("{:?}", z.im));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        let mut side = BufWriter::new(File::create(sidecar_path(path))?);
        serde_json::to_writer_pretty(&mut side, &self.sidecar(config_hash))?;
        side.write_all(b"\n")?;
        side.flush()?;
        Ok(())
    }

    /// Reads a spectrum CSV and its sidecar. A missing sidecar yields zero metadata.
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
        let header = r.headers()?.clone();
        if header.iter().map(str::trim).ne(SPECTRUM_HEADER.iter().copied()) {
            return Err(Error::Format(format!("{}: unexpected spectrum header", path.display())));
        }
        let mut freqs = Vec::new();
        let mut s = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let mut v = [0.0; 9];
            for (k, field) in rec.iter().enumerate().take(9) {
                v[k] = field.trim().parse().map_err(|_| {
                    Error::Format(format!("{}: row {}: cannot parse {field:?}", path.display(), i + 2))
                })?;
            }
            if rec.len() != 9 {
                return Err(Error::Format(format!("{}: row {} has {} fields", path.display(), i + 2, rec.len())));
            }
            freqs.push(v[0]);
            s.push(Mat2::new(
                C64::new(v[1], v[2]),
                C64::new(v[3], v[4]),
                C64::new(v[5], v[6]),
                C64::new(v[7], v[8]),
            ));
        }
        let side = sidecar_path(path);
        let (meta, noise) = if side.exists() {
            let sc: Sidecar = serde_json::from_reader(File::open(&side)?)?;
            (
                SpectrumMeta { s_mm: sc.s_mm, delta_mm: sc.delta_mm, b_mt: sc.b_mt },
                NoiseSpec { sigma: sc.sigma, seed: sc.seed, stream: sc.stream },
            )
        } else {
            (SpectrumMeta::default(), NoiseSpec::default())
        };
        Spectrum::new(freqs, s, meta, noise).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            e => e,
        })
    }
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Samples `smatrix_at` on a grid of width `span` centred on `f0`, then adds noise.
/// With `sigma = 0` the samples are exactly the model values.
pub fn synth_spectrum(
    heff: &EffHamiltonian,
    w: &CouplingSet,
    f0: f64,
    span: f64,
    step: f64,
    noise: &NoiseSpec,
    meta: SpectrumMeta,
) -> Result<Spectrum> {
    let grid = FrequencyGrid::centered(f0, span, step)?;
    if !(noise.sigma >= 0.0 && noise.sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise sigma must be finite and >= 0, got {}", noise.sigma)));
    }
    let freqs = grid.frequencies();
    let mut s = freqs.iter().map(|&f| smatrix_at(heff, w, f)).collect::<Result<Vec<_>>>()?;
    add_noise(&mut s, noise);
    Spectrum::new(freqs, s, meta, *noise)
}

/// Adds noise in place; draws are ordered by frequency, then S11, S12, S21, S22, re before im.
pub fn add_noise(s: &mut [Mat2<f64>], noise: &NoiseSpec) {
    if noise.sigma == 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(noise.stream);
    let normal = Normal::new(0.0, noise.sigma).expect("sigma validated");
    for m in s.iter_mut() {
        for row in m.m.iter_mut() {
            for z in row.iter_mut() {
                let re = normal.sample(&mut rng);
                let im = normal.sample(&mut rng);
                *z += C64::new(re, im);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_4001_points() {
        let g = FrequencyGrid::centered(2450.0, DEFAULT_SPAN_MHZ, DEFAULT_STEP_MHZ).unwrap();
        assert_eq!(g.n, 4001);
        assert!((g.frequency(2000) - 2450.0).abs() < 1e-12);
    }

    #[test]
    fn grid_limits() {
        assert!(FrequencyGrid::centered(0.0, 1.0, 0.0).is_err());
        assert!(FrequencyGrid::centered(0.0, -1.0, 0.1).is_err());
        assert!(FrequencyGrid::centered(0.0, 1e8, 1.0).is_err());
        assert_eq!(FrequencyGrid::centered(0.0, 1e7, 1.0).unwrap().n, 10_000_001);
    }

    #[test]
    fn nonuniform_grid_rejected() {
        let s = vec![Mat2::identity(); 3];
        assert!(Spectrum::new(vec![0.0, 1.0, 2.5], s.clone(), SpectrumMeta::default(), NoiseSpec::default()).is_err());
        assert!(Spectrum::new(vec![2.0, 1.0, 0.0], s, SpectrumMeta::default(), NoiseSpec::default()).is_err());
    }
}
