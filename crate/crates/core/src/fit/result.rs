use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::synth::{CouplingSet, SpectrumMeta};
use crate::{EffHamiltonian, EigenPair, C64};

/// Gauge-fixed fit outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub h: EffHamiltonian,
    pub w: CouplingSet,
    pub tau: f64,
    pub residual_rms: f64,
    pub converged: bool,
    /// Diagonal of `JᵀJ` at the optimum, in the optimizer's packing order.
    pub covariance_proxy: Vec<f64>,
    pub starts_run: usize,
    pub meta: SpectrumMeta,
}

/// JSON layout of a [`FitResult`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRecord {
    pub schema_version: u32,
    pub e1: [f64; 2],
    pub e2: [f64; 2],
    pub h1: [f64; 2],
    pub h2: [f64; 2],
    #[serde(rename = "W")]
    pub w: Vec<[f64; 2]>,
    pub tau: Option<f64>,
    pub residual_rms: f64,
    pub converged: bool,
    #[serde(default)]
    pub covariance_proxy: Vec<f64>,
    #[serde(default)]
    pub starts_run: usize,
    #[serde(default)]
    pub s_mm: f64,
    #[serde(default)]
    pub delta_mm: f64,
    #[serde(rename = "B_mT", default)]
    pub b_mt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

impl FitResult {
    pub fn eigenvalues(&self) -> EigenPair {
        self.h.eigenvalues()
    }

    pub fn to_record(&self, config_hash: Option<&str>) -> FitRecord {
        let (e1, e2, h1, h2) = self.h.to_pauli();
        FitRecord {
            schema_version: 1,
            e1: pair(e1),
            e2: pair(e2),
            h1: pair(h1),
            h2: pair(h2),
            w: self.w.rows().to_vec(),
            tau: self.tau.is_finite().then_some(self.tau),
            residual_rms: self.residual_rms,
            converged: self.converged,
            covariance_proxy: self.covariance_proxy.clone(),
            starts_run: self.starts_run,
            s_mm: self.meta.s_mm,
            delta_mm: self.meta.delta_mm,
            b_mt: self.meta.b_mt,
            config_hash: config_hash.map(str::to_owned),
        }
    }

    pub fn from_record(r: &FitRecord) -> Result<Self> {
        let c = |v: [f64; 2]| C64::new(v[0], v[1]);
        Ok(FitResult {
            h: EffHamiltonian::from_pauli(c(r.e1), c(r.e2), c(r.h1), c(r.h2))?,
            w: CouplingSet::new(r.w.clone())?,
            tau: r.tau.unwrap_or(f64::NAN),
            residual_rms: r.residual_rms,
            converged: r.converged,
            covariance_proxy: r.covariance_proxy.clone(),
            starts_run: r.starts_run,
            meta: SpectrumMeta { s_mm: r.s_mm, delta_mm: r.delta_mm, b_mt: r.b_mt },
        })
    }

    pub fn write_json(&self, path: &Path, config_hash: Option<&str>) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, &self.to_record(config_hash))?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let r: FitRecord = serde_json::from_reader(File::open(path)?)?;
        Self::from_record(&r)
    }
}
