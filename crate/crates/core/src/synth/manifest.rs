//! Index of a directory of synthesized spectra.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scan::grid::ParamGrid;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// CSV path relative to the manifest's directory.
    pub file: String,
    pub s_mm: f64,
    pub delta_mm: f64,
    pub stream: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub family: String,
    #[serde(rename = "B_mT")]
    pub b_mt: f64,
    pub sigma: f64,
    pub seed: u64,
    pub grid: Option<ParamGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }
}

/// Canonical file name for grid point `k`.
pub fn spectrum_file_name(k: usize, s: f64, delta: f64) -> String {
    format!("spec_{k:06}_s{s:.4}_d{delta:.4}.csv")
}
