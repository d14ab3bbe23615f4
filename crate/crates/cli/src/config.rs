//! Run configuration file, resolution helpers, config hashing and exit codes.

use std::fmt;
use std::path::{Path, PathBuf};

use eplab_core::fit::FitConfig;
use eplab_core::scan::ParamGrid;
use eplab_core::synth::SyntheticFamily;
use eplab_core::Error;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "EPLAB_OUT";

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, msg: msg.into() }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Failure { code: EXIT_DATA, msg: msg.into() }
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Failure { code: EXIT_NUMERIC, msg: msg.into() }
    }

    pub fn context(self, ctx: impl fmt::Display) -> Self {
        Failure { code: self.code, msg: format!("{ctx}: {}", self.msg) }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::OutOfBounds { .. } => EXIT_USAGE,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Format(_) => EXIT_DATA,
        _ => EXIT_NUMERIC,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: exit_code(&e), msg: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::data(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::data(e.to_string())
    }
}

/// Contents of `--config`. Every key is optional; command-line flags take precedence.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: Option<String>,
    pub grid: Option<String>,
    pub point: Option<String>,
    pub sigma: Option<f64>,
    pub seed: Option<u64>,
    pub input: Option<PathBuf>,
    pub files: Option<Vec<PathBuf>>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub fit: Option<FitConfig>,
    pub max_failure_fraction: Option<f64>,
    pub fit_sigma: Option<f64>,
    pub start: Option<String>,
    pub eps_curve: Option<f64>,
    pub curve: Option<PathBuf>,
    pub eps_cross: Option<f64>,
    pub eps_pt: Option<f64>,
    pub phase_tol: Option<f64>,
    pub center: Option<String>,
    pub radius: Option<f64>,
    pub shape: Option<String>,
    pub loop_points: Option<usize>,
    pub turns: Option<usize>,
    pub max_refinements: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))
    }
}

/// First of `flag` and `file`.
pub fn pick<T: Clone>(flag: &Option<T>, file: &Option<T>) -> Option<T> {
    flag.clone().or_else(|| file.clone())
}

/// A preset name or the path of a family JSON file.
pub fn resolve_family(spec: &str) -> Result<SyntheticFamily, Failure> {
    if SyntheticFamily::preset_names().contains(&spec) {
        return Ok(SyntheticFamily::preset(spec)?);
    }
    let p = Path::new(spec);
    if p.is_file() {
        let text = std::fs::read_to_string(p)?;
        return SyntheticFamily::from_json(&text).map_err(|e| Failure::data(format!("family file {spec}: {e}")));
    }
    Err(Failure::usage(format!(
        "unknown family {spec:?}: expected one of {} or a family JSON file",
        SyntheticFamily::preset_names().join(", ")
    )))
}

pub fn parse_pair(text: &str, what: &str) -> Result<(f64, f64), Failure> {
    let bad = || Failure::usage(format!("{what} {text:?}: expected two numbers as s,delta"));
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(bad());
    }
    Ok((a, b))
}

/// `--grid` wins over `--point`; without either the fallback is used.
pub fn resolve_grid(grid: Option<String>, point: Option<String>, fallback: Option<ParamGrid>) -> Result<ParamGrid, Failure> {
    match (grid, point) {
        (Some(g), _) => Ok(ParamGrid::parse(&g)?),
        (None, Some(p)) => {
            let (s, d) = parse_pair(&p, "point")?;
            Ok(ParamGrid::point(s, d))
        }
        (None, None) => fallback.ok_or_else(|| Failure::usage("a grid (--grid) or point (--point) is required")),
    }
}

/// Output directory: flag, config file, `$EPLAB_OUT`, then the working directory. It must exist.
pub fn output_dir(flag: &Option<PathBuf>, file: &Option<PathBuf>) -> Result<PathBuf, Failure> {
    let dir = pick(flag, file)
        .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    if !dir.is_dir() {
        return Err(Failure::data(format!("output directory {} does not exist", dir.display())));
    }
    let probe = dir.join(".eplab-write-probe");
    std::fs::write(&probe, b"").map_err(|e| Failure::data(format!("output directory {} is not writable: {e}", dir.display())))?;
    let _ = std::fs::remove_file(probe);
    Ok(dir)
}

/// First 16 hex digits of the SHA-256 of the canonical JSON form of `v`.
pub fn config_hash(v: &serde_json::Value) -> String {
    let text = serde_json::to_string(v).expect("JSON values serialize");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}
