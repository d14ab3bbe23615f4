use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde_json::json;

use eplab_core::fit::fit_spectrum;
use eplab_core::scan::result::MAX_FAILURE_FRACTION;
use eplab_core::scan::{write_points_csv, ParamGrid, Provenance, ScanPoint};
use eplab_core::synth::{Manifest, Spectrum, MANIFEST_FILE};

use crate::config::{config_hash, output_dir, pick, Failure, RunConfig};
use crate::FitFlags;

pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Directory written by `synth` (its manifest lists the spectra).
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Spectrum CSV files, used when no directory is given.
    pub files: Vec<PathBuf>,
    /// Existing output directory (default: $EPLAB_OUT, then the working directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Largest tolerated share of failed fits before exiting with status 3.
    #[arg(long)]
    pub max_failure_fraction: Option<f64>,
    #[command(flatten)]
    pub fit: FitFlags,
}

struct Job {
    path: PathBuf,
    s: f64,
    delta: f64,
}

fn jobs_from_manifest(dir: &Path) -> Result<(Vec<Job>, Option<ParamGrid>), Failure> {
    let m = Manifest::read(&dir.join(MANIFEST_FILE)).map_err(|e| Failure::from(e).context(dir.join(MANIFEST_FILE).display()))?;
    let jobs: Vec<Job> =
        m.files.iter().map(|e| Job { path: dir.join(&e.file), s: e.s_mm, delta: e.delta_mm }).collect();
    // the summary keeps the grid only if the files list it point by point
    let grid = m.grid.filter(|g| {
        g.len() == jobs.len()
            && jobs.iter().enumerate().all(|(k, j)| {
                let (s, d) = g.point_at(k);
                (s - j.s).abs() <= 1e-9 && (d - j.delta).abs() <= 1e-9
            })
    });
    Ok((jobs, grid))
}

fn result_name(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "spectrum".into());
    format!("{stem}.fit.json")
}

pub fn run(args: &FitArgs, file: &RunConfig) -> Result<(), Failure> {
    let cfg = args.fit.resolve(file)?;
    let max_fail = pick(&args.max_failure_fraction, &file.max_failure_fraction).unwrap_or(MAX_FAILURE_FRACTION);
    if !(0.0..=1.0).contains(&max_fail) {
        return Err(Failure::usage("--max-failure-fraction must lie in [0, 1]"));
    }
    let (jobs, grid, label) = match pick(&args.input, &file.input) {
        Some(dir) => {
            let (j, g) = jobs_from_manifest(&dir)?;
            (j, g, dir.display().to_string())
        }
        None => {
            let files = if args.files.is_empty() { file.files.clone().unwrap_or_default() } else { args.files.clone() };
            let jobs = files.into_iter().map(|p| Job { path: p, s: f64::NAN, delta: f64::NAN }).collect();
            (jobs, None, "files".to_string())
        }
    };
    if jobs.is_empty() {
        return Err(Failure::usage("no spectra to fit: give --in DIR or spectrum files"));
    }
    if let Some(j) = jobs.iter().find(|j| !j.path.is_file()) {
        return Err(Failure::data(format!("spectrum file {} not found", j.path.display())));
    }
    let out = output_dir(&args.out, &file.out)?;
    let names: Vec<String> = jobs.iter().map(|j| j.path.display().to_string()).collect();
    let hash = config_hash(&json!({ "command": "fit", "inputs": names, "fit": cfg }));

    let points: Vec<Result<ScanPoint, Failure>> = jobs
        .par_iter()
        .map(|j| {
            let sp = match Spectrum::read(&j.path) {
                Ok(sp) => sp,
                Err(e) => {
                    log::warn!("{}: unreadable spectrum: {e}", j.path.display());
                    return Ok(ScanPoint::failed(j.s, j.delta, e.to_string()));
                }
            };
            let (s, d) = (sp.meta.s_mm, sp.meta.delta_mm);
            match fit_spectrum(&sp, &cfg, None) {
                Ok(fr) => {
                    fr.write_json(&out.join(result_name(&j.path)), Some(&hash))?;
                    Ok(ScanPoint::ok(s, d, fr.h, fr.tau, Some(fr.residual_rms)))
                }
                Err(e) => {
                    log::warn!("{}: fit failed: {e}", j.path.display());
                    Ok(ScanPoint::failed(s, d, e.to_string()))
                }
            }
        })
        .collect();
    let points = points.into_iter().collect::<Result<Vec<_>, _>>()?;
    write_points_csv(&out.join(SUMMARY_FILE), &points, Provenance::Fit, &label, grid.as_ref(), Some(&hash))?;
    let failed = points.iter().filter(|p| !p.is_ok()).count();
    println!("fitted {}/{} spectra; summary in {}", points.len() - failed, points.len(), out.join(SUMMARY_FILE).display());
    if failed as f64 > max_fail * points.len() as f64 {
        return Err(Failure::numeric(format!("{failed} of {} fits failed", points.len())));
    }
    Ok(())
}
