use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use serde_json::json;

use eplab_core::synth::spectrum::sidecar_path;
use eplab_core::synth::{spectrum_file_name, Manifest, ManifestEntry, NoiseSpec, MANIFEST_FILE};
use eplab_core::Error;

use crate::config::{config_hash, output_dir, pick, resolve_family, resolve_grid, Failure, RunConfig};

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Family preset (`b38`, `b0`) or family JSON file.
    #[arg(long)]
    pub family: Option<String>,
    /// Parameter grid `smin:smax:step x dmin:dmax:step` in mm (default: the family window).
    #[arg(long)]
    pub grid: Option<String>,
    /// Single parameter point `s,delta` in mm.
    #[arg(long, conflicts_with = "grid")]
    pub point: Option<String>,
    /// Noise standard deviation per real component of S.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Existing output directory (default: $EPLAB_OUT, then the working directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &SynthArgs, file: &RunConfig) -> Result<(), Failure> {
    let spec = pick(&args.family, &file.family).ok_or_else(|| Failure::usage("--family is required"))?;
    let fam = resolve_family(&spec)?;
    let grid = resolve_grid(pick(&args.grid, &file.grid), pick(&args.point, &file.point), Some(fam.window))?;
    let sigma = pick(&args.sigma, &file.sigma).unwrap_or(0.0);
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Failure::usage("--sigma must be a finite number >= 0"));
    }
    let seed = pick(&args.seed, &file.seed).unwrap_or(0);
    let out = output_dir(&args.out, &file.out)?;
    let points = grid.points();
    if let Some(&(s, d)) = points.iter().find(|&&(s, d)| !fam.contains(s, d)) {
        return Err(Error::OutOfBounds { s, delta: d }.into());
    }
    let hash = config_hash(&json!({
        "command": "synth", "family": spec, "grid": grid, "sigma": sigma, "seed": seed,
    }));

    let names: Vec<String> = points.iter().enumerate().map(|(k, &(s, d))| spectrum_file_name(k, s, d)).collect();
    let written: Vec<Result<(), Error>> = points
        .par_iter()
        .enumerate()
        .map(|(k, &(s, d))| {
            let sp = fam.spectrum_at(s, d, &NoiseSpec::gaussian(sigma, seed).with_stream(k as u64))?;
            sp.write(&out.join(&names[k]), Some(&hash))
        })
        .collect();
    if let Some((k, e)) = written.into_iter().enumerate().find_map(|(k, r)| r.err().map(|e| (k, e))) {
        for n in &names {
            let p = out.join(n);
            let _ = std::fs::remove_file(sidecar_path(&p));
            let _ = std::fs::remove_file(p);
        }
        return Err(Failure::from(e).context(format!("spectrum {}", names[k])));
    }

    let manifest = Manifest {
        schema_version: 1,
        family: fam.name.clone(),
        b_mt: fam.b_mt,
        sigma,
        seed,
        grid: Some(grid),
        config_hash: Some(hash),
        files: points
            .iter()
            .zip(&names)
            .enumerate()
            .map(|(k, (&(s, d), n))| ManifestEntry { file: n.clone(), s_mm: s, delta_mm: d, stream: k as u64 })
            .collect(),
    };
    manifest.write(&out.join(MANIFEST_FILE))?;
    println!("wrote {} spectra and {} to {}", names.len(), MANIFEST_FILE, out.display());
    Ok(())
}
