mod analyze;
mod config;
mod fit;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{pick, Failure, RunConfig, EXIT_USAGE};

/// Synthesize, fit and analyze two-level resonance spectra around an exceptional point.
#[derive(Parser, Debug)]
#[command(name = "eplab", version)]
struct Cli {
    /// Worker threads (default: number of processors).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// JSON run configuration; flags take precedence over its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write one spectrum CSV (plus JSON sidecar) per grid point and a manifest.
    Synth(synth::SynthArgs),
    /// Fit every spectrum of a manifest or file list.
    Fit(fit::FitArgs),
    /// Parameter-plane analysis.
    #[command(subcommand)]
    Analyze(analyze::AnalyzeCmd),
}

/// Fit settings shared by commands that fit spectra.
#[derive(Args, Debug, Clone, Default)]
pub struct FitFlags {
    /// S entries to fit, e.g. `S11` or `S11,S22` (default: all four).
    #[arg(long)]
    pub mask: Option<String>,
    /// Maximum number of optimizer starts.
    #[arg(long)]
    pub n_starts: Option<usize>,
    /// Evaluation budget per start, in units of (parameters + 1).
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Seed of the start perturbations.
    #[arg(long)]
    pub fit_seed: Option<u64>,
    /// Use forward-difference instead of analytic derivatives.
    #[arg(long)]
    pub fd_jacobian: bool,
    /// Run all starts even after one reaches the noise floor.
    #[arg(long)]
    pub no_early_stop: bool,
}

impl FitFlags {
    pub fn resolve(&self, file: &RunConfig) -> Result<eplab_core::fit::FitConfig, Failure> {
        use eplab_core::fit::{ChannelMask, JacobianMode};
        let mut c = file.fit.clone().unwrap_or_default();
        if let Some(m) = &self.mask {
            c.mask = ChannelMask::parse(m)?;
        }
        if let Some(n) = self.n_starts {
            c.n_starts = n;
        }
        if let Some(n) = self.max_iterations {
            c.max_iterations = n;
        }
        if let Some(s) = self.fit_seed {
            c.seed = s;
        }
        if self.fd_jacobian {
            c.jacobian = JacobianMode::ForwardDifference;
        }
        if self.no_early_stop {
            c.early_stop = false;
        }
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(j) = pick(&cli.jobs, &file.jobs) {
        if j == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Failure::usage(format!("--jobs: {e}")))?;
    }
    match &cli.cmd {
        Command::Synth(a) => synth::run(a, &file),
        Command::Fit(a) => fit::run(a, &file),
        Command::Analyze(a) => analyze::run(a, &file),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("eplab: {f}");
            ExitCode::from(f.code)
        }
    }
}
