use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use eplab_core::model::{extract_tau, gauge_fix, pt_commutator_norm, to_pt_form, PtPhase, PtTolerances};
use eplab_core::scan::braid::MAX_REFINEMENTS;
use eplab_core::scan::{
    braid, circle_loop, difference_map, lobe_structure, locate_ep, repeat_loop, scan_points, square_loop,
    trace_pt_curve, CurveTrace, ParamGrid, ParamSource, ScanResult, ScanSource, TraceOptions, Windowed,
};
use eplab_core::scan::ep::{F_DIFF_THRESHOLD, G_DIFF_THRESHOLD};
use eplab_core::scan::result::MAX_FAILURE_FRACTION;
use eplab_core::synth::{SyntheticFamily, MANIFEST_FILE};
use eplab_core::{EffHamiltonian, Error};

use crate::config::{config_hash, output_dir, parse_pair, pick, resolve_family, Failure, RunConfig};
use crate::FitFlags;

#[derive(Subcommand, Debug)]
pub enum AnalyzeCmd {
    /// Grid scan: per-point eigenvalues, radicand parts and τ, plus the difference maps.
    Scan(SourceArgs),
    /// Locate the exceptional point on a scan.
    Ep(SourceArgs),
    /// Trace the PT curve `Re h·Im h = 0` through the exceptional point.
    Curve(CurveArgs),
    /// Passive-PT normal form at every point of a traced curve.
    Pt(PtArgs),
    /// Track the eigenvalues around a closed loop.
    Braid(BraidArgs),
}

/// Where the Hamiltonians come from.
#[derive(Args, Debug, Clone)]
pub struct SourceArgs {
    /// Family preset (`b38`, `b0`) or family JSON file.
    #[arg(long)]
    pub family: Option<String>,
    /// Scan or fit-summary CSV, or a directory written by `synth` (fitted on the fly).
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Grid `smin:smax:step x dmin:dmax:step` in mm (default: family window or directory manifest).
    #[arg(long)]
    pub grid: Option<String>,
    /// With `--family`: fit spectra synthesized with this noise level instead of using the
    /// exact matrices.
    #[arg(long)]
    pub fit_sigma: Option<f64>,
    /// Noise seed for `--fit-sigma`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Existing output directory (default: $EPLAB_OUT, then the working directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub fit: FitFlags,
}

#[derive(Args, Debug)]
pub struct CurveArgs {
    #[command(flatten)]
    pub src: SourceArgs,
    /// Starting point `s,delta` (default: the located EP).
    #[arg(long)]
    pub start: Option<String>,
    /// Bound on |Re h·Im h| / |h|² (default 1e-9 for family matrices, 1e-3 for scans).
    #[arg(long)]
    pub eps_curve: Option<f64>,
}

#[derive(Args, Debug)]
pub struct PtArgs {
    /// Curve JSON written by `analyze curve`.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Family whose matrices are reduced (default: the curve's source).
    #[arg(long)]
    pub family: Option<String>,
    /// Scan CSV whose nearest grid matrices are reduced.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Bound on |Re h·Im h| / |h|² accepted by the reduction.
    #[arg(long)]
    pub eps_cross: Option<f64>,
    /// Bound on the normal-form residual, MHz.
    #[arg(long)]
    pub eps_pt: Option<f64>,
    /// Relative dead band of the phase classification.
    #[arg(long)]
    pub phase_tol: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Square,
    Circle,
}

#[derive(Args, Debug)]
pub struct BraidArgs {
    #[command(flatten)]
    pub src: SourceArgs,
    /// Loop centre: `ep` (the located EP) or `s,delta`.
    #[arg(long)]
    pub center: Option<String>,
    /// Half-width of the square or radius of the circle, mm.
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, value_enum)]
    pub shape: Option<Shape>,
    /// Points per traversal.
    #[arg(long)]
    pub points: Option<usize>,
    /// Number of traversals.
    #[arg(long)]
    pub turns: Option<usize>,
    /// Densifications allowed after continuation ambiguities.
    #[arg(long)]
    pub max_refinements: Option<usize>,
}

enum Data {
    Family { fam: SyntheticFamily, spec: String },
    Scan { scan: ScanResult, label: String },
}

impl Data {
    fn label(&self) -> String {
        match self {
            Data::Family { spec, .. } => format!("family:{spec}"),
            Data::Scan { label, .. } => label.clone(),
        }
    }
}

struct Resolved {
    data: Data,
    grid: Option<ParamGrid>,
    hash_input: Value,
    out: PathBuf,
}

fn resolve_source(a: &SourceArgs, file: &RunConfig) -> Result<Resolved, Failure> {
    let grid = pick(&a.grid, &file.grid).map(|g| ParamGrid::parse(&g)).transpose()?;
    let out = output_dir(&a.out, &file.out)?;
    let family = pick(&a.family, &file.family);
    let input = pick(&a.input, &file.input);
    let fit_sigma = pick(&a.fit_sigma, &file.fit_sigma);
    let seed = pick(&a.seed, &file.seed).unwrap_or(0);
    let mut hash_input = json!({ "family": family, "input": input, "grid": grid });
    let data = match (input, family) {
        (Some(p), _) if p.is_dir() => {
            let cfg = a.fit.resolve(file)?;
            let g = match grid {
                Some(g) => g,
                None => eplab_core::synth::Manifest::read(&p.join(MANIFEST_FILE))?
                    .grid
                    .ok_or_else(|| Failure::usage("manifest has no grid; pass --grid"))?,
            };
            hash_input["fit"] = json!(cfg);
            let scan = scan_points(&g, &ScanSource::Directory(&p), &cfg)?;
            Data::Scan { scan, label: format!("scan:{}", p.display()) }
        }
        (Some(p), _) => {
            let scan = ScanResult::read_csv(&p).map_err(|e| Failure::from(e).context(p.display()))?;
            Data::Scan { scan, label: format!("scan:{}", p.display()) }
        }
        (None, Some(spec)) => {
            let fam = resolve_family(&spec)?;
            match fit_sigma {
                None => Data::Family { fam, spec },
                Some(sigma) => {
                    if !(sigma.is_finite() && sigma >= 0.0) {
                        return Err(Failure::usage("--fit-sigma must be a finite number >= 0"));
                    }
                    let cfg = a.fit.resolve(file)?;
                    hash_input["fit"] = json!(cfg);
                    hash_input["fit_sigma"] = json!(sigma);
                    hash_input["seed"] = json!(seed);
                    let g = grid.unwrap_or(fam.window);
                    let scan = scan_points(&g, &ScanSource::FamilyFit { family: &fam, sigma, seed }, &cfg)?;
                    Data::Scan { scan, label: format!("fit:{spec}") }
                }
            }
        }
        (None, None) => return Err(Failure::usage("give --family or --in")),
    };
    Ok(Resolved { data, grid, hash_input, out })
}

fn scan_of(r: &Resolved) -> Result<ScanResult, Failure> {
    match &r.data {
        Data::Family { fam, .. } => {
            let g = r.grid.unwrap_or(fam.window);
            Ok(scan_points(&g, &ScanSource::Family(fam), &Default::default())?)
        }
        Data::Scan { scan, .. } => Ok(scan.clone()),
    }
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), Failure> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, v)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn write_table(path: &Path, hash: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<(), Failure> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "# schema_version=1 config_hash={hash}")?;
    {
        let mut w = csv::Writer::from_writer(&mut f);
        let io = |e: csv::Error| Failure::data(e.to_string());
        w.write_record(columns).map_err(io)?;
        for r in rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush()?;
    }
    f.flush()?;
    Ok(())
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else {
        String::new()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn run(cmd: &AnalyzeCmd, file: &RunConfig) -> Result<(), Failure> {
    match cmd {
        AnalyzeCmd::Scan(a) => run_scan(a, file),
        AnalyzeCmd::Ep(a) => run_ep(a, file),
        AnalyzeCmd::Curve(a) => run_curve(a, file),
        AnalyzeCmd::Pt(a) => run_pt(a, file),
        AnalyzeCmd::Braid(a) => run_braid(a, file),
    }
}

fn run_scan(a: &SourceArgs, file: &RunConfig) -> Result<(), Failure> {
    let r = resolve_source(a, file)?;
    let sc = scan_of(&r)?;
    let hash = config_hash(&json!({ "command": "analyze-scan", "source": r.hash_input }));
    let scan_path = r.out.join("scan.csv");
    sc.write_csv(&scan_path, Some(&hash))?;
    let rows: Vec<Vec<String>> = difference_map(&sc, F_DIFF_THRESHOLD, G_DIFF_THRESHOLD)
        .iter()
        .map(|d| vec![num(d.s), num(d.delta), num(d.df), num(d.dg), d.f_shown.to_string(), d.g_shown.to_string()])
        .collect();
    let cols = ["s_mm", "delta_mm", "df", "dg", "df_below_3mhz", "dg_below_0.35mhz"];
    write_table(&r.out.join("diff_map.csv"), &hash, &cols, &rows)?;
    println!("{} points ({} failed); wrote {} and diff_map.csv", sc.points.len(), sc.failures(), scan_path.display());
    sc.check_quality(MAX_FAILURE_FRACTION)?;
    Ok(())
}

#[derive(Serialize)]
struct EpReport {
    schema_version: u32,
    s_mm: f64,
    delta_mm: f64,
    uncertainty_mm: [f64; 2],
    s_grid: f64,
    delta_grid: f64,
    offset_steps: [f64; 2],
    abs_radicand_min: f64,
    /// Small position differences left of the EP and small width differences right of it.
    lobes_hold: bool,
    source: String,
    config_hash: String,
}

fn run_ep(a: &SourceArgs, file: &RunConfig) -> Result<(), Failure> {
    let r = resolve_source(a, file)?;
    let sc = scan_of(&r)?;
    let est = locate_ep(&sc)?;
    let lobes = lobe_structure(&sc, est.s_mm, 2.0);
    let hash = config_hash(&json!({ "command": "analyze-ep", "source": r.hash_input }));
    let rep = EpReport {
        schema_version: 1,
        s_mm: est.s_mm,
        delta_mm: est.delta_mm,
        uncertainty_mm: est.uncertainty_mm,
        s_grid: est.s_grid,
        delta_grid: est.delta_grid,
        offset_steps: est.offset,
        abs_radicand_min: est.abs_radicand_min,
        lobes_hold: lobes.holds(),
        source: r.data.label(),
        config_hash: hash,
    };
    write_json(&r.out.join("ep.json"), &rep)?;
    println!(
        "EP at (s, delta) = ({:.4} ± {}, {:.4} ± {}) mm",
        est.s_mm, est.uncertainty_mm[0], est.delta_mm, est.uncertainty_mm[1]
    );
    Ok(())
}

fn ep_start(r: &Resolved) -> Result<(f64, f64), Failure> {
    let est = locate_ep(&scan_of(r)?)?;
    Ok((est.s_mm, est.delta_mm))
}

fn run_curve(a: &CurveArgs, file: &RunConfig) -> Result<(), Failure> {
    let r = resolve_source(&a.src, file)?;
    let start = match pick(&a.start, &file.start) {
        Some(t) => parse_pair(&t, "start")?,
        None => ep_start(&r)?,
    };
    let eps = pick(&a.eps_curve, &file.eps_curve);
    let mut trace = match &r.data {
        Data::Family { fam, .. } => {
            let src = Windowed { inner: fam, window: r.grid.unwrap_or(fam.window) };
            let opts = TraceOptions { eps_curve: eps.unwrap_or(TraceOptions::family().eps_curve), ..TraceOptions::family() };
            trace_pt_curve(&src, start, opts)?
        }
        Data::Scan { scan, .. } => {
            let opts = TraceOptions {
                eps_curve: eps.unwrap_or(TraceOptions::fitted().eps_curve),
                step: scan.grid.step.min(scan.grid.d_step()),
                ..TraceOptions::fitted()
            };
            trace_pt_curve(scan, start, opts)?
        }
    };
    let hash = config_hash(&json!({
        "command": "analyze-curve", "source": r.hash_input, "start": [start.0, start.1], "eps_curve": trace.eps_curve,
    }));
    trace.source = Some(r.data.label());
    trace.config_hash = Some(hash.clone());
    trace.write_json(&r.out.join("curve.json"))?;
    let cols = [
        "index", "s_mm", "delta_mm", "reh2", "imh2", "cross", "rel_cross", "tau", "f1", "g1", "f2", "g2", "h1_abs",
        "reh2_norm", "imh2_norm", "is_ep",
    ];
    let rows: Vec<Vec<String>> = trace
        .points
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut row = vec![k.to_string()];
            row.extend([p.s_mm, p.delta_mm, p.reh2, p.imh2, p.cross, p.rel_cross].map(num));
            row.push(opt(p.tau));
            row.extend([p.f1, p.g1, p.f2, p.g2].map(num));
            row.extend([p.h1_abs, p.reh2_norm, p.imh2_norm].map(opt));
            row.push((trace.ep_index == Some(k)).to_string());
            row
        })
        .collect();
    write_table(&r.out.join("curve.csv"), &hash, &cols, &rows)?;
    if trace.truncated {
        log::warn!("contour lost before the window edge; trace is partial");
    }
    match trace.ep_index {
        Some(k) => println!(
            "{} curve points; EP at index {k}, (s, delta) = ({:.6}, {:.6}) mm{}",
            trace.points.len(),
            trace.points[k].s_mm,
            trace.points[k].delta_mm,
            if trace.truncated { " (truncated)" } else { "" }
        ),
        None => println!("{} curve points; no EP crossing on the trace", trace.points.len()),
    }
    Ok(())
}

#[derive(Serialize)]
struct PtSummary {
    schema_version: u32,
    points: usize,
    failures: usize,
    max_residual: f64,
    max_commutator: f64,
    phase_flips: usize,
    /// First index of the new phase after the single flip (or the exceptional point between).
    flip_index: Option<usize>,
    ep_index: Option<usize>,
    flip_at_ep: bool,
    source: String,
    config_hash: String,
}

fn pt_matrices(a: &PtArgs, file: &RunConfig, trace: &CurveTrace) -> Result<(Vec<Option<EffHamiltonian>>, String), Failure> {
    let family = pick(&a.family, &file.family);
    let input = pick(&a.input, &file.input);
    let from_trace = trace.source.clone().unwrap_or_default();
    let fam_spec = family.or_else(|| if input.is_none() { from_trace.strip_prefix("family:").map(str::to_owned) } else { None });
    if let Some(spec) = fam_spec {
        let fam = resolve_family(&spec)?;
        let hs = trace.points.iter().map(|p| fam.hamiltonian_at(p.s_mm, p.delta_mm).ok()).collect();
        return Ok((hs, format!("family:{spec}")));
    }
    let path = input
        .or_else(|| from_trace.strip_prefix("scan:").map(PathBuf::from).filter(|p| p.is_file()))
        .ok_or_else(|| Failure::usage("cannot tell where the curve's matrices come from; pass --family or --in"))?;
    let sc = ScanResult::read_csv(&path)?;
    let g = sc.grid;
    let hs = trace
        .points
        .iter()
        .map(|p| {
            let i = ((p.s_mm - g.s_min) / g.step).round().clamp(0.0, (g.ns() - 1) as f64) as usize;
            let j = ((p.delta_mm - g.delta_min) / g.d_step()).round().clamp(0.0, (g.nd() - 1) as f64) as usize;
            sc.at(i, j).h
        })
        .collect();
    Ok((hs, format!("scan:{}", path.display())))
}

fn run_pt(a: &PtArgs, file: &RunConfig) -> Result<(), Failure> {
    let curve = pick(&a.curve, &file.curve).ok_or_else(|| Failure::usage("--curve is required"))?;
    let trace = CurveTrace::read_json(&curve).map_err(|e| Failure::from(e).context(curve.display()))?;
    let out = output_dir(&a.out, &file.out)?;
    let d = PtTolerances::<f64>::default();
    let tol = PtTolerances {
        eps_cross: pick(&a.eps_cross, &file.eps_cross).unwrap_or(d.eps_cross),
        eps_pt: pick(&a.eps_pt, &file.eps_pt).unwrap_or(d.eps_pt),
    };
    let phase_tol = pick(&a.phase_tol, &file.phase_tol).unwrap_or(1e-6);
    let (hs, label) = pt_matrices(a, file, &trace)?;
    let hash = config_hash(&json!({
        "command": "analyze-pt", "curve": curve, "source": label,
        "eps_cross": tol.eps_cross, "eps_pt": tol.eps_pt, "phase_tol": phase_tol,
    }));

    let mut rows = Vec::new();
    let mut phases = Vec::new();
    let (mut max_res, mut max_comm, mut failures) = (0.0f64, 0.0f64, 0);
    for (k, (p, h)) in trace.points.iter().zip(&hs).enumerate() {
        let mut row = vec![k.to_string(), num(p.s_mm), num(p.delta_mm)];
        let reduced = h.ok_or(Error::OutOfBounds { s: p.s_mm, delta: p.delta_mm }).and_then(|h| {
            let shifted = h.width_offset();
            let hg = match gauge_fix(&shifted) {
                Ok((hg, _)) => hg,
                Err(Error::DegenerateGauge) => shifted,
                Err(e) => return Err(e),
            };
            let tau = extract_tau(&hg)?;
            Ok((tau, to_pt_form(&hg, tau, tol)?))
        });
        match reduced {
            Ok((tau, red)) => {
                let f = red.form;
                let comm = pt_commutator_norm(&red.transformed.matrix());
                let phase = f.phase(phase_tol);
                max_res = max_res.max(f.residual);
                max_comm = max_comm.max(comm);
                phases.push(Some(phase));
                row.extend([tau, f.a, f.b, f.c, f.dpt, f.residual, comm].map(num));
                row.push(format!("{phase:?}").to_lowercase());
                row.push("ok".into());
            }
            Err(e) => {
                failures += 1;
                phases.push(None);
                row.extend(std::iter::repeat_n(String::new(), 8));
                row.push(format!("failed: {e}"));
            }
        }
        rows.push(row);
    }
    let cols = ["index", "s_mm", "delta_mm", "tau", "a", "b", "c", "d", "residual", "commutator", "phase", "status"];
    write_table(&out.join("pt.csv"), &hash, &cols, &rows)?;

    let (flips, flip_index) = count_flips(&phases);
    let flip_at_ep = match (flips, flip_index, trace.ep_index) {
        (1, Some(fi), Some(ep)) => fi == ep || fi == ep + 1,
        _ => false,
    };
    let summary = PtSummary {
        schema_version: 1,
        points: trace.points.len(),
        failures,
        max_residual: max_res,
        max_commutator: max_comm,
        phase_flips: flips,
        flip_index,
        ep_index: trace.ep_index,
        flip_at_ep,
        source: label,
        config_hash: hash,
    };
    write_json(&out.join("pt.json"), &summary)?;
    println!(
        "{} points, {failures} failed; max residual {max_res:.3e}, max commutator {max_comm:.3e}; {flips} phase flip(s){}",
        trace.points.len(),
        if flip_at_ep { " at the EP" } else { "" }
    );
    if failures > 0 {
        return Err(Failure::numeric(format!("PT reduction failed at {failures} curve points")));
    }
    Ok(())
}

/// Changes between unbroken and broken phases, skipping exceptional and failed points.
/// The index is where the new phase region begins (an exceptional point in between counts).
fn count_flips(phases: &[Option<PtPhase>]) -> (usize, Option<usize>) {
    let mut last: Option<(PtPhase, usize)> = None;
    let mut flips = 0;
    let mut at = None;
    for (k, p) in phases.iter().enumerate() {
        let Some(p) = *p else { continue };
        if p == PtPhase::Exceptional {
            continue;
        }
        if let Some((q, kq)) = last {
            if q != p {
                flips += 1;
                at = Some(if k > kq + 1 { kq + 1 } else { k });
            }
        }
        last = Some((p, k));
    }
    (flips, at)
}

fn run_braid(a: &BraidArgs, file: &RunConfig) -> Result<(), Failure> {
    let r = resolve_source(&a.src, file)?;
    let center = match pick(&a.center, &file.center).as_deref() {
        None | Some("ep") => ep_start(&r)?,
        Some(t) => parse_pair(t, "center")?,
    };
    let radius = pick(&a.radius, &file.radius).unwrap_or(0.1);
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Failure::usage("--radius must be positive"));
    }
    let shape = match (a.shape, file.shape.as_deref()) {
        (Some(s), _) => s,
        (None, None | Some("square")) => Shape::Square,
        (None, Some("circle")) => Shape::Circle,
        (None, Some(other)) => return Err(Failure::usage(format!("unknown loop shape {other:?}"))),
    };
    let n = pick(&a.points, &file.loop_points).unwrap_or(eplab_core::scan::braid::DEFAULT_LOOP_POINTS);
    let turns = pick(&a.turns, &file.turns).unwrap_or(1);
    let refine = pick(&a.max_refinements, &file.max_refinements).unwrap_or(MAX_REFINEMENTS);
    if n < 3 || turns == 0 {
        return Err(Failure::usage("--points must be >= 3 and --turns >= 1"));
    }
    let one = match shape {
        Shape::Square => square_loop(center, radius, n),
        Shape::Circle => circle_loop(center, radius, n),
    };
    let lp = repeat_loop(&one, turns);
    let src: &dyn ParamSource = match &r.data {
        Data::Family { fam, .. } => fam,
        Data::Scan { scan, .. } => scan,
    };
    let mut bt = braid(&lp, src, refine)?;
    let hash = config_hash(&json!({
        "command": "analyze-braid", "source": r.hash_input, "center": [center.0, center.1], "radius": radius,
        "shape": shape, "points": n, "turns": turns, "max_refinements": refine,
    }));
    bt.config_hash = Some(hash);
    bt.write_json(&r.out.join("braid.json"))?;
    println!("permutation={}", serde_json::to_value(bt.permutation)?.as_str().unwrap_or("?"));
    Ok(())
}
