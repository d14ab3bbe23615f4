//! Grid scans of the effective Hamiltonian and their CSV form.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fit::{fit_spectrum, FitConfig, FitResult};
use crate::scan::grid::ParamGrid;
use crate::scan::source::{gauge_tau, ParamSource, Sample};
use crate::synth::manifest::{Manifest, ManifestEntry, MANIFEST_FILE};
use crate::synth::{NoiseSpec, Spectrum, SyntheticFamily};
use crate::{EffHamiltonian, EigenPair, Radicand, C64};

pub const SCAN_SCHEMA_VERSION: u32 = 1;

/// Share of failed points above which a scan is rejected.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

pub const SCAN_COLUMNS: [&str; 20] = [
    "s_mm", "delta_mm", "f1", "g1", "f2", "g2", "reh2", "imh2", "cross", "tau", "status", "e1_re", "e1_im", "e2_re",
    "e2_im", "h1_re", "h1_im", "h2_re", "h2_im", "residual_rms",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Family,
    Fit,
}

impl Provenance {
    fn as_str(self) -> &'static str {
        match self {
            Provenance::Family => "family",
            Provenance::Fit => "fit",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PointStatus {
    Ok,
    Failed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanPoint {
    pub s: f64,
    pub delta: f64,
    pub h: Option<EffHamiltonian>,
    /// NaN when undefined.
    pub tau: f64,
    pub residual_rms: Option<f64>,
    pub status: PointStatus,
}

impl ScanPoint {
    pub fn ok(s: f64, delta: f64, h: EffHamiltonian, tau: f64, residual_rms: Option<f64>) -> Self {
        ScanPoint { s, delta, h: Some(h), tau, residual_rms, status: PointStatus::Ok }
    }

    pub fn failed(s: f64, delta: f64, reason: impl Into<String>) -> Self {
        ScanPoint { s, delta, h: None, tau: f64::NAN, residual_rms: None, status: PointStatus::Failed(reason.into()) }
    }

    pub fn is_ok(&self) -> bool {
        self.status == PointStatus::Ok && self.h.is_some()
    }

    /// Eigenvalues in reporting order.
    pub fn eigenvalues(&self) -> Option<EigenPair> {
        self.h.map(|h| h.eigenvalues().sorted())
    }

    pub fn radicand(&self) -> Option<Radicand> {
        self.h.map(|h| h.radicand())
    }

    /// `(|f1 − f2|, |Γ1 − Γ2|)`.
    pub fn differences(&self) -> Option<(f64, f64)> {
        self.eigenvalues().map(|e| {
            let (f, g) = (e.positions(), e.widths());
            ((f[0] - f[1]).abs(), (g[0] - g[1]).abs())
        })
    }

    /// `|D|`.
    pub fn abs_radicand(&self) -> Option<f64> {
        self.radicand().map(|r| r.value().norm())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanResult {
    pub grid: ParamGrid,
    /// One entry per grid point in grid order.
    pub points: Vec<ScanPoint>,
    pub provenance: Provenance,
    /// Free-form origin label (preset name, directory), without whitespace.
    pub source: String,
}

/// Where `scan` takes its Hamiltonians from.
pub enum ScanSource<'a> {
    /// Exact family matrices.
    Family(&'a SyntheticFamily),
    /// Fits of spectra synthesized in memory from the family; point `k` uses noise stream `k`.
    FamilyFit { family: &'a SyntheticFamily, sigma: f64, seed: u64 },
    /// Fits of the spectra listed in a synthesized directory's manifest.
    Directory(&'a Path),
}

fn from_fit(s: f64, d: f64, r: Result<FitResult>) -> ScanPoint {
    match r {
        Ok(fr) => ScanPoint::ok(s, d, fr.h, fr.tau, Some(fr.residual_rms)),
        Err(e) => ScanPoint::failed(s, d, e.to_string()),
    }
}

/// Scans without the failure-rate check.
pub fn scan_points(grid: &ParamGrid, source: &ScanSource, cfg: &FitConfig) -> Result<ScanResult> {
    grid.validate()?;
    let pts = grid.points();
    let (points, provenance, label) = match source {
        ScanSource::Family(fam) => {
            check_bounds(grid, fam)?;
            let points = pts
                .par_iter()
                .map(|&(s, d)| match fam.hamiltonian_at(s, d) {
                    Ok(h) => ScanPoint::ok(s, d, h, gauge_tau(&h).unwrap_or(f64::NAN), None),
                    Err(e) => ScanPoint::failed(s, d, e.to_string()),
                })
                .collect();
            (points, Provenance::Family, fam.name.clone())
        }
        ScanSource::FamilyFit { family, sigma, seed } => {
            check_bounds(grid, family)?;
            cfg.validate()?;
            let points = pts
                .par_iter()
                .enumerate()
                .map(|(k, &(s, d))| {
                    let noise = NoiseSpec::gaussian(*sigma, *seed).with_stream(k as u64);
                    from_fit(s, d, family.spectrum_at(s, d, &noise).and_then(|sp| fit_spectrum(&sp, cfg, None)))
                })
                .collect();
            (points, Provenance::Fit, family.name.clone())
        }
        ScanSource::Directory(dir) => {
            cfg.validate()?;
            let (_, files) = directory_files(dir, grid)?;
            let points = pts
                .par_iter()
                .zip(files.par_iter())
                .map(|(&(s, d), path)| from_fit(s, d, Spectrum::read(path).and_then(|sp| fit_spectrum(&sp, cfg, None))))
                .collect();
            (points, Provenance::Fit, dir.display().to_string())
        }
    };
    Ok(ScanResult { grid: *grid, points, provenance, source: sanitize(&label) })
}

/// Evaluates or fits every grid point. Points that fail are kept and marked; more than
/// 20 % failures is an error.
pub fn scan(grid: &ParamGrid, source: &ScanSource, cfg: &FitConfig) -> Result<ScanResult> {
    let r = scan_points(grid, source, cfg)?;
    r.check_quality(MAX_FAILURE_FRACTION)?;
    Ok(r)
}

fn check_bounds(grid: &ParamGrid, fam: &SyntheticFamily) -> Result<()> {
    for (s, d) in [
        (grid.s_min, grid.delta_min),
        (grid.s_max, grid.delta_max),
        (grid.s_at(grid.ns() - 1), grid.delta_at(grid.nd() - 1)),
    ] {
        if !fam.contains(s, d) {
            return Err(Error::OutOfBounds { s, delta: d });
        }
    }
    Ok(())
}

fn sanitize(label: &str) -> String {
    label.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect()
}

/// Resolves each grid point to a spectrum file listed in `dir`'s manifest.
pub fn directory_files(dir: &Path, grid: &ParamGrid) -> Result<(Manifest, Vec<PathBuf>)> {
    let manifest = Manifest::read(&dir.join(MANIFEST_FILE))?;
    let key = |s: f64, d: f64| ((s * 1e6).round() as i64, (d * 1e6).round() as i64);
    let by_point: BTreeMap<(i64, i64), &ManifestEntry> =
        manifest.files.iter().map(|e| (key(e.s_mm, e.delta_mm), e)).collect();
    let files = grid
        .points()
        .into_iter()
        .map(|(s, d)| {
            by_point
                .get(&key(s, d))
                .map(|e| dir.join(&e.file))
                .ok_or_else(|| Error::Format(format!("manifest lists no spectrum at ({s}, {d})")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, files))
}

/// Writes scan rows for arbitrary points. Without `grid` the file is still readable by
/// [`ScanResult::read_csv`] as long as the points form a complete grid in `s`-major order.
pub fn write_points_csv(
    path: &Path,
    points: &[ScanPoint],
    provenance: Provenance,
    source: &str,
    grid: Option<&ParamGrid>,
    config_hash: Option<&str>,
) -> Result<()> {
    let mut line = format!("# schema_version={SCAN_SCHEMA_VERSION} provenance={} source={}", provenance.as_str(), sanitize(source));
    if let Some(g) = grid {
        line.push_str(&format!(" grid={}", serde_json::to_string(g)?));
    }
    if let Some(h) = config_hash {
        line.push_str(&format!(" config_hash={h}"));
    }
    line.push('\n');
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(line.as_bytes())?;
    {
        let mut w = csv::Writer::from_writer(&mut f);
        w.write_record(SCAN_COLUMNS)?;
        for p in points {
            w.write_record(row(p))?;
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

impl ScanResult {
    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| !p.is_ok()).count()
    }

    pub fn check_quality(&self, max_fraction: f64) -> Result<()> {
        let failed = self.failures();
        let total = self.points.len();
        if failed as f64 > max_fraction * total as f64 {
            return Err(Error::ScanQuality { failed, total });
        }
        Ok(())
    }

    pub fn at(&self, i: usize, j: usize) -> &ScanPoint {
        &self.points[self.grid.index(i, j)]
    }

    pub fn write_csv(&self, path: &Path, config_hash: Option<&str>) -> Result<()> {
        write_points_csv(path, &self.points, self.provenance, &self.source, Some(&self.grid), config_hash)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut text = String::new();
        File::open(path)?.read_to_string(&mut text)?;
        Self::parse_csv(&text)
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut meta = BTreeMap::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            for kv in line.trim_start_matches('#').split_whitespace() {
                if let Some((k, v)) = kv.split_once('=') {
                    meta.insert(k.to_owned(), v.to_owned());
                }
            }
        }
        if let Some(v) = meta.get("schema_version") {
            if v != &SCAN_SCHEMA_VERSION.to_string() {
                return Err(Error::Format(format!("unsupported scan schema_version {v}")));
            }
        }
        let provenance = match meta.get("provenance").map(String::as_str) {
            Some("family") => Provenance::Family,
            _ => Provenance::Fit,
        };
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let required = ["s_mm", "delta_mm", "status"];
        for r in required {
            col(r).ok_or_else(|| Error::Format(format!("scan CSV lacks column {r}")))?;
        }
        let mut points = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let get = |name: &str| -> Result<Option<f64>> {
                match col(name).and_then(|c| rec.get(c)).map(str::trim) {
                    None | Some("") => Ok(None),
                    Some(t) => t.parse().map(Some).map_err(|_| Error::Format(format!("bad number {t:?} in {name}"))),
                }
            };
            let s = get("s_mm")?.ok_or_else(|| Error::Format("empty s_mm".into()))?;
            let d = get("delta_mm")?.ok_or_else(|| Error::Format("empty delta_mm".into()))?;
            let status = rec.get(col("status").unwrap()).unwrap_or("").trim();
            if status != "ok" {
                let reason = status.strip_prefix("failed:").unwrap_or(status).trim();
                points.push(ScanPoint::failed(s, d, reason));
                continue;
            }
            let c = |re: &str, im: &str| -> Result<C64> {
                match (get(re)?, get(im)?) {
                    (Some(a), Some(b)) => Ok(C64::new(a, b)),
                    _ => Err(Error::Format(format!("ok row at ({s}, {d}) lacks {re}/{im}"))),
                }
            };
            let h = EffHamiltonian::from_pauli(c("e1_re", "e1_im")?, c("e2_re", "e2_im")?, c("h1_re", "h1_im")?, c("h2_re", "h2_im")?)?;
            let tau = get("tau")?.unwrap_or(f64::NAN);
            points.push(ScanPoint::ok(s, d, h, tau, get("residual_rms")?));
        }
        if points.is_empty() {
            return Err(Error::Format("scan CSV has no rows".into()));
        }
        let grid = match meta.get("grid") {
            Some(g) => serde_json::from_str(g)?,
            None => infer_grid(&points)?,
        };
        grid.validate()?;
        if grid.len() != points.len() {
            return Err(Error::Format(format!("{} rows for a grid of {} points", points.len(), grid.len())));
        }
        for (k, p) in points.iter().enumerate() {
            let (s, d) = grid.point_at(k);
            if (s - p.s).abs() > 1e-6 * grid.step || (d - p.delta).abs() > 1e-6 * grid.d_step() {
                return Err(Error::Format(format!("row {k} at ({}, {}) is out of grid order", p.s, p.delta)));
            }
        }
        Ok(ScanResult { grid, points, provenance, source: meta.get("source").cloned().unwrap_or_default() })
    }
}

fn infer_grid(points: &[ScanPoint]) -> Result<ParamGrid> {
    let axis = |v: Vec<f64>| -> (f64, f64, f64, usize) {
        let mut u = v;
        u.sort_by(f64::total_cmp);
        u.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let n = u.len();
        let step = if n > 1 { (u[n - 1] - u[0]) / (n - 1) as f64 } else { crate::scan::grid::DEFAULT_PARAM_STEP_MM };
        (u[0], u[n - 1], step, n)
    };
    let (s0, s1, ss, _) = axis(points.iter().map(|p| p.s).collect());
    let (d0, d1, ds, _) = axis(points.iter().map(|p| p.delta).collect());
    let g = ParamGrid {
        s_min: s0,
        s_max: s1,
        delta_min: d0,
        delta_max: d1,
        step: ss,
        delta_step: if (ds - ss).abs() <= 1e-12 { None } else { Some(ds) },
    };
    g.validate()?;
    Ok(g)
}

fn row(p: &ScanPoint) -> Vec<String> {
    let mut r = vec![num(p.s), num(p.delta)];
    match (&p.status, p.h) {
        (PointStatus::Ok, Some(h)) => {
            let e = h.eigenvalues().sorted();
            let (f, g) = (e.positions(), e.widths());
            let rd = h.radicand();
            r.extend([f[0], g[0], f[1], g[1], rd.reh2, rd.imh2, rd.cross, p.tau].map(num));
            r.push("ok".into());
            let (e1, e2, h1, h2) = h.to_pauli();
            r.extend([e1.re, e1.im, e2.re, e2.im, h1.re, h1.im, h2.re, h2.im].map(num));
            r.push(p.residual_rms.map(num).unwrap_or_default());
        }
        (st, _) => {
            r.extend(std::iter::repeat_n(String::new(), 8));
            r.push(match st {
                PointStatus::Failed(m) => format!("failed: {m}"),
                PointStatus::Ok => "failed: missing matrix".into(),
            });
            r.extend(std::iter::repeat_n(String::new(), 9));
        }
    }
    r
}

/// Bilinear interpolation of the basis-independent quantities (mean energy, radicand parts, τ).
/// The matrices themselves are not interpolated: fitted bases need not vary smoothly between
/// neighbouring points.
impl ParamSource for ScanResult {
    fn sample(&self, s: f64, delta: f64) -> Result<Sample> {
        if !self.grid.contains(s, delta) {
            return Err(Error::OutOfBounds { s, delta });
        }
        let (ns, nd) = (self.grid.ns(), self.grid.nd());
        let cell = |x: f64, n: usize| -> (usize, f64) {
            if n < 2 {
                return (0, 0.0);
            }
            let i = (x.floor().max(0.0) as usize).min(n - 2);
            (i, (x - i as f64).clamp(0.0, 1.0))
        };
        let (i, u) = cell((s - self.grid.s_min) / self.grid.step, ns);
        let (j, v) = cell((delta - self.grid.delta_min) / self.grid.d_step(), nd);
        let mut acc = [0.0; 6];
        for (di, wi) in [(0, 1.0 - u), (1, u)] {
            for (dj, wj) in [(0, 1.0 - v), (1, v)] {
                let w = wi * wj;
                if w == 0.0 {
                    continue;
                }
                let p = self.at((i + di).min(ns - 1), (j + dj).min(nd - 1));
                let (Some(h), true) = (p.h, p.is_ok()) else {
                    return Err(Error::Format(format!("failed scan point at ({}, {}) in interpolation cell", p.s, p.delta)));
                };
                let (m, r) = (h.mean(), h.radicand());
                for (a, x) in acc.iter_mut().zip([m.re, m.im, r.reh2, r.imh2, r.cross, p.tau]) {
                    *a += w * x;
                }
            }
        }
        Ok(Sample {
            mean: C64::new(acc[0], acc[1]),
            radicand: Radicand { reh2: acc[2], imh2: acc[3], cross: acc[4] },
            tau: acc[5],
            h: None,
        })
    }

    fn in_domain(&self, s: f64, delta: f64) -> bool {
        self.grid.contains(s, delta)
    }

    fn window(&self) -> ParamGrid {
        self.grid
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_scan() -> ScanResult {
        let fam = SyntheticFamily::b38();
        let g = ParamGrid::centered(1.72, 41.78, 2, 0.01).unwrap();
        scan(&g, &ScanSource::Family(&fam), &FitConfig::default()).unwrap()
    }

    #[test]
    fn family_scan_matches_direct_evaluation() {
        let fam = SyntheticFamily::b38();
        let r = small_scan();
        assert_eq!(r.points.len(), 25);
        for p in &r.points {
            assert_eq!(p.h.unwrap(), fam.hamiltonian_at(p.s, p.delta).unwrap());
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut r = small_scan();
        r.points[3] = ScanPoint::failed(r.points[3].s, r.points[3].delta, "no convergence, rms 1e-2");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scan.csv");
        r.write_csv(&path, Some("abc")).unwrap();
        let back = ScanResult::read_csv(&path).unwrap();
        assert_eq!(back.grid, r.grid);
        for (a, b) in r.points.iter().zip(&back.points) {
            assert_eq!(a.h, b.h);
            assert_eq!(a.status, b.status);
            assert!(a.tau == b.tau || (a.tau.is_nan() && b.tau.is_nan()));
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# schema_version=1 provenance=family source=b38"));
        assert!(text.lines().nth(1).unwrap().starts_with("s_mm,delta_mm,f1,g1,f2,g2,reh2,imh2,cross,tau,status"));
    }

    #[test]
    fn grid_is_inferred_without_header() {
        let r = small_scan();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scan.csv");
        r.write_csv(&path, None).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let body: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
        let back = ScanResult::parse_csv(&body).unwrap();
        assert_eq!(back.grid.ns(), 5);
        assert_eq!(back.grid.nd(), 5);
    }

    #[test]
    fn interpolation_reproduces_grid_nodes() {
        let r = small_scan();
        let p = r.at(1, 3);
        let smp = r.sample(p.s, p.delta).unwrap();
        let exact = p.radicand().unwrap();
        assert!((smp.radicand.cross - exact.cross).abs() < 1e-12);
        assert!((smp.eigenvalues().sorted().e1 - p.eigenvalues().unwrap().e1).norm() < 1e-9);
    }

    #[test]
    fn too_many_failures_is_an_error() {
        let mut r = small_scan();
        for k in 0..6 {
            r.points[k] = ScanPoint::failed(r.points[k].s, r.points[k].delta, "x");
        }
        assert!(matches!(r.check_quality(0.2), Err(Error::ScanQuality { failed: 6, total: 25 })));
        assert!(r.check_quality(0.25).is_ok());
    }

    #[test]
    fn grid_outside_family_is_rejected() {
        let fam = SyntheticFamily::b38();
        let g = ParamGrid::new((0.0, 0.1), (41.5, 41.6), 0.01).unwrap();
        assert!(matches!(scan(&g, &ScanSource::Family(&fam), &FitConfig::default()), Err(Error::OutOfBounds { .. })));
    }
}
