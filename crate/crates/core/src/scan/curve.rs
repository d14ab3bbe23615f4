//! Continuation of the zero contour of `Re h·Im h` through the exceptional point.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{gauge_fix, orient_narrow_first};
use crate::scan::source::{ParamSource, Sample};

/// Tolerance on `|cross| / |h|²` for exact family matrices.
pub const EPS_CURVE_FAMILY: f64 = 1e-9;
/// Tolerance on `|cross| / |h|²` for fitted (noisy) data.
pub const EPS_CURVE_FIT: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceOptions {
    pub eps_curve: f64,
    /// Arc-length step, mm.
    pub step: f64,
    pub max_points: usize,
}

impl TraceOptions {
    pub fn family() -> Self {
        TraceOptions { eps_curve: EPS_CURVE_FAMILY, step: 0.01, max_points: 100_000 }
    }

    pub fn fitted() -> Self {
        TraceOptions { eps_curve: EPS_CURVE_FIT, ..Self::family() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub s_mm: f64,
    pub delta_mm: f64,
    pub reh2: f64,
    pub imh2: f64,
    pub cross: f64,
    pub rel_cross: f64,
    pub tau: Option<f64>,
    pub f1: f64,
    pub g1: f64,
    pub f2: f64,
    pub g2: f64,
    /// `|h1|` in the gauge-fixed basis of this point, when the matrix is known.
    pub h1_abs: Option<f64>,
    /// `reh2 / |h1|²` and `imh2 / |h1|²`.
    pub reh2_norm: Option<f64>,
    pub imh2_norm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveTrace {
    pub schema_version: u32,
    pub eps_curve: f64,
    pub step: f64,
    /// Ordered by `s`.
    pub points: Vec<CurvePoint>,
    /// Index of the inserted EP point, if `reh2 − imh2` changes sign along the trace.
    pub ep_index: Option<usize>,
    /// Set when the corrector lost the contour before the window edge.
    pub truncated: bool,
    /// Origin label, `family:<preset>` or `scan:<path>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl CurveTrace {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let t: CurveTrace = serde_json::from_reader(File::open(path)?)?;
        if t.schema_version != 1 {
            return Err(Error::Format(format!("unsupported curve schema_version {}", t.schema_version)));
        }
        Ok(t)
    }

    pub fn max_rel_cross(&self) -> f64 {
        self.points.iter().map(|p| p.rel_cross.abs()).fold(0.0, f64::max)
    }
}

struct Tracer<'a, S: ParamSource + ?Sized> {
    src: &'a S,
    opts: TraceOptions,
}

impl<S: ParamSource + ?Sized> Tracer<'_, S> {
    fn g(&self, p: [f64; 2]) -> Result<f64> {
        Ok(self.src.sample(p[0], p[1])?.relative_cross())
    }

    /// Central-difference gradient, shrinking the stencil at the window edge.
    fn grad(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        let h = 1e-6;
        let mut out = [0.0; 2];
        for (k, o) in out.iter_mut().enumerate() {
            let mut a = p;
            let mut b = p;
            a[k] += h;
            b[k] -= h;
            let (fa, fb, span) = match (self.src.in_domain(a[0], a[1]), self.src.in_domain(b[0], b[1])) {
                (true, true) => (self.g(a)?, self.g(b)?, 2.0 * h),
                (true, false) => (self.g(a)?, self.g(p)?, h),
                (false, true) => (self.g(p)?, self.g(b)?, h),
                (false, false) => return Err(Error::OutOfBounds { s: p[0], delta: p[1] }),
            };
            *o = (fa - fb) / span;
        }
        Ok(out)
    }

    /// Newton steps along the gradient onto `g = 0`.
    fn correct(&self, mut p: [f64; 2]) -> Result<Option<[f64; 2]>> {
        let target = (self.opts.eps_curve * 1e-3).max(1e-15);
        for _ in 0..30 {
            if !self.src.in_domain(p[0], p[1]) {
                return Ok(None);
            }
            let v = self.g(p)?;
            if v.abs() <= target {
                return Ok(Some(p));
            }
            let gr = self.grad(p)?;
            let n2 = gr[0] * gr[0] + gr[1] * gr[1];
            if n2 == 0.0 || !n2.is_finite() {
                return Ok(None);
            }
            let dp = [-v * gr[0] / n2, -v * gr[1] / n2];
            if dp[0].hypot(dp[1]) > 2.0 * self.opts.step {
                return Ok(None);
            }
            p = [p[0] + dp[0], p[1] + dp[1]];
        }
        let ok = self.src.in_domain(p[0], p[1]) && self.g(p)?.abs() <= self.opts.eps_curve;
        Ok(ok.then_some(p))
    }

    fn tangent(&self, p: [f64; 2], prev: [f64; 2]) -> Result<[f64; 2]> {
        let gr = self.grad(p)?;
        let n = gr[0].hypot(gr[1]);
        if n == 0.0 {
            return Err(Error::Format("zero gradient of Re h·Im h".into()));
        }
        let t = [-gr[1] / n, gr[0] / n];
        Ok(if t[0] * prev[0] + t[1] * prev[1] < 0.0 { [-t[0], -t[1]] } else { t })
    }

    /// Walks from `p0` in direction `dir` until the window edge. Returns the points after `p0`
    /// and whether the walk was cut short.
    fn walk(&self, p0: [f64; 2], dir: [f64; 2]) -> Result<(Vec<[f64; 2]>, bool)> {
        let mut pts = Vec::new();
        let (mut p, mut d) = (p0, dir);
        let h0 = self.opts.step;
        while pts.len() < self.opts.max_points {
            d = self.tangent(p, d)?;
            let mut h = h0;
            let mut next = None;
            let mut left_window = false;
            for _ in 0..5 {
                let pred = [p[0] + h * d[0], p[1] + h * d[1]];
                if !self.src.in_domain(pred[0], pred[1]) {
                    left_window = true;
                    break;
                }
                if let Some(q) = self.correct(pred)? {
                    let dist = (q[0] - p[0]).hypot(q[1] - p[1]);
                    let forward = (q[0] - p[0]) * d[0] + (q[1] - p[1]) * d[1] > 0.0;
                    if dist <= 2.0 * h0 && forward {
                        next = Some(q);
                        break;
                    }
                }
                h *= 0.5;
            }
            match next {
                Some(q) => {
                    pts.push(q);
                    p = q;
                }
                None if left_window => return Ok((pts, false)),
                None => return Ok((pts, true)),
            }
        }
        Ok((pts, true))
    }

    fn split(&self, p: [f64; 2]) -> Result<f64> {
        let r = self.src.sample(p[0], p[1])?.radicand;
        Ok(r.reh2 - r.imh2)
    }

    /// Bisection for `reh2 = imh2` on the contour between two accepted points.
    fn bisect_ep(&self, a: [f64; 2], b: [f64; 2]) -> Result<Option<[f64; 2]>> {
        let mut fa = self.split(a)?;
        let (mut lo, mut hi) = (a, b);
        for _ in 0..80 {
            let mid = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
            let Some(m) = self.correct(mid)? else { return Ok(None) };
            let fm = self.split(m)?;
            if fm == 0.0 {
                return Ok(Some(m));
            }
            if (fm > 0.0) == (fa > 0.0) {
                lo = m;
                fa = fm;
            } else {
                hi = m;
            }
            if (hi[0] - lo[0]).hypot(hi[1] - lo[1]) < 1e-14 {
                break;
            }
        }
        self.correct([0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])])
    }
}

fn curve_point(p: [f64; 2], smp: &Sample) -> CurvePoint {
    let r = smp.radicand;
    let e = smp.eigenvalues().sorted();
    let (f, g) = (e.positions(), e.widths());
    let h1_abs = smp.h.map(|h| {
        let hg = gauge_fix(&h).map(|(hg, _)| hg).unwrap_or(h);
        orient_narrow_first(&hg).0.h1().norm()
    });
    let norm = |x: f64| h1_abs.filter(|a| *a > 0.0).map(|a| x / (a * a));
    CurvePoint {
        s_mm: p[0],
        delta_mm: p[1],
        reh2: r.reh2,
        imh2: r.imh2,
        cross: r.cross,
        rel_cross: r.relative_cross(),
        tau: smp.tau.is_finite().then_some(smp.tau),
        f1: f[0],
        g1: g[0],
        f2: f[1],
        g2: g[1],
        h1_abs,
        reh2_norm: norm(r.reh2),
        imh2_norm: norm(r.imh2),
    }
}

/// Traces the PT curve `Re h·Im h = 0` through `start` in both directions to the edge of the
/// source window. `start` is first projected onto the contour. The returned points are ordered
/// by `s`; where `reh2 − imh2` changes sign the bisected crossing (the EP) is inserted and
/// its index recorded.
pub fn trace_pt_curve<S: ParamSource + ?Sized>(src: &S, start: (f64, f64), opts: TraceOptions) -> Result<CurveTrace> {
    if !(opts.eps_curve > 0.0 && opts.step > 0.0) {
        return Err(Error::InvalidArgument("eps_curve and step must be positive".into()));
    }
    if !src.in_domain(start.0, start.1) {
        return Err(Error::OutOfBounds { s: start.0, delta: start.1 });
    }
    let tr = Tracer { src, opts };
    let p0 = tr
        .correct([start.0, start.1])?
        .ok_or_else(|| Error::NotOnPtCurve { relative_cross: tr.g([start.0, start.1]).unwrap_or(f64::NAN), tolerance: opts.eps_curve })?;
    let gr = tr.grad(p0)?;
    let t = [-gr[1], gr[0]];
    let (fwd, cut_f) = tr.walk(p0, t)?;
    let (bwd, cut_b) = tr.walk(p0, [-t[0], -t[1]])?;
    let mut path: Vec<[f64; 2]> = bwd.into_iter().rev().collect();
    path.push(p0);
    path.extend(fwd);
    if path.len() > 1 && path[0][0] > path[path.len() - 1][0] {
        path.reverse();
    }

    let mut ep_index = None;
    let splits: Vec<f64> = path.iter().map(|&p| tr.split(p)).collect::<Result<_>>()?;
    if let Some(k) = splits.iter().position(|&x| x == 0.0) {
        ep_index = Some(k);
    } else if let Some(k) = (0..splits.len().saturating_sub(1)).find(|&k| (splits[k] > 0.0) != (splits[k + 1] > 0.0)) {
        if let Some(ep) = tr.bisect_ep(path[k], path[k + 1])? {
            path.insert(k + 1, ep);
            ep_index = Some(k + 1);
        }
    }

    let points = path.iter().map(|&p| Ok(curve_point(p, &src.sample(p[0], p[1])?))).collect::<Result<Vec<_>>>()?;
    Ok(CurveTrace {
        schema_version: 1,
        eps_curve: opts.eps_curve,
        step: opts.step,
        points,
        ep_index,
        truncated: cut_f || cut_b,
        source: None,
        config_hash: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::SyntheticFamily;

    #[test]
    fn family_trace_stays_on_the_contour_and_finds_the_ep() {
        let fam = SyntheticFamily::b38();
        let t = trace_pt_curve(&fam, (1.72, 41.78), TraceOptions::family()).unwrap();
        assert!(!t.truncated);
        assert!(t.max_rel_cross() < 1e-9);
        let k = t.ep_index.unwrap();
        let ep = &t.points[k];
        assert!((ep.s_mm - 1.72).abs() < 1e-8 && (ep.delta_mm - 41.78).abs() < 1e-8, "{ep:?}");
        for w in t.points.windows(2) {
            let d = (w[1].s_mm - w[0].s_mm).hypot(w[1].delta_mm - w[0].delta_mm);
            assert!(d <= 0.02 + 1e-12);
        }
    }
}
