//! Eigenvalue continuation around closed parameter loops.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scan::source::ParamSource;
use crate::C64;

pub const DEFAULT_LOOP_POINTS: usize = 64;
/// Default number of times a loop is densified after a continuation ambiguity.
pub const MAX_REFINEMENTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Permutation {
    Identity,
    Swap,
}

impl Permutation {
    pub fn compose(self, other: Self) -> Self {
        if self == other {
            Permutation::Identity
        } else {
            Permutation::Swap
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BraidPoint {
    pub s_mm: f64,
    pub delta_mm: f64,
    pub e1: [f64; 2],
    pub e2: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BraidTrace {
    pub schema_version: u32,
    pub permutation: Permutation,
    /// Times the loop was densified by midpoint insertion.
    pub refinements: usize,
    /// Closed loop with the tracked eigenvalues at every point.
    pub points: Vec<BraidPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl BraidTrace {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }
}

/// Square loop of half-width `half` around `center`, counter-clockwise, `n` segments
/// (rounded up to a multiple of 4), first point repeated at the end.
pub fn square_loop(center: (f64, f64), half: f64, n: usize) -> Vec<(f64, f64)> {
    let per_side = n.div_ceil(4).max(1);
    let corners = [(1.0, -1.0), (1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];
    let mut pts = Vec::with_capacity(4 * per_side + 1);
    for w in corners.windows(2) {
        for k in 0..per_side {
            let t = k as f64 / per_side as f64;
            let x = w[0].0 + t * (w[1].0 - w[0].0);
            let y = w[0].1 + t * (w[1].1 - w[0].1);
            pts.push((center.0 + half * x, center.1 + half * y));
        }
    }
    pts.push(pts[0]);
    pts
}

/// Circle of radius `r` around `center`, `n` segments, first point repeated at the end.
pub fn circle_loop(center: (f64, f64), r: f64, n: usize) -> Vec<(f64, f64)> {
    let n = n.max(3);
    let mut pts: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            (center.0 + r * a.cos(), center.1 + r * a.sin())
        })
        .collect();
    pts.push(pts[0]);
    pts
}

/// The closed loop traversed `times` times.
pub fn repeat_loop(lp: &[(f64, f64)], times: usize) -> Vec<(f64, f64)> {
    let mut out = vec![lp[0]];
    for _ in 0..times {
        out.extend_from_slice(&lp[1..]);
    }
    out
}

fn densify(lp: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(2 * lp.len());
    for w in lp.windows(2) {
        out.push(w[0]);
        out.push((0.5 * (w[0].0 + w[1].0), 0.5 * (w[0].1 + w[1].1)));
    }
    out.push(lp[lp.len() - 1]);
    out
}

fn is_closed(lp: &[(f64, f64)]) -> bool {
    let (a, b) = (lp[0], lp[lp.len() - 1]);
    (a.0 - b.0).abs() <= 1e-12 * (1.0 + a.0.abs()) && (a.1 - b.1).abs() <= 1e-12 * (1.0 + a.1.abs())
}

/// Nearest-neighbour continuation of the eigenvalue pair along one discretisation.
fn track<S: ParamSource + ?Sized>(lp: &[(f64, f64)], src: &S) -> Result<Vec<[C64; 2]>> {
    let mut out: Vec<[C64; 2]> = Vec::with_capacity(lp.len());
    for (k, &(s, d)) in lp.iter().enumerate() {
        let e = src.sample(s, d)?.eigenvalues();
        let gap = (e.e1 - e.e2).norm();
        let scale = e.e1.norm().max(e.e2.norm()).max(1.0);
        if gap <= 1e-12 * scale {
            return Err(Error::RefineLoop { step: k });
        }
        let Some(&[a, b]) = out.last() else {
            let e = e.sorted();
            out.push([e.e1, e.e2]);
            continue;
        };
        let direct = (a - e.e1).norm().max((b - e.e2).norm());
        let swapped = (a - e.e2).norm().max((b - e.e1).norm());
        let (x, y, jump) = if direct <= swapped { (e.e1, e.e2, direct) } else { (e.e2, e.e1, swapped) };
        // continuity: each step moves an eigenvalue by less than half the gap on either side
        let prev_gap = (a - b).norm();
        if jump >= 0.5 * gap.min(prev_gap) {
            return Err(Error::RefineLoop { step: k });
        }
        out.push([x, y]);
    }
    Ok(out)
}

/// Tracks both eigenvalues around the closed loop `lp` and reports whether they come back
/// exchanged. On a continuation ambiguity the loop is densified up to `max_refinements` times.
pub fn braid<S: ParamSource + ?Sized>(lp: &[(f64, f64)], src: &S, max_refinements: usize) -> Result<BraidTrace> {
    if lp.len() < 4 || !is_closed(lp) {
        return Err(Error::InvalidArgument("loop must have at least 3 segments and end where it starts".into()));
    }
    for &(s, d) in lp {
        if !src.in_domain(s, d) {
            return Err(Error::OutOfBounds { s, delta: d });
        }
    }
    let mut cur = lp.to_vec();
    let mut refinements = 0;
    let paths = loop {
        match track(&cur, src) {
            Ok(p) => break p,
            Err(Error::RefineLoop { step }) if refinements < max_refinements => {
                log::debug!("braid: ambiguity at step {step} of {}, densifying", cur.len());
                cur = densify(&cur);
                refinements += 1;
            }
            Err(e) => return Err(e),
        }
    };
    let (first, last) = (paths[0], paths[paths.len() - 1]);
    let stay = (first[0] - last[0]).norm().max((first[1] - last[1]).norm());
    let cross = (first[0] - last[1]).norm().max((first[1] - last[0]).norm());
    let permutation = if stay <= cross { Permutation::Identity } else { Permutation::Swap };
    let points = cur
        .iter()
        .zip(&paths)
        .map(|(&(s, d), e)| BraidPoint { s_mm: s, delta_mm: d, e1: [e[0].re, e[0].im], e2: [e[1].re, e[1].im] })
        .collect();
    Ok(BraidTrace { schema_version: 1, permutation, refinements, points, config_hash: None })
}
