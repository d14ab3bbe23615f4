//! EP localization on a scan and the eigenvalue-difference maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scan::result::ScanResult;

/// Display thresholds of the difference maps, MHz.
pub const F_DIFF_THRESHOLD: f64 = 3.0;
pub const G_DIFF_THRESHOLD: f64 = 0.35;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpEstimate {
    pub schema_version: u32,
    /// Refined location, mm.
    pub s_mm: f64,
    pub delta_mm: f64,
    /// Grid node with the smallest `|D|`.
    pub s_grid: f64,
    pub delta_grid: f64,
    /// Refinement offset from the grid node, in grid steps.
    pub offset: [f64; 2],
    /// One grid step per axis.
    pub uncertainty_mm: [f64; 2],
    pub abs_radicand_min: f64,
}

/// Grid argmin of `|D|`, refined by a least-squares quadratic model of `|D|²` on the 3×3
/// neighbourhood. The offset is clamped to one step per axis.
pub fn locate_ep(scan: &ScanResult) -> Result<EpEstimate> {
    let g = &scan.grid;
    let (ns, nd) = (g.ns(), g.nd());
    let vals: Vec<Option<f64>> = scan.points.iter().map(|p| p.abs_radicand()).collect();
    let finite: Vec<f64> = vals.iter().flatten().copied().collect();
    if finite.is_empty() {
        return Err(Error::NoEpFound);
    }
    let (lo, hi) = finite.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    if hi == 0.0 || hi - lo <= 1e-9 * hi {
        return Err(Error::NoEpFound);
    }
    let k = (0..vals.len())
        .filter(|&k| vals[k].is_some())
        .min_by(|&a, &b| vals[a].unwrap().total_cmp(&vals[b].unwrap()))
        .unwrap();
    let (i, j) = (k / nd, k % nd);
    let (s0, d0) = g.point_at(k);
    if i == 0 || j == 0 || i + 1 >= ns || j + 1 >= nd {
        return Err(Error::EpOutsideWindow { s: s0, delta: d0 });
    }

    // |D|² ≈ a + b x + c y + d x² + e x y + f y², x and y in steps
    let mut rows = Vec::with_capacity(9);
    let mut rhs = Vec::with_capacity(9);
    for di in -1i32..=1 {
        for dj in -1i32..=1 {
            let kk = g.index((i as i32 + di) as usize, (j as i32 + dj) as usize);
            let Some(v) = vals[kk] else { continue };
            let (x, y) = (di as f64, dj as f64);
            rows.push([1.0, x, y, x * x, x * y, y * y]);
            rhs.push(v * v);
        }
    }
    let offset = quadratic_minimum(&rows, &rhs).unwrap_or([0.0, 0.0]);
    Ok(EpEstimate {
        schema_version: 1,
        s_mm: s0 + offset[0] * g.step,
        delta_mm: d0 + offset[1] * g.d_step(),
        s_grid: s0,
        delta_grid: d0,
        offset,
        uncertainty_mm: [g.step, g.d_step()],
        abs_radicand_min: lo,
    })
}

fn quadratic_minimum(rows: &[[f64; 6]], rhs: &[f64]) -> Option<[f64; 2]> {
    if rows.len() < 6 {
        return None;
    }
    let a = nalgebra::DMatrix::from_fn(rows.len(), 6, |r, c| rows[r][c]);
    let b = nalgebra::DVector::from_column_slice(rhs);
    let c = a.svd(true, true).solve(&b, 1e-12).ok()?;
    // stationary point of the quadratic: [2d e; e 2f] x = −[b; c]
    let (h11, h12, h22) = (2.0 * c[3], c[4], 2.0 * c[5]);
    let det = h11 * h22 - h12 * h12;
    if !(h11 > 0.0 && det > 0.0) {
        return None;
    }
    let x = (-c[1] * h22 + c[2] * h12) / det;
    let y = (-c[2] * h11 + c[1] * h12) / det;
    Some([x.clamp(-1.0, 1.0), y.clamp(-1.0, 1.0)])
}

/// Per grid point: `|f1 − f2|`, `|Γ1 − Γ2|`, and whether each is under its display threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffPoint {
    pub s: f64,
    pub delta: f64,
    pub df: f64,
    pub dg: f64,
    pub f_shown: bool,
    pub g_shown: bool,
}

pub fn difference_map(scan: &ScanResult, f_threshold: f64, g_threshold: f64) -> Vec<DiffPoint> {
    scan.points
        .iter()
        .map(|p| {
            let (df, dg) = p.differences().unwrap_or((f64::NAN, f64::NAN));
            DiffPoint { s: p.s, delta: p.delta, df, dg, f_shown: df < f_threshold, g_shown: dg < g_threshold }
        })
        .collect()
}

/// Side structure of the difference maps around an EP at `s_ep`.
///
/// For each column of constant `s`, `min_δ |f1 − f2|` and `min_δ |Γ1 − Γ2|` are compared.
/// Left of the EP the position difference must be the smaller one (the valley of `|f1 − f2|`
/// lies there), right of it the width difference. Columns within `exclude` steps of the EP
/// are not judged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LobeReport {
    pub columns_left: usize,
    pub columns_right: usize,
    pub left_ok: usize,
    pub right_ok: usize,
    pub column_s: Vec<f64>,
    pub min_df: Vec<f64>,
    pub min_dg: Vec<f64>,
}

impl LobeReport {
    pub fn holds(&self) -> bool {
        self.columns_left > 0
            && self.columns_right > 0
            && self.left_ok == self.columns_left
            && self.right_ok == self.columns_right
    }
}

pub fn lobe_structure(scan: &ScanResult, s_ep: f64, exclude: f64) -> LobeReport {
    let g = &scan.grid;
    let mut rep = LobeReport {
        columns_left: 0,
        columns_right: 0,
        left_ok: 0,
        right_ok: 0,
        column_s: vec![],
        min_df: vec![],
        min_dg: vec![],
    };
    for i in 0..g.ns() {
        let s = g.s_at(i);
        let (mut mf, mut mg) = (f64::INFINITY, f64::INFINITY);
        for j in 0..g.nd() {
            if let Some((df, dg)) = scan.at(i, j).differences() {
                mf = mf.min(df);
                mg = mg.min(dg);
            }
        }
        rep.column_s.push(s);
        rep.min_df.push(mf);
        rep.min_dg.push(mg);
        if (s - s_ep).abs() < exclude * g.step || !mf.is_finite() {
            continue;
        }
        if s < s_ep {
            rep.columns_left += 1;
            rep.left_ok += usize::from(mf < mg);
        } else {
            rep.columns_right += 1;
            rep.right_ok += usize::from(mg < mf);
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::FitConfig;
    use crate::scan::{scan, ParamGrid, ScanSource};
    use crate::synth::SyntheticFamily;

    #[test]
    fn quadratic_refinement_is_exact_for_a_linear_radicand() {
        // D = (x − 0.3) + i (y + 0.2)  ⇒ |D|² quadratic with minimum at (0.3, −0.2)
        let mut rows = vec![];
        let mut rhs = vec![];
        for x in [-1.0, 0.0, 1.0] {
            for y in [-1.0, 0.0, 1.0] {
                rows.push([1.0, x, y, x * x, x * y, y * y]);
                rhs.push((x - 0.3f64).powi(2) + (y + 0.2f64).powi(2));
            }
        }
        let m = quadratic_minimum(&rows, &rhs).unwrap();
        assert!((m[0] - 0.3).abs() < 1e-12 && (m[1] + 0.2).abs() < 1e-12);
    }

    #[test]
    fn ep_on_the_boundary_is_reported() {
        let fam = SyntheticFamily::b38();
        let g = ParamGrid::new((1.72, 1.80), (41.70, 41.78), 0.01).unwrap();
        let r = scan(&g, &ScanSource::Family(&fam), &FitConfig::default()).unwrap();
        assert!(matches!(locate_ep(&r), Err(Error::EpOutsideWindow { .. })));
    }

    #[test]
    fn flat_landscape_has_no_ep() {
        let fam = SyntheticFamily::b38();
        let g = ParamGrid::centered(1.72, 41.78, 1, 0.01).unwrap();
        let mut r = scan(&g, &ScanSource::Family(&fam), &FitConfig::default()).unwrap();
        let h = r.points[0].h;
        for p in &mut r.points {
            p.h = h;
        }
        assert!(matches!(locate_ep(&r), Err(Error::NoEpFound)));
    }
}
