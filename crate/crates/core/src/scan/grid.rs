use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PARAM_STEP_MM: f64 = 0.01;
const MAX_POINTS: usize = 10_000_000;

/// Rectangular `(s, δ)` grid in mm. `delta_step` defaults to `step`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamGrid {
    pub s_min: f64,
    pub s_max: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_step: Option<f64>,
}

fn default_step() -> f64 {
    DEFAULT_PARAM_STEP_MM
}

fn axis_len(min: f64, max: f64, step: f64) -> usize {
    ((max - min) / step + 1e-9).floor() as usize + 1
}

impl ParamGrid {
    pub fn new(s: (f64, f64), delta: (f64, f64), step: f64) -> Result<Self> {
        let g = ParamGrid {
            s_min: s.0,
            s_max: s.1,
            delta_min: delta.0,
            delta_max: delta.1,
            step,
            delta_step: None,
        };
        g.validate()?;
        Ok(g)
    }

    /// Single-point grid.
    pub fn point(s: f64, delta: f64) -> Self {
        ParamGrid {
            s_min: s,
            s_max: s,
            delta_min: delta,
            delta_max: delta,
            step: DEFAULT_PARAM_STEP_MM,
            delta_step: None,
        }
    }

    /// Square grid of `2k + 1` points per axis centred on `(s, δ)`.
    pub fn centered(s: f64, delta: f64, k: usize, step: f64) -> Result<Self> {
        let h = k as f64 * step;
        Self::new((s - h, s + h), (delta - h, delta + h), step)
    }

    /// Parses `smin:smax:sstep x dmin:dmax:dstep` (whitespace optional).
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("grid {text:?}: expected min:max:step x min:max:step"));
        let (a, b) = text.split_once(['x', 'X']).ok_or_else(bad)?;
        let axis = |t: &str| -> Result<(f64, f64, f64)> {
            let v: Vec<f64> = t
                .trim()
                .split(':')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad())?;
            match v[..] {
                [lo, hi, st] => Ok((lo, hi, st)),
                _ => Err(bad()),
            }
        };
        let (s0, s1, ss) = axis(a)?;
        let (d0, d1, ds) = axis(b)?;
        let g = ParamGrid {
            s_min: s0,
            s_max: s1,
            delta_min: d0,
            delta_max: d1,
            step: ss,
            delta_step: if ds == ss { None } else { Some(ds) },
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let v = [self.s_min, self.s_max, self.delta_min, self.delta_max, self.step, self.d_step()];
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite grid parameter".into()));
        }
        if self.step <= 0.0 || self.d_step() <= 0.0 {
            return Err(Error::InvalidArgument("grid step must be positive".into()));
        }
        if self.s_min > self.s_max || self.delta_min > self.delta_max {
            return Err(Error::InvalidArgument("grid bounds not ordered".into()));
        }
        let ns = (self.s_max - self.s_min) / self.step + 1.0;
        let nd = (self.delta_max - self.delta_min) / self.d_step() + 1.0;
        if ns * nd > MAX_POINTS as f64 {
            return Err(Error::InvalidArgument(format!("grid of {:.0} points exceeds 1e7", ns * nd)));
        }
        Ok(())
    }

    pub fn d_step(&self) -> f64 {
        self.delta_step.unwrap_or(self.step)
    }

    pub fn ns(&self) -> usize {
        axis_len(self.s_min, self.s_max, self.step)
    }

    pub fn nd(&self) -> usize {
        axis_len(self.delta_min, self.delta_max, self.d_step())
    }

    pub fn len(&self) -> usize {
        self.ns() * self.nd()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn s_at(&self, i: usize) -> f64 {
        self.s_min + i as f64 * self.step
    }

    pub fn delta_at(&self, j: usize) -> f64 {
        self.delta_min + j as f64 * self.d_step()
    }

    /// Row-major flat index, `s` outer.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nd() + j
    }

    pub fn point_at(&self, k: usize) -> (f64, f64) {
        let nd = self.nd();
        (self.s_at(k / nd), self.delta_at(k % nd))
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        (0..self.len()).map(|k| self.point_at(k)).collect()
    }

    pub fn contains(&self, s: f64, delta: f64) -> bool {
        let tol = 1e-9 * (1.0 + s.abs().max(delta.abs()));
        s >= self.s_min - tol && s <= self.s_max + tol && delta >= self.delta_min - tol && delta <= self.delta_max + tol
    }
}
