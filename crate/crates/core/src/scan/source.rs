//! Continuous access to the plane for curve tracing and braiding.

use crate::error::{Error, Result};
use crate::model::{extract_tau, gauge_fix, orient_narrow_first};
use crate::scalar::principal_sqrt;
use crate::scan::grid::ParamGrid;
use crate::synth::SyntheticFamily;
use crate::{EffHamiltonian, EigenPair, Radicand, C64};

/// Basis-independent data at one parameter point. `h` is present only when the source
/// knows the matrix itself (not for interpolated scans).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub mean: C64,
    pub radicand: Radicand,
    pub tau: f64,
    pub h: Option<EffHamiltonian>,
}

impl Sample {
    pub fn from_hamiltonian(h: &EffHamiltonian) -> Self {
        Sample {
            mean: h.mean(),
            radicand: h.radicand(),
            tau: gauge_tau(h).unwrap_or(f64::NAN),
            h: Some(*h),
        }
    }

    /// `mean ± √D`.
    pub fn eigenvalues(&self) -> EigenPair {
        let r = principal_sqrt(self.radicand.value());
        EigenPair { e1: self.mean + r, e2: self.mean - r }
    }

    pub fn relative_cross(&self) -> f64 {
        self.radicand.relative_cross()
    }
}

pub trait ParamSource: Sync {
    fn sample(&self, s: f64, delta: f64) -> Result<Sample>;

    fn in_domain(&self, s: f64, delta: f64) -> bool;

    /// Rectangle that curve tracing stays inside.
    fn window(&self) -> ParamGrid;
}

impl ParamSource for SyntheticFamily {
    fn sample(&self, s: f64, delta: f64) -> Result<Sample> {
        Ok(Sample::from_hamiltonian(&self.hamiltonian_at(s, delta)?))
    }

    fn in_domain(&self, s: f64, delta: f64) -> bool {
        self.contains(s, delta)
    }

    fn window(&self) -> ParamGrid {
        self.window
    }
}

/// `τ` of `h` after gauge fixing with the narrow-first orientation.
pub fn gauge_tau(h: &EffHamiltonian) -> Result<f64> {
    let hg = match gauge_fix(h) {
        Ok((hg, _)) => hg,
        Err(Error::DegenerateGauge) => *h,
        Err(e) => return Err(e),
    };
    let (ho, _) = orient_narrow_first(&hg);
    extract_tau(&ho)
}

/// Another source restricted to a smaller window.
pub struct Windowed<'a, S: ParamSource + ?Sized> {
    pub inner: &'a S,
    pub window: ParamGrid,
}

impl<S: ParamSource + ?Sized> ParamSource for Windowed<'_, S> {
    fn sample(&self, s: f64, delta: f64) -> Result<Sample> {
        self.inner.sample(s, delta)
    }

    fn in_domain(&self, s: f64, delta: f64) -> bool {
        self.window.contains(s, delta) && self.inner.in_domain(s, delta)
    }

    fn window(&self) -> ParamGrid {
        self.window
    }
}
