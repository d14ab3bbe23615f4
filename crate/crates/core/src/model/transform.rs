//! Basis changes acting on the Pauli vector, the gauge condition
//! `(h1 + i h2)/(h1 − i h2) = e^{2iτ}` and the T-violation angle τ.
//!
//! All transforms act as `H ↦ V H V†`:
//!
//! * `GaugeO0(φ)` and `RotO(φ)`: `V = e^{iφσ_y}`, a real rotation of `(h1, h3)` by `2φ`.
//! * `TauU(θ)`: `V = e^{iθσ_z}`, a rotation of `(h1, h2)` by `2θ`. With `θ = τ/2` it
//!   maps a gauge-fixed matrix onto a complex symmetric one.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::hamiltonian::EffHamiltonian;
use crate::model::matrix::Mat2;
use crate::scalar::{times_i, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransformKind {
    GaugeO0,
    TauU,
    RotO,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisTransform<T> {
    pub kind: TransformKind,
    pub angle: T,
}

/// Tolerance on `| |ratio| − 1 |` accepted by [`extract_tau`].
pub const GAUGE_TOLERANCE: f64 = 1e-6;

impl<T: Real> BasisTransform<T> {
    pub fn new(kind: TransformKind, angle: T) -> Self {
        BasisTransform { kind, angle }
    }

    pub fn identity(kind: TransformKind) -> Self {
        Self::new(kind, T::zero())
    }

    pub fn inverse(&self) -> Self {
        Self::new(self.kind, -self.angle)
    }

    pub fn unitary(&self) -> Mat2<T> {
        let (s, c) = self.angle.sin_cos();
        match self.kind {
            TransformKind::GaugeO0 | TransformKind::RotO => Mat2::from_real(c, s, -s, c),
            TransformKind::TauU => {
                let z = Complex::new(T::zero(), T::zero());
                Mat2::new(Complex::new(c, s), z, z, Complex::new(c, -s))
            }
        }
    }

    /// `V H V†`, evaluated directly on the Pauli vector.
    pub fn apply(&self, h: &EffHamiltonian<T>) -> EffHamiltonian<T> {
        let (s, c) = (self.angle + self.angle).sin_cos();
        let [h1, h2, h3] = h.h();
        let rotated = match self.kind {
            TransformKind::GaugeO0 | TransformKind::RotO => {
                [h1.scale(c) - h3.scale(s), h2, h1.scale(s) + h3.scale(c)]
            }
            TransformKind::TauU => [h1.scale(c) + h2.scale(s), h2.scale(c) - h1.scale(s), h3],
        };
        EffHamiltonian::from_mean_h(h.mean(), rotated).expect("rotation of finite entries is finite")
    }

    /// Dense route `V M V†` for arbitrary matrices.
    pub fn apply_matrix(&self, m: &Mat2<T>) -> Mat2<T> {
        m.conjugate_by(&self.unitary())
    }
}

/// Rotates into the basis where the off-diagonal ratio is unimodular.
///
/// `Φ0` solves `tan 2Φ0 = Im(h1/h2) / Im(h3/h2)` with the representative in `(−π/4, π/4]`.
/// For `h2 = 0` the matrix is already gauge-fixed and the identity is returned.
pub fn gauge_fix<T: Real>(h: &EffHamiltonian<T>) -> Result<(EffHamiltonian<T>, BasisTransform<T>)> {
    let h2 = h.h2();
    if h2.re == T::zero() && h2.im == T::zero() {
        return Ok((*h, BasisTransform::identity(TransformKind::GaugeO0)));
    }
    let a = (h.h1() / h2).im;
    let b = (h.h3() / h2).im;
    let scale = (h.h1().norm() + h.h3().norm()) / h2.norm();
    let tiny = T::epsilon() * T::lit(16.0) * scale;
    if a.abs() <= tiny && b.abs() <= tiny {
        return Err(Error::DegenerateGauge);
    }
    let phi = half_angle(a, b);
    let t = BasisTransform::new(TransformKind::GaugeO0, phi);
    Ok((t.apply(h), t))
}

/// Half of the angle `2φ` with `tan 2φ = num/den`, representative in `(−π/4, π/4]`.
pub(crate) fn half_angle<T: Real>(num: T, den: T) -> T {
    let two_phi = if den == T::zero() {
        T::FRAC_PI_2()
    } else {
        let t = (num / den).atan();
        if t <= -T::FRAC_PI_2() {
            T::FRAC_PI_2()
        } else {
            t
        }
    };
    two_phi / T::lit(2.0)
}

/// `τ ∈ (−π/2, π/2)` from `(h1 + i h2)/(h1 − i h2) = e^{2iτ}`.
pub fn extract_tau<T: Real>(h: &EffHamiltonian<T>) -> Result<T> {
    let ih2 = times_i(h.h2());
    let num = h.h1() + ih2;
    let den = h.h1() - ih2;
    if den.norm() == T::zero() {
        return Err(Error::SingularRatio);
    }
    let ratio = num / den;
    let deviation = (ratio.norm() - T::one()).abs();
    if deviation > T::lit(GAUGE_TOLERANCE) {
        return Err(Error::NotGaugeFixed {
            deviation: deviation.as_f64(),
        });
    }
    let arg = ratio.arg();
    // ratio = −1 sits on the τ = ±π/2 boundary
    if T::PI() - arg.abs() <= T::lit(64.0) * T::epsilon() {
        return Err(Error::SingularRatio);
    }
    Ok(arg / T::lit(2.0))
}

/// Chooses between the two gauge-fixed representatives `(h1, h2, h3)` and
/// `(−h1, h2, −h3)` so that `Im h3 ≥ 0` (mode 1 is the narrower one); ties go to
/// `Re h3 ≥ 0`. The flip is a rotation by `π/2` and maps `τ ↦ −τ`.
pub fn orient_narrow_first<T: Real>(h: &EffHamiltonian<T>) -> (EffHamiltonian<T>, Option<BasisTransform<T>>) {
    let h3 = h.h3();
    let flip = h3.im < T::zero() || (h3.im == T::zero() && h3.re < T::zero());
    if flip {
        let t = BasisTransform::new(TransformKind::GaugeO0, T::FRAC_PI_2());
        // exact sign flip instead of cos(π) rounding
        let flipped = EffHamiltonian::from_mean_h(h.mean(), [-h.h1(), h.h2(), -h3]).expect("finite");
        (flipped, Some(t))
    } else {
        (*h, None)
    }
}
