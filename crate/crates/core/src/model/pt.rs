//! Passive PT symmetry: reduction of the width-offset Hamiltonian to the normal form
//!
//! ```text
//! [ A + iB   C + iD ]
//! [ C − iD   A − iB ]      A, B, C, D real
//! ```
//!
//! which commutes with `PT = σ_x ∘ conj`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::hamiltonian::EffHamiltonian;
use crate::model::matrix::Mat2;
use crate::model::transform::{half_angle, BasisTransform, TransformKind};
use crate::scalar::{principal_sqrt, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PtNormalForm<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    /// Imaginary off-diagonal part (`D` of the normal form).
    pub dpt: T,
    /// Max entry deviation of the transformed matrix from the normal-form pattern.
    pub residual: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PtPhase {
    /// Real eigenvalues, PT-symmetric eigenvectors.
    Unbroken,
    /// Coalesced eigenvalues.
    Exceptional,
    /// Complex-conjugate eigenvalues.
    Broken,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PtTolerances<T> {
    /// Bound on `|Re h·Im h| / |h|²`.
    pub eps_cross: T,
    /// Bound on the normal-form residual, absolute (MHz).
    pub eps_pt: T,
}

impl<T: Real> Default for PtTolerances<T> {
    fn default() -> Self {
        PtTolerances {
            eps_cross: T::lit(1e-6),
            eps_pt: T::lit(1e-8),
        }
    }
}

/// Output of [`to_pt_form`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PtReduction<T> {
    pub form: PtNormalForm<T>,
    pub tau_u: BasisTransform<T>,
    pub rot_o: BasisTransform<T>,
    /// `O U ℋ U† Oᵀ`
    pub transformed: EffHamiltonian<T>,
}

impl<T: Real> PtNormalForm<T> {
    pub fn matrix(&self) -> Mat2<T> {
        Mat2::new(
            Complex::new(self.a, self.b),
            Complex::new(self.c, self.dpt),
            Complex::new(self.c, -self.dpt),
            Complex::new(self.a, -self.b),
        )
    }

    /// `A ± sqrt(C² + D² − B²)`
    pub fn eigenvalues(&self) -> [Complex<T>; 2] {
        let disc = self.c * self.c + self.dpt * self.dpt - self.b * self.b;
        let r = principal_sqrt(Complex::new(disc, T::zero()));
        let a = Complex::new(self.a, T::zero());
        [a + r, a - r]
    }

    /// Phase with a relative dead band `rel_tol` around `C² + D² = B²`.
    pub fn phase(&self, rel_tol: T) -> PtPhase {
        let off = self.c * self.c + self.dpt * self.dpt;
        let diag = self.b * self.b;
        let disc = off - diag;
        if disc.abs() <= rel_tol * (off + diag) {
            PtPhase::Exceptional
        } else if disc > T::zero() {
            PtPhase::Unbroken
        } else {
            PtPhase::Broken
        }
    }

    /// `|⟨v, PT v⟩| / ‖v‖²` for both eigenvectors; 1 for PT-symmetric eigenvectors.
    pub fn eigenvector_pt_overlaps(&self) -> [T; 2] {
        let m = self.matrix();
        self.eigenvalues().map(|e| {
            let a = [m.m[0][1], e - m.m[0][0]];
            let b = [e - m.m[1][1], m.m[1][0]];
            let n = |v: &[Complex<T>; 2]| v[0].norm_sqr() + v[1].norm_sqr();
            let v = if n(&a) >= n(&b) { a } else { b };
            let nv = n(&v);
            if nv == T::zero() {
                return T::one();
            }
            // PT v = σx conj(v) = (conj v1, conj v0)
            let inner = v[0].conj() * v[1].conj() + v[1].conj() * v[0].conj();
            inner.norm() / nv
        })
    }
}

/// Max entry norm of `U conj(M) − M U`, the commutator of `M` with the antilinear map `v ↦ U conj(v)`.
pub fn antilinear_commutator_norm<T: Real>(u: &Mat2<T>, m: &Mat2<T>) -> T {
    (*u * m.conj() - *m * *u).max_abs()
}

/// Commutator norm with `PT`, `P = σ_x`, `T` = complex conjugation.
pub fn pt_commutator_norm<T: Real>(m: &Mat2<T>) -> T {
    antilinear_commutator_norm(&Mat2::sigma_x(), m)
}

/// `U' = V† σ_x conj(V)` with `V = O U`: `ℋ` commutes with `U' T` whenever `V ℋ V†`
/// commutes with `PT`.
pub fn generalized_symmetry<T: Real>(tau_u: &BasisTransform<T>, rot_o: &BasisTransform<T>) -> Mat2<T> {
    let v = rot_o.unitary() * tau_u.unitary();
    v.adjoint() * Mat2::sigma_x() * v.conj()
}

/// Brings a width-offset Hamiltonian on the PT curve (`Re h·Im h = 0`) into the normal form.
///
/// `U = TauU(τ/2)` symmetrises the gauge-fixed matrix; `O = RotO(Φ)` with
/// `tan 2Φ = Im h1' / Im h3'` (primes: after `U`, so `h1' = h1/cos τ`) then clears
/// `Im h1` and `Re h3`.
pub fn to_pt_form<T: Real>(
    shifted: &EffHamiltonian<T>,
    tau: T,
    tol: PtTolerances<T>,
) -> Result<PtReduction<T>> {
    let r = shifted.radicand();
    let rel = r.relative_cross();
    if rel.abs() > tol.eps_cross {
        return Err(Error::NotOnPtCurve {
            relative_cross: rel.as_f64(),
            tolerance: tol.eps_cross.as_f64(),
        });
    }
    let tau_u = BasisTransform::new(TransformKind::TauU, tau / T::lit(2.0));
    let sym = tau_u.apply(shifted);
    let kappa = sym.h1();
    let h3 = sym.h3();
    let scale = r.norm2().sqrt();
    let tiny = T::lit(64.0) * T::epsilon() * scale;

    let phi = if kappa.im.abs() <= tiny {
        T::zero()
    } else {
        half_angle(kappa.im, h3.im)
    };
    let (s2, c2) = (phi + phi).sin_cos();
    let loose = T::lit(1e-6) * scale;
    if s2.abs() <= T::lit(1e-12) && kappa.im.abs() > loose {
        return Err(Error::DegenerateRotation("sin 2Φ = 0 with Im h1 ≠ 0"));
    }
    if c2.abs() <= T::lit(1e-12) && kappa.re.abs() > loose {
        return Err(Error::DegenerateRotation("cos 2Φ = 0 with Re h1 ≠ 0"));
    }

    let rot_o = BasisTransform::new(TransformKind::RotO, phi);
    let out = rot_o.apply(&sym);
    let a = out.mean().re;
    let b = out.h3().im;
    let c = out.h1().re;
    // H12 = h1 − i h2 = C + iD
    let dpt = -out.h2().re;
    let mut form = PtNormalForm {
        a,
        b,
        c,
        dpt,
        residual: T::zero(),
    };
    form.residual = (out.matrix() - form.matrix()).max_abs();
    if form.residual > tol.eps_pt {
        return Err(Error::PtResidual {
            residual: form.residual.as_f64(),
            tolerance: tol.eps_pt.as_f64(),
        });
    }
    Ok(PtReduction {
        form,
        tau_u,
        rot_o,
        transformed: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::transform::{extract_tau, gauge_fix};

    type C = Complex<f64>;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn normal_form(a: f64, b: f64, cc: f64) -> EffHamiltonian<f64> {
        let m = PtNormalForm { a, b, c: cc, dpt: 0.0, residual: 0.0 }.matrix();
        EffHamiltonian::from_matrix(&m).unwrap()
    }

    #[test]
    fn commutator_examples() {
        let nf = PtNormalForm { a: 1.3, b: -0.2, c: 0.7, dpt: 2.1, residual: 0.0 };
        assert_eq!(pt_commutator_norm(&nf.matrix()), 0.0);
        let m = Mat2::new(c(0., 1.), c(0., 0.), c(0., 0.), c(0., 1.));
        assert_eq!(pt_commutator_norm(&m), 2.0);
        assert_eq!(pt_commutator_norm(&Mat2::<f64>::zero()), 0.0);
    }

    #[test]
    fn fixed_point_unbroken() {
        let h = normal_form(1.0, 0.5, 2.0);
        let red = to_pt_form(&h, 0.0, PtTolerances::default()).unwrap();
        assert_eq!(red.tau_u.angle, 0.0);
        assert_eq!(red.rot_o.angle, 0.0);
        assert_eq!(red.form.residual, 0.0);
        assert_eq!((red.form.a, red.form.b, red.form.c), (1.0, 0.5, 2.0));
        assert_eq!(red.form.phase(1e-12), PtPhase::Unbroken);
        for e in red.form.eigenvalues() {
            assert_eq!(e.im, 0.0);
        }
    }

    #[test]
    fn broken_phase_pair() {
        let h = normal_form(1.0, 2.0, 0.5);
        let red = to_pt_form(&h, 0.0, PtTolerances::default()).unwrap();
        assert_eq!(red.form.phase(1e-12), PtPhase::Broken);
        let ev = red.form.eigenvalues();
        let expect = (4.0f64 - 0.25).sqrt();
        assert!((ev[0] - c(1.0, expect)).norm() < 1e-14);
        assert!((ev[1] - c(1.0, -expect)).norm() < 1e-14);
        let ov = red.form.eigenvector_pt_overlaps();
        assert!(ov[0] < 1.0 - 1e-6 && ov[1] < 1.0 - 1e-6);
    }

    #[test]
    fn unbroken_eigenvectors_are_pt_symmetric() {
        let nf = PtNormalForm::<f64> { a: 0.3, b: 0.4, c: 1.5, dpt: 0.0, residual: 0.0 };
        for o in nf.eigenvector_pt_overlaps() {
            assert!((o - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn off_curve_rejected() {
        let h = EffHamiltonian::from_mean_h(c(0., 0.), [c(1., 1.), c(0., 0.), c(0., 0.)]).unwrap();
        assert!(matches!(
            to_pt_form(&h, 0.0, PtTolerances::default()),
            Err(Error::NotOnPtCurve { .. })
        ));
    }

    #[test]
    fn closed_form_entries_agree() {
        // gauge-fixed h on the PT curve: Re h ⟂ Im h
        let tau = 0.3f64;
        let kappa = c(0.8, 0.35);
        // h3 with Re κ Im κ + Re h3 Im h3 = 0
        let h3 = c(-0.4, 0.7);
        let h = EffHamiltonian::from_mean_h(
            c(2.0, 0.0),
            [kappa.scale(tau.cos()), kappa.scale(tau.sin()), h3],
        )
        .unwrap();
        assert!(h.radicand().cross.abs() < 1e-15);
        assert!((extract_tau(&h).unwrap() - tau).abs() < 1e-14);
        let red = to_pt_form(&h, tau, PtTolerances::default()).unwrap();
        let phi = red.rot_o.angle;
        let (s2, c2) = (2.0 * phi).sin_cos();
        let h1 = h.h1();
        assert!((red.form.b - h1.im / (s2 * tau.cos())).abs() < 1e-12);
        assert!((red.form.c - h1.re / (c2 * tau.cos())).abs() < 1e-12);
        assert!((red.form.a - 2.0).abs() < 1e-15);
        assert!(red.form.dpt.abs() < 1e-14);
        assert!(pt_commutator_norm(&red.transformed.matrix()) < 1e-12);
        let u = generalized_symmetry(&red.tau_u, &red.rot_o);
        assert!(antilinear_commutator_norm(&u, &h.matrix()) < 1e-12);
        assert!(gauge_fix(&h).unwrap().1.angle.abs() < 1e-14);
    }
}
