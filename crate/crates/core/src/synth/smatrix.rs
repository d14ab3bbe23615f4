//! `S(f) = 1 − 2πi Wa (f − H^eff)⁻¹ Waᵀ` for the two antenna channels.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::model::{EffHamiltonian, Mat2};
use crate::scalar::{times_i, Real};
use crate::synth::coupling::CouplingSet;

/// S-matrix from the effective Hamiltonian and the antenna couplings `wa[a][μ]`.
///
/// Dissipative channels enter only through `heff`. The off-diagonal entries are assembled
/// so that `S12 == S21` holds bitwise whenever the resolvent is symmetric.
pub fn smatrix_antenna<T: Real>(heff: &EffHamiltonian<T>, wa: &[[T; 2]; 2], f: T) -> Result<Mat2<T>> {
    if !f.is_finite() {
        return Err(Error::InvalidArgument("non-finite frequency".into()));
    }
    let a = Mat2::scalar(Complex::new(f, T::zero())) - heff.matrix();
    let det = a.det();
    let scale = a.max_abs();
    if det.norm() <= T::lit(4.0) * T::epsilon() * scale * scale {
        return Err(Error::PoleOnGrid { frequency: f.as_f64() });
    }
    let inv = det.inv();
    // resolvent of [[a, b], [c, d]]: [[d, −b], [−c, a]] / det
    let r = [
        [a.m[1][1] * inv, -a.m[0][1] * inv],
        [-a.m[1][0] * inv, a.m[0][0] * inv],
    ];
    let two_pi = T::TAU();
    let mut s = Mat2::identity();
    for x in 0..2 {
        for y in 0..2 {
            let (p, q) = (wa[x], wa[y]);
            let diag = r[0][0].scale(p[0] * q[0]) + r[1][1].scale(p[1] * q[1]);
            let off = r[0][1].scale(p[0] * q[1]) + r[1][0].scale(p[1] * q[0]);
            let k = diag + off;
            s.m[x][y] = s.m[x][y] - times_i(k).scale(two_pi);
        }
    }
    if !s.is_finite() {
        return Err(Error::PoleOnGrid { frequency: f.as_f64() });
    }
    Ok(s)
}

/// S-matrix of `heff` coupled through the antenna rows of `w`.
pub fn smatrix_at(heff: &EffHamiltonian<f64>, w: &CouplingSet, f: f64) -> Result<Mat2<f64>> {
    smatrix_antenna(heff, &w.antenna_rows(), f)
}

/// S-matrix from an internal Hamiltonian: forms `H^eff = H − iπ Σ_c W_cμ W_cν` first.
pub fn smatrix_from_internal(internal: &EffHamiltonian<f64>, w: &CouplingSet, f: f64) -> Result<Mat2<f64>> {
    smatrix_at(&w.effective(internal), w, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;
    type EffHamiltonian = crate::EffHamiltonian;

    fn heff() -> EffHamiltonian {
        EffHamiltonian::from_pauli(
            C64::new(2450.3, -0.5),
            C64::new(2449.7, -1.3),
            C64::new(0.38, -0.3),
            C64::new(0.14, 0.0),
        )
        .unwrap()
    }

    #[test]
    fn decoupled_is_identity() {
        for f in [2440.0, 2450.0, 2450.3] {
            let s = smatrix_antenna(&heff(), &[[0.0; 2]; 2], f).unwrap();
            assert_eq!(s, Mat2::identity());
        }
    }

    #[test]
    fn real_eigenvalue_on_grid_is_a_pole() {
        let h = EffHamiltonian::from_pauli(C64::new(5.0, 0.0), C64::new(3.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0))
            .unwrap();
        let e = smatrix_antenna(&h, &[[0.1, 0.0], [0.0, 0.1]], 5.0).unwrap_err();
        assert!(matches!(e, Error::PoleOnGrid { .. }));
    }

    #[test]
    fn symmetric_resolvent_gives_bitwise_reciprocity() {
        let h = EffHamiltonian::from_pauli(
            C64::new(10.1, -0.3),
            C64::new(9.2, -0.7),
            C64::new(0.4, -0.05),
            C64::new(0.0, 0.0),
        )
        .unwrap();
        let wa = [[0.18, 0.06], [0.05, 0.17]];
        for k in 0..400 {
            let f = 5.0 + 0.025 * k as f64;
            let s = smatrix_antenna(&h, &wa, f).unwrap();
            assert_eq!(s.m[0][1], s.m[1][0]);
        }
    }

    #[test]
    fn nonzero_h2_breaks_reciprocity() {
        let s = smatrix_antenna(&heff(), &[[0.18, 0.06], [0.05, 0.17]], 2450.0).unwrap();
        assert!((s.m[0][1] - s.m[1][0]).norm() > 1e-3);
    }

    #[test]
    fn generic_over_f32() {
        let h = heff().cast::<f32>();
        let s32 = smatrix_antenna(&h, &[[0.18f32, 0.06], [0.05, 0.17]], 2450.0f32).unwrap();
        let s64 = smatrix_antenna(&heff(), &[[0.18, 0.06], [0.05, 0.17]], 2450.0).unwrap();
        assert!((s32.m[0][0].re as f64 - s64.m[0][0].re).abs() < 1e-2);
    }
}
