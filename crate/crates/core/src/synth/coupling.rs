//! Real, frequency-independent channel couplings `W` (channels × 2 modes).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{BasisTransform, EffHamiltonian};
use crate::C64;

/// Rows 0 and 1 are the antenna channels; further rows are fictitious dissipative channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct CouplingSet {
    rows: Vec<[f64; 2]>,
}

impl TryFrom<Vec<[f64; 2]>> for CouplingSet {
    type Error = Error;

    fn try_from(rows: Vec<[f64; 2]>) -> Result<Self> {
        CouplingSet::new(rows)
    }
}

impl From<CouplingSet> for Vec<[f64; 2]> {
    fn from(w: CouplingSet) -> Self {
        w.rows
    }
}

impl CouplingSet {
    pub fn new(rows: Vec<[f64; 2]>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "coupling matrix needs at least the two antenna rows, got {}",
                rows.len()
            )));
        }
        if !rows.iter().flatten().all(|x| x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coupling".into()));
        }
        Ok(CouplingSet { rows })
    }

    /// Antenna channels only.
    pub fn antenna(wa: [[f64; 2]; 2]) -> Result<Self> {
        Self::new(wa.to_vec())
    }

    /// Antenna rows plus dissipative rows reproducing the Gram matrix `g_diss`
    /// (`Σ_c W_cμ W_cν` over dissipative channels). Always emits two dissipative rows.
    ///
    /// Slightly negative eigenvalues (relative `1e-12`) are clamped; anything below is a gain
    /// channel and rejected.
    pub fn with_dissipation(wa: [[f64; 2]; 2], g_diss: [[f64; 2]; 2]) -> Result<Self> {
        Self::dissipation_rows(wa, g_diss, true)
    }

    /// Like [`with_dissipation`](Self::with_dissipation) but clamps every negative eigenvalue
    /// to zero. Fitted Hamiltonians can be marginally non-passive under noise.
    pub fn with_dissipation_clamped(wa: [[f64; 2]; 2], g_diss: [[f64; 2]; 2]) -> Result<Self> {
        Self::dissipation_rows(wa, g_diss, false)
    }

    fn dissipation_rows(wa: [[f64; 2]; 2], g_diss: [[f64; 2]; 2], strict: bool) -> Result<Self> {
        let (lambda, vecs) = sym_eigen(g_diss);
        let scale = lambda[0].abs().max(lambda[1].abs()).max(f64::MIN_POSITIVE);
        let mut rows = wa.to_vec();
        for k in 0..2 {
            let l = lambda[k];
            if strict && l < -1e-12 * scale && l < -1e-14 {
                return Err(Error::InvalidArgument(format!(
                    "dissipation Gram matrix has negative eigenvalue {l:e}: not passive"
                )));
            }
            let r = l.max(0.0).sqrt();
            rows.push([r * vecs[k][0], r * vecs[k][1]]);
        }
        Self::new(rows)
    }

    pub fn channels(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[[f64; 2]] {
        &self.rows
    }

    pub fn antenna_rows(&self) -> [[f64; 2]; 2] {
        [self.rows[0], self.rows[1]]
    }

    pub fn dissipative_rows(&self) -> &[[f64; 2]] {
        &self.rows[2..]
    }

    /// `G_μν = Σ_c W_cμ W_cν` over all channels.
    pub fn gram(&self) -> [[f64; 2]; 2] {
        gram_of(&self.rows)
    }

    pub fn antenna_gram(&self) -> [[f64; 2]; 2] {
        gram_of(&self.rows[..2])
    }

    pub fn dissipation_gram(&self) -> [[f64; 2]; 2] {
        gram_of(&self.rows[2..])
    }

    /// `H^eff = H − iπ G` for an internal (Hermitian) `H`.
    pub fn effective(&self, internal: &EffHamiltonian) -> EffHamiltonian {
        let g = self.gram();
        let pi = std::f64::consts::PI;
        let (e1, e2, h1, h2) = internal.to_pauli();
        EffHamiltonian::from_pauli(
            e1 - C64::new(0.0, pi * g[0][0]),
            e2 - C64::new(0.0, pi * g[1][1]),
            h1 - C64::new(0.0, pi * g[0][1]),
            h2,
        )
        .expect("finite couplings keep the Hamiltonian finite")
    }

    /// Inverse of [`effective`](Self::effective): `H = H^eff + iπ G`.
    pub fn internal(&self, heff: &EffHamiltonian) -> EffHamiltonian {
        let g = self.gram();
        let pi = std::f64::consts::PI;
        let (e1, e2, h1, h2) = heff.to_pauli();
        EffHamiltonian::from_pauli(
            e1 + C64::new(0.0, pi * g[0][0]),
            e2 + C64::new(0.0, pi * g[1][1]),
            h1 + C64::new(0.0, pi * g[0][1]),
            h2,
        )
        .expect("finite couplings keep the Hamiltonian finite")
    }

    /// Couplings in the mode basis rotated by a real orthogonal transform, `W' = W Vᵀ`.
    ///
    /// Only the real rotations (`GaugeO0`, `RotO`) keep `W` real.
    pub fn rotated(&self, t: &BasisTransform) -> Result<Self> {
        let v = t.unitary();
        if v.m.iter().flatten().any(|z| z.im != 0.0) {
            return Err(Error::InvalidArgument("couplings only rotate under real orthogonal transforms".into()));
        }
        let rows = self
            .rows
            .iter()
            .map(|w| {
                [
                    w[0] * v.m[0][0].re + w[1] * v.m[0][1].re,
                    w[0] * v.m[1][0].re + w[1] * v.m[1][1].re,
                ]
            })
            .collect();
        Self::new(rows)
    }
}

fn gram_of(rows: &[[f64; 2]]) -> [[f64; 2]; 2] {
    let mut g = [[0.0; 2]; 2];
    for w in rows {
        g[0][0] += w[0] * w[0];
        g[0][1] += w[0] * w[1];
        g[1][1] += w[1] * w[1];
    }
    g[1][0] = g[0][1];
    g
}

/// Eigen-decomposition of a real symmetric 2×2 matrix (Jacobi rotation).
fn sym_eigen(g: [[f64; 2]; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    let (a, b, d) = (g[0][0], 0.5 * (g[0][1] + g[1][0]), g[1][1]);
    let theta = 0.5 * (2.0 * b).atan2(a - d);
    let (s, c) = theta.sin_cos();
    let l0 = a * c * c + 2.0 * b * s * c + d * s * s;
    let l1 = a * s * s - 2.0 * b * s * c + d * c * c;
    ([l0, l1], [[c, s], [-s, c]])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dissipation_factorisation_reproduces_gram() {
        let g = [[0.3, -0.07], [-0.07, 0.11]];
        let w = CouplingSet::with_dissipation([[0.1, 0.2], [0.3, -0.1]], g).unwrap();
        assert_eq!(w.channels(), 4);
        let back = w.dissipation_gram();
        for i in 0..2 {
            for j in 0..2 {
                assert!((back[i][j] - g[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn gain_is_rejected() {
        assert!(CouplingSet::with_dissipation([[0.1, 0.0], [0.0, 0.1]], [[0.1, 0.0], [0.0, -0.2]]).is_err());
    }

    #[test]
    fn effective_and_internal_are_inverse() {
        let w = CouplingSet::new(vec![[0.1, 0.2], [0.3, -0.1], [0.05, 0.04]]).unwrap();
        let h = EffHamiltonian::from_pauli(
            C64::new(10.0, 0.0),
            C64::new(9.0, 0.0),
            C64::new(0.4, 0.0),
            C64::new(0.2, 0.0),
        )
        .unwrap();
        let back = w.internal(&w.effective(&h));
        assert!((back.matrix() - h.matrix()).max_abs() < 1e-15);
    }

    #[test]
    fn too_few_rows() {
        assert!(CouplingSet::new(vec![[1.0, 0.0]]).is_err());
        assert!(CouplingSet::new(vec![[1.0, f64::NAN], [0.0, 0.0]]).is_err());
    }
}
