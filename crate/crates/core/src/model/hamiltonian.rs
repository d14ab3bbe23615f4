//! The 2×2 effective Hamiltonian in Pauli-vector form,
//! `H = (e1 + e2)/2 · 1 + σ·h` with `h = (h1, h2, (e1 − e2)/2)`.

use num_complex::Complex;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::matrix::Mat2;
use crate::scalar::{is_finite, principal_sqrt, times_i, Real};

/// Effective Hamiltonian stored as `(e1, e2, h1, h2)`; `h3` is always derived.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffHamiltonian<T> {
    e1: Complex<T>,
    e2: Complex<T>,
    h1: Complex<T>,
    h2: Complex<T>,
}

/// Eigenvalues `E_j = f_j − iΓ_j/2`; `e1` carries the `+√D` branch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenPair<T> {
    pub e1: Complex<T>,
    pub e2: Complex<T>,
}

/// Real decomposition of `D = h·h = |Re h|² − |Im h|² + 2i Re h·Im h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Radicand<T> {
    pub reh2: T,
    pub imh2: T,
    pub cross: T,
}

impl<T: Real> EffHamiltonian<T> {
    pub fn from_pauli(e1: Complex<T>, e2: Complex<T>, h1: Complex<T>, h2: Complex<T>) -> Result<Self> {
        if ![e1, e2, h1, h2].iter().all(|z| is_finite(*z)) {
            return Err(Error::InvalidArgument("non-finite Hamiltonian entry".into()));
        }
        Ok(EffHamiltonian { e1, e2, h1, h2 })
    }

    /// Inverts `H12 = h1 − i h2`, `H21 = h1 + i h2`.
    pub fn from_matrix(m: &Mat2<T>) -> Result<Self> {
        let half = T::lit(0.5);
        let h1 = (m.m[0][1] + m.m[1][0]).scale(half);
        let h2 = times_i(m.m[0][1] - m.m[1][0]).scale(half);
        Self::from_pauli(m.m[0][0], m.m[1][1], h1, h2)
    }

    /// Builds from the mean energy and the full Pauli vector.
    pub fn from_mean_h(mean: Complex<T>, h: [Complex<T>; 3]) -> Result<Self> {
        Self::from_pauli(mean + h[2], mean - h[2], h[0], h[1])
    }

    pub fn e1(&self) -> Complex<T> {
        self.e1
    }

    pub fn e2(&self) -> Complex<T> {
        self.e2
    }

    /// Symmetric off-diagonal part `H^S_12`.
    pub fn h1(&self) -> Complex<T> {
        self.h1
    }

    /// Antisymmetric off-diagonal part `H^A_12`.
    pub fn h2(&self) -> Complex<T> {
        self.h2
    }

    pub fn h3(&self) -> Complex<T> {
        (self.e1 - self.e2).scale(T::lit(0.5))
    }

    pub fn h(&self) -> [Complex<T>; 3] {
        [self.h1, self.h2, self.h3()]
    }

    pub fn mean(&self) -> Complex<T> {
        (self.e1 + self.e2).scale(T::lit(0.5))
    }

    pub fn to_pauli(&self) -> (Complex<T>, Complex<T>, Complex<T>, Complex<T>) {
        (self.e1, self.e2, self.h1, self.h2)
    }

    pub fn matrix(&self) -> Mat2<T> {
        let ih2 = times_i(self.h2);
        Mat2::new(self.e1, self.h1 - ih2, self.h1 + ih2, self.e2)
    }

    pub fn trace(&self) -> Complex<T> {
        self.e1 + self.e2
    }

    pub fn det(&self) -> Complex<T> {
        self.matrix().det()
    }

    /// Adds `delta · 1`.
    pub fn shifted(&self, delta: Complex<T>) -> Self {
        EffHamiltonian {
            e1: self.e1 + delta,
            e2: self.e2 + delta,
            ..*self
        }
    }

    pub fn radicand(&self) -> Radicand<T> {
        let h = self.h();
        let mut reh2 = T::zero();
        let mut imh2 = T::zero();
        let mut cross = T::zero();
        for c in h {
            reh2 = reh2 + c.re * c.re;
            imh2 = imh2 + c.im * c.im;
            cross = cross + c.re * c.im;
        }
        Radicand { reh2, imh2, cross }
    }

    pub fn eigenvalues(&self) -> EigenPair<T> {
        let root = principal_sqrt(self.radicand().value());
        let mean = self.mean();
        EigenPair {
            e1: mean + root,
            e2: mean - root,
        }
    }

    /// `ℋ = H + i(Γ1 + Γ2)/4 · 1` with the widths of this matrix.
    pub fn width_offset(&self) -> Self {
        let ev = self.eigenvalues();
        let tol = T::lit(1e-12) * (T::one() + self.matrix().max_abs());
        if ev.e1.im > tol || ev.e2.im > tol {
            log::warn!("width offset applied to a matrix with gain (Im E > 0)");
        }
        // Γ1 + Γ2 = −2 Im tr
        let gamma_sum = -(self.trace().im + self.trace().im);
        self.width_offset_by(gamma_sum)
    }

    /// Shift by a fixed total width, `ℋ = H + i·gamma_sum/4 · 1`.
    pub fn width_offset_by(&self, gamma_sum: T) -> Self {
        self.shifted(Complex::new(T::zero(), gamma_sum / T::lit(4.0)))
    }

    pub fn is_ep(&self, eps_d: T, eps_h: T) -> bool {
        let r = self.radicand();
        let n = r.norm2();
        n >= eps_h && r.value().norm() <= eps_d * n
    }

    /// Smallest singular value of the unit-column eigenvector matrix; zero at an EP.
    pub fn defectiveness(&self) -> T {
        let ev = self.eigenvalues();
        let (Some(u), Some(w)) = (self.unit_eigenvector(ev.e1), self.unit_eigenvector(ev.e2)) else {
            // scalar matrix: any orthonormal basis diagonalises it
            return T::one();
        };
        // σ_min² = 1 − |⟨u,w⟩| = |det[u w]|² / (1 + |⟨u,w⟩|)
        let overlap = (u[0].conj() * w[0] + u[1].conj() * w[1]).norm().min(T::one());
        let det = (u[0] * w[1] - u[1] * w[0]).norm();
        det / (T::one() + overlap).sqrt()
    }

    fn unit_eigenvector(&self, e: Complex<T>) -> Option<[Complex<T>; 2]> {
        let m = self.matrix();
        let a = [m.m[0][1], e - m.m[0][0]];
        let b = [e - m.m[1][1], m.m[1][0]];
        let na = (a[0].norm_sqr() + a[1].norm_sqr()).sqrt();
        let nb = (b[0].norm_sqr() + b[1].norm_sqr()).sqrt();
        let (v, n) = if na >= nb { (a, na) } else { (b, nb) };
        if n == T::zero() {
            return None;
        }
        Some([v[0].unscale(n), v[1].unscale(n)])
    }

    pub fn cast<U: Real>(&self) -> EffHamiltonian<U> {
        let c = |z: Complex<T>| Complex::new(U::lit(z.re.as_f64()), U::lit(z.im.as_f64()));
        EffHamiltonian {
            e1: c(self.e1),
            e2: c(self.e2),
            h1: c(self.h1),
            h2: c(self.h2),
        }
    }
}

impl<T: Real> EigenPair<T> {
    /// Resonance positions `f_j = Re E_j`.
    pub fn positions(&self) -> [T; 2] {
        [self.e1.re, self.e2.re]
    }

    /// Resonance widths `Γ_j = −2 Im E_j`.
    pub fn widths(&self) -> [T; 2] {
        let two = T::lit(2.0);
        [-two * self.e1.im, -two * self.e2.im]
    }

    pub fn gap(&self) -> T {
        (self.e1 - self.e2).norm()
    }

    /// Reporting order: real part ascending, then imaginary part descending.
    pub fn sorted(&self) -> Self {
        let swap = match self.e1.re.partial_cmp(&self.e2.re) {
            Some(std::cmp::Ordering::Greater) => true,
            Some(std::cmp::Ordering::Equal) => self.e1.im < self.e2.im,
            _ => false,
        };
        if swap {
            EigenPair { e1: self.e2, e2: self.e1 }
        } else {
            *self
        }
    }

    /// Distance to another pair under the better of the two labelings.
    pub fn distance(&self, other: &Self) -> T {
        let direct = (self.e1 - other.e1).norm().max((self.e2 - other.e2).norm());
        let swapped = (self.e1 - other.e2).norm().max((self.e2 - other.e1).norm());
        direct.min(swapped)
    }
}

impl<T: Real> Radicand<T> {
    pub fn value(&self) -> Complex<T> {
        Complex::new(self.reh2 - self.imh2, self.cross + self.cross)
    }

    /// `|h|² = |Re h|² + |Im h|²`
    pub fn norm2(&self) -> T {
        self.reh2 + self.imh2
    }

    /// `cross / |h|²`, zero for `h = 0`.
    pub fn relative_cross(&self) -> T {
        let n = self.norm2();
        if n == T::zero() {
            T::zero()
        } else {
            self.cross / n
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PauliRecord<T> {
    e1: [T; 2],
    e2: [T; 2],
    h1: [T; 2],
    h2: [T; 2],
}

impl<T: Real + Serialize> Serialize for EffHamiltonian<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let p = |z: Complex<T>| [z.re, z.im];
        PauliRecord {
            e1: p(self.e1),
            e2: p(self.e2),
            h1: p(self.h1),
            h2: p(self.h2),
        }
        .serialize(s)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for EffHamiltonian<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PauliRecord::<T>::deserialize(d)?;
        let c = |a: [T; 2]| Complex::new(a[0], a[1]);
        EffHamiltonian::from_pauli(c(r.e1), c(r.e2), c(r.h1), c(r.h2)).map_err(D::Error::custom)
    }
}
