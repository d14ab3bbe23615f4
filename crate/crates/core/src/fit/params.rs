//! Parameter packing and the residual / Jacobian of the S-matrix model.
//!
//! Packing (11 reals): `[Re e1, Im e1, Re e2, Im e2, Re h1, Im h1, Re h2, Im h2, W11, W21, W22]`.
//! `W12` is fixed to zero, which uses up the rotational freedom of the mode basis.
//! Dissipative channels are not parameters: they only shift `H^eff`.

use crate::error::{Error, Result};
use crate::fit::config::ChannelMask;
use crate::model::{BasisTransform, Mat2, TransformKind};
use crate::synth::{smatrix_antenna, CouplingSet, Spectrum};
use crate::{EffHamiltonian, C64};

pub const N_PARAMS: usize = 11;

/// Residual assigned to every component at a frequency where the model resolvent is singular.
pub const POLE_SENTINEL: f64 = 1e6;

const TWO_PI: f64 = std::f64::consts::TAU;

/// Antenna couplings `wa[a][μ]`.
pub type Antenna = [[f64; 2]; 2];

pub fn pack(h: &EffHamiltonian, wa: &Antenna) -> Result<[f64; N_PARAMS]> {
    let (h, wa) = zero_w12(h, wa)?;
    let (e1, e2, h1, h2) = h.to_pauli();
    Ok([e1.re, e1.im, e2.re, e2.im, h1.re, h1.im, h2.re, h2.im, wa[0][0], wa[1][0], wa[1][1]])
}

pub fn unpack(p: &[f64]) -> Result<(EffHamiltonian, Antenna)> {
    if p.len() != N_PARAMS {
        return Err(Error::InvalidArgument(format!("expected {N_PARAMS} parameters, got {}", p.len())));
    }
    let h = EffHamiltonian::from_pauli(
        C64::new(p[0], p[1]),
        C64::new(p[2], p[3]),
        C64::new(p[4], p[5]),
        C64::new(p[6], p[7]),
    )?;
    if !p[8..].iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidArgument("non-finite coupling parameter".into()));
    }
    Ok((h, [[p[8], 0.0], [p[9], p[10]]]))
}

/// Rotates the mode basis so that antenna 1 couples to mode 1 only, with `W11 ≥ 0`.
pub fn zero_w12(h: &EffHamiltonian, wa: &Antenna) -> Result<(EffHamiltonian, Antenna)> {
    if wa[0][1] == 0.0 && wa[0][0] >= 0.0 {
        return Ok((*h, *wa));
    }
    let t = BasisTransform::new(TransformKind::GaugeO0, wa[0][1].atan2(wa[0][0]));
    let w = CouplingSet::antenna(*wa)?.rotated(&t)?.antenna_rows();
    Ok((t.apply(h), [[w[0][0], 0.0], w[1]]))
}

/// Full residual vector `[Re(model − data), Im(model − data)]` for each frequency and each of
/// `S11, S12, S21, S22`; length `8 × gridpoints`.
pub fn residual_vector(params: &[f64], spec: &Spectrum) -> Result<Vec<f64>> {
    let model = Model::new(spec, ChannelMask::ALL, 0.0);
    let mut out = vec![0.0; model.rows()];
    model.residuals(params, &mut out)?;
    Ok(out)
}

/// Evaluates residuals and Jacobians for one spectrum. Parameters are relative to `f_ref`
/// in their `Re e1`, `Re e2` slots, which keeps them of comparable size.
#[derive(Clone, Copy, Debug)]
pub struct Model<'a> {
    pub spec: &'a Spectrum,
    pub mask: ChannelMask,
    pub f_ref: f64,
}

impl<'a> Model<'a> {
    pub fn new(spec: &'a Spectrum, mask: ChannelMask, f_ref: f64) -> Self {
        Model { spec, mask, f_ref }
    }

    pub fn rows(&self) -> usize {
        2 * self.mask.count() * self.spec.len()
    }

    pub fn to_relative(&self, p: &[f64; N_PARAMS]) -> [f64; N_PARAMS] {
        let mut q = *p;
        q[0] -= self.f_ref;
        q[2] -= self.f_ref;
        q
    }

    pub fn to_absolute(&self, q: &[f64]) -> [f64; N_PARAMS] {
        let mut p = [0.0; N_PARAMS];
        p.copy_from_slice(q);
        p[0] += self.f_ref;
        p[2] += self.f_ref;
        p
    }

    /// Hamiltonian shifted by `−f_ref` and antenna couplings from relative parameters.
    fn decode(&self, q: &[f64]) -> Result<(EffHamiltonian, Antenna)> {
        unpack(q)
    }

    /// Residuals for relative parameters `q`; non-finite parameters are an error.
    pub fn residuals(&self, q: &[f64], out: &mut [f64]) -> Result<()> {
        let (h, wa) = self.decode(q)?;
        let mut k = 0;
        for (f, data) in self.spec.freqs.iter().zip(&self.spec.s) {
            match smatrix_antenna(&h, &wa, f - self.f_ref) {
                Ok(s) => {
                    for x in 0..2 {
                        for y in 0..2 {
                            if self.mask.includes(x, y) {
                                let d = s.m[x][y] - data.m[x][y];
                                out[k] = d.re;
                                out[k + 1] = d.im;
                                k += 2;
                            }
                        }
                    }
                }
                Err(_) => {
                    let n = 2 * self.mask.count();
                    out[k..k + n].fill(POLE_SENTINEL);
                    k += n;
                }
            }
        }
        Ok(())
    }

    /// Column-major Jacobian (`rows × N_PARAMS`) from the resolvent derivative.
    pub fn jacobian_analytic(&self, q: &[f64], jac: &mut [f64]) -> Result<()> {
        let (h, wa) = self.decode(q)?;
        let m = self.rows();
        let c = C64::new(0.0, -TWO_PI);
        let mut row = 0;
        for f in &self.spec.freqs {
            let a = Mat2::scalar(C64::new(f - self.f_ref, 0.0)) - h.matrix();
            let Some(r) = a.inverse().filter(|r| r.is_finite()) else {
                let n = 2 * self.mask.count();
                for col in 0..N_PARAMS {
                    jac[col * m + row..col * m + row + n].fill(0.0);
                }
                row += n;
                continue;
            };
            // p = Wa R, q = R Waᵀ
            let mut pm = [[C64::new(0.0, 0.0); 2]; 2];
            let mut qm = [[C64::new(0.0, 0.0); 2]; 2];
            for x in 0..2 {
                for mu in 0..2 {
                    pm[x][mu] = r.m[0][mu] * wa[x][0] + r.m[1][mu] * wa[x][1];
                    qm[mu][x] = r.m[mu][0] * wa[x][0] + r.m[mu][1] * wa[x][1];
                }
            }
            let i = C64::new(0.0, 1.0);
            for x in 0..2 {
                for y in 0..2 {
                    if !self.mask.includes(x, y) {
                        continue;
                    }
                    let d00 = pm[x][0] * qm[0][y];
                    let d11 = pm[x][1] * qm[1][y];
                    let d01 = pm[x][0] * qm[1][y];
                    let d10 = pm[x][1] * qm[0][y];
                    let mut w = [C64::new(0.0, 0.0); 3];
                    // ∂S_xy/∂W_kμ = c (δ_xk Q[μ][y] + δ_yk P[x][μ])
                    for (slot, (k, mu)) in [(0usize, 0usize), (1, 0), (1, 1)].into_iter().enumerate() {
                        let mut v = C64::new(0.0, 0.0);
                        if x == k {
                            v += qm[mu][y];
                        }
                        if y == k {
                            v += pm[x][mu];
                        }
                        w[slot] = v;
                    }
                    let cols = [
                        d00,
                        i * d00,
                        d11,
                        i * d11,
                        d01 + d10,
                        i * (d01 + d10),
                        i * (d10 - d01),
                        d01 - d10,
                        w[0],
                        w[1],
                        w[2],
                    ];
                    for (col, v) in cols.into_iter().enumerate() {
                        let g = c * v;
                        jac[col * m + row] = g.re;
                        jac[col * m + row + 1] = g.im;
                    }
                    row += 2;
                }
            }
        }
        Ok(())
    }

    /// Column-major forward-difference Jacobian; `r0` holds the residuals at `q`.
    pub fn jacobian_fd(&self, q: &[f64], r0: &[f64], rel_step: f64, jac: &mut [f64]) -> Result<()> {
        let m = self.rows();
        let mut qp = q.to_vec();
        for col in 0..N_PARAMS {
            let h = rel_step * q[col].abs().max(1e-3);
            qp[col] = q[col] + h;
            let h = qp[col] - q[col];
            let out = &mut jac[col * m..(col + 1) * m];
            self.residuals(&qp, out)?;
            for (o, r) in out.iter_mut().zip(r0) {
                *o = (*o - r) / h;
            }
            qp[col] = q[col];
        }
        Ok(())
    }
}
