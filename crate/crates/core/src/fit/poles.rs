//! Two simple poles with rank-1 residues, `S(f) = 1 + Σ_j u_j v_jᵀ / (f − E_j)`.
//!
//! Away from an exceptional point this is an exact rewriting of the Hamiltonian model;
//! at an exceptional point the resolvent has a second-order pole and this form can only
//! approach it with diverging residues.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::storage::Owned;
use nalgebra::{DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::fit::config::FitConfig;
use crate::fit::params::Antenna;
use crate::synth::Spectrum;
use crate::{EffHamiltonian, C64};

const NP: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct PoleFit {
    pub poles: [C64; 2],
    /// Residues as `(u, v)` with `u[0] = 1`.
    pub residues: [([C64; 2], [C64; 2]); 2],
    pub residual_rms: f64,
    pub converged: bool,
}

// packing: E1, E2, u1[1], u2[1], v1[0], v1[1], v2[0], v2[1] as (re, im) pairs
fn decode(p: &[f64]) -> ([C64; 2], [[C64; 2]; 2], [[C64; 2]; 2]) {
    let c = |k: usize| C64::new(p[2 * k], p[2 * k + 1]);
    let one = C64::new(1.0, 0.0);
    ([c(0), c(1)], [[one, c(2)], [one, c(3)]], [[c(4), c(5)], [c(6), c(7)]])
}

struct PoleProblem<'a> {
    spec: &'a Spectrum,
    f_ref: f64,
    p: DVector<f64>,
}

impl PoleProblem<'_> {
    fn rows(&self) -> usize {
        8 * self.spec.len()
    }
}

impl LeastSquaresProblem<f64, Dyn, Dyn> for PoleProblem<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.p.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.p.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        if !self.p.iter().all(|x| x.is_finite()) {
            return None;
        }
        let (e, u, v) = decode(self.p.as_slice());
        let mut out = Vec::with_capacity(self.rows());
        for (f, data) in self.spec.freqs.iter().zip(&self.spec.s) {
            let g = [(C64::new(f - self.f_ref, 0.0) - e[0]).inv(), (C64::new(f - self.f_ref, 0.0) - e[1]).inv()];
            for x in 0..2 {
                for y in 0..2 {
                    let id = if x == y { 1.0 } else { 0.0 };
                    let model = C64::new(id, 0.0) + u[0][x] * v[0][y] * g[0] + u[1][x] * v[1][y] * g[1];
                    let d = model - data.m[x][y];
                    out.push(d.re);
                    out.push(d.im);
                }
            }
        }
        Some(DVector::from_vec(out))
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let (e, u, v) = decode(self.p.as_slice());
        let m = self.rows();
        let mut jac = DMatrix::<f64>::zeros(m, NP);
        let mut row = 0;
        for f in &self.spec.freqs {
            let g = [(C64::new(f - self.f_ref, 0.0) - e[0]).inv(), (C64::new(f - self.f_ref, 0.0) - e[1]).inv()];
            for x in 0..2 {
                for y in 0..2 {
                    // complex derivative per complex parameter; columns (re, im) = (d, i·d)
                    let mut d = [C64::new(0.0, 0.0); 8];
                    for j in 0..2 {
                        d[j] = u[j][x] * v[j][y] * g[j] * g[j];
                        if x == 1 {
                            d[2 + j] = v[j][y] * g[j];
                        }
                        d[4 + 2 * j + y] = u[j][x] * g[j];
                    }
                    for (k, dk) in d.iter().enumerate() {
                        let idk = C64::new(-dk.im, dk.re);
                        jac[(row, 2 * k)] = dk.re;
                        jac[(row + 1, 2 * k)] = dk.im;
                        jac[(row, 2 * k + 1)] = idk.re;
                        jac[(row + 1, 2 * k + 1)] = idk.im;
                    }
                    row += 2;
                }
            }
        }
        Some(jac)
    }
}

/// Pole/residue form of `(H^eff, Wa)`; `None` if `H` is defective or a residue has `u[0] = 0`.
pub fn poles_from_hamiltonian(h: &EffHamiltonian, wa: &Antenna) -> Option<([C64; 2], [([C64; 2], [C64; 2]); 2])> {
    let m = h.matrix().m;
    let ev = h.eigenvalues();
    let mut res = [([C64::new(0.0, 0.0); 2], [C64::new(0.0, 0.0); 2]); 2];
    for (j, e) in [ev.e1, ev.e2].into_iter().enumerate() {
        let ra = [m[0][1], e - m[0][0]];
        let rb = [e - m[1][1], m[1][0]];
        let r = if ra[0].norm() + ra[1].norm() >= rb[0].norm() + rb[1].norm() { ra } else { rb };
        let la = [m[1][0], e - m[0][0]];
        let lb = [e - m[1][1], m[0][1]];
        let l = if la[0].norm() + la[1].norm() >= lb[0].norm() + lb[1].norm() { la } else { lb };
        let norm = l[0] * r[0] + l[1] * r[1];
        if norm.norm() == 0.0 {
            return None;
        }
        // S − 1 = −2πi Σ (Wa r)(lᵀ Waᵀ) / (lᵀ r) / (f − E)
        let wr = [wa[0][0] * r[0] + wa[0][1] * r[1], wa[1][0] * r[0] + wa[1][1] * r[1]];
        let wl = [wa[0][0] * l[0] + wa[0][1] * l[1], wa[1][0] * l[0] + wa[1][1] * l[1]];
        let c = C64::new(0.0, -std::f64::consts::TAU) / norm;
        if wr[0].norm() == 0.0 {
            return None;
        }
        let u = [C64::new(1.0, 0.0), wr[1] / wr[0]];
        let v = [c * wr[0] * wl[0], c * wr[0] * wl[1]];
        res[j] = (u, v);
    }
    Some(([ev.e1, ev.e2], res))
}

/// Least-squares fit of the two-pole form starting from the poles/residues of `(h, wa)`.
pub fn fit_two_poles(spec: &Spectrum, h: &EffHamiltonian, wa: &Antenna, cfg: &FitConfig) -> Result<PoleFit> {
    let f_ref = 0.5 * (spec.freqs[0] + spec.freqs[spec.len() - 1]);
    let shifted = h.shifted(C64::new(-f_ref, 0.0));
    let (poles, res) = poles_from_hamiltonian(&shifted, wa).ok_or(Error::Unresolvable)?;
    let mut p = vec![0.0; NP];
    let mut put = |k: usize, z: C64| {
        p[2 * k] = z.re;
        p[2 * k + 1] = z.im;
    };
    put(0, poles[0]);
    put(1, poles[1]);
    put(2, res[0].0[1]);
    put(3, res[1].0[1]);
    put(4, res[0].1[0]);
    put(5, res[0].1[1]);
    put(6, res[1].1[0]);
    put(7, res[1].1[1]);
    let problem = PoleProblem { spec, f_ref, p: DVector::from_vec(p) };
    let lm = LevenbergMarquardt::new()
        .with_ftol(cfg.step_tolerance)
        .with_xtol(cfg.step_tolerance)
        .with_gtol(cfg.gradient_tolerance)
        .with_stepbound(cfg.damping_init)
        .with_patience(cfg.max_iterations);
    let (problem, report) = lm.minimize(problem);
    let r = problem.residuals().ok_or(Error::NonConvergence { best_residual: f64::INFINITY })?;
    let rms = (r.norm_squared() / r.len() as f64).sqrt();
    let (e, u, v) = decode(problem.p.as_slice());
    let back = C64::new(f_ref, 0.0);
    Ok(PoleFit {
        poles: [e[0] + back, e[1] + back],
        residues: [(u[0], v[0]), (u[1], v[1])],
        residual_rms: rms,
        converged: report.termination.was_successful(),
    })
}
