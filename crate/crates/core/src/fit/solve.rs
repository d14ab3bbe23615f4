//! Multi-start Levenberg–Marquardt fit of the S-matrix model.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::storage::Owned;
use nalgebra::{DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fit::config::{FitConfig, JacobianMode};
use crate::fit::params::{pack, unpack, Antenna, Model, N_PARAMS};
use crate::fit::result::FitResult;
use crate::fit::seed::{algebraic_seed, noise_floor, seed_initializer};
use crate::model::{extract_tau, gauge_fix, orient_narrow_first};
use crate::synth::{dissipation_gram, CouplingSet, Spectrum};
use crate::EffHamiltonian;

struct Problem<'a> {
    model: Model<'a>,
    q: DVector<f64>,
    mode: JacobianMode,
    fd_step: f64,
}

impl LeastSquaresProblem<f64, Dyn, Dyn> for Problem<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.q.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.q.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let mut out = vec![0.0; self.model.rows()];
        self.model.residuals(self.q.as_slice(), &mut out).ok()?;
        Some(DVector::from_vec(out))
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let m = self.model.rows();
        let mut jac = vec![0.0; m * N_PARAMS];
        match self.mode {
            JacobianMode::Analytic => self.model.jacobian_analytic(self.q.as_slice(), &mut jac).ok()?,
            JacobianMode::ForwardDifference => {
                let mut r0 = vec![0.0; m];
                self.model.residuals(self.q.as_slice(), &mut r0).ok()?;
                self.model.jacobian_fd(self.q.as_slice(), &r0, self.fd_step, &mut jac).ok()?;
            }
        }
        Some(DMatrix::from_vec(m, N_PARAMS, jac))
    }
}

/// Outcome of one local minimization, in relative parameters.
#[derive(Clone, Debug)]
pub struct LocalFit {
    pub q: [f64; N_PARAMS],
    pub rms: f64,
    pub converged: bool,
    pub evaluations: usize,
}

fn rms_of(model: &Model, q: &[f64]) -> f64 {
    let mut r = vec![0.0; model.rows()];
    if model.residuals(q, &mut r).is_err() {
        return f64::INFINITY;
    }
    (r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64).sqrt()
}

/// One damped least-squares run from relative parameters `q0`. `budget` overrides the
/// evaluation budget factor of `cfg`.
pub fn local_fit(model: &Model, q0: &[f64; N_PARAMS], cfg: &FitConfig, budget: Option<usize>) -> LocalFit {
    let problem = Problem {
        model: *model,
        q: DVector::from_row_slice(q0),
        mode: cfg.jacobian,
        fd_step: cfg.fd_step,
    };
    let lm = LevenbergMarquardt::new()
        .with_ftol(cfg.step_tolerance)
        .with_xtol(cfg.step_tolerance)
        .with_gtol(cfg.gradient_tolerance)
        .with_stepbound(cfg.damping_init)
        .with_patience(budget.unwrap_or(cfg.max_iterations).max(1));
    let (problem, report) = lm.minimize(problem);
    let mut q = [0.0; N_PARAMS];
    q.copy_from_slice(problem.q.as_slice());
    let rms = rms_of(model, &q);
    LocalFit {
        q,
        rms,
        converged: report.termination.was_successful() && rms.is_finite(),
        evaluations: report.number_of_evaluations,
    }
}

/// Log-uniform perturbation of a seed plus one of four sign variants
/// (sign of `W21` relative to `W11`, sign of the off-diagonal pair).
fn perturb(base: &[f64; N_PARAMS], variant: usize, rng: &mut ChaCha8Rng) -> [f64; N_PARAMS] {
    let mut p = *base;
    let mut u = |span: f64| rng.random_range(-span..=span);
    let ln2 = std::f64::consts::LN_2;
    let g1 = (-2.0 * p[1]).abs().max(1e-3);
    let g2 = (-2.0 * p[3]).abs().max(1e-3);
    let scale = g1.max(g2);
    p[0] += 0.5 * scale * u(1.0);
    p[2] += 0.5 * scale * u(1.0);
    p[1] = -0.5 * g1 * u(ln2).exp();
    p[3] = -0.5 * g2 * u(ln2).exp();
    for k in 4..8 {
        p[k] *= u(3f64.ln()).exp();
    }
    for k in 8..11 {
        p[k] *= u(ln2).exp();
    }
    if variant & 1 == 1 {
        p[9] = -p[9];
    }
    if variant & 2 == 2 {
        for x in &mut p[4..8] {
            *x = -*x;
        }
    }
    if p[4] == 0.0 && p[6] == 0.0 {
        p[4] = 0.05 * scale;
    }
    p
}

/// Rotates the fitted `(H, Wa)` into the gauge-fixed basis with the narrow-first orientation.
pub fn canonical_basis(h: &EffHamiltonian, wa: &Antenna) -> Result<(EffHamiltonian, Antenna)> {
    let (hg, wg) = match gauge_fix(h) {
        Ok((hg, t)) => (hg, CouplingSet::antenna(*wa)?.rotated(&t)?.antenna_rows()),
        // h1 and h3 are real multiples of h2: every real basis is already gauge-fixed
        Err(Error::DegenerateGauge) => (*h, *wa),
        Err(e) => return Err(e),
    };
    let (ho, flip) = orient_narrow_first(&hg);
    let wo = if flip.is_some() {
        // rotation by π/2 done exactly: (w0, w1) ↦ (w1, −w0)
        [[wg[0][1], -wg[0][0]], [wg[1][1], -wg[1][0]]]
    } else {
        wg
    };
    Ok((ho, wo))
}

/// Fits `H^eff` and the antenna couplings to a spectrum.
///
/// Starts, in order: `init` (if given), the algebraic estimate (full mask only), the
/// peak-picking seed, then perturbed variants of the peak seed. The loop ends after
/// `n_starts` starts, or earlier (`early_stop`) once a converged start reaches the estimated
/// noise floor. The best converged start is rotated into the gauge-fixed basis.
pub fn fit_spectrum(spec: &Spectrum, cfg: &FitConfig, init: Option<&FitResult>) -> Result<FitResult> {
    cfg.validate()?;
    let f_ref = 0.5 * (spec.freqs[0] + spec.freqs[spec.len() - 1]);
    let model = Model::new(spec, cfg.mask, f_ref);

    let mut starts: Vec<[f64; N_PARAMS]> = Vec::new();
    if let Some(fr) = init {
        starts.push(pack(&fr.h, &fr.w.antenna_rows())?);
    }
    let seed = match seed_initializer(spec) {
        Ok(s) => Some(s),
        Err(Error::Unresolvable) if init.is_some() => None,
        Err(e) => return Err(e),
    };
    let widest = starts
        .iter()
        .chain(seed.as_ref().map(|s| &s.params))
        .map(|p| (-2.0 * p[1]).abs().max((-2.0 * p[3]).abs()))
        .fold(0.0, f64::max);
    let required = 4.0 * widest;
    if spec.span() <= required {
        return Err(Error::InsufficientSpan { span: spec.span(), required });
    }
    if cfg.mask.is_all() {
        if let Some(p) = algebraic_seed(spec) {
            starts.push(p);
        }
    }
    let base = match &seed {
        Some(s) => {
            starts.push(s.params);
            s.params
        }
        None => starts[0],
    };

    let floor = noise_floor(spec);
    let target = 1.5 * floor + 1e-8;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<LocalFit> = None;
    let mut run = 0;
    for k in 0..cfg.n_starts {
        let p0 = if k < starts.len() {
            starts[k]
        } else {
            perturb(&base, k - starts.len(), &mut rng)
        };
        let fit = local_fit(&model, &model.to_relative(&p0), cfg, None);
        run += 1;
        log::debug!("start {k}: rms {:.3e}, converged {}, {} evaluations", fit.rms, fit.converged, fit.evaluations);
        let better = match &best {
            None => true,
            Some(b) => (fit.converged && !b.converged) || (fit.converged == b.converged && fit.rms < b.rms),
        };
        let done = cfg.early_stop && fit.converged && fit.rms <= target;
        if better {
            best = Some(fit);
        }
        if done {
            break;
        }
    }
    let best = best.expect("n_starts >= 1");
    if !best.converged {
        return Err(Error::NonConvergence { best_residual: best.rms });
    }
    let (h, wa) = unpack(&model.to_absolute(&best.q))?;
    let (h, wa) = canonical_basis(&h, &wa)?;
    let tau = extract_tau(&h).unwrap_or(f64::NAN);
    let w = CouplingSet::with_dissipation_clamped(wa, dissipation_gram(&h, wa)?)?;

    let q = model.to_relative(&pack(&h, &wa)?);
    let m = model.rows();
    let mut jac = vec![0.0; m * N_PARAMS];
    model.jacobian_analytic(&q, &mut jac)?;
    let covariance_proxy = (0..N_PARAMS).map(|c| jac[c * m..(c + 1) * m].iter().map(|x| x * x).sum()).collect();

    Ok(FitResult {
        h,
        w,
        tau,
        residual_rms: best.rms,
        converged: true,
        covariance_proxy,
        starts_run: run,
        meta: spec.meta,
    })
}

/// Eigenvalue distance helper for tests and reports.
pub fn eigen_error(a: &EffHamiltonian, b: &EffHamiltonian) -> f64 {
    a.eigenvalues().distance(&b.eigenvalues())
}
