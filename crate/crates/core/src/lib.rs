//! Numerical laboratory for a dissipative two-level scattering system.
//!
//! * [`model`]: the 2×2 effective Hamiltonian in Pauli-vector form, its eigenvalues,
//!   exceptional points, gauge fixing and the passive-PT normal form.
//! * [`synth`]: S-matrix spectra from the effective Hamiltonian and synthetic
//!   two-parameter families with a planted exceptional point.
//! * [`fit`]: recovery of the effective Hamiltonian from spectra.
//! * [`scan`]: parameter-plane maps, EP localization, PT-curve tracing and braiding.
//!
//! The algebra in [`model`] is generic over [`Real`] (`f32`/`f64`); the aliases below
//! fix it to `f64`, which the data pipeline uses throughout.

pub mod error;
pub mod fit;
pub mod model;
pub mod scalar;
pub mod scan;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::{ComplexScalar, Real};

pub type C64 = num_complex::Complex<f64>;
pub type EffHamiltonian = model::EffHamiltonian<f64>;
pub type EigenPair = model::EigenPair<f64>;
pub type Radicand = model::Radicand<f64>;
pub type BasisTransform = model::BasisTransform<f64>;
pub type PtNormalForm = model::PtNormalForm<f64>;
pub type PtTolerances = model::PtTolerances<f64>;
pub type Mat2 = model::Mat2<f64>;
