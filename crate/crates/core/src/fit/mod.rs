//! Inverse problem: recover `H^eff` and the antenna couplings from an S-matrix spectrum.

pub mod config;
pub mod params;
pub mod poles;
pub mod result;
pub mod seed;
pub mod solve;

pub use config::{ChannelMask, FitConfig, JacobianMode};
pub use params::{pack, residual_vector, unpack, N_PARAMS, POLE_SENTINEL};
pub use poles::{fit_two_poles, PoleFit};
pub use result::{FitRecord, FitResult};
pub use seed::{algebraic_seed, noise_floor, seed_initializer, Peak, SeedReport};
pub use solve::{canonical_basis, fit_spectrum, local_fit, LocalFit};
