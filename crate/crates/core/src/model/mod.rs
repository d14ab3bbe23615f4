//! Exact algebra of the two-level effective Hamiltonian.

pub mod hamiltonian;
pub mod matrix;
pub mod pt;
pub mod transform;

pub use hamiltonian::{EffHamiltonian, EigenPair, Radicand};
pub use matrix::Mat2;
pub use pt::{
    antilinear_commutator_norm, generalized_symmetry, pt_commutator_norm, to_pt_form, PtNormalForm, PtPhase,
    PtReduction, PtTolerances,
};
pub use transform::{extract_tau, gauge_fix, orient_narrow_first, BasisTransform, TransformKind};
