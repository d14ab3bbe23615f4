//! Forward model: S-matrix spectra from the effective Hamiltonian, noise, and the
//! planted two-parameter families.

pub mod coupling;
pub mod family;
pub mod manifest;
pub mod smatrix;
pub mod spectrum;

pub use coupling::CouplingSet;
pub use manifest::{spectrum_file_name, Manifest, ManifestEntry, MANIFEST_FILE};
pub use family::{dissipation_gram, dissipative_completion, SyntheticFamily};
pub use smatrix::{smatrix_antenna, smatrix_at, smatrix_from_internal};
pub use spectrum::{add_noise, synth_spectrum, FrequencyGrid, NoiseSpec, Sidecar, Spectrum, SpectrumMeta};
