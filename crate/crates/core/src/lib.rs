//! Simulation engine for a SQUID-interrupted transmission-line cavity run as an
//! autonomous absorption refrigerator.
//!
//! The crate is organized bottom-up:
//!
//! - [`fock`]: truncated Fock spaces, ladder operators, tensor embedding, states.
//! - [`cavity`]: eigenmodes of the SQUID-interrupted cavity, the weighted inner
//!   product, coupling integrals, SQUID frequency and stationary flux.
//! - [`model`]: the resonant three-body Hamiltonian and its conserved charges.
//! - [`thermal`]: Gibbs states and the deterministic Fock-product ensemble.
//! - [`dynamics`]: unitary propagation, trajectories and refrigerator summaries.
//! - [`scenario`]: experiment documents, runs, sweeps and convergence checks.
//!
//! Units: hbar = k_B = 1, frequencies in omega_0, times in 1/omega_0. The
//! cavity solver works with d = v = 1.

pub mod cavity;
pub mod checks;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod model;
pub mod roots;
pub mod scenario;
pub mod thermal;

pub use error::{Error, Result};
pub use fock::{
    annihilation, creation, embed, expectation, number, DensityMatrix, QOperator, SpaceLayout,
    StateVector, StorageKind, C64,
};
pub use model::{build_hamiltonian, resonant_pairs, HamiltonianModel, InteractionTerm, ModeSpec};
pub use thermal::{bose_occupation, gibbs_state, product_ensemble, recommend_dim, ThermalEnsemble};
