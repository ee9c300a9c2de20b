//! Mean-field (variational) free energy of Ising models and binary Markov
//! random fields at desk scale.
//!
//! The crate computes, approximates, and certifies the free energy
//! F = log Σ_x exp(x^T J x + h·x) and its mean-field counterpart
//! F* = max over product measures of energy plus entropy:
//!
//! - [`model`]: model types, energies, entropies, generators, and brute-force
//!   oracles ([`exact`]) for cross-validation at small n.
//! - [`meanfield`]: the fixed-point map x ← tanh(2Jx + h), Dobrushin
//!   certification, a concave solve in the high-temperature regime, and a
//!   multistart ascent heuristic.
//! - [`regularity`]: Frieze-Kannan-style cut decompositions of matrices and
//!   r-index arrays with exact ∞→1-norm certificates.
//! - [`feapprox`]: the regularity-based free-energy approximation via grid
//!   search over block magnetizations and max-entropy convex programs.
//! - [`ferro`]: blow-up plus Glauber sampling for ferromagnetic models.
//! - [`bounds`]: closed-form structural error bounds and spectral quantities.
//!
//! Everything is seeded explicitly and deterministic for a fixed seed.

pub mod bounds;
pub mod dense;
pub mod error;
pub mod exact;
pub mod feapprox;
pub mod ferro;
pub mod generate;
pub mod io;
pub mod meanfield;
pub mod model;
pub mod regularity;
pub mod rng;

pub use dense::DenseMatrix;
pub use error::{Error, Result};
pub use model::{
    binary_entropy, entropy_of_mean, ErrorBudget, FreeEnergyReport, IsingModel, Model, Mrf,
    ProductDistribution, INTERIOR_TAU,
};
