//! Numerical check of the mean-field limit for bosons with random pair
//! interactions.
//!
//! For each sampled interaction `v(·, ω)` on a periodic lattice, the crate
//! evolves the coherent state `φ^{⊗N}` exactly under the N-body Hamiltonian
//! with `1/N` coupling, evolves `φ` under the Hartree equation with the same
//! `v`, and compares the p-particle expectations `X_N` and `X`. Averaging over
//! `ω` gives `E(X_N)`, `E(X)` and `E(|X - X_N|)` as functions of `N`.
//!
//! Modules, bottom-up:
//! - [`lattice`]: grid, wave functions, Laplacian, FFT convolution
//! - [`observable`]: p-particle kernels, operator norm, lift factor
//! - [`random_field`]: seeded Gaussian spectral interactions
//! - [`hartree`]: split-step Hartree solver and `X`
//! - [`manybody`]: Fock basis, Hamiltonian, Krylov propagation, `X_N`
//! - [`ensemble`]: Monte Carlo over `ω`
//! - [`cli`]: configuration and result files

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod hartree;
pub mod lattice;
pub mod manybody;
pub mod observable;
pub mod random_field;

pub use error::{Error, Result};
