//! Exact N-boson dynamics on the lattice.

mod basis;
mod hamiltonian;
mod propagate;
mod rdm;

use std::sync::Arc;

use num_complex::Complex64;

pub use basis::{
    build_fock_basis, build_fock_basis_with_cap, sector_dimension, FockBasis, DEFAULT_DIMENSION_CAP,
};
pub use hamiltonian::{assemble_hamiltonian, SparseHamiltonian};
pub use propagate::{
    evolve_manybody, evolve_manybody_with, DenseSpectrum, PropagationMethod, PropagatorOptions,
    STATE_NORM_TOLERANCE,
};
pub use rdm::{
    manybody_expectation, manybody_expectation_bounded, reduced_density_matrix, DensityMatrix,
    BOUND_TOLERANCE,
};

use crate::error::{Error, Result};
use crate::hartree::NORM_TOLERANCE;
use crate::lattice::WaveFunction;

/// Coefficient vector over a Fock basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ManyBodyState {
    basis: Arc<FockBasis>,
    coefficients: Vec<Complex64>,
}

impl ManyBodyState {
    pub fn new(basis: Arc<FockBasis>, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != basis.len() {
            return Err(Error::Dimension(format!(
                "{} coefficients for a basis of {} states",
                coefficients.len(),
                basis.len()
            )));
        }
        Ok(ManyBodyState {
            basis,
            coefficients,
        })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn norm(&self) -> f64 {
        self.coefficients.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let norm = self.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Domain("cannot normalize a zero state".into()));
        }
        self.coefficients.iter_mut().for_each(|z| *z /= norm);
        Ok(self)
    }

    pub fn inner(&self, other: &ManyBodyState) -> Complex64 {
        self.coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// Coherent product state `φ^{⊗N}` in the occupation basis: the amplitude of
/// `n` is `sqrt(N! / Π n_x!) Π c_x^{n_x}` with `c_x = h^{d/2} φ(x)`.
pub fn product_state_lift(
    phi: &WaveFunction,
    particles: usize,
    basis: &Arc<FockBasis>,
) -> Result<ManyBodyState> {
    basis.check_matches(particles, phi.grid())?;
    phi.require_normalized(NORM_TOLERANCE)?;
    let c = phi.coefficients();
    let mut ln_factorial = vec![0.0f64; particles + 1];
    for k in 1..=particles {
        ln_factorial[k] = ln_factorial[k - 1] + (k as f64).ln();
    }
    let coefficients = basis
        .iter()
        .map(|occ| {
            let ln_multinomial = ln_factorial[particles]
                - occ.iter().map(|&n| ln_factorial[n as usize]).sum::<f64>();
            let product: Complex64 = occ
                .iter()
                .zip(&c)
                .filter(|(&n, _)| n > 0)
                .map(|(&n, cx)| cx.powu(n as u32))
                .product();
            product * (0.5 * ln_multinomial).exp()
        })
        .collect();
    ManyBodyState::new(basis.clone(), coefficients)
}

/// `⟨Ψ, H Ψ⟩`.
pub fn manybody_energy(psi: &ManyBodyState, h: &SparseHamiltonian) -> Result<f64> {
    if psi.coefficients.len() != h.dim() {
        return Err(Error::Dimension("state and Hamiltonian sizes differ".into()));
    }
    Ok(psi.inner(&ManyBodyState {
        basis: psi.basis.clone(),
        coefficients: h.apply(&psi.coefficients),
    })
    .re)
}
