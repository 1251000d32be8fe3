//! Lattice Hartree equation `i ∂_t ψ = -Δψ + (v ⋆ |ψ|^2) ψ`.
//!
//! Time stepping is Strang splitting: half a nonlinear phase, a full kinetic
//! step diagonal in Fourier space, then half a phase with the updated
//! density. Every substep is unitary, so the discrete norm is conserved to
//! rounding.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{lattice_dispersion, LatticeFft, LatticeGrid, WaveFunction};
use crate::observable::{split_tuple, PObservable};
use crate::random_field::RandomField;

/// Normalization tolerance demanded of solver inputs.
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Largest imaginary residue accepted for a self-adjoint expectation.
pub const IMAGINARY_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HartreeRunParams {
    pub t_final: f64,
    pub dt: f64,
    pub grid: LatticeGrid,
}

impl HartreeRunParams {
    pub fn new(grid: LatticeGrid, t_final: f64, dt: f64) -> Result<Self> {
        if !(t_final.is_finite() && t_final >= 0.0) {
            return Err(Error::Config(format!("t_final must be nonnegative (got {t_final})")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive (got {dt})")));
        }
        if t_final > 0.0 && dt > t_final {
            return Err(Error::Config(format!(
                "dt = {dt} exceeds t_final = {t_final}"
            )));
        }
        Ok(HartreeRunParams { t_final, dt, grid })
    }

    /// `round(t_final / dt)`, at least one step for positive `t_final`.
    pub fn steps(&self) -> usize {
        if self.t_final == 0.0 {
            0
        } else {
            ((self.t_final / self.dt).round() as usize).max(1)
        }
    }

    /// Step size adjusted so that `steps · dt = t_final`.
    pub fn effective_dt(&self) -> f64 {
        match self.steps() {
            0 => 0.0,
            n => self.t_final / n as f64,
        }
    }
}

/// Precomputed transforms for stepping on a fixed interaction.
#[derive(Clone, Debug)]
pub struct HartreeStepper {
    fft: LatticeFft,
    dispersion: Vec<f64>,
    v_hat: Vec<Complex64>,
    kinetic: bool,
}

impl HartreeStepper {
    pub fn new(v: &RandomField) -> Self {
        let fft = LatticeFft::new(v.grid());
        let v_hat = fft.forward_real(v.values());
        HartreeStepper {
            dispersion: lattice_dispersion(v.grid()),
            fft,
            v_hat,
            kinetic: true,
        }
    }

    /// Switch the kinetic substep off, leaving only the mean-field phases.
    pub fn without_kinetic(mut self) -> Self {
        self.kinetic = false;
        self
    }

    pub fn grid(&self) -> &LatticeGrid {
        self.fft.grid()
    }

    /// Mean-field potential `v ⋆ |ψ|^2`.
    pub fn potential(&self, amplitudes: &[Complex64]) -> Vec<f64> {
        let rho: Vec<f64> = amplitudes.iter().map(|z| z.norm_sqr()).collect();
        self.fft.convolve_with_spectrum(&self.v_hat, &rho)
    }

    fn phase(&self, amplitudes: &mut [Complex64], tau: f64) {
        let potential = self.potential(amplitudes);
        for (z, u) in amplitudes.iter_mut().zip(potential) {
            *z *= Complex64::from_polar(1.0, -tau * u);
        }
    }

    /// One Strang step of size `dt` (any sign) in place.
    pub fn step_in_place(&self, amplitudes: &mut [Complex64], dt: f64) {
        self.phase(amplitudes, 0.5 * dt);
        if self.kinetic {
            self.fft.forward(amplitudes);
            for (z, lambda) in amplitudes.iter_mut().zip(&self.dispersion) {
                *z *= Complex64::from_polar(1.0, -dt * lambda);
            }
            self.fft.inverse(amplitudes);
        }
        self.phase(amplitudes, 0.5 * dt);
    }

    pub fn step(&self, psi: &WaveFunction, dt: f64) -> Result<WaveFunction> {
        self.grid().check_same(psi.grid(), "hartree step")?;
        let mut amps = psi.amplitudes().to_vec();
        self.step_in_place(&mut amps, dt);
        WaveFunction::new(*self.grid(), amps)
    }

    /// Evolve through `steps` steps of size `dt`.
    pub fn evolve(&self, phi: &WaveFunction, steps: usize, dt: f64) -> Result<WaveFunction> {
        self.grid().check_same(phi.grid(), "hartree evolution")?;
        let mut amps = phi.amplitudes().to_vec();
        for _ in 0..steps {
            self.step_in_place(&mut amps, dt);
        }
        WaveFunction::new(*self.grid(), amps)
    }
}

/// One Strang step of the Hartree flow.
pub fn hartree_step(psi: &WaveFunction, v: &RandomField, dt: f64) -> Result<WaveFunction> {
    psi.grid().check_same(v.grid(), "hartree step")?;
    psi.require_normalized(NORM_TOLERANCE)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain(format!("step size must be positive (got {dt})")));
    }
    HartreeStepper::new(v).step(psi, dt)
}

/// `ψ_t` at `t = params.t_final`.
pub fn evolve_hartree(
    phi: &WaveFunction,
    v: &RandomField,
    params: &HartreeRunParams,
) -> Result<WaveFunction> {
    params.grid.check_same(phi.grid(), "hartree evolution")?;
    params.grid.check_same(v.grid(), "hartree interaction")?;
    phi.require_normalized(NORM_TOLERANCE)?;
    HartreeStepper::new(v).evolve(phi, params.steps(), params.effective_dt())
}

/// `E[ψ] = ⟨ψ, -Δψ⟩ + ½ h^d Σ (v ⋆ |ψ|^2) |ψ|^2`.
pub fn hartree_energy(psi: &WaveFunction, v: &RandomField) -> Result<f64> {
    psi.grid().check_same(v.grid(), "hartree energy")?;
    let grid = psi.grid();
    let fft = LatticeFft::new(grid);
    let mut spectrum = psi.amplitudes().to_vec();
    fft.forward(&mut spectrum);
    // Parseval: h^d Σ_x |ψ|^2 = h^d / M^d Σ_k |ψ̂_k|^2
    let norm = grid.cell_volume() / grid.num_sites() as f64;
    let kinetic: f64 = spectrum
        .iter()
        .zip(lattice_dispersion(grid))
        .map(|(z, lambda)| z.norm_sqr() * lambda)
        .sum::<f64>()
        * norm;
    let stepper = HartreeStepper::new(v);
    let potential = stepper.potential(psi.amplitudes());
    let interaction: f64 = potential
        .iter()
        .zip(psi.amplitudes())
        .map(|(u, z)| u * z.norm_sqr())
        .sum::<f64>()
        * grid.cell_volume();
    Ok(kinetic + 0.5 * interaction)
}

/// Orthonormal-basis coefficients of `ψ^{⊗p}` over `lattice^p`.
pub fn product_coefficients(psi: &WaveFunction, p: usize) -> Vec<Complex64> {
    let c = psi.coefficients();
    let sites = c.len();
    let dim = sites.pow(p as u32);
    (0..dim)
        .map(|x| split_tuple(x, sites, p).iter().map(|&s| c[s]).product())
        .collect()
}

/// `X = ⟨ψ^{⊗p}, a ψ^{⊗p}⟩`.
pub fn hartree_expectation(psi: &WaveFunction, a: &PObservable) -> Result<f64> {
    psi.grid().check_same(a.grid(), "hartree expectation")?;
    let value = a.quadratic_form(&product_coefficients(psi, a.p()));
    if value.im.abs() >= IMAGINARY_TOLERANCE {
        return Err(Error::SelfAdjointness(value.im));
    }
    Ok(value.re)
}
