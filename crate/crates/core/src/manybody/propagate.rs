//! Real-time propagation `Ψ_t = e^{-iHt} Ψ_0`.
//!
//! Large sectors use Lanczos with full reorthogonalization. The Krylov basis
//! does not depend on the step length, so each basis is reused while the
//! substep is halved until the a posteriori error estimate
//! `β_m |[e^{-iτT_m} e_1]_m|` meets the tolerance. Small sectors are
//! diagonalized outright.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use super::hamiltonian::SparseHamiltonian;
use super::ManyBodyState;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PropagationMethod {
    /// Dense below `dense_threshold`, Krylov above.
    Auto,
    Krylov,
    Dense,
}

#[derive(Clone, Copy, Debug)]
pub struct PropagatorOptions {
    pub method: PropagationMethod,
    pub krylov_dim: usize,
    /// Per-substep bound on the Lanczos error estimate.
    pub tolerance: f64,
    pub dense_threshold: usize,
    pub max_substeps: usize,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        PropagatorOptions {
            method: PropagationMethod::Auto,
            krylov_dim: 30,
            tolerance: 1e-12,
            dense_threshold: 500,
            max_substeps: 100_000,
        }
    }
}

impl PropagatorOptions {
    pub fn krylov() -> Self {
        PropagatorOptions {
            method: PropagationMethod::Krylov,
            ..Self::default()
        }
    }

    pub fn dense() -> Self {
        PropagatorOptions {
            method: PropagationMethod::Dense,
            ..Self::default()
        }
    }
}

/// Norm tolerance for propagation inputs.
pub const STATE_NORM_TOLERANCE: f64 = 1e-10;

pub fn evolve_manybody(
    psi0: &ManyBodyState,
    h: &SparseHamiltonian,
    t: f64,
) -> Result<ManyBodyState> {
    evolve_manybody_with(psi0, h, t, &PropagatorOptions::default())
}

pub fn evolve_manybody_with(
    psi0: &ManyBodyState,
    h: &SparseHamiltonian,
    t: f64,
    opts: &PropagatorOptions,
) -> Result<ManyBodyState> {
    if psi0.basis() != h.basis() && **psi0.basis() != **h.basis() {
        return Err(Error::Dimension(
            "state and Hamiltonian live on different Fock bases".into(),
        ));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Domain(format!("evolution time must be nonnegative (got {t})")));
    }
    let norm = psi0.norm();
    if (norm - 1.0).abs() > STATE_NORM_TOLERANCE {
        return Err(Error::Precondition(format!(
            "many-body state must be normalized (‖Ψ‖ = {norm:.15})"
        )));
    }
    if t == 0.0 {
        return Ok(psi0.clone());
    }
    let use_dense = match opts.method {
        PropagationMethod::Dense => true,
        PropagationMethod::Krylov => false,
        PropagationMethod::Auto => h.dim() < opts.dense_threshold,
    };
    let coefficients = if use_dense {
        DenseSpectrum::new(h).evolve(psi0.coefficients(), t)
    } else {
        krylov_evolve(h, psi0.coefficients(), t, opts)?
    };
    ManyBodyState::new(psi0.basis().clone(), coefficients)
}

/// Full eigendecomposition `H = V Λ V^T`.
#[derive(Clone, Debug)]
pub struct DenseSpectrum {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl DenseSpectrum {
    pub fn new(h: &SparseHamiltonian) -> Self {
        let n = h.dim();
        let dense = DMatrix::from_row_slice(n, n, &h.to_dense());
        let eig = SymmetricEigen::new(dense);
        DenseSpectrum {
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.eigenvalues.as_slice()
    }

    pub fn evolve(&self, x: &[Complex64], t: f64) -> Vec<Complex64> {
        let re = DVector::from_iterator(x.len(), x.iter().map(|z| z.re));
        let im = DVector::from_iterator(x.len(), x.iter().map(|z| z.im));
        let vt = self.eigenvectors.transpose();
        let (cr, ci) = (&vt * re, &vt * im);
        let mut out_re = DVector::zeros(x.len());
        let mut out_im = DVector::zeros(x.len());
        for (k, lambda) in self.eigenvalues.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -lambda * t);
            let c = Complex64::new(cr[k], ci[k]) * phase;
            let col = self.eigenvectors.column(k);
            out_re.axpy(c.re, &col, 1.0);
            out_im.axpy(c.im, &col, 1.0);
        }
        out_re
            .iter()
            .zip(out_im.iter())
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect()
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

struct KrylovSpace {
    vectors: Vec<Vec<Complex64>>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    // norm of the first discarded residual; zero after a happy breakdown
    residual: f64,
}

impl KrylovSpace {
    fn build(h: &SparseHamiltonian, start: &[Complex64], max_dim: usize) -> Self {
        let n = start.len();
        let beta0 = norm(start);
        let mut vectors = vec![start.iter().map(|z| z / beta0).collect::<Vec<_>>()];
        let mut alphas = Vec::with_capacity(max_dim);
        let mut betas = Vec::with_capacity(max_dim);
        let mut u = vec![Complex64::new(0.0, 0.0); n];
        let mut residual = 0.0;
        for j in 0..max_dim.min(n) {
            h.apply_into(&vectors[j], &mut u);
            let alpha = dot(&vectors[j], &u).re;
            for (ui, vi) in u.iter_mut().zip(&vectors[j]) {
                *ui -= vi * alpha;
            }
            if j > 0 {
                let beta_prev = betas[j - 1];
                for (ui, vi) in u.iter_mut().zip(&vectors[j - 1]) {
                    *ui -= vi * beta_prev;
                }
            }
            for v in &vectors {
                let c = dot(v, &u);
                for (ui, vi) in u.iter_mut().zip(v) {
                    *ui -= vi * c;
                }
            }
            alphas.push(alpha);
            let beta = norm(&u);
            let scale = alpha.abs().max(betas.last().copied().unwrap_or(0.0)).max(1.0);
            if beta <= 1e-13 * scale {
                residual = 0.0;
                break;
            }
            if j + 1 == max_dim.min(n) {
                // a full-dimension Krylov space is exact
                residual = if j + 1 == n { 0.0 } else { beta };
                break;
            }
            betas.push(beta);
            vectors.push(u.iter().map(|z| z / beta).collect());
        }
        let k = alphas.len();
        vectors.truncate(k);
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        KrylovSpace {
            vectors,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
            residual,
        }
    }

    /// `e^{-iτT} e_1` in the Krylov basis.
    fn propagated(&self, tau: f64) -> Vec<Complex64> {
        let k = self.eigenvalues.len();
        let mut out = vec![Complex64::new(0.0, 0.0); k];
        for m in 0..k {
            let weight = Complex64::from_polar(self.eigenvectors[(0, m)], -tau * self.eigenvalues[m]);
            for (i, o) in out.iter_mut().enumerate() {
                *o += weight * self.eigenvectors[(i, m)];
            }
        }
        out
    }
}

fn krylov_evolve(
    h: &SparseHamiltonian,
    start: &[Complex64],
    t: f64,
    opts: &PropagatorOptions,
) -> Result<Vec<Complex64>> {
    if opts.krylov_dim < 2 {
        return Err(Error::Config("Krylov dimension must be at least 2".into()));
    }
    let mut w = start.to_vec();
    let mut elapsed = 0.0;
    let mut substeps = 0;
    while elapsed < t {
        substeps += 1;
        if substeps > opts.max_substeps {
            return Err(Error::Numerical(format!(
                "Krylov propagation exceeded {} substeps at t = {elapsed} of {t}",
                opts.max_substeps
            )));
        }
        let beta0 = norm(&w);
        if beta0 == 0.0 {
            return Ok(w);
        }
        let space = KrylovSpace::build(h, &w, opts.krylov_dim);
        let remaining = t - elapsed;
        let mut tau = remaining;
        let mut y = space.propagated(tau);
        if space.residual > 0.0 {
            loop {
                let estimate = space.residual * y.last().map_or(0.0, |z| z.norm());
                if estimate <= opts.tolerance {
                    break;
                }
                tau *= 0.5;
                if tau <= remaining * 1e-14 {
                    return Err(Error::Numerical(format!(
                        "Krylov breakdown without convergence: dimension {}, residual {:e}, error estimate {:e} at t = {elapsed}",
                        y.len(),
                        space.residual,
                        estimate
                    )));
                }
                y = space.propagated(tau);
            }
        }
        let mut next = vec![Complex64::new(0.0, 0.0); w.len()];
        for (coef, v) in y.iter().zip(&space.vectors) {
            let c = coef * beta0;
            for (o, vi) in next.iter_mut().zip(v) {
                *o += vi * c;
            }
        }
        w = next;
        elapsed = if tau == remaining { t } else { elapsed + tau };
    }
    Ok(w)
}
