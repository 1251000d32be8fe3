//! Reduced density matrices and lifted p-particle expectations.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::basis::FockBasis;
use super::ManyBodyState;
use crate::error::{Error, Result};
use crate::hartree::IMAGINARY_TOLERANCE;
use crate::observable::{lift_factor, operator_norm, tuple_dim, PObservable};

/// Slack allowed on the pathwise bound `|X_N| ≤ ‖a‖`.
pub const BOUND_TOLERANCE: f64 = 1e-12;

/// `γ^(p)` over `lattice^p × lattice^p` in the orthonormal site basis,
/// row-major: `γ(X; Y) = (N-p)!/N! ⟨Ψ, a†_{y_1}..a†_{y_p} a_{x_p}..a_{x_1} Ψ⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    p: usize,
    dim: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, x: usize, y: usize) -> Complex64 {
        self.data[x * self.dim + y]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|x| self.get(x, x)).sum()
    }

    /// Largest `|γ(X;Y) - conj(γ(Y;X))|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for x in 0..self.dim {
            for y in x..self.dim {
                worst = worst.max((self.get(x, y) - self.get(y, x).conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.data);
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `Tr(A γ)` for the orthonormal-basis matrix of `a`.
    pub fn pair_with(&self, a: &PObservable) -> Result<Complex64> {
        if a.p() != self.p || a.tuple_dim() != self.dim {
            return Err(Error::Dimension(format!(
                "observable (p = {}, {} tuples) does not match density matrix (p = {}, {} tuples)",
                a.p(),
                a.tuple_dim(),
                self.p,
                self.dim
            )));
        }
        let matrix = a.matrix();
        let mut acc = Complex64::new(0.0, 0.0);
        for x in 0..self.dim {
            for y in 0..self.dim {
                acc += matrix[x * self.dim + y] * self.data[y * self.dim + x];
            }
        }
        Ok(acc)
    }
}

/// Normalized p-particle reduced density matrix of `Ψ`.
///
/// Computed as `Σ_m w_m w_m†` with `w_m(X) = ⟨m| a_{x_p}..a_{x_1} |Ψ⟩` over
/// the `(N - p)`-particle sector, which makes positivity manifest.
pub fn reduced_density_matrix(psi: &ManyBodyState, p: usize) -> Result<DensityMatrix> {
    let basis = psi.basis();
    let n = basis.particles();
    if p == 0 || p > n {
        return Err(Error::Domain(format!(
            "reduced density matrix needs 1 ≤ p ≤ N (got p = {p}, N = {n})"
        )));
    }
    let sites = basis.sites();
    let dim = tuple_dim(sites, p)
        .ok_or_else(|| Error::Resource(format!("{p}-particle tuples on {sites} sites overflow")))?;
    let lower = FockBasis::enumerate(n - p, sites);
    let mut w = vec![Complex64::new(0.0, 0.0); lower.len() * dim];

    let mut occ = vec![0u16; sites];
    let mut tuple = vec![0usize; p];
    for (state, &c) in basis.iter().zip(psi.coefficients()) {
        if c == Complex64::new(0.0, 0.0) {
            continue;
        }
        occ.copy_from_slice(state);
        annihilate(&lower, &mut occ, &mut tuple, 0, c, sites, dim, &mut w);
    }

    // (N - p)! / N!
    let scale = lift_factor(n, p)?.recip() * (n as f64).powi(-(p as i32));
    let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
    for row in w.chunks_exact(dim) {
        let support: Vec<usize> = (0..dim).filter(|&x| row[x] != Complex64::new(0.0, 0.0)).collect();
        for &x in &support {
            for &y in &support {
                data[x * dim + y] += row[x] * row[y].conj();
            }
        }
    }
    for z in &mut data {
        *z *= scale;
    }
    Ok(DensityMatrix { p, dim, data })
}

#[allow(clippy::too_many_arguments)]
fn annihilate(
    lower: &FockBasis,
    occ: &mut [u16],
    tuple: &mut [usize],
    depth: usize,
    amp: Complex64,
    sites: usize,
    dim: usize,
    w: &mut [Complex64],
) {
    if depth == tuple.len() {
        let m = lower.rank_unchecked(occ);
        let x = tuple.iter().rev().fold(0, |acc, &s| acc * sites + s);
        w[m * dim + x] += amp;
        return;
    }
    for site in 0..sites {
        let count = occ[site];
        if count == 0 {
            continue;
        }
        tuple[depth] = site;
        occ[site] -= 1;
        annihilate(lower, occ, tuple, depth + 1, amp * (count as f64).sqrt(), sites, dim, w);
        occ[site] += 1;
    }
}

/// `X_N = ⟨Ψ, A^N(a) Ψ⟩ = lift_factor(N, p) · Tr(a γ^(p))`, checked against
/// `|X_N| ≤ ‖a‖`.
pub fn manybody_expectation(psi: &ManyBodyState, a: &PObservable) -> Result<f64> {
    let bound = operator_norm(a, a.grid())?;
    manybody_expectation_bounded(psi, a, bound)
}

/// As [`manybody_expectation`] with a precomputed operator norm.
pub fn manybody_expectation_bounded(psi: &ManyBodyState, a: &PObservable, norm: f64) -> Result<f64> {
    let n = psi.basis().particles();
    if psi.basis().sites() != a.grid().num_sites() {
        return Err(Error::Dimension(format!(
            "observable on {} sites, state on {} sites",
            a.grid().num_sites(),
            psi.basis().sites()
        )));
    }
    let gamma = reduced_density_matrix(psi, a.p())?;
    let value = gamma.pair_with(a)? * lift_factor(n, a.p())?;
    if value.im.abs() >= IMAGINARY_TOLERANCE {
        return Err(Error::SelfAdjointness(value.im));
    }
    if value.re.abs() > norm + BOUND_TOLERANCE {
        return Err(Error::Consistency(format!(
            "|X_N| = {} exceeds ‖a‖ = {norm} (N = {n})",
            value.re.abs()
        )));
    }
    Ok(value.re)
}
