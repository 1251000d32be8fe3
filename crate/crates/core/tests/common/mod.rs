//! Independent reference implementations for the integration tests.
//!
//! Everything here works in first quantization on the full tensor product
//! space and shares no code with the library beyond the data types.

#![allow(dead_code)]

use std::sync::Arc;

use meanfield::lattice::{build_grid, LatticeGrid, WaveFunction};
use meanfield::manybody::{FockBasis, ManyBodyState};
use meanfield::observable::PObservable;
use meanfield::random_field::{sample_field, FieldSpec, RandomField};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn grid1(m: usize, l: f64) -> LatticeGrid {
    build_grid(1, m, l).unwrap()
}

/// Two-mode field small enough for any `M >= 5`.
pub fn small_field(grid: &LatticeGrid, seed: u64) -> RandomField {
    let spec = FieldSpec {
        gaussian_mean: 0.2,
        mode_stddevs: vec![0.6],
        ..FieldSpec::default()
    };
    sample_field(&spec, seed, grid).unwrap()
}

/// The field used by the convergence run: bump plus three random modes.
pub fn acceptance_spec() -> FieldSpec {
    FieldSpec {
        base: meanfield::random_field::BaseProfile::GaussianBump {
            amplitude: 1.0,
            width: 1.5,
        },
        gaussian_mean: 0.0,
        mode_stddevs: vec![0.5, 0.3, 0.1],
        enforce_even: true,
    }
}

pub fn packet(grid: LatticeGrid) -> WaveFunction {
    let center = grid.box_length() / 2.0;
    WaveFunction::gaussian_packet(grid, &[center; 3][..grid.dim()], 1.0, 0.0).unwrap()
}

/// `(h^d Σ_y v(x - y) ρ(y))_x` by direct summation, d = 1.
pub fn direct_convolution(grid: &LatticeGrid, v: &[f64], rho: &[f64]) -> Vec<f64> {
    let m = grid.num_sites();
    let h = grid.cell_volume();
    (0..m)
        .map(|x| h * (0..m).map(|y| v[(x + m - y) % m] * rho[y]).sum::<f64>())
        .collect()
}

/// `-Δ` on the d = 1 periodic lattice in the orthonormal site basis, built
/// from the three-point stencil.
pub fn stencil_kinetic(grid: &LatticeGrid) -> Vec<f64> {
    let m = grid.num_sites();
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let mut t = vec![0.0; m * m];
    for x in 0..m {
        t[x * m + x] += 2.0 * inv_h2;
        t[x * m + (x + 1) % m] -= inv_h2;
        t[x * m + (x + m - 1) % m] -= inv_h2;
    }
    t
}

fn digits(mut index: usize, m: usize, n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(index % m);
        index /= m;
    }
    out
}

/// First-quantized `Σ_j T_j + (1/N) Σ_{i<j} v(x_i - x_j)` on `(C^M)^{⊗N}`,
/// d = 1. Configuration `(x_1..x_N)` has index `Σ x_k M^{k-1}`.
pub fn first_quantized_hamiltonian(grid: &LatticeGrid, v: &[f64], n: usize) -> DMatrix<f64> {
    let m = grid.num_sites();
    let t = stencil_kinetic(grid);
    let dim = m.pow(n as u32);
    let mut h = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let xs = digits(col, m, n);
        let mut pot = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                pot += v[(xs[i] + m - xs[j]) % m];
            }
        }
        h[(col, col)] += pot / n as f64;
        for k in 0..n {
            for y in 0..m {
                let w = t[y * m + xs[k]];
                if w != 0.0 {
                    let row = col + (y * m.pow(k as u32)) - xs[k] * m.pow(k as u32);
                    h[(row, col)] += w;
                }
            }
        }
    }
    h
}

/// Isometry from the occupation basis into `(C^M)^{⊗N}`; column `i` is the
/// normalized symmetrization of occupation state `i`.
pub fn symmetric_embedding(basis: &FockBasis, m: usize) -> DMatrix<f64> {
    let n = basis.particles();
    let dim = m.pow(n as u32);
    let mut e = DMatrix::zeros(dim, basis.len());
    let mut counts = vec![0usize; basis.len()];
    let mut rows = vec![0usize; dim];
    for (idx, row) in rows.iter_mut().enumerate() {
        let mut occ = vec![0u16; m];
        for x in digits(idx, m, n) {
            occ[x] += 1;
        }
        let i = basis.index_of(&occ).unwrap();
        counts[i] += 1;
        *row = i;
    }
    for (idx, &i) in rows.iter().enumerate() {
        e[(idx, i)] = 1.0 / (counts[i] as f64).sqrt();
    }
    e
}

pub fn to_first_quantized(psi: &ManyBodyState, m: usize) -> Vec<Complex64> {
    let e = symmetric_embedding(psi.basis(), m);
    (0..e.nrows())
        .map(|r| {
            (0..e.ncols())
                .map(|i| psi.coefficients()[i] * e[(r, i)])
                .sum()
        })
        .collect()
}

/// `N!/(N^p (N-p)!) ⟨Ψ, P_S (a ⊗ I) P_S Ψ⟩` with `a` acting on the first
/// `p` coordinates.
pub fn brute_force_expectation(psi: &ManyBodyState, a: &PObservable, m: usize) -> Complex64 {
    let n = psi.basis().particles();
    let p = a.p();
    let full = to_first_quantized(psi, m);
    let amat = a.matrix();
    let sp = m.pow(p as u32);
    let rest = m.pow((n - p) as u32);
    let mut acc = c(0.0, 0.0);
    for r in 0..rest {
        for x in 0..sp {
            let lhs = full[x + sp * r].conj();
            if lhs == c(0.0, 0.0) {
                continue;
            }
            let applied: Complex64 = (0..sp).map(|y| amat[x * sp + y] * full[y + sp * r]).sum();
            acc += lhs * applied;
        }
    }
    let prefactor = (0..p).map(|k| (n - k) as f64 / n as f64).product::<f64>();
    acc * prefactor
}

pub fn random_state(basis: &Arc<FockBasis>, seed: u64) -> ManyBodyState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = (0..basis.len())
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    ManyBodyState::new(basis.clone(), coeffs).unwrap().normalized().unwrap()
}

/// Random self-adjoint p-particle kernel.
pub fn random_observable(grid: LatticeGrid, p: usize, seed: u64) -> PObservable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = grid.num_sites().pow(p as u32);
    let mut k = vec![c(0.0, 0.0); s * s];
    for x in 0..s {
        for y in x..s {
            let z = if x == y {
                c(rng.random_range(-1.0..1.0), 0.0)
            } else {
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            };
            k[x * s + y] = z;
            k[y * s + x] = z.conj();
        }
    }
    PObservable::from_kernel(grid, p, k).unwrap()
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
