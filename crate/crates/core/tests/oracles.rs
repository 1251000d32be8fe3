mod common;

use common::*;
use meanfield::lattice::{build_grid, convolve, WaveFunction};
use meanfield::manybody::{
    assemble_hamiltonian, build_fock_basis, evolve_manybody_with, manybody_expectation,
    product_state_lift, DenseSpectrum, ManyBodyState, PropagatorOptions,
};
use meanfield::observable::{operator_norm, PObservable};
use meanfield::random_field::{sample_field, FieldSpec, RandomField};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn fft_convolution_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for &(m, l) in &[(5usize, 5.0), (8, 8.0), (16, 4.0), (27, 10.0)] {
        let grid = grid1(m, l);
        let v: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let rho: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
        let fast = convolve(&grid, &v, &rho).unwrap();
        let slow = direct_convolution(&grid, &v, &rho);
        let scale = slow.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for (f, s) in fast.iter().zip(&slow) {
            assert!((f - s).abs() <= 1e-10 * scale, "M = {m}: {f} vs {s}");
        }
    }
}

#[test]
fn convolution_commutes_with_reflection_for_even_v() {
    let grid = grid1(9, 9.0);
    let field = small_field(&grid, 3);
    assert!(field.is_even());
    let rho: Vec<f64> = (0..9).map(|j| 1.0 + (j as f64).sin()).collect();
    let reflected: Vec<f64> = (0..9).map(|j| rho[grid.reflect(j)]).collect();
    let a = convolve(&grid, field.values(), &rho).unwrap();
    let b = convolve(&grid, field.values(), &reflected).unwrap();
    for j in 0..9 {
        assert!((a[grid.reflect(j)] - b[j]).abs() < 1e-12);
    }
}

#[test]
fn operator_norm_matches_symmetric_subspace_eigensolve() {
    // p = 2 on M = 4: the symmetric subspace has dimension 10
    let grid = build_grid(1, 4, 4.0).unwrap();
    for seed in 0..3 {
        let a = random_observable(grid, 2, 100 + seed);
        let s = 16;
        let mut basis: Vec<Vec<Complex64>> = Vec::new();
        for x in 0..4 {
            for y in x..4 {
                let mut e = vec![c(0.0, 0.0); s];
                let w = if x == y { 1.0 } else { 0.5f64.sqrt() };
                e[x + 4 * y] += c(w, 0.0);
                if x != y {
                    e[y + 4 * x] += c(w, 0.0);
                }
                basis.push(e);
            }
        }
        assert_eq!(basis.len(), 10);
        let amat = a.matrix();
        let restricted = DMatrix::from_fn(10, 10, |i, j| {
            let mut acc = c(0.0, 0.0);
            for x in 0..s {
                for y in 0..s {
                    acc += basis[i][x].conj() * amat[x * s + y] * basis[j][y];
                }
            }
            acc
        });
        let eig = SymmetricEigen::new(restricted);
        let exact = eig.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        let norm = operator_norm(&a, &grid).unwrap();
        assert!((norm - exact).abs() < 1e-6 * exact, "{norm} vs {exact}");
    }
}

#[test]
fn second_quantized_hamiltonian_matches_first_quantized_projection() {
    for &(n, m, seed) in &[(2usize, 3usize, 1u64), (2, 5, 2), (3, 4, 3), (3, 5, 4)] {
        let grid = grid1(m, m as f64 * 0.8);
        let spec = FieldSpec {
            gaussian_mean: 0.3,
            mode_stddevs: if m >= 3 { vec![0.7] } else { vec![] },
            enforce_even: false,
            ..FieldSpec::default()
        };
        let field = sample_field(&spec, seed, &grid).unwrap();
        let basis = build_fock_basis(n, &grid).unwrap();
        let h = assemble_hamiltonian(&grid, &field, n, &basis).unwrap();
        let full = first_quantized_hamiltonian(&grid, field.values(), n);
        let e = symmetric_embedding(&basis, m);
        let projected = e.transpose() * full * &e;
        let dense = h.to_dense();
        let dim = basis.len();
        for i in 0..dim {
            for j in 0..dim {
                let diff = (projected[(i, j)] - dense[i * dim + j]).abs();
                assert!(diff < 1e-12, "N = {n}, M = {m}, ({i},{j}): {diff}");
            }
        }
    }
}

#[test]
fn constant_interaction_shifts_spectrum_by_pair_count() {
    let grid = grid1(4, 4.0);
    for n in [2usize, 3] {
        let basis = build_fock_basis(n, &grid).unwrap();
        let zero = RandomField::from_values(grid, vec![0.0; 4]).unwrap();
        let cst = RandomField::from_values(grid, vec![0.9; 4]).unwrap();
        let h0 = assemble_hamiltonian(&grid, &zero, n, &basis).unwrap();
        let h1 = assemble_hamiltonian(&grid, &cst, n, &basis).unwrap();
        // (1/N) Σ_{i<j} c = c (N - 1) / 2, here from the first-quantized oracle
        let full = first_quantized_hamiltonian(&grid, &[0.9; 4], n)
            - first_quantized_hamiltonian(&grid, &[0.0; 4], n);
        let shift = full[(0, 0)];
        assert!((shift - 0.9 * (n as f64 - 1.0) / 2.0).abs() < 1e-14);
        let expected = h0.shifted(shift).to_dense();
        for (a, b) in h1.to_dense().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn rdm_route_matches_brute_force_operator() {
    for &(n, m) in &[(1usize, 3usize), (2, 2), (2, 3), (3, 2), (3, 3)] {
        let grid = grid1(m, 1.7 * m as f64);
        let basis = build_fock_basis(n, &grid).unwrap();
        for p in 1..=n.min(2) {
            for seed in 0..3u64 {
                let psi = random_state(&basis, seed + 10 * n as u64);
                let a = random_observable(grid, p, seed + 77);
                let route = manybody_expectation(&psi, &a).unwrap();
                let brute = brute_force_expectation(&psi, &a, m);
                assert!(brute.im.abs() < 1e-12);
                assert!(
                    (route - brute.re).abs() < 1e-10,
                    "N = {n}, M = {m}, p = {p}: {route} vs {}",
                    brute.re
                );
            }
        }
    }
}

fn complex_expm_evolve(h: &[f64], dim: usize, x: &[Complex64], t: f64) -> Vec<Complex64> {
    let gen = DMatrix::from_fn(dim, dim, |i, j| c(0.0, -t * h[i * dim + j]));
    let u = gen.exp();
    let v = nalgebra::DVector::from_column_slice(x);
    (u * v).iter().copied().collect()
}

#[test]
fn krylov_matches_matrix_exponential() {
    let grid = grid1(4, 4.0);
    let spec = FieldSpec {
        gaussian_mean: 0.4,
        mode_stddevs: vec![0.8],
        ..FieldSpec::default()
    };
    let field = sample_field(&spec, 11, &grid).unwrap();
    let basis = build_fock_basis(2, &grid).unwrap();
    let h = assemble_hamiltonian(&grid, &field, 2, &basis).unwrap();
    let psi0 = product_state_lift(&packet(grid), 2, &basis).unwrap();
    let krylov = evolve_manybody_with(&psi0, &h, 0.5, &PropagatorOptions::krylov()).unwrap();
    let exact = complex_expm_evolve(&h.to_dense(), h.dim(), psi0.coefficients(), 0.5);
    assert!(max_abs_diff(krylov.coefficients(), &exact) < 1e-9);
}

#[test]
fn krylov_matches_dense_diagonalization_on_large_sector() {
    // C(13, 6) = 1716 states
    let grid = grid1(8, 8.0);
    let field = sample_field(&acceptance_spec(), 5, &grid).unwrap();
    let basis = build_fock_basis(6, &grid).unwrap();
    assert_eq!(basis.len(), 1716);
    let h = assemble_hamiltonian(&grid, &field, 6, &basis).unwrap();
    let psi0 = random_state(&basis, 99);
    let krylov = evolve_manybody_with(&psi0, &h, 0.5, &PropagatorOptions::krylov()).unwrap();
    let dense = DenseSpectrum::new(&h).evolve(psi0.coefficients(), 0.5);
    assert!(max_abs_diff(krylov.coefficients(), &dense) < 1e-9);
}

#[test]
fn single_particle_sector_is_free_evolution() {
    // N = 1 has no pair term, so the dynamics is e^{iΔt} whatever v is
    let grid = grid1(6, 6.0);
    let field = small_field(&grid, 8);
    let basis = build_fock_basis(1, &grid).unwrap();
    let h = assemble_hamiltonian(&grid, &field, 1, &basis).unwrap();
    let phi = WaveFunction::gaussian_packet(grid, &[2.0], 0.8, 1.0).unwrap();
    let psi0 = product_state_lift(&phi, 1, &basis).unwrap();
    let psi = evolve_manybody_with(&psi0, &h, 0.7, &PropagatorOptions::krylov()).unwrap();
    let t = stencil_kinetic(&grid);
    let c0 = phi.coefficients();
    let free = complex_expm_evolve(&t, 6, &c0, 0.7);
    // the basis orders (1,0,..) first, i.e. site 0 first
    let sites: Vec<Complex64> = (0..6)
        .map(|x| {
            let mut occ = vec![0u16; 6];
            occ[x] = 1;
            psi.coefficients()[basis.index_of(&occ).unwrap()]
        })
        .collect();
    assert!(max_abs_diff(&sites, &free) < 1e-10);
}

#[test]
fn projector_expectation_of_product_state_is_overlap_power() {
    let grid = grid1(5, 5.0);
    let phi = packet(grid);
    let chi = WaveFunction::gaussian_packet(grid, &[1.5], 1.2, 0.4).unwrap();
    let overlap = phi.inner(&chi).unwrap().norm_sqr();
    for n in 1..=4usize {
        let basis = build_fock_basis(n, &grid).unwrap();
        let psi = product_state_lift(&chi, n, &basis).unwrap();
        for p in 1..=n.min(2) {
            let a = PObservable::condensate_projector(&phi, p).unwrap();
            let x = manybody_expectation(&psi, &a).unwrap();
            let lift = (0..p).map(|k| (n - k) as f64 / n as f64).product::<f64>();
            assert!((x - lift * overlap.powi(p as i32)).abs() < 1e-12);
        }
    }
}

#[test]
fn lifted_state_matches_first_quantized_tensor_power() {
    let grid = grid1(3, 2.0);
    let phi = WaveFunction::gaussian_packet(grid, &[0.5], 0.7, 0.9).unwrap();
    let basis = build_fock_basis(3, &grid).unwrap();
    let psi = product_state_lift(&phi, 3, &basis).unwrap();
    let full = to_first_quantized(&psi, 3);
    let cs = phi.coefficients();
    for (idx, z) in full.iter().enumerate() {
        let expected = cs[idx % 3] * cs[(idx / 3) % 3] * cs[idx / 9];
        assert!((z - expected).norm() < 1e-14);
    }
    let _: &ManyBodyState = &psi;
}
