//! p-particle observables given by dense kernels on `lattice^p × lattice^p`.
//!
//! A p-tuple of sites `X = (x_1, .., x_p)` is flattened as
//! `x_1 + S x_2 + S^2 x_3 + ..` with `S` the number of sites. The kernel acts
//! as `(aφ)(X) = h^{dp} Σ_Y kernel(X; Y) φ(Y)`, so the matrix of `a` in the
//! orthonormal site basis is `h^{dp} kernel`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{LatticeGrid, WaveFunction};

const MAX_TUPLE_DIM: usize = 4096;

/// Dense, permutation-symmetrized p-particle kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct PObservable {
    grid: LatticeGrid,
    p: usize,
    dim: usize,
    kernel: Vec<Complex64>,
}

pub(crate) fn tuple_dim(sites: usize, p: usize) -> Option<usize> {
    sites.checked_pow(p as u32)
}

pub(crate) fn split_tuple(mut index: usize, sites: usize, p: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(p);
    for _ in 0..p {
        out.push(index % sites);
        index /= sites;
    }
    out
}

pub(crate) fn join_tuple(tuple: &[usize], sites: usize) -> usize {
    tuple.iter().rev().fold(0, |acc, &x| acc * sites + x)
}

/// All permutations of `0..p` in lexicographic order.
pub(crate) fn permutations(p: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(p), &mut vec![false; p], &mut out);
    out
}

/// Permutation tables: `table[s][X]` is the flat index of `X` with its
/// particle slots rearranged by the `s`-th permutation.
fn permutation_tables(sites: usize, p: usize, dim: usize) -> Vec<Vec<usize>> {
    permutations(p)
        .iter()
        .map(|perm| {
            (0..dim)
                .map(|x| {
                    let tuple = split_tuple(x, sites, p);
                    let permuted: Vec<usize> = perm.iter().map(|&i| tuple[i]).collect();
                    join_tuple(&permuted, sites)
                })
                .collect()
        })
        .collect()
}

/// Orthogonal projection of a vector over `lattice^p` onto its
/// permutation-symmetric part.
pub fn symmetrize_vector(values: &[Complex64], sites: usize, p: usize) -> Vec<Complex64> {
    if p == 1 {
        return values.to_vec();
    }
    let tables = permutation_tables(sites, p, values.len());
    let inv = (tables.len() as f64).recip();
    (0..values.len())
        .map(|x| tables.iter().map(|t| values[t[x]]).sum::<Complex64>() * inv)
        .collect()
}

impl PObservable {
    /// Build from a raw kernel (row-major over `lattice^p × lattice^p`); the
    /// kernel is averaged over simultaneous permutations of both arguments.
    pub fn from_kernel(grid: LatticeGrid, p: usize, kernel: Vec<Complex64>) -> Result<Self> {
        if p == 0 {
            return Err(Error::Domain("observable particle number p must be ≥ 1".into()));
        }
        let dim = tuple_dim(grid.num_sites(), p)
            .filter(|&d| d <= MAX_TUPLE_DIM)
            .ok_or_else(|| {
                Error::Resource(format!(
                    "dense {p}-particle kernel on {} sites exceeds {MAX_TUPLE_DIM} rows",
                    grid.num_sites()
                ))
            })?;
        if kernel.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "kernel has {} entries, expected {}",
                kernel.len(),
                dim * dim
            )));
        }
        let kernel = if p == 1 {
            kernel
        } else {
            let tables = permutation_tables(grid.num_sites(), p, dim);
            let inv = (tables.len() as f64).recip();
            let mut out = vec![Complex64::new(0.0, 0.0); dim * dim];
            for x in 0..dim {
                for y in 0..dim {
                    let acc: Complex64 = tables.iter().map(|t| kernel[t[x] * dim + t[y]]).sum();
                    out[x * dim + y] = acc * inv;
                }
            }
            out
        };
        Ok(PObservable {
            grid,
            p,
            dim,
            kernel,
        })
    }

    /// `|φ^{⊗p}⟩⟨φ^{⊗p}|`, kernel `Π φ(x_i) conj(φ(y_i))`.
    pub fn condensate_projector(phi: &WaveFunction, p: usize) -> Result<Self> {
        let grid = *phi.grid();
        let sites = grid.num_sites();
        let dim = tuple_dim(sites, p).unwrap_or(usize::MAX);
        if p == 0 || dim > MAX_TUPLE_DIM {
            return Self::from_kernel(grid, p, Vec::new());
        }
        let amps = phi.amplitudes();
        let product: Vec<Complex64> = (0..dim)
            .map(|x| split_tuple(x, sites, p).iter().map(|&s| amps[s]).product())
            .collect();
        let mut kernel = Vec::with_capacity(dim * dim);
        for x in 0..dim {
            for y in 0..dim {
                kernel.push(product[x] * product[y].conj());
            }
        }
        Self::from_kernel(grid, p, kernel)
    }

    /// Multiplication by `Π f(x_i)`: kernel `h^{-dp} δ(X, Y) Π f(x_i)`.
    pub fn multiplication(grid: LatticeGrid, f: &[f64], p: usize) -> Result<Self> {
        grid.check_len(f.len(), "multiplication profile")?;
        let sites = grid.num_sites();
        let dim = tuple_dim(sites, p).unwrap_or(usize::MAX);
        if p == 0 || dim > MAX_TUPLE_DIM {
            return Self::from_kernel(grid, p, Vec::new());
        }
        let scale = grid.cell_volume().powi(-(p as i32));
        let mut kernel = vec![Complex64::new(0.0, 0.0); dim * dim];
        for x in 0..dim {
            let value: f64 = split_tuple(x, sites, p).iter().map(|&s| f[s]).product();
            kernel[x * dim + x] = Complex64::new(value * scale, 0.0);
        }
        Self::from_kernel(grid, p, kernel)
    }

    pub fn identity(grid: LatticeGrid, p: usize) -> Result<Self> {
        Self::multiplication(grid, &vec![1.0; grid.num_sites()], p)
    }

    /// Symmetrized tensor product `a ⊗ b` as a `(p_a + p_b)`-particle kernel.
    pub fn tensor_product(a: &PObservable, b: &PObservable) -> Result<Self> {
        a.grid.check_same(&b.grid, "tensor product")?;
        let p = a.p + b.p;
        let dim = tuple_dim(a.grid.num_sites(), p)
            .filter(|&d| d <= MAX_TUPLE_DIM)
            .ok_or_else(|| Error::Resource(format!("tensor product with p = {p} is too large")))?;
        let mut kernel = vec![Complex64::new(0.0, 0.0); dim * dim];
        for x in 0..dim {
            let (xa, xb) = (x % a.dim, x / a.dim);
            for y in 0..dim {
                let (ya, yb) = (y % a.dim, y / a.dim);
                kernel[x * dim + y] = a.kernel(xa, ya) * b.kernel(xb, yb);
            }
        }
        Self::from_kernel(a.grid, p, kernel)
    }

    pub fn grid(&self) -> &LatticeGrid {
        &self.grid
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of p-tuples, `S^p`.
    pub fn tuple_dim(&self) -> usize {
        self.dim
    }

    pub fn kernel(&self, x: usize, y: usize) -> Complex64 {
        self.kernel[x * self.dim + y]
    }

    pub fn kernel_entries(&self) -> &[Complex64] {
        &self.kernel
    }

    /// Matrix in the orthonormal basis, `h^{dp} kernel`, row-major.
    pub fn matrix(&self) -> Vec<Complex64> {
        let scale = self.grid.cell_volume().powi(self.p as i32);
        self.kernel.iter().map(|z| z * scale).collect()
    }

    pub fn adjoint(&self) -> PObservable {
        let mut kernel = vec![Complex64::new(0.0, 0.0); self.kernel.len()];
        for x in 0..self.dim {
            for y in 0..self.dim {
                kernel[y * self.dim + x] = self.kernel(x, y).conj();
            }
        }
        PObservable {
            kernel,
            ..self.clone()
        }
    }

    /// `kernel(X; Y) = conj(kernel(Y; X))` up to `tol` (absolute, on the matrix).
    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        let scale = self.grid.cell_volume().powi(self.p as i32);
        (0..self.dim).all(|x| {
            (x..self.dim).all(|y| (self.kernel(x, y) - self.kernel(y, x).conj()).norm() * scale <= tol)
        })
    }

    /// Matrix-vector product in the orthonormal basis.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let scale = self.grid.cell_volume().powi(self.p as i32);
        self.kernel
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(v).map(|(k, x)| k * x).sum::<Complex64>() * scale)
            .collect()
    }

    fn apply_adjoint(&self, v: &[Complex64]) -> Vec<Complex64> {
        let scale = self.grid.cell_volume().powi(self.p as i32);
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
        for (row, x) in self.kernel.chunks_exact(self.dim).zip(v) {
            for (o, k) in out.iter_mut().zip(row) {
                *o += k.conj() * x;
            }
        }
        out.iter().map(|z| z * scale).collect()
    }

    /// `c† A c` for orthonormal-basis coefficients `c` over `lattice^p`.
    pub fn quadratic_form(&self, c: &[Complex64]) -> Complex64 {
        self.apply(c)
            .iter()
            .zip(c)
            .map(|(ac, ci)| ci.conj() * ac)
            .sum()
    }
}

/// Stopping rule for [`operator_norm_with`].
#[derive(Clone, Copy, Debug)]
pub struct PowerIteration {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        PowerIteration {
            max_iterations: 200_000,
            tolerance: 1e-8,
        }
    }
}

/// Operator norm on the permutation-symmetric p-particle space.
pub fn operator_norm(a: &PObservable, grid: &LatticeGrid) -> Result<f64> {
    operator_norm_with(a, grid, PowerIteration::default())
}

/// Power iteration on `A†A` restricted to the symmetric subspace; stops when
/// the eigen-residual `‖A†A v - μ v‖` drops below `tolerance · μ`.
pub fn operator_norm_with(a: &PObservable, grid: &LatticeGrid, opts: PowerIteration) -> Result<f64> {
    grid.check_same(&a.grid, "operator norm")?;
    if a.kernel.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Ok(0.0);
    }
    let sites = grid.num_sites();
    let mut state = 0x853c_49e6_748f_ea9b_u64;
    let start: Vec<Complex64> = (0..a.dim)
        .map(|_| {
            let re = crate::random_field::splitmix64(&mut state);
            let im = crate::random_field::splitmix64(&mut state);
            Complex64::new(unit_interval(re) - 0.5, unit_interval(im) - 0.5)
        })
        .collect();
    let mut v = normalize(symmetrize_vector(&start, sites, a.p))
        .ok_or_else(|| Error::Numerical("power iteration start vector vanished".into()))?;

    for _ in 0..opts.max_iterations {
        let w = a.apply(&v);
        let mu: f64 = w.iter().map(|z| z.norm_sqr()).sum();
        let u = symmetrize_vector(&a.apply_adjoint(&w), sites, a.p);
        let residual: f64 = u
            .iter()
            .zip(&v)
            .map(|(ui, vi)| (ui - vi * mu).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if mu > 0.0 && residual <= opts.tolerance * mu {
            return Ok(mu.sqrt());
        }
        v = match normalize(u) {
            Some(next) => next,
            None => {
                return Err(Error::Numerical(
                    "power iteration collapsed onto the null space".into(),
                ))
            }
        };
    }
    Err(Error::Numerical(format!(
        "power iteration did not converge in {} iterations",
        opts.max_iterations
    )))
}

fn unit_interval(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn normalize(mut v: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return None;
    }
    v.iter_mut().for_each(|z| *z /= norm);
    Some(v)
}

/// `N! / (N^p (N - p)!)`, evaluated as `Π_{k<p} (N - k) / N`.
pub fn lift_factor(n: usize, p: usize) -> Result<f64> {
    if n == 0 || p == 0 {
        return Err(Error::Domain(format!(
            "lift factor needs N ≥ 1 and p ≥ 1 (got N = {n}, p = {p})"
        )));
    }
    if p > n {
        return Err(Error::Domain(format!(
            "observable with p = {p} particles cannot be lifted to N = {n}"
        )));
    }
    let nf = n as f64;
    Ok((0..p).map(|k| (n - k) as f64 / nf).product())
}
