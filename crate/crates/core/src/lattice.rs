//! Periodic lattice discretization of the box `[0, L)^d`.
//!
//! Sites are addressed by a flat index `j_0 + M j_1 + M^2 j_2` with axis 0
//! fastest. All L² quantities carry the `h^d` cell weight so they approach
//! their continuum values under refinement. Operators acting on the
//! orthonormal site basis (`c_x = h^{d/2} ψ(x)`) are plain matrices; the
//! Laplacian stencil is the same in both pictures.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Periodic lattice with `M` sites per axis over a box of side `L`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeGrid {
    dim: usize,
    sites_per_axis: usize,
    box_length: f64,
}

impl LatticeGrid {
    pub fn new(dim: usize, sites_per_axis: usize, box_length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Config(format!(
                "dimension must be 1, 2 or 3 (got {dim})"
            )));
        }
        if sites_per_axis < 2 {
            return Err(Error::Config(format!(
                "sites must be at least 2 (got {sites_per_axis})"
            )));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::Config(format!(
                "box_length must be positive and finite (got {box_length})"
            )));
        }
        Ok(LatticeGrid {
            dim,
            sites_per_axis,
            box_length,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sites_per_axis(&self) -> usize {
        self.sites_per_axis
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    /// Lattice spacing `L / M`.
    pub fn spacing(&self) -> f64 {
        self.box_length / self.sites_per_axis as f64
    }

    /// Volume of one lattice cell, `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Total number of sites, `M^d`.
    pub fn num_sites(&self) -> usize {
        self.sites_per_axis.pow(self.dim as u32)
    }

    /// Per-axis integer coordinates of a flat site index.
    pub fn multi_index(&self, site: usize) -> [usize; 3] {
        let m = self.sites_per_axis;
        let mut out = [0; 3];
        let mut rest = site;
        for slot in out.iter_mut().take(self.dim) {
            *slot = rest % m;
            rest /= m;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        let m = self.sites_per_axis;
        multi[..self.dim]
            .iter()
            .rev()
            .fold(0, |acc, &j| acc * m + j % m)
    }

    /// Cartesian coordinates `j_a h` of a site.
    pub fn coordinates(&self, site: usize) -> [f64; 3] {
        let h = self.spacing();
        let multi = self.multi_index(site);
        let mut out = [0.0; 3];
        for a in 0..self.dim {
            out[a] = multi[a] as f64 * h;
        }
        out
    }

    /// Site reached by moving `step` cells along `axis`, with periodic wrap.
    pub fn shift(&self, site: usize, axis: usize, step: isize) -> usize {
        let m = self.sites_per_axis as isize;
        let mut multi = self.multi_index(site);
        multi[axis] = (multi[axis] as isize + step).rem_euclid(m) as usize;
        self.flat_index(&multi)
    }

    /// Image of a site under `x -> -x mod L`.
    pub fn reflect(&self, site: usize) -> usize {
        let m = self.sites_per_axis;
        let mut multi = self.multi_index(site);
        for j in multi.iter_mut().take(self.dim) {
            *j = (m - *j) % m;
        }
        self.flat_index(&multi)
    }

    /// Site index of the periodic difference `x - y`.
    pub fn difference(&self, x: usize, y: usize) -> usize {
        let m = self.sites_per_axis;
        let mx = self.multi_index(x);
        let my = self.multi_index(y);
        let mut out = [0; 3];
        for a in 0..self.dim {
            out[a] = (mx[a] + m - my[a]) % m;
        }
        self.flat_index(&out)
    }

    /// Minimum-image distance of a site from the point `center`.
    pub fn periodic_distance(&self, site: usize, center: &[f64]) -> f64 {
        let l = self.box_length;
        let coords = self.coordinates(site);
        let mut acc = 0.0;
        for a in 0..self.dim {
            let c = center.get(a).copied().unwrap_or(0.0);
            let mut delta = (coords[a] - c).rem_euclid(l);
            if delta > 0.5 * l {
                delta -= l;
            }
            acc += delta * delta;
        }
        acc.sqrt()
    }

    pub(crate) fn check_same(&self, other: &LatticeGrid, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::Dimension(format!(
                "{what}: grid {other:?} does not match {self:?}"
            )));
        }
        Ok(())
    }

    pub(crate) fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.num_sites() {
            return Err(Error::Dimension(format!(
                "{what}: expected {} site values, got {len}",
                self.num_sites()
            )));
        }
        Ok(())
    }
}

/// Construct a validated grid; `h = L / M`, `M^d` sites.
pub fn build_grid(dim: usize, sites_per_axis: usize, box_length: f64) -> Result<LatticeGrid> {
    LatticeGrid::new(dim, sites_per_axis, box_length)
}

/// Single-particle wave function sampled on the lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveFunction {
    grid: LatticeGrid,
    amplitudes: Vec<Complex64>,
}

impl WaveFunction {
    pub fn new(grid: LatticeGrid, amplitudes: Vec<Complex64>) -> Result<Self> {
        grid.check_len(amplitudes.len(), "wave function")?;
        if amplitudes.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Domain("wave function has non-finite amplitudes".into()));
        }
        Ok(WaveFunction { grid, amplitudes })
    }

    pub fn from_fn(grid: LatticeGrid, mut f: impl FnMut(usize) -> Complex64) -> Result<Self> {
        let amplitudes = (0..grid.num_sites()).map(&mut f).collect();
        Self::new(grid, amplitudes)
    }

    /// Wave function with orthonormal-basis coefficients `c_x = h^{d/2} ψ(x)`.
    pub fn from_coefficients(grid: LatticeGrid, coefficients: &[Complex64]) -> Result<Self> {
        let scale = grid.cell_volume().sqrt().recip();
        Self::new(grid, coefficients.iter().map(|c| c * scale).collect())
    }

    /// Normalized Gaussian packet `exp(-|x - x0|^2 / (4 w^2) + i k x_0)`,
    /// distances taken by minimum image.
    pub fn gaussian_packet(
        grid: LatticeGrid,
        center: &[f64],
        width: f64,
        wavenumber: f64,
    ) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::Config(format!("packet width must be positive (got {width})")));
        }
        let psi = Self::from_fn(grid, |site| {
            let r = grid.periodic_distance(site, center);
            let x0 = grid.coordinates(site)[0];
            Complex64::from_polar((-r * r / (4.0 * width * width)).exp(), wavenumber * x0)
        })?;
        psi.normalized()
    }

    pub fn uniform(grid: LatticeGrid) -> Result<Self> {
        Self::from_fn(grid, |_| Complex64::new(1.0, 0.0))?.normalized()
    }

    /// Normalized plane wave `exp(2πi m x_0 / L)` along axis 0.
    pub fn plane_wave(grid: LatticeGrid, mode: i64) -> Result<Self> {
        let k = 2.0 * PI * mode as f64 / grid.box_length();
        Self::from_fn(grid, |site| {
            Complex64::from_polar(1.0, k * grid.coordinates(site)[0])
        })?
        .normalized()
    }

    pub fn grid(&self) -> &LatticeGrid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    /// Orthonormal-basis coefficients `h^{d/2} ψ(x)`.
    pub fn coefficients(&self) -> Vec<Complex64> {
        let scale = self.grid.cell_volume().sqrt();
        self.amplitudes.iter().map(|z| z * scale).collect()
    }

    /// `h^d Σ |ψ|^2`
    pub fn norm_sqr(&self) -> f64 {
        self.grid.cell_volume() * self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self, other⟩ = h^d Σ conj(self) other`
    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64> {
        self.grid.check_same(&other.grid, "inner product")?;
        let sum: Complex64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(sum * self.grid.cell_volume())
    }

    pub fn normalized(mut self) -> Result<Self> {
        let norm = self.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Domain("cannot normalize a zero wave function".into()));
        }
        for z in &mut self.amplitudes {
            *z /= norm;
        }
        Ok(self)
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn conj(&self) -> WaveFunction {
        WaveFunction {
            grid: self.grid,
            amplitudes: self.amplitudes.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn require_normalized(&self, tol: f64) -> Result<()> {
        let norm = self.norm();
        if (norm - 1.0).abs() > tol {
            return Err(Error::Precondition(format!(
                "wave function must be normalized (‖ψ‖ = {norm:.15})"
            )));
        }
        Ok(())
    }
}

/// Periodic `2d+1`-point Laplacian,
/// `(Δψ)(x) = Σ_a (ψ(x + h e_a) + ψ(x - h e_a) - 2ψ(x)) / h^2`.
pub fn discrete_laplacian_apply(grid: &LatticeGrid, psi: &WaveFunction) -> Result<WaveFunction> {
    grid.check_same(psi.grid(), "laplacian")?;
    let inv_h2 = grid.spacing().powi(-2);
    let amps = psi.amplitudes();
    let out = (0..grid.num_sites())
        .map(|x| {
            let mut acc = Complex64::new(0.0, 0.0);
            for axis in 0..grid.dim() {
                acc += amps[grid.shift(x, axis, 1)] + amps[grid.shift(x, axis, -1)]
                    - 2.0 * amps[x];
            }
            acc * inv_h2
        })
        .collect();
    WaveFunction::new(*grid, out)
}

/// Dense one-particle kinetic matrix `T = -Δ` in the orthonormal site basis,
/// row-major `sites × sites`. Coinciding neighbours (`M = 2`) accumulate.
pub fn kinetic_matrix(grid: &LatticeGrid) -> Vec<f64> {
    let n = grid.num_sites();
    let inv_h2 = grid.spacing().powi(-2);
    let mut t = vec![0.0; n * n];
    for x in 0..n {
        t[x * n + x] += 2.0 * grid.dim() as f64 * inv_h2;
        for axis in 0..grid.dim() {
            t[x * n + grid.shift(x, axis, 1)] -= inv_h2;
            t[x * n + grid.shift(x, axis, -1)] -= inv_h2;
        }
    }
    t
}

/// Eigenvalues of `-Δ` per Fourier index, in FFT output order:
/// `Σ_a (2 - 2 cos(2π k_a / M)) / h^2`.
pub fn lattice_dispersion(grid: &LatticeGrid) -> Vec<f64> {
    let m = grid.sites_per_axis() as f64;
    let inv_h2 = grid.spacing().powi(-2);
    (0..grid.num_sites())
        .map(|site| {
            let k = grid.multi_index(site);
            (0..grid.dim())
                .map(|a| (2.0 - 2.0 * (2.0 * PI * k[a] as f64 / m).cos()) * inv_h2)
                .sum()
        })
        .collect()
}

/// Multi-dimensional FFT on the lattice, one 1D transform per axis.
#[derive(Clone)]
pub struct LatticeFft {
    grid: LatticeGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for LatticeFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LatticeFft").field("grid", &self.grid).finish()
    }
}

impl LatticeFft {
    pub fn new(grid: &LatticeGrid) -> Self {
        let mut planner = FftPlanner::new();
        LatticeFft {
            grid: *grid,
            forward: planner.plan_fft_forward(grid.sites_per_axis()),
            inverse: planner.plan_fft_inverse(grid.sites_per_axis()),
        }
    }

    pub fn grid(&self) -> &LatticeGrid {
        &self.grid
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform including the `1 / M^d` normalization, in place.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = (self.grid.num_sites() as f64).recip();
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let m = self.grid.sites_per_axis();
        let total = self.grid.num_sites();
        debug_assert_eq!(data.len(), total);
        let mut line = vec![Complex64::new(0.0, 0.0); m];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for axis in 0..self.grid.dim() {
            let stride = m.pow(axis as u32);
            for start in 0..total {
                // first element of each line has coordinate 0 along `axis`
                if (start / stride) % m != 0 {
                    continue;
                }
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[start + j * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (j, value) in line.iter().enumerate() {
                    data[start + j * stride] = *value;
                }
            }
        }
    }

    /// Fourier transform of a real site function.
    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward(&mut data);
        data
    }

    /// Periodic convolution `h^d Σ_y v(x - y) ρ(y)` given the transform of `v`.
    pub fn convolve_with_spectrum(&self, v_hat: &[Complex64], rho: &[f64]) -> Vec<f64> {
        let mut data = self.forward_real(rho);
        for (z, w) in data.iter_mut().zip(v_hat) {
            *z *= w;
        }
        self.inverse(&mut data);
        let cell = self.grid.cell_volume();
        data.iter().map(|z| z.re * cell).collect()
    }
}

/// Periodic convolution `(v ⋆ ρ)(x) = h^d Σ_y v(x - y) ρ(y)`, via FFT.
pub fn convolve(grid: &LatticeGrid, v: &[f64], rho: &[f64]) -> Result<Vec<f64>> {
    grid.check_len(v.len(), "convolution kernel")?;
    grid.check_len(rho.len(), "convolution density")?;
    let fft = LatticeFft::new(grid);
    let v_hat = fft.forward_real(v);
    Ok(fft.convolve_with_spectrum(&v_hat, rho))
}
