//! Occupation-number basis of the symmetric N-boson sector.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::LatticeGrid;

pub const DEFAULT_DIMENSION_CAP: usize = 200_000;

/// Number of occupation vectors with `sites` entries summing to `n`,
/// `binomial(n + sites - 1, n)`, saturating at `u128::MAX`.
pub fn sector_dimension(n: usize, sites: usize) -> u128 {
    if sites == 0 {
        return u128::from(n == 0);
    }
    // C(n + s - 1, n) = Π_{i=1..n} (s - 1 + i) / i, exact at each step
    let mut acc: u128 = 1;
    for i in 1..=n as u128 {
        acc = match acc.checked_mul(sites as u128 - 1 + i) {
            Some(x) => x / i,
            None => return u128::MAX,
        };
    }
    acc
}

/// Occupation vectors in descending lexicographic order, so the fully
/// condensed state `(N, 0, .., 0)` comes first.
#[derive(Clone, Debug, PartialEq)]
pub struct FockBasis {
    particles: usize,
    sites: usize,
    occupations: Vec<u16>,
    // counts[r * (sites + 1) + s]: arrangements of r bosons on s sites
    counts: Vec<usize>,
}

/// Enumerate the `N`-boson sector on `grid` with the default dimension cap.
pub fn build_fock_basis(particles: usize, grid: &LatticeGrid) -> Result<Arc<FockBasis>> {
    build_fock_basis_with_cap(particles, grid, DEFAULT_DIMENSION_CAP)
}

pub fn build_fock_basis_with_cap(
    particles: usize,
    grid: &LatticeGrid,
    cap: usize,
) -> Result<Arc<FockBasis>> {
    if particles == 0 {
        return Err(Error::Domain("particle number N must be ≥ 1".into()));
    }
    let dim = sector_dimension(particles, grid.num_sites());
    if dim > cap as u128 {
        return Err(Error::Resource(format!(
            "Fock dimension {} for (N = {particles}, M = {}) exceeds the cap {cap}",
            if dim == u128::MAX { "> 2^128".to_string() } else { dim.to_string() },
            grid.sites_per_axis()
        )));
    }
    Ok(Arc::new(FockBasis::enumerate(particles, grid.num_sites())))
}

impl FockBasis {
    /// Enumerate without a cap; `particles` may be zero (the vacuum).
    pub(crate) fn enumerate(particles: usize, sites: usize) -> Self {
        assert!(particles <= u16::MAX as usize);
        let stride = sites + 1;
        let mut counts = vec![0usize; (particles + 1) * stride];
        for r in 0..=particles {
            for s in 0..=sites {
                counts[r * stride + s] = sector_dimension(r, s) as usize;
            }
        }
        let dim = counts[particles * stride + sites];
        let mut occupations = Vec::with_capacity(dim * sites);
        let mut current = vec![0u16; sites];
        fn fill(site: usize, remaining: usize, current: &mut [u16], out: &mut Vec<u16>) {
            if site + 1 == current.len() {
                current[site] = remaining as u16;
                out.extend_from_slice(current);
                return;
            }
            for k in (0..=remaining).rev() {
                current[site] = k as u16;
                fill(site + 1, remaining - k, current, out);
            }
        }
        fill(0, particles, &mut current, &mut occupations);
        debug_assert_eq!(occupations.len(), dim * sites);
        FockBasis {
            particles,
            sites,
            occupations,
            counts,
        }
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn len(&self) -> usize {
        self.occupations.len() / self.sites
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn occupation(&self, index: usize) -> &[u16] {
        &self.occupations[index * self.sites..(index + 1) * self.sites]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u16]> {
        self.occupations.chunks_exact(self.sites)
    }

    fn count(&self, r: usize, s: usize) -> usize {
        self.counts[r * (self.sites + 1) + s]
    }

    /// Position of an occupation vector, by combinatorial ranking.
    pub fn index_of(&self, occupation: &[u16]) -> Option<usize> {
        if occupation.len() != self.sites
            || occupation.iter().map(|&n| n as usize).sum::<usize>() != self.particles
        {
            return None;
        }
        Some(self.rank_unchecked(occupation))
    }

    pub(crate) fn rank_unchecked(&self, occupation: &[u16]) -> usize {
        let mut index = 0;
        let mut remaining = self.particles;
        for (site, &n) in occupation.iter().enumerate() {
            let n = n as usize;
            let rest = self.sites - site - 1;
            for k in n + 1..=remaining {
                index += self.count(remaining - k, rest);
            }
            remaining -= n;
        }
        index
    }

    pub(crate) fn check_matches(&self, particles: usize, grid: &LatticeGrid) -> Result<()> {
        if self.particles != particles || self.sites != grid.num_sites() {
            return Err(Error::Dimension(format!(
                "Fock basis for (N = {}, {} sites) does not match (N = {particles}, {} sites)",
                self.particles,
                self.sites,
                grid.num_sites()
            )));
        }
        Ok(())
    }
}
