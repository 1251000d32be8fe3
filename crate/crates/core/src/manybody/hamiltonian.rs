//! Second-quantized lattice Hamiltonian
//! `H = Σ_{x,y} T_{xy} a†_x a_y + (1/2N) Σ_{x,y} v(x - y) a†_x a†_y a_y a_x`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::basis::FockBasis;
use crate::error::{Error, Result};
use crate::lattice::{kinetic_matrix, LatticeGrid};
use crate::random_field::RandomField;

/// Real symmetric matrix over a Fock basis in compressed-row form.
#[derive(Clone, Debug)]
pub struct SparseHamiltonian {
    basis: Arc<FockBasis>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl SparseHamiltonian {
    fn from_rows(basis: Arc<FockBasis>, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                values.push(v);
            }
            row_ptr.push(cols.len());
        }
        SparseHamiltonian {
            basis,
            row_ptr,
            cols,
            values,
        }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Nonzero entries as `(row, column, value)`, row-major.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim()).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.values[k]))
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.cols[range.clone()].binary_search(&col) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// `H + c·I`.
    pub fn shifted(&self, c: f64) -> SparseHamiltonian {
        let rows = (0..self.dim())
            .map(|r| {
                let mut row: Vec<(usize, f64)> = (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|k| (self.cols[k], self.values[k]))
                    .collect();
                match row.binary_search_by_key(&r, |e| e.0) {
                    Ok(k) => row[k].1 += c,
                    Err(k) => row.insert(k, (r, c)),
                }
                row
            })
            .collect();
        SparseHamiltonian::from_rows(self.basis.clone(), rows)
    }

    pub fn is_symmetric(&self) -> bool {
        self.entries().all(|(r, c, v)| self.get(c, r) == v)
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n * n];
        for (r, c, v) in self.entries() {
            out[r * n + c] = v;
        }
        out
    }

    /// `out = H x`. Rows are independent and each row sums in a fixed order,
    /// so the result does not depend on the thread count.
    pub fn apply_into(&self, x: &[Complex64], out: &mut [Complex64]) {
        out.par_iter_mut()
            .with_min_len(256)
            .enumerate()
            .for_each(|(r, o)| {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += x[self.cols[k]] * self.values[k];
                }
                *o = acc;
            });
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.apply_into(x, &mut out);
        out
    }
}

/// Assemble the N-boson Hamiltonian with `1/N` pair coupling. Same-site
/// pairs contribute `v(0) n_x (n_x - 1) / 2N`, the exact lattice image of
/// the first-quantized pair sum.
pub fn assemble_hamiltonian(
    grid: &LatticeGrid,
    v: &RandomField,
    particles: usize,
    basis: &Arc<FockBasis>,
) -> Result<SparseHamiltonian> {
    grid.check_same(v.grid(), "hamiltonian interaction")?;
    basis.check_matches(particles, grid)?;
    if particles == 0 {
        return Err(Error::Domain("particle number N must be ≥ 1".into()));
    }
    let sites = grid.num_sites();
    let t = kinetic_matrix(grid);
    let hops: Vec<(usize, usize, f64)> = (0..sites)
        .flat_map(|x| (0..sites).map(move |y| (x, y)))
        .filter(|&(x, y)| x != y && t[x * sites + y] != 0.0)
        .map(|(x, y)| (x, y, t[x * sites + y]))
        .collect();
    let pair: Vec<f64> = (0..sites * sites)
        .map(|k| v.values()[grid.difference(k / sites, k % sites)])
        .collect();
    let coupling = 0.5 / particles as f64;

    let rows: Vec<Vec<(usize, f64)>> = (0..basis.len())
        .into_par_iter()
        .map(|i| {
            let occ = basis.occupation(i);
            let occupied: Vec<usize> = (0..sites).filter(|&x| occ[x] > 0).collect();
            let mut kinetic = 0.0;
            let mut interaction = 0.0;
            for &x in &occupied {
                let nx = occ[x] as f64;
                kinetic += t[x * sites + x] * nx;
                for &y in &occupied {
                    let ny = occ[y] as f64;
                    interaction += if x == y {
                        pair[x * sites + x] * nx * (nx - 1.0)
                    } else {
                        pair[x * sites + y] * nx * ny
                    };
                }
            }
            let mut row = vec![(i, kinetic + coupling * interaction)];
            let mut target = occ.to_vec();
            for &(x, y, txy) in &hops {
                if occ[y] == 0 {
                    continue;
                }
                // a†_x a_y moves one boson from y to x
                let amp = txy * (occ[y] as f64 * (occ[x] as f64 + 1.0)).sqrt();
                target[y] -= 1;
                target[x] += 1;
                row.push((basis.rank_unchecked(&target), amp));
                target[y] += 1;
                target[x] -= 1;
            }
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (c, val) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += val,
                    _ => merged.push((c, val)),
                }
            }
            merged
        })
        .collect();

    Ok(SparseHamiltonian::from_rows(basis.clone(), rows))
}
