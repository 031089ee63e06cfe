//! Compressed sparse row matrices with a fixed sparsity pattern.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the given rows of sorted, deduplicated column indices.
    pub fn from_pattern(ncols: usize, rows: &[Vec<u32>]) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(|r| r.len()).sum();
        let mut col_idx = Vec::with_capacity(nnz);
        for r in rows {
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { nrows: rows.len(), ncols, row_ptr, col_idx, values: vec![0.0; nnz] }
    }

    /// Zero matrix whose pattern is a scalar adjacency expanded into dense
    /// `rc × cc` blocks for interleaved vector unknowns.
    pub fn from_block_pattern(scalar: &[Vec<u32>], ncols_scalar: usize, rc: usize, cc: usize) -> Self {
        let nnz: usize = scalar.iter().map(|r| r.len()).sum::<usize>() * rc * cc;
        let mut row_ptr = Vec::with_capacity(scalar.len() * rc + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for r in scalar {
            for _ in 0..rc {
                for &j in r {
                    for d in 0..cc {
                        col_idx.push(j * cc as u32 + d as u32);
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        CsrMatrix { nrows: scalar.len() * rc, ncols: ncols_scalar * cc, row_ptr, col_idx, values: vec![0.0; nnz] }
    }

    pub fn identity(n: usize) -> Self {
        let rows: Vec<Vec<u32>> = (0..n).map(|i| vec![i as u32]).collect();
        let mut m = Self::from_pattern(n, &rows);
        m.values.iter_mut().for_each(|v| *v = 1.0);
        m
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); nrows];
        for &(i, j, _) in triplets {
            rows[i].push(j as u32);
        }
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
        }
        let mut m = Self::from_pattern(ncols, &rows);
        for &(i, j, v) in triplets {
            m.add(i, j, v).expect("entry is in the pattern");
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Position of entry `(i, j)` in `values`.
    #[inline]
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[a..b].binary_search(&(j as u32)).ok().map(|p| a + p)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        match self.position(i, j) {
            Some(p) => {
                self.values[p] += v;
                Ok(())
            }
            None => Err(Error::Assembly(format!("entry ({i}, {j}) is not in the sparsity pattern"))),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[a..b].iter().zip(&self.values[a..b]).map(|(&j, &v)| (j as usize, v))
    }

    /// `y = A x`
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut s = 0.0;
            for p in a..b {
                s += self.values[p] * x[self.col_idx[p] as usize];
            }
            *yi = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.col_idx {
            counts[j as usize + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0u32; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                let p = next[j];
                col_idx[p] = i as u32;
                values[p] = v;
                next[j] += 1;
            }
        }
        CsrMatrix { nrows: self.ncols, ncols: self.nrows, row_ptr, col_idx, values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A_ij − A_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                d = d.max((v - self.get(j, i)).abs());
            }
        }
        d
    }

    /// `xᵀ A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.mul(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    /// `self + s · other` for matrices with identical patterns.
    pub fn add_scaled(&mut self, s: f64, other: &CsrMatrix) -> Result<()> {
        if self.row_ptr != other.row_ptr || self.col_idx != other.col_idx {
            return Err(Error::Assembly("sparsity patterns differ".into()));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
        Ok(())
    }

    /// Symmetric saddle-point matrix `[[A, Bᵀ], [B, 0]]`.
    pub fn saddle(a: &CsrMatrix, b: &CsrMatrix) -> Result<CsrMatrix> {
        if a.nrows != a.ncols || b.ncols != a.ncols {
            return Err(Error::Assembly(format!(
                "incompatible saddle blocks: A is {}x{}, B is {}x{}",
                a.nrows, a.ncols, b.nrows, b.ncols
            )));
        }
        let n = a.nrows;
        let bt = b.transpose();
        let mut row_ptr = Vec::with_capacity(n + b.nrows + 1);
        let mut col_idx = Vec::with_capacity(a.nnz() + 2 * b.nnz());
        let mut values = Vec::with_capacity(a.nnz() + 2 * b.nnz());
        row_ptr.push(0);
        for i in 0..n {
            for (j, v) in a.row(i) {
                col_idx.push(j as u32);
                values.push(v);
            }
            for (j, v) in bt.row(i) {
                col_idx.push((n + j) as u32);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        for i in 0..b.nrows {
            for (j, v) in b.row(i) {
                col_idx.push(j as u32);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix { nrows: n + b.nrows, ncols: n + b.nrows, row_ptr, col_idx, values })
    }

    /// Sub-block of rows `r0..r1` and columns `c0..c1`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> CsrMatrix {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in r0..r1 {
            for (j, v) in self.row(i) {
                if j >= c0 && j < c1 {
                    col_idx.push((j - c0) as u32);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { nrows: r1 - r0, ncols: c1 - c0, row_ptr, col_idx, values }
    }
}

/// Expands a scalar adjacency into the pattern of an interleaved
/// `components`-vector space (dense `components × components` blocks).
pub fn expand_pattern(scalar: &[Vec<u32>], row_components: usize, col_components: usize) -> Vec<Vec<u32>> {
    let mut rows = Vec::with_capacity(scalar.len() * row_components);
    for r in scalar {
        let mut expanded = Vec::with_capacity(r.len() * col_components);
        for &j in r {
            for d in 0..col_components {
                expanded.push(j * col_components as u32 + d as u32);
            }
        }
        for _ in 0..row_components {
            rows.push(expanded.clone());
        }
    }
    rows
}

/// Rows of dofs of one space coupled through shared elements to dofs of
/// another space on the same element list.
pub fn coupling_pattern<'a, R, C>(n_rows: usize, n_elements: usize, row_dofs: R, col_dofs: C) -> Vec<Vec<u32>>
where
    R: Fn(usize) -> &'a [u32],
    C: Fn(usize) -> &'a [u32],
{
    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n_rows];
    for e in 0..n_elements {
        let cols = col_dofs(e);
        for &i in row_dofs(e) {
            rows[i as usize].extend_from_slice(cols);
        }
    }
    for r in rows.iter_mut() {
        r.sort_unstable();
        r.dedup();
    }
    rows
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
