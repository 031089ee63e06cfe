//! Sparse solvers: diagonally preconditioned CG for the penalty systems,
//! MINRES for the symmetric indefinite multiplier system, and a sparse direct
//! factorization for both.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use faer::dyn_stack::{MemBuffer, MemStack, StackReq};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::prelude::*;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, LdltRef, LltRef, SymmetricOrdering};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Par, Side};

use crate::error::{Error, Result};
use crate::linalg::{det, inverse, mat_vec, Mat3};
use crate::sparse::{dot, norm, CsrMatrix};
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Cg,
    Minres,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub kind: SolverKind,
    pub tol: f64,
    /// `None` selects `20 √n`, capped at 50000.
    pub maxit: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { kind: SolverKind::Cg, tol: 1e-10, maxit: None }
    }
}

pub fn default_maxit(n: usize) -> usize {
    ((20.0f64 * (n as f64).sqrt()).ceil() as usize).clamp(1, 50_000)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖b − K x‖ / ‖b‖` of the returned iterate.
    pub relative_residual: f64,
    pub converged: bool,
    /// Filled in by callers that own a clock.
    pub seconds: f64,
    /// Number of dofs pinned to zero because of vanishing diagonals.
    pub pinned: usize,
}

/// A symmetric linear map given by its action.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y)
    }
}

/// Symmetric positive definite approximation of `K⁻¹`.
pub trait Preconditioner {
    fn precondition(&self, r: &[f64], z: &mut [f64]);
}

/// A diagonal of inverses.
impl<D: AsRef<[f64]> + ?Sized> Preconditioner for D {
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), m) in z.iter_mut().zip(r).zip(self.as_ref()) {
            *zi = ri * m;
        }
    }
}

/// Inverts the 3×3 blocks coupling the components of interleaved vector
/// unknowns `3i..3i+3`, and a plain diagonal on the remaining rows.
#[derive(Debug, Clone)]
pub struct NodalBlockJacobi {
    blocks: Vec<Mat3>,
    tail: Vec<f64>,
}

impl NodalBlockJacobi {
    /// `tail` holds the inverse diagonal for rows `n_vec..`.
    pub fn new(k: &CsrMatrix, n_vec: usize, tail: Vec<f64>) -> Result<Self> {
        if n_vec % 3 != 0 || n_vec + tail.len() != k.nrows {
            return Err(Error::Solver(format!("block layout {} + {} does not match {} rows", n_vec, tail.len(), k.nrows)));
        }
        let mut blocks = Vec::with_capacity(n_vec / 3);
        for node in 0..n_vec / 3 {
            let mut m = [[0.0; 3]; 3];
            for (a, row) in m.iter_mut().enumerate() {
                for (b, v) in row.iter_mut().enumerate() {
                    *v = k.get(3 * node + a, 3 * node + b);
                }
            }
            let pd = m[0][0] > 0.0 && m[0][0] * m[1][1] - m[0][1] * m[1][0] > 0.0 && det(&m) > 0.0;
            let inv = inverse(&m).filter(|_| pd).ok_or_else(|| {
                Error::Assembly(format!("nodal block {node} is not positive definite: {m:?}"))
            })?;
            blocks.push(inv);
        }
        Ok(NodalBlockJacobi { blocks, tail })
    }
}

impl Preconditioner for NodalBlockJacobi {
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        for (node, m) in self.blocks.iter().enumerate() {
            let v = mat_vec(m, [r[3 * node], r[3 * node + 1], r[3 * node + 2]]);
            z[3 * node..3 * node + 3].copy_from_slice(&v);
        }
        let n_vec = 3 * self.blocks.len();
        self.tail[..].precondition(&r[n_vec..], &mut z[n_vec..]);
    }
}

fn true_residual<K: LinearOperator + ?Sized>(k: &K, b: &[f64], x: &[f64]) -> Vec<f64> {
    let mut kx = vec![0.0; b.len()];
    k.apply(x, &mut kx);
    b.iter().zip(&kx).map(|(bi, ki)| bi - ki).collect()
}

/// Inverse of a positive diagonal.
pub fn jacobi(diag: &[f64]) -> Result<Vec<f64>> {
    diag.iter()
        .enumerate()
        .map(|(i, &d)| {
            if d > 0.0 && d.is_finite() {
                Ok(1.0 / d)
            } else {
                Err(Error::Assembly(format!("nonpositive diagonal entry {d} at row {i}")))
            }
        })
        .collect()
}

/// Preconditioned conjugate gradients started from zero. `monitor` sees
/// every iterate.
pub fn cg_monitored<K, P, F>(k: &K, b: &[f64], minv: &P, tol: f64, maxit: usize, mut monitor: F) -> Result<(Vec<f64>, SolveReport)>
where
    K: LinearOperator + ?Sized,
    P: Preconditioner + ?Sized,
    F: FnMut(usize, &[f64]),
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, SolveReport { iterations: 0, relative_residual: 0.0, converged: true, seconds: 0.0, pinned: 0 }));
    }
    let mut it = 0;
    // restart from the true residual if the recursive one drifted
    loop {
        let mut r = true_residual(k, b, &x);
        let rel = norm(&r) / bnorm;
        if rel <= tol {
            return Ok((x, SolveReport { iterations: it, relative_residual: rel, converged: true, seconds: 0.0, pinned: 0 }));
        }
        if it >= maxit {
            return Err(Error::NotConverged { iterations: it, residual: rel });
        }
        let mut z = vec![0.0; n];
        minv.precondition(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut kp = vec![0.0; n];
        while it < maxit {
            k.apply(&p, &mut kp);
            let pkp = dot(&p, &kp);
            if !(pkp > 0.0) {
                return Err(Error::Solver(format!("negative curvature pᵀKp = {pkp} at iteration {it}: matrix is not positive definite")));
            }
            let alpha = rz / pkp;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * kp[i];
            }
            it += 1;
            monitor(it, &x);
            if norm(&r) / bnorm <= 0.5 * tol {
                break;
            }
            minv.precondition(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
}

pub fn cg<K: LinearOperator + ?Sized, P: Preconditioner + ?Sized>(k: &K, b: &[f64], minv: &P, tol: f64, maxit: usize) -> Result<(Vec<f64>, SolveReport)> {
    cg_monitored(k, b, minv, tol, maxit, |_, _| {})
}

/// Preconditioned MINRES (Paige–Saunders) with an SPD diagonal
/// preconditioner given by its inverse, started from zero.
pub fn minres<K: LinearOperator + ?Sized, P: Preconditioner + ?Sized>(k: &K, b: &[f64], minv: &P, tol: f64, maxit: usize) -> Result<(Vec<f64>, SolveReport)> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, SolveReport { iterations: 0, relative_residual: 0.0, converged: true, seconds: 0.0, pinned: 0 }));
    }
    let mut it = 0;
    loop {
        let r0 = true_residual(k, b, &x);
        let rel = norm(&r0) / bnorm;
        if rel <= tol {
            return Ok((x, SolveReport { iterations: it, relative_residual: rel, converged: true, seconds: 0.0, pinned: 0 }));
        }
        if it >= maxit {
            return Err(Error::NotConverged { iterations: it, residual: rel });
        }
        let before = it;
        let dx = minres_cycle(k, &r0, minv, 0.5 * tol * bnorm / norm(&r0), maxit - it, &mut it);
        for i in 0..n {
            x[i] += dx[i];
        }
        if it == before {
            return Err(Error::Solver("MINRES made no progress".into()));
        }
    }
}

fn minres_cycle<K: LinearOperator + ?Sized, P: Preconditioner + ?Sized>(k: &K, b: &[f64], minv: &P, tol: f64, maxit: usize, it: &mut usize) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r1 = b.to_vec();
    let mut y = vec![0.0; n];
    minv.precondition(&r1, &mut y);
    let beta1 = dot(&r1, &y).sqrt();
    if beta1 == 0.0 {
        return x;
    }
    let mut r2 = r1.clone();
    let (mut oldb, mut beta, mut dbar, mut epsln, mut phibar) = (0.0, beta1, 0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut v = vec![0.0; n];
    for itn in 1..=maxit {
        let s = 1.0 / beta;
        for i in 0..n {
            v[i] = s * y[i];
        }
        k.apply(&v, &mut y);
        if itn >= 2 {
            let f = beta / oldb;
            for i in 0..n {
                y[i] -= f * r1[i];
            }
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        for i in 0..n {
            y[i] -= f * r2[i];
        }
        core::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        minv.precondition(&r2, &mut y);
        oldb = beta;
        beta = dot(&r2, &y).max(0.0).sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let denom = 1.0 / gamma;
        for i in 0..n {
            let w1 = w2[i];
            w2[i] = w[i];
            w[i] = (v[i] - oldeps * w1 - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }
        *it += 1;
        if phibar / beta1 <= tol || beta == 0.0 {
            break;
        }
    }
    x
}

/// Block-diagonal preconditioner of the saddle-point system: `diag(A)⁻¹` on
/// the velocity block and the inverse of the multiplier surface mass plus
/// stabilization diagonals on the multiplier block. Multiplier dofs whose
/// diagonal falls below `1e-14` of the largest one are returned for pinning.
pub fn block_preconditioner(a_diag: &[f64], mass_diag: &[f64], stab_diag: &[f64]) -> Result<(Vec<f64>, Vec<usize>)> {
    let mut inv = jacobi(a_diag)?;
    let md: Vec<f64> = mass_diag.iter().zip(stab_diag).map(|(a, b)| a + b).collect();
    let max = md.iter().fold(0.0f64, |m, &v| m.max(v));
    let mut pinned = Vec::new();
    for (i, &d) in md.iter().enumerate() {
        if !(d >= 1e-14 * max) || d == 0.0 {
            pinned.push(a_diag.len() + i);
            inv.push(1.0);
        } else {
            inv.push(1.0 / d);
        }
    }
    Ok((inv, pinned))
}

/// Removes the couplings of the given dofs so that they stay zero.
pub fn pin_dofs(k: &mut CsrMatrix, b: &mut [f64], dofs: &[usize]) {
    if dofs.is_empty() {
        return;
    }
    let mut mark = vec![false; k.nrows];
    for &d in dofs {
        mark[d] = true;
        b[d] = 0.0;
    }
    for i in 0..k.nrows {
        for p in k.row_ptr[i]..k.row_ptr[i + 1] {
            if mark[i] || mark[k.col_idx[p] as usize] {
                k.values[p] = 0.0;
            }
        }
    }
}

/// Structure exploited by [`direct`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factorization {
    /// Symmetric positive definite: sparse Cholesky.
    Cholesky,
    /// `[[A, Bᵀ], [B, 0]]` with `A` of order `n_u`: sparse LDLᵀ with pivots
    /// regularized towards the signs `(+, −)`, corrected by refinement.
    Saddle { n_u: usize },
}

/// Sparse direct solve with a fill-reducing ordering, followed by iterative
/// refinement against `k`.
pub fn direct(k: &CsrMatrix, b: &[f64], tol: f64, structure: Factorization) -> Result<(Vec<f64>, SolveReport)> {
    let n = k.nrows;
    if b.len() != n || k.ncols != n {
        return Err(Error::Solver(format!("dimension mismatch: {}x{} matrix, {} rhs", n, k.ncols, b.len())));
    }
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], SolveReport { iterations: 0, relative_residual: 0.0, converged: true, seconds: 0.0, pinned: 0 }));
    }
    // upper triangle by columns; empty rows are pinned dofs
    let mut trip = Vec::with_capacity(k.nnz() / 2 + n);
    for i in 0..n {
        let mut empty = true;
        let mut diag = false;
        for (j, v) in k.row(i) {
            empty &= v == 0.0;
            if j >= i {
                diag |= j == i;
                trip.push(Triplet::new(i, j, v));
            }
        }
        if empty {
            trip.push(Triplet::new(i, i, 1.0));
        } else if !diag {
            trip.push(Triplet::new(i, i, 0.0));
        }
    }
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| Error::Solver(format!("sparse structure: {e:?}")))?;
    drop(trip);
    let symbolic = factorize_symbolic_cholesky(a.symbolic(), Side::Upper, SymmetricOrdering::Amd, Default::default())
        .map_err(|e| Error::Solver(format!("symbolic factorization failed: {e:?}")))?;
    let mut values = Vec::new();
    values
        .try_reserve_exact(symbolic.len_val())
        .map_err(|_| Error::Solver(format!("factor with {} entries does not fit in memory", symbolic.len_val())))?;
    values.resize(symbolic.len_val(), 0.0);
    let fail = |e: &dyn core::fmt::Debug| Error::Solver(format!("numeric factorization failed: {e:?}"));
    let mut mem = MemBuffer::try_new(StackReq::any_of(&[
        symbolic.factorize_numeric_llt_scratch::<f64>(Par::Seq, Default::default()),
        symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default()),
        symbolic.solve_in_place_scratch::<f64>(1, Par::Seq),
    ]))
    .map_err(|_| Error::Solver("factorization workspace does not fit in memory".into()))?;
    let stack = MemStack::new(&mut mem);
    let signs: Vec<i8>;
    match structure {
        Factorization::Cholesky => {
            symbolic
                .factorize_numeric_llt(&mut values, a.rb(), Side::Upper, Default::default(), Par::Seq, stack, Default::default())
                .map_err(|e| fail(&e))?;
        }
        Factorization::Saddle { n_u } => {
            signs = (0..n).map(|i| if i < n_u { 1 } else { -1 }).collect();
            let eps = 1e-13 * k.max_abs();
            let reg = LdltRegularization {
                dynamic_regularization_signs: Some(&signs),
                dynamic_regularization_delta: eps.sqrt() * k.max_abs().sqrt(),
                dynamic_regularization_epsilon: eps,
            };
            symbolic
                .factorize_numeric_ldlt(&mut values, a.rb(), Side::Upper, reg, Par::Seq, stack, Default::default())
                .map_err(|e| fail(&e))?;
        }
    }
    drop(a);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut rel = 1.0;
    let mut steps = 0;
    while steps < 10 {
        let mut d = Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
        let stack = MemStack::new(&mut mem);
        match structure {
            Factorization::Cholesky => LltRef::new(&symbolic, &values).solve_in_place_with_conj(Conj::No, d.as_mut(), Par::Seq, stack),
            Factorization::Saddle { .. } => LdltRef::new(&symbolic, &values).solve_in_place_with_conj(Conj::No, d.as_mut(), Par::Seq, stack),
        }
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += d[(i, 0)];
        }
        steps += 1;
        r = true_residual(k, b, &x);
        let next = norm(&r) / bnorm;
        if !next.is_finite() {
            return Err(Error::Solver("direct solve produced non-finite values".into()));
        }
        let stalled = next > 0.5 * rel;
        rel = next;
        if rel <= 0.01 * tol || stalled {
            break;
        }
    }
    if rel > tol {
        return Err(Error::NotConverged { iterations: steps, residual: rel });
    }
    Ok((x, SolveReport { iterations: steps, relative_residual: rel, converged: true, seconds: 0.0, pinned: 0 }))
}
