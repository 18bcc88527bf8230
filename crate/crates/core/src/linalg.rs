//! Linear solvers for the SPD subdomain matrices, plus small dense helpers.
//!
//! Backends are registered by name: `cholesky` (sparse direct, fill-reducing
//! ordering) and `cg` (Jacobi-preconditioned conjugate gradients).

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::assembly::SparseMatrix;
use crate::error::{Error, Result};
use crate::registry::Registry;

/// A factorized (or otherwise prepared) SPD operator.
pub trait SpdFactor: Send + Sync {
    fn dim(&self) -> usize;

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>>;

    /// Solves for every column of `rhs`.
    fn solve_many(&self, rhs: &Mat<f64>) -> Result<Mat<f64>> {
        let mut out = Mat::zeros(rhs.nrows(), rhs.ncols());
        for j in 0..rhs.ncols() {
            let col: Vec<f64> = (0..rhs.nrows()).map(|i| rhs[(i, j)]).collect();
            for (i, v) in self.solve(&col)?.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }
}

pub trait SpdBackend: Send + Sync {
    fn name(&self) -> &'static str;

    fn factorize(&self, matrix: &SparseMatrix) -> Result<Box<dyn SpdFactor>>;
}

pub fn to_faer(matrix: &SparseMatrix) -> Result<SparseColMat<usize, f64>> {
    let triplets: Vec<Triplet<usize, usize, f64>> = matrix
        .triplets()
        .into_iter()
        .map(|(i, j, v)| Triplet::new(i, j, v))
        .collect();
    SparseColMat::try_new_from_triplets(matrix.nrows, matrix.ncols, &triplets)
        .map_err(|e| Error::Factorization(format!("{e:?}")))
}

pub struct CholeskyBackend;

struct CholeskyFactor {
    dim: usize,
    llt: Llt<usize, f64>,
}

impl SpdBackend for CholeskyBackend {
    fn name(&self) -> &'static str {
        "cholesky"
    }

    fn factorize(&self, matrix: &SparseMatrix) -> Result<Box<dyn SpdFactor>> {
        let a = to_faer(matrix)?;
        let symbolic = SymbolicLlt::try_new(a.symbolic(), Side::Lower)
            .map_err(|e| Error::Factorization(format!("symbolic analysis: {e:?}")))?;
        let llt = Llt::try_new_with_symbolic(symbolic, a.as_ref(), Side::Lower)
            .map_err(|e| Error::Factorization(format!("matrix is not positive definite: {e:?}")))?;
        Ok(Box::new(CholeskyFactor { dim: matrix.nrows, llt }))
    }
}

impl SpdFactor for CholeskyFactor {
    fn dim(&self) -> usize {
        self.dim
    }

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        let x = self.llt.solve(&b);
        Ok((0..rhs.len()).map(|i| x[(i, 0)]).collect())
    }

    fn solve_many(&self, rhs: &Mat<f64>) -> Result<Mat<f64>> {
        Ok(self.llt.solve(rhs))
    }
}

pub struct ConjugateGradientBackend {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for ConjugateGradientBackend {
    fn default() -> Self {
        ConjugateGradientBackend {
            rel_tol: 1e-12,
            max_iter: 100_000,
        }
    }
}

struct CgOperator {
    matrix: SparseMatrix,
    inv_diag: Vec<f64>,
    rel_tol: f64,
    max_iter: usize,
}

impl SpdBackend for ConjugateGradientBackend {
    fn name(&self) -> &'static str {
        "cg"
    }

    fn factorize(&self, matrix: &SparseMatrix) -> Result<Box<dyn SpdFactor>> {
        let diag = matrix.diagonal();
        if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
            return Err(Error::Factorization(format!("non-positive diagonal entry at row {i}")));
        }
        Ok(Box::new(CgOperator {
            matrix: matrix.clone(),
            inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
            rel_tol: self.rel_tol,
            max_iter: self.max_iter,
        }))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl SpdFactor for CgOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows
    }

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = rhs.len();
        let mut x = vec![0.0; n];
        let b_norm = dot(rhs, rhs).sqrt();
        if b_norm == 0.0 {
            return Ok(x);
        }
        let mut r = rhs.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&self.inv_diag).map(|(a, d)| a * d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        for _ in 0..self.max_iter {
            let ap = self.matrix.mul_vec(&p);
            let step = rz / dot(&p, &ap);
            for i in 0..n {
                x[i] += step * p[i];
                r[i] -= step * ap[i];
            }
            if dot(&r, &r).sqrt() <= self.rel_tol * b_norm {
                return Ok(x);
            }
            for i in 0..n {
                z[i] = r[i] * self.inv_diag[i];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::Factorization(format!(
            "conjugate gradients did not reach {:.1e} in {} iterations",
            self.rel_tol, self.max_iter
        )))
    }
}

pub fn spd_backends() -> Registry<dyn SpdBackend> {
    let mut r: Registry<dyn SpdBackend> = Registry::new("linear solver backend");
    r.register("cholesky", Arc::new(CholeskyBackend));
    r.register("cg", Arc::new(ConjugateGradientBackend::default()));
    r
}

/// Extreme eigenvalues of a symmetric matrix and their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conditioning {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub condition: f64,
}

pub fn symmetric_conditioning(m: &Mat<f64>) -> Result<Conditioning> {
    let eig = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Factorization(format!("eigenvalue computation failed: {e:?}")))?;
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // ratio of extreme magnitudes; round-off can push the smallest eigenvalue
    // of a singular semidefinite matrix slightly below zero
    let smallest = eig.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let largest = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let condition = if smallest > 0.0 { largest / smallest } else { f64::INFINITY };
    Ok(Conditioning {
        min_eigenvalue: min,
        max_eigenvalue: max,
        condition,
    })
}

pub fn mat_vec(m: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum()).collect()
}

pub fn mat_t_vec(m: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    (0..m.ncols()).map(|j| (0..m.nrows()).map(|i| m[(i, j)] * x[i]).sum()).collect()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn inner(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b)
}
