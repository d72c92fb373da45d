//! Linear algebra helpers: sparse LU with refinement, Lanczos, dense ranks.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sparse::CsrMatrix;
use crate::{Error, Result};

/// Sparse LU factorization with partial pivoting.
pub struct SparseLu {
    matrix: CsrMatrix,
    lu: Lu<usize, f64>,
}

impl SparseLu {
    pub fn new(matrix: CsrMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidArgument("LU needs a square matrix".into()));
        }
        let lu = matrix
            .to_faer()?
            .sp_lu()
            .map_err(|e| Error::Solver(format!("sparse LU failed: {e:?}")))?;
        Ok(SparseLu { matrix, lu })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn raw_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        let x = self.lu.solve(b);
        (0..rhs.len()).map(|i| x[(i, 0)]).collect()
    }

    /// Solve with up to `refine` steps of iterative refinement. Returns the
    /// solution and the final relative residual in the max norm.
    pub fn solve_refined(&self, rhs: &[f64], refine: usize) -> (Vec<f64>, f64) {
        let mut x = self.raw_solve(rhs);
        let scale = max_norm(rhs).max(f64::MIN_POSITIVE);
        let mut res = residual(&self.matrix, &x, rhs);
        let mut rel = max_norm(&res) / scale;
        for _ in 0..refine {
            if !(rel > 1e-15) {
                break;
            }
            let dx = self.raw_solve(&res);
            let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
            let cres = residual(&self.matrix, &cand, rhs);
            let crel = max_norm(&cres) / scale;
            if !(crel < rel) {
                break;
            }
            x = cand;
            res = cres;
            rel = crel;
        }
        (x, rel)
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.solve_refined(rhs, 2).0
    }
}

/// `b - A x`.
pub fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    a.matvec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect()
}

pub fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosResult {
    pub largest: f64,
    /// Residual norm `|beta_m s_m|` of the Ritz pair.
    pub residual: f64,
    pub iterations: usize,
}

/// Largest eigenvalue of a symmetric positive semidefinite operator by
/// Lanczos with full reorthogonalization. When `deflate` is given the
/// iteration stays in its orthogonal complement.
pub fn lanczos_largest(
    n: usize,
    apply: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    deflate: Option<&[f64]>,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Result<LanczosResult> {
    if n == 0 {
        return Err(Error::InvalidArgument("empty operator".into()));
    }
    let dhat: Option<Vec<f64>> = deflate.map(|d| {
        let s = norm2(d);
        d.iter().map(|x| x / s).collect()
    });
    let project = |v: &mut Vec<f64>| {
        if let Some(d) = &dhat {
            let c = dot(v, d);
            for (x, y) in v.iter_mut().zip(d) {
                *x -= c * y;
            }
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    project(&mut q);
    let s = norm2(&q);
    q.iter_mut().for_each(|x| *x /= s);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let (mut alpha, mut beta): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    let dim_cap = if dhat.is_some() { n - 1 } else { n };
    let mut last = LanczosResult {
        largest: 0.0,
        residual: f64::INFINITY,
        iterations: 0,
    };
    for it in 0..max_iter.min(dim_cap) {
        let mut w = apply(&basis[it]);
        project(&mut w);
        let a = dot(&w, &basis[it]);
        alpha.push(a);
        // full reorthogonalization, twice
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                for (x, y) in w.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let bnorm = norm2(&w);
        let m = alpha.len();
        let t = Mat::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i.abs_diff(j) == 1 {
                beta[i.min(j)]
            } else {
                0.0
            }
        });
        let eig = t
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Solver(format!("tridiagonal eigensolve failed: {e:?}")))?;
        let s = eig.S();
        let u = eig.U();
        let mut imax = 0;
        for i in 0..m {
            if s[i] > s[imax] {
                imax = i;
            }
        }
        let theta = s[imax];
        let res = (bnorm * u[(m - 1, imax)]).abs();
        last = LanczosResult {
            largest: theta,
            residual: res,
            iterations: it + 1,
        };
        if res <= tol * theta.abs().max(f64::MIN_POSITIVE) || bnorm <= 1e-14 * theta.abs() {
            return Ok(last);
        }
        beta.push(bnorm);
        basis.push(w.iter().map(|x| x / bnorm).collect());
    }
    if last.iterations == dim_cap {
        return Ok(last);
    }
    Err(Error::Solver(format!(
        "Lanczos did not converge in {} iterations (residual {:.3e}, estimate {:.6e})",
        last.iterations, last.residual, last.largest
    )))
}

/// Singular values of a dense matrix in nonincreasing order.
pub fn singular_values(m: &Mat<f64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    let mut s = m
        .singular_values()
        .map_err(|e| Error::Solver(format!("SVD failed: {e:?}")))?;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Number of singular values above `rel_tol` times the largest.
pub fn numerical_rank(sv: &[f64], rel_tol: f64) -> usize {
    let smax = sv.first().copied().unwrap_or(0.0);
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Eigenvalues of a dense symmetric matrix in nondecreasing order.
pub fn symmetric_eigenvalues(m: &Mat<f64>) -> Result<Vec<f64>> {
    let mut e = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Solver(format!("eigensolve failed: {e:?}")))?;
    e.sort_by(|a, b| a.total_cmp(b));
    Ok(e)
}
