//! Saddle-point solve with a zero-mean pressure multiplier, and discrete
//! inf-sup estimation.

use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::fe_space::FeSpace;
use crate::forms::{
    assemble_broken_h1, assemble_pressure_coupling, boundary_lift, pressure_lift_rhs, pressure_mean_vector, Assembler, DiscretizationParams,
};
use crate::linalg::{lanczos_largest, max_norm, symmetric_eigenvalues, SparseLu};
use crate::mesh::Mesh;
use crate::problem::OseenProblem;
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

/// Unknown count below which the dense LU path is used.
pub const DENSE_SOLVE_LIMIT: usize = 3000;
/// Largest velocity dimension accepted by the dense inf-sup eigensolve.
pub const DENSE_INFSUP_CAP: usize = 5000;
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Bordered system `[[A, B^T, 0], [B, 0, m], [0, m^T, 0]]` with load
/// `[g; h; 0]`.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub g: Vec<f64>,
    /// Pressure rows of the load; nonzero only for nonhomogeneous boundary values.
    pub h: Vec<f64>,
    pub m: Vec<f64>,
    /// Raw velocity vector carrying the boundary values on constrained DOFs.
    pub lift: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    DenseLu,
    SparseLu,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Relative max-norm residual of the bordered system.
    pub residual: f64,
    pub n_velocity: usize,
    pub n_pressure: usize,
    pub nnz: usize,
    pub method: SolveMethod,
    /// `m^T p`, the discrete pressure mean times the domain measure.
    pub pressure_mean: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub multiplier: f64,
    pub report: SolveReport,
}

impl SaddleSystem {
    /// Assembles `A = nu D + C + R + S`, the coupling `B`, the load and the
    /// mean vector.
    pub fn assemble(mesh: &Mesh, vspace: &FeSpace, qspace: &FeSpace, problem: &OseenProblem, params: &DiscretizationParams) -> Result<Self> {
        let asm = Assembler::new(mesh, vspace, problem, params.clone())?;
        let lift = boundary_lift(vspace, problem);
        let mut g = asm.assemble_rhs();
        let mut h = vec![0.0; qspace.num_free()];
        if problem.boundary.is_some() {
            for (gi, li) in g.iter_mut().zip(asm.assemble_boundary_rhs(&asm.operator_weights(), &lift)) {
                *gi += li;
            }
            h = pressure_lift_rhs(mesh, vspace, qspace, params.volume_degree, &lift)?;
        }
        Ok(SaddleSystem {
            a: asm.assemble_operator(),
            b: assemble_pressure_coupling(mesh, vspace, qspace, params.volume_degree)?,
            g,
            h,
            m: pressure_mean_vector(qspace),
            lift,
        })
    }

    /// Raw velocity coefficients of a free solution vector.
    pub fn full_velocity(&self, vspace: &FeSpace, u: &[f64]) -> Vec<f64> {
        let mut raw = vspace.extend(u);
        for (r, l) in raw.iter_mut().zip(&self.lift) {
            *r += l;
        }
        raw
    }

    pub fn n_velocity(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_pressure(&self) -> usize {
        self.b.nrows()
    }

    pub fn dim(&self) -> usize {
        self.n_velocity() + self.n_pressure() + 1
    }

    fn check(&self) -> Result<()> {
        let (nu, np) = (self.n_velocity(), self.n_pressure());
        if self.a.ncols() != nu || self.b.ncols() != nu || self.g.len() != nu || self.m.len() != np || self.h.len() != np {
            return Err(Error::InvalidArgument("saddle system blocks have inconsistent sizes".into()));
        }
        if self.m.iter().all(|&x| x == 0.0) {
            return Err(Error::InvalidArgument("mean-constraint vector is zero".into()));
        }
        Ok(())
    }

    pub fn bordered(&self) -> CsrMatrix {
        bordered(&self.a, &self.b, &self.m)
    }

    pub fn rhs(&self) -> Vec<f64> {
        let mut r = self.g.clone();
        r.extend_from_slice(&self.h);
        r.push(0.0);
        r
    }

    /// Relative max-norm residual of the bordered system, recomputed block by
    /// block.
    pub fn residual(&self, u: &[f64], p: &[f64], multiplier: f64) -> f64 {
        let au = self.a.matvec(u);
        let btp = self.b.matvec_transpose(p);
        let bu = self.b.matvec(u);
        let mut r = 0.0f64;
        for i in 0..u.len() {
            r = r.max((self.g[i] - au[i] - btp[i]).abs());
        }
        for i in 0..p.len() {
            r = r.max((self.h[i] - bu[i] - self.m[i] * multiplier).abs());
        }
        let mean: f64 = self.m.iter().zip(p).map(|(a, b)| a * b).sum();
        r = r.max(mean.abs());
        r / max_norm(&self.g).max(max_norm(&self.h)).max(f64::MIN_POSITIVE)
    }
}

/// `[[K, B^T, 0], [B, 0, m], [0, m^T, 0]]`.
pub fn bordered(k: &CsrMatrix, b: &CsrMatrix, m: &[f64]) -> CsrMatrix {
    let (nu, np) = (k.nrows(), b.nrows());
    let mut t = Vec::with_capacity(k.nnz() + 2 * b.nnz() + 2 * np);
    t.extend(k.iter());
    for (i, j, v) in b.iter() {
        t.push((nu + i, j, v));
        t.push((j, nu + i, v));
    }
    for (i, &v) in m.iter().enumerate() {
        if v != 0.0 {
            t.push((nu + i, nu + np, v));
            t.push((nu + np, nu + i, v));
        }
    }
    CsrMatrix::from_triplets(nu + np + 1, nu + np + 1, &t)
}

/// Sparse solver for the bordered matrix `[[K, B^T, 0], [B, 0, m], [0, m^T, 0]]`
/// with `B^T m = 0`.
///
/// The dense border row makes direct factorization fill in badly, so it is
/// never factored. Since `m^T B = 0` the multiplier is `m^T h / |m|^2`; the
/// remaining system is factored with one pressure DOF (where `m_j != 0`)
/// pinned to zero, and the pressure is shifted back along `m`. The result
/// is the exact solution of the bordered system, refined against it.
pub struct BorderedLu {
    lu: SparseLu,
    full: CsrMatrix,
    nu: usize,
    np: usize,
    pinned: usize,
    m: Vec<f64>,
    mm: f64,
}

impl BorderedLu {
    pub fn new(k: &CsrMatrix, b: &CsrMatrix, m: &[f64]) -> Result<Self> {
        let (nu, np) = (k.nrows(), b.nrows());
        let pinned = (0..np)
            .max_by(|&i, &j| m[i].abs().total_cmp(&m[j].abs()))
            .filter(|&j| m[j] != 0.0)
            .ok_or_else(|| Error::InvalidArgument("mean-constraint vector is zero".into()))?;
        let drop = |i: usize| if i < nu { Some(i) } else if i - nu == pinned { None } else if i - nu < pinned { Some(i) } else { Some(i - 1) };
        let mut t = Vec::with_capacity(k.nnz() + 2 * b.nnz());
        t.extend(k.iter());
        for (i, j, v) in b.iter() {
            if let Some(r) = drop(nu + i) {
                t.push((r, j, v));
                t.push((j, r, v));
            }
        }
        let n = nu + np - 1;
        let lu = SparseLu::new(CsrMatrix::from_triplets(n, n, &t))?;
        Ok(BorderedLu {
            lu,
            full: bordered(k, b, m),
            nu,
            np,
            pinned,
            m: m.to_vec(),
            mm: m.iter().map(|v| v * v).sum(),
        })
    }

    /// The assembled bordered matrix.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.full
    }

    fn solve_once(&self, rhs: &[f64]) -> Vec<f64> {
        let (nu, np) = (self.nu, self.np);
        let h = &rhs[nu..nu + np];
        let lambda = self.m.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() / self.mm;
        let mut r = Vec::with_capacity(nu + np - 1);
        r.extend_from_slice(&rhs[..nu]);
        for i in 0..np {
            if i != self.pinned {
                r.push(h[i] - lambda * self.m[i]);
            }
        }
        let y = self.lu.solve_refined(&r, 1).0;
        let mut x = y[..nu].to_vec();
        let mut p: Vec<f64> = y[nu..].to_vec();
        p.insert(self.pinned, 0.0);
        // m^T p must equal the last load entry
        let shift = (rhs[nu + np] - self.m.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>()) / self.mm;
        x.extend(p.iter().zip(&self.m).map(|(pi, mi)| pi + shift * mi));
        x.push(lambda);
        x
    }

    /// Solution with up to `refine` refinement steps on the bordered
    /// residual, and the final relative max-norm residual.
    pub fn solve_refined(&self, rhs: &[f64], refine: usize) -> (Vec<f64>, f64) {
        let scale = max_norm(rhs).max(f64::MIN_POSITIVE);
        let mut x = self.solve_once(rhs);
        let mut res = crate::linalg::residual(&self.full, &x, rhs);
        let mut rel = max_norm(&res) / scale;
        for _ in 0..refine {
            if !(rel > 1e-15) {
                break;
            }
            let dx = self.solve_once(&res);
            let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
            let cres = crate::linalg::residual(&self.full, &cand, rhs);
            let crel = max_norm(&cres) / scale;
            if !(crel < rel) {
                break;
            }
            (x, res, rel) = (cand, cres, crel);
        }
        (x, rel)
    }
}

fn dense_solve(mat: &CsrMatrix, rhs: &[f64]) -> Vec<f64> {
    let d = mat.to_dense();
    let lu = d.partial_piv_lu();
    let mut x: Vec<f64> = {
        let s = lu.solve(Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]));
        (0..rhs.len()).map(|i| s[(i, 0)]).collect()
    };
    for _ in 0..2 {
        let r = crate::linalg::residual(mat, &x, rhs);
        let dx = lu.solve(Mat::from_fn(r.len(), 1, |i, _| r[i]));
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += dx[(i, 0)];
        }
    }
    x
}

/// Solves the bordered system and checks the residual against `tolerance`.
pub fn solve_saddle(system: &SaddleSystem, tolerance: f64) -> Result<SaddleSolution> {
    system.check()?;
    let start = Instant::now();
    let rhs = system.rhs();
    let (method, nnz, x) = if system.dim() < DENSE_SOLVE_LIMIT {
        let mat = system.bordered();
        (SolveMethod::DenseLu, mat.nnz(), dense_solve(&mat, &rhs))
    } else {
        let lu = BorderedLu::new(&system.a, &system.b, &system.m)?;
        (SolveMethod::SparseLu, lu.matrix().nnz(), lu.solve_refined(&rhs, 3).0)
    };
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("factorization produced non-finite values; system is singular".into()));
    }
    let (nu, np) = (system.n_velocity(), system.n_pressure());
    let u = x[..nu].to_vec();
    let p = x[nu..nu + np].to_vec();
    let multiplier = x[nu + np];
    let residual = system.residual(&u, &p, multiplier);
    let report = SolveReport {
        residual,
        n_velocity: nu,
        n_pressure: np,
        nnz,
        method,
        pressure_mean: system.m.iter().zip(&p).map(|(a, b)| a * b).sum(),
        seconds: start.elapsed().as_secs_f64(),
    };
    if !(residual <= tolerance) {
        return Err(Error::ToleranceNotMet { residual, tolerance });
    }
    Ok(SaddleSolution { u, p, multiplier, report })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfSupMethod {
    /// Full eigendecomposition of the dense Schur complement.
    Dense,
    /// Lanczos on the inverse Schur complement, one bordered solve per step.
    Lanczos,
}

#[derive(Debug, Clone)]
pub struct InfSupReport {
    pub beta: f64,
    /// Residual of the eigenpair: Ritz residual for Lanczos, zero for dense.
    pub residual: f64,
    pub method: InfSupMethod,
    pub n_velocity: usize,
    pub n_pressure: usize,
    /// Velocity norm used in the supremum.
    pub norm: &'static str,
}

/// Inf-sup constant with respect to the broken H1 norm and the L2 norm on
/// zero-mean pressures, by a dense eigensolve.
pub fn estimate_infsup(mesh: &Mesh, vspace: &FeSpace, qspace: &FeSpace) -> Result<InfSupReport> {
    let n = vspace.num_free();
    if n > DENSE_INFSUP_CAP {
        return Err(Error::TooLarge {
            size: n,
            cap: DENSE_INFSUP_CAP,
        });
    }
    let m1 = assemble_broken_h1(mesh, vspace)?;
    let b = assemble_pressure_coupling(mesh, vspace, qspace, 2 * vspace.order())?;
    let m = pressure_mean_vector(qspace);
    let beta = dense_infsup(&m1, &b, &m)?;
    Ok(InfSupReport {
        beta,
        residual: 0.0,
        method: InfSupMethod::Dense,
        n_velocity: n,
        n_pressure: qspace.num_free(),
        norm: "broken-H1",
    })
}

/// `sqrt(lambda_min(B K^-1 B^T))` on the complement of `m`. The pressure
/// basis is orthonormal, so the pressure Gram matrix is the identity.
pub fn dense_infsup(k: &CsrMatrix, b: &CsrMatrix, m: &[f64]) -> Result<f64> {
    let kd = k.to_dense();
    let bt = b.transpose().to_dense();
    let x = kd.partial_piv_lu().solve(&bt);
    let s = b.to_dense() * &x;
    let np = s.nrows();
    let sym = Mat::from_fn(np, np, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let scale = (0..np).map(|i| sym[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    let mn: f64 = m.iter().map(|v| v * v).sum();
    let deflated = Mat::from_fn(np, np, |i, j| sym[(i, j)] + scale * np as f64 * m[i] * m[j] / mn);
    let eig = symmetric_eigenvalues(&deflated)?;
    Ok(eig[0].max(0.0).sqrt())
}

/// Inf-sup constant by Lanczos on the inverse Schur complement; usable on
/// meshes beyond the dense cap.
pub fn estimate_infsup_sparse(mesh: &Mesh, vspace: &FeSpace, qspace: &FeSpace) -> Result<InfSupReport> {
    let m1 = assemble_broken_h1(mesh, vspace)?;
    let b = assemble_pressure_coupling(mesh, vspace, qspace, 2 * vspace.order())?;
    let m = pressure_mean_vector(qspace);
    let (beta, residual) = sparse_min_singular(&m1, &b, &m, 7)?;
    Ok(InfSupReport {
        beta,
        residual,
        method: InfSupMethod::Lanczos,
        n_velocity: vspace.num_free(),
        n_pressure: qspace.num_free(),
        norm: "broken-H1",
    })
}

/// Smallest singular value of `B` measured in the `K` norm, restricted to
/// pressures orthogonal to `m`. Each Lanczos step applies the inverse Schur
/// complement by one solve with the factored bordered matrix.
pub fn sparse_min_singular(k: &CsrMatrix, b: &CsrMatrix, m: &[f64], seed: u64) -> Result<(f64, f64)> {
    let (nu, np) = (k.nrows(), b.nrows());
    let lu = BorderedLu::new(k, b, m)?;
    let mut op = |y: &[f64]| {
        let mut rhs = vec![0.0; nu + np + 1];
        for (i, v) in y.iter().enumerate() {
            rhs[nu + i] = -v;
        }
        let x = lu.solve_refined(&rhs, 2).0;
        x[nu..nu + np].to_vec()
    };
    let r = lanczos_largest(np, &mut op, Some(m), 300, 1e-8, seed)?;
    if !(r.largest > 0.0) || !r.largest.is_finite() {
        return Err(Error::Solver("inverse Schur complement is not positive definite".into()));
    }
    Ok(((1.0 / r.largest).sqrt(), r.residual / r.largest))
}

/// Smallest singular value of a tall matrix `C` (assumed injective), via
/// Lanczos on `(C^T C)^-1` through the bordered matrix `[[I, C], [C^T, 0]]`.
/// The estimate is accurate to about 1e-6 relative, which is ample for rank
/// decisions; the top of the inverse spectrum is often tightly clustered.
pub fn sparse_min_singular_tall(c: &CsrMatrix, seed: u64) -> Result<f64> {
    let (nr, nc) = (c.nrows(), c.ncols());
    let mut t: Vec<_> = (0..nr).map(|i| (i, i, 1.0)).collect();
    for (i, j, v) in c.iter() {
        t.push((i, nr + j, v));
        t.push((nr + j, i, v));
    }
    let lu = SparseLu::new(CsrMatrix::from_triplets(nr + nc, nr + nc, &t))?;
    let mut op = |r: &[f64]| {
        let mut rhs = vec![0.0; nr + nc];
        for (i, v) in r.iter().enumerate() {
            rhs[nr + i] = -v;
        }
        lu.solve(&rhs)[nr..].to_vec()
    };
    let r = lanczos_largest(nc, &mut op, None, 300, 1e-6, seed)?;
    if !(r.largest > 0.0) || !r.largest.is_finite() {
        return Err(Error::Solver("normal matrix is not positive definite".into()));
    }
    Ok((1.0 / r.largest).sqrt())
}

/// Largest singular value of `C` by Lanczos on `C^T C`.
pub fn largest_singular(c: &CsrMatrix, seed: u64) -> Result<f64> {
    let mut op = |x: &[f64]| c.matvec_transpose(&c.matvec(x));
    let r = lanczos_largest(c.ncols(), &mut op, None, 300, 1e-10, seed)?;
    Ok(r.largest.max(0.0).sqrt())
}
