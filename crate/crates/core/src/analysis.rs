//! Error norms, convergence studies and audits of the discrete complex.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fe_space::{
    build_potential_space, build_pressure_space, build_velocity_space, build_velocity_space_with, pressure_dof_count, velocity_dof_count,
    FeSpace, VelocityOptions,
};
use crate::forms::{assemble_pressure_coupling, curl_map, pressure_mean_vector, Assembler, DiscretizationParams};
use crate::linalg::{numerical_rank, singular_values};
use crate::mesh::{build_structured_mesh, refine_uniform, Mesh};
use crate::par;
use crate::poly;
use crate::problem::{benchmark_problem, polynomial_problem, ExactSolution, OseenProblem};
use crate::quadrature::cached_triangle_rule;
use crate::solver::{largest_singular, solve_saddle, sparse_min_singular, sparse_min_singular_tall, SaddleSolution, SaddleSystem, SolveReport};
use crate::{Error, Point, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProblemKind {
    #[default]
    Benchmark,
    PolynomialMms,
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-benchmark" => Ok(ProblemKind::Benchmark),
            "polynomial-mms" => Ok(ProblemKind::PolynomialMms),
            other => Err(Error::InvalidArgument(format!(
                "unknown problem '{other}' (expected paper-benchmark or polynomial-mms)"
            ))),
        }
    }
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProblemKind::Benchmark => "paper-benchmark",
            ProblemKind::PolynomialMms => "polynomial-mms",
        })
    }
}

impl ProblemKind {
    pub fn build(self, nu: f64, k: usize) -> Result<OseenProblem> {
        match self {
            ProblemKind::Benchmark => benchmark_problem(nu),
            ProblemKind::PolynomialMms => polynomial_problem(nu, k),
        }
    }
}

/// How the mesh of level `L` is obtained from the level-1 mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeshHierarchy {
    /// Red refinement of the perturbed `n0 x n0` mesh, `L - 1` times.
    #[default]
    Nested,
    /// A fresh perturbed `n0 2^(L-1)` mesh per level; not nested.
    Reperturbed,
}

impl std::str::FromStr for MeshHierarchy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nested" => Ok(MeshHierarchy::Nested),
            "reperturbed" => Ok(MeshHierarchy::Reperturbed),
            other => Err(Error::InvalidArgument(format!(
                "unknown mesh hierarchy '{other}' (expected nested or reperturbed)"
            ))),
        }
    }
}

impl std::fmt::Display for MeshHierarchy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MeshHierarchy::Nested => "nested",
            MeshHierarchy::Reperturbed => "reperturbed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub nu: f64,
    pub levels: usize,
    pub n0: usize,
    pub perturb: f64,
    pub seed: u64,
    pub hierarchy: MeshHierarchy,
    pub problem: ProblemKind,
    pub params: DiscretizationParams,
    pub tolerance: f64,
}

impl StudyConfig {
    pub fn new(nu: f64, k: usize) -> Self {
        StudyConfig {
            nu,
            levels: 4,
            n0: 12,
            perturb: 0.2,
            seed: 42,
            hierarchy: MeshHierarchy::Nested,
            problem: ProblemKind::Benchmark,
            params: DiscretizationParams::new(k),
            tolerance: crate::solver::DEFAULT_TOLERANCE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.nu > 0.0) {
            return Err(Error::InvalidArgument(format!("nu must be positive, got {}", self.nu)));
        }
        if self.levels == 0 {
            return Err(Error::InvalidArgument("levels must be >= 1".into()));
        }
        if self.n0 == 0 {
            return Err(Error::InvalidArgument("n0 must be >= 1".into()));
        }
        if !(0.0..=0.3).contains(&self.perturb) {
            return Err(Error::InvalidArgument(format!("perturb must lie in [0, 0.3], got {}", self.perturb)));
        }
        Ok(())
    }

    pub fn mesh(&self, level: usize) -> Result<Mesh> {
        match self.hierarchy {
            MeshHierarchy::Nested => mesh_level(self.n0, self.perturb, self.seed, level),
            MeshHierarchy::Reperturbed => {
                if level == 0 {
                    return Err(Error::InvalidArgument("mesh levels start at 1".into()));
                }
                build_structured_mesh(self.n0 << (level - 1), self.perturb, self.seed)
            }
        }
    }
}

/// Level `level >= 1` of the seeded mesh family: the perturbed
/// `n0 x n0` mesh refined `level - 1` times.
pub fn mesh_level(n0: usize, perturb: f64, seed: u64, level: usize) -> Result<Mesh> {
    if level == 0 {
        return Err(Error::InvalidArgument("mesh levels start at 1".into()));
    }
    let mut m = build_structured_mesh(n0, perturb, seed)?;
    for _ in 1..level {
        m = refine_uniform(&m);
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub energy: f64,
    /// Whether the energy error contains the vorticity term.
    pub energy_includes_stab: bool,
    pub l2u: f64,
    pub divu: f64,
    pub linfu: f64,
    pub l2p: f64,
    pub l2p_proj: f64,
}

impl ErrorReport {
    pub fn values(&self) -> [f64; 6] {
        [self.energy, self.l2u, self.divu, self.linfu, self.l2p, self.l2p_proj]
    }
}

/// Coefficients of the L2 projection of `f` onto the DG space (orthonormal
/// basis, so the projection is the vector of moments).
pub fn project_pressure(qspace: &FeSpace, f: &(dyn Fn(Point) -> f64 + Sync), degree: usize) -> Result<Vec<f64>> {
    let rule = cached_triangle_rule(degree)?;
    let locals = par::map_indexed(qspace.num_elements(), |t| {
        let b = qspace.basis(t);
        let area = b.area();
        let mut out = vec![0.0; b.dim()];
        let mut buf = Vec::new();
        for (r, w) in rule.iter() {
            let x = b.geometry().map(*r);
            b.eval_jets(x, 0, &mut buf);
            let v = f(x);
            for (j, o) in out.iter_mut().enumerate() {
                *o += 2.0 * area * w * v * buf[j * 10];
            }
        }
        out
    });
    let mut p = vec![0.0; qspace.num_free()];
    for (t, loc) in locals.iter().enumerate() {
        for (&g, v) in qspace.element_free_dofs(t).iter().zip(loc) {
            p[g] = *v;
        }
    }
    Ok(p)
}

/// `|f - p_h|_0` for free DG coefficients `p`.
pub fn pressure_error(qspace: &FeSpace, p: &[f64], f: &(dyn Fn(Point) -> f64 + Sync), degree: usize) -> Result<f64> {
    let rule = cached_triangle_rule(degree)?;
    let raw = qspace.extend(p);
    let parts = par::map_indexed(qspace.num_elements(), |t| {
        let b = qspace.basis(t);
        let local = qspace.local_coefficients(&raw, t);
        rule.iter()
            .map(|(r, w)| {
                let x = b.geometry().map(*r);
                let ph = b.eval_combination(&local, x, 0)[0][0];
                2.0 * b.area() * w * (f(x) - ph).powi(2)
            })
            .sum::<f64>()
    });
    Ok(parts.iter().sum::<f64>().sqrt())
}

/// Integral of a scalar field over the mesh.
pub fn integrate(mesh: &Mesh, f: &(dyn Fn(Point) -> f64 + Sync), degree: usize) -> Result<f64> {
    let rule = cached_triangle_rule(degree)?;
    let parts = par::map_indexed(mesh.num_triangles(), |t| {
        let [a, b, c] = mesh.triangle_points(t);
        let area = mesh.area(t);
        rule.iter()
            .map(|(r, w)| {
                let x = [
                    a[0] + (b[0] - a[0]) * r[0] + (c[0] - a[0]) * r[1],
                    a[1] + (b[1] - a[1]) * r[0] + (c[1] - a[1]) * r[1],
                ];
                2.0 * area * w * f(x)
            })
            .sum::<f64>()
    });
    Ok(parts.iter().sum())
}

/// Velocity L2, divergence, and max-over-quadrature-points errors of a raw
/// coefficient vector against `exact` (zero if absent).
pub fn velocity_errors(mesh: &Mesh, vspace: &FeSpace, raw: &[f64], exact: Option<&dyn ExactSolution>, degree: usize) -> Result<(f64, f64, f64)> {
    let rule = cached_triangle_rule(degree)?;
    let parts = par::map_indexed(mesh.num_triangles(), |t| {
        let b = vspace.basis(t);
        let area = b.area();
        let local = vspace.local_coefficients(raw, t);
        let (mut l2, mut div, mut linf) = (0.0, 0.0, 0.0f64);
        for (r, w) in rule.iter() {
            let x = b.geometry().map(*r);
            let uh = b.eval_combination(&local, x, 1);
            let u = exact.map_or([[0.0; 10]; 2], |e| e.velocity(x));
            let e2 = (u[0][0] - uh[0][0]).powi(2) + (u[1][0] - uh[1][0]).powi(2);
            l2 += 2.0 * area * w * e2;
            div += 2.0 * area * w * (uh[0][poly::DX] + uh[1][poly::DY]).powi(2);
            linf = linf.max(e2.sqrt());
        }
        (l2, div, linf)
    });
    let l2 = parts.iter().map(|p| p.0).sum::<f64>().sqrt();
    let div = parts.iter().map(|p| p.1).sum::<f64>().sqrt();
    let linf = parts.iter().fold(0.0f64, |m, p| m.max(p.2));
    Ok((l2, div, linf))
}

/// Error norms of a discrete solution, given by raw velocity coefficients
/// and free pressure coefficients, against the problem's exact solution.
/// Pressures are compared after removing the exact mean.
pub fn compute_errors(asm: &Assembler, qspace: &FeSpace, raw: &[f64], p: &[f64]) -> Result<ErrorReport> {
    let exact = asm
        .problem()
        .exact
        .clone()
        .ok_or_else(|| Error::MissingData("problem has no exact solution".into()))?;
    let mesh = asm.mesh();
    let vspace = asm.space();
    let degree = asm.params().volume_degree;
    let energy = asm.triple_norm(raw, Some(exact.as_ref()), true);
    let (l2u, divu, linfu) = velocity_errors(mesh, vspace, raw, Some(exact.as_ref()), degree)?;
    let pex = |x: Point| exact.pressure(x).0;
    let mean = integrate(mesh, &pex, degree)? / integrate(mesh, &|_| 1.0, 1)?;
    let shifted = |x: Point| exact.pressure(x).0 - mean;
    let proj = project_pressure(qspace, &shifted, degree)?;
    let l2p_proj = proj.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let l2p = pressure_error(qspace, p, &shifted, degree)?;
    Ok(ErrorReport {
        energy,
        energy_includes_stab: true,
        l2u,
        divu,
        linfu,
        l2p,
        l2p_proj,
    })
}

/// Everything produced by one solve on one mesh.
pub struct LevelSolve {
    pub mesh: Mesh,
    pub vspace: FeSpace,
    pub qspace: FeSpace,
    pub problem: OseenProblem,
    pub solution: SaddleSolution,
    /// Raw velocity coefficients including boundary values.
    pub velocity: Vec<f64>,
}

impl LevelSolve {
    pub fn assembler(&self, params: &DiscretizationParams) -> Result<Assembler<'_>> {
        Assembler::new(&self.mesh, &self.vspace, &self.problem, params.clone())
    }
}

pub fn solve_on_mesh(mesh: Mesh, problem: OseenProblem, params: &DiscretizationParams, tolerance: f64) -> Result<LevelSolve> {
    let vspace = build_velocity_space(&mesh, params.k)?;
    let qspace = build_pressure_space(&mesh, params.k - 1)?;
    let system = SaddleSystem::assemble(&mesh, &vspace, &qspace, &problem, params)?;
    let solution = solve_saddle(&system, tolerance)?;
    let velocity = system.full_velocity(&vspace, &solution.u);
    Ok(LevelSolve {
        mesh,
        vspace,
        qspace,
        problem,
        solution,
        velocity,
    })
}

pub fn solve_level(config: &StudyConfig, level: usize) -> Result<LevelSolve> {
    config.validate()?;
    let problem = config.problem.build(config.nu, config.params.k)?;
    solve_on_mesh(config.mesh(level)?, problem, &config.params, config.tolerance)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelRow {
    pub level: usize,
    pub h: f64,
    pub n_velocity: usize,
    pub n_pressure: usize,
    pub residual: f64,
    pub errors: ErrorReport,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<LevelRow>,
}

pub const CSV_HEADER: &str = "level,h,energy,energy_rate,l2u,l2u_rate,divu,divu_rate,linfu,linfu_rate,l2p,l2p_rate,l2p_proj,l2p_proj_rate";

/// `log(e0 / e1) / log(h0 / h1)`.
pub fn rate(e0: f64, e1: f64, h0: f64, h1: f64) -> f64 {
    (e0 / e1).ln() / (h0 / h1).ln()
}

/// Slope of the least-squares line through `(log h, log e)`.
pub fn least_squares_rate(h: &[f64], e: &[f64]) -> f64 {
    let n = h.len() as f64;
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

impl ConvergenceTable {
    /// Rates between row `i` and row `i + 1`, stored on row `i`.
    pub fn rates(&self) -> Vec<Option<[f64; 6]>> {
        (0..self.rows.len())
            .map(|i| {
                self.rows.get(i + 1).map(|next| {
                    let (a, b) = (self.rows[i].errors.values(), next.errors.values());
                    std::array::from_fn(|j| rate(a[j], b[j], self.rows[i].h, next.h))
                })
            })
            .collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.errors.values()[j]).collect()
    }

    pub fn h(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.h).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for (row, rates) in self.rows.iter().zip(self.rates()) {
            write!(out, "{},{:.6e}", row.level, row.h).unwrap();
            for (j, e) in row.errors.values().iter().enumerate() {
                match rates {
                    Some(r) => write!(out, ",{e:.6e},{:.4}", r[j]).unwrap(),
                    None => write!(out, ",{e:.6e},").unwrap(),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Solves on levels `1..=levels` and tabulates errors and rates.
pub fn run_convergence_study(config: &StudyConfig) -> Result<ConvergenceTable> {
    run_convergence_study_with(config, |_| {})
}

/// As [`run_convergence_study`], calling `progress` after each level.
pub fn run_convergence_study_with(config: &StudyConfig, mut progress: impl FnMut(&LevelRow)) -> Result<ConvergenceTable> {
    config.validate()?;
    let mut table = ConvergenceTable::default();
    for level in 1..=config.levels {
        let row = (|| -> Result<LevelRow> {
            let s = solve_level(config, level)?;
            let asm = s.assembler(&config.params)?;
            let errors = compute_errors(&asm, &s.qspace, &s.velocity, &s.solution.p)?;
            Ok(LevelRow {
                level,
                h: crate::mesh::mesh_metrics(&s.mesh).h,
                n_velocity: s.vspace.num_free(),
                n_pressure: s.qspace.num_free(),
                residual: s.solution.report.residual,
                errors,
            })
        })();
        match row {
            Ok(r) => {
                progress(&r);
                table.rows.push(r);
            }
            Err(e) => {
                return Err(Error::StudyAborted {
                    level,
                    reason: e.to_string(),
                    partial: Box::new(table),
                })
            }
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankMethod {
    DenseSvd,
    SparseLanczos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactnessReport {
    /// Free velocity DOFs.
    pub dim_v: usize,
    /// Free potential DOFs.
    pub dim_z: usize,
    /// Pressure DOFs minus the mean constraint.
    pub dim_q: usize,
    pub rank_b: usize,
    pub rank_curl: usize,
    pub max_b_curl: f64,
    /// Largest coefficient the curl of a free potential puts on a
    /// constrained velocity DOF.
    pub curl_leak: f64,
    pub method: RankMethod,
    pub div_onto: bool,
    pub curl_onto_kernel: bool,
}

impl ExactnessReport {
    pub fn exact(&self) -> bool {
        self.div_onto && self.curl_onto_kernel
    }

    pub fn dimensions_match(&self) -> bool {
        self.dim_v == self.dim_z + self.dim_q
    }
}

pub const RANK_TOLERANCE: f64 = 1e-9;
/// Velocity dimension up to which ranks come from a dense SVD.
pub const DENSE_RANK_LIMIT: usize = 2500;

#[derive(Debug, Clone, Copy, Default)]
pub struct ExactnessOptions {
    pub velocity: VelocityOptions,
    pub force_sparse: bool,
}

pub fn check_complex_exactness(mesh: &Mesh, k: usize) -> Result<ExactnessReport> {
    check_complex_exactness_with(mesh, k, ExactnessOptions::default())
}

pub fn check_complex_exactness_with(mesh: &Mesh, k: usize, options: ExactnessOptions) -> Result<ExactnessReport> {
    let v = build_velocity_space_with(mesh, k, options.velocity)?;
    let q = build_pressure_space(mesh, k - 1)?;
    let z = build_potential_space(mesh, k + 1)?;
    let b = assemble_pressure_coupling(mesh, &v, &q, 2 * k)?;
    let curl = curl_map(&z, &v)?;
    let bc = b.mul(&curl.matrix);
    let (dim_v, dim_z, dim_q) = (v.num_free(), z.num_free(), q.num_free() - 1);
    let dense = dim_v <= DENSE_RANK_LIMIT && !options.force_sparse;
    let (rank_b, rank_curl, method) = if dense {
        let rb = numerical_rank(&singular_values(&b.to_dense())?, RANK_TOLERANCE);
        let rc = numerical_rank(&singular_values(&curl.matrix.to_dense())?, RANK_TOLERANCE);
        (rb, rc, RankMethod::DenseSvd)
    } else {
        let m = pressure_mean_vector(&q);
        let eye = crate::sparse::CsrMatrix::identity(dim_v);
        let bmax = largest_singular(&b.transpose(), 3)?;
        let rb = match sparse_min_singular(&eye, &b, &m, 5) {
            Ok((smin, _)) if smin > RANK_TOLERANCE * bmax => dim_q,
            _ => dim_q.saturating_sub(1),
        };
        let cmax = largest_singular(&curl.matrix, 3)?;
        let rc = match sparse_min_singular_tall(&curl.matrix, 5) {
            Ok(smin) if smin > RANK_TOLERANCE * cmax => dim_z,
            _ => dim_z.saturating_sub(1),
        };
        (rb, rc, RankMethod::SparseLanczos)
    };
    let max_b_curl = bc.max_abs();
    Ok(ExactnessReport {
        dim_v,
        dim_z,
        dim_q,
        rank_b,
        rank_curl,
        max_b_curl,
        curl_leak: curl.constraint_leak,
        method,
        div_onto: rank_b == dim_q,
        curl_onto_kernel: rank_curl + dim_q == dim_v && max_b_curl <= 1e-10 && curl.constraint_leak <= 1e-10,
    })
}

pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Point) -> Point + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureRobustnessReport {
    /// `|u_h - u_h'|_0`.
    pub velocity_change: f64,
    /// `|p_h' - p_h - pi_h (phi - mean phi)|_0`.
    pub pressure_defect: f64,
    pub solve_residuals: [f64; 2],
}

/// Solves with `f` and with `f + grad phi` on the same mesh.
pub fn pressure_robustness_test(
    config: &StudyConfig,
    level: usize,
    phi: ScalarField,
    grad_phi: VectorField,
) -> Result<PressureRobustnessReport> {
    config.validate()?;
    let mesh = config.mesh(level)?;
    let base = config.problem.build(config.nu, config.params.k)?;
    let shifted = base.with_added_gradient(grad_phi);
    let v = build_velocity_space(&mesh, config.params.k)?;
    let q = build_pressure_space(&mesh, config.params.k - 1)?;
    let s0 = SaddleSystem::assemble(&mesh, &v, &q, &base, &config.params)?;
    let s1 = SaddleSystem::assemble(&mesh, &v, &q, &shifted, &config.params)?;
    let a = solve_saddle(&s0, config.tolerance)?;
    let b = solve_saddle(&s1, config.tolerance)?;
    let du: Vec<f64> = a.u.iter().zip(&b.u).map(|(x, y)| x - y).collect();
    let degree = config.params.volume_degree;
    let (velocity_change, _, _) = velocity_errors(&mesh, &v, &v.extend(&du), None, degree)?;
    let mean = integrate(&mesh, &|x| phi(x), degree)? / integrate(&mesh, &|_| 1.0, 1)?;
    let proj = project_pressure(&q, &|x| phi(x) - mean, degree)?;
    let pressure_defect = (0..proj.len())
        .map(|i| (b.p[i] - a.p[i] - proj[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(PressureRobustnessReport {
        velocity_change,
        pressure_defect,
        solve_residuals: [a.report.residual, b.report.residual],
    })
}

/// `phi = cos(4 pi x)` and its gradient.
pub fn cosine_potential() -> (ScalarField, VectorField) {
    (
        Arc::new(|x: Point| (4.0 * PI * x[0]).cos()),
        Arc::new(|x: Point| [-4.0 * PI * (4.0 * PI * x[0]).sin(), 0.0]),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofComparison {
    pub stenberg: usize,
    pub bdm: usize,
    pub pressure: usize,
}

impl DofComparison {
    pub fn stenberg_total(&self) -> usize {
        self.stenberg + self.pressure
    }

    pub fn bdm_total(&self) -> usize {
        self.bdm + self.pressure
    }
}

/// Raw velocity DOF counts of the Stenberg and BDM elements of order `k`.
pub fn dof_comparison(nv: usize, ne: usize, nt: usize, k: usize) -> Result<DofComparison> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be >= 2, got {k}")));
    }
    Ok(DofComparison {
        stenberg: velocity_dof_count(nv, ne, nt, k),
        bdm: (k + 1) * ne + (k - 1) * (k + 1) * nt,
        pressure: pressure_dof_count(nt, k),
    })
}

/// Minimum of `A(v, v) / |||v|||^2` over `samples` random free vectors.
pub fn coercivity_sample(asm: &Assembler, samples: usize, seed: u64) -> f64 {
    let a = asm.assemble_operator();
    let e = asm.assemble_energy();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let v: Vec<f64> = (0..a.ncols()).map(|_| rng.random_range(-1.0..1.0)).collect();
            a.bilinear(&v, &v) / e.bilinear(&v, &v)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Interpolation error `|u - I_h u|_0` of an exact velocity.
pub fn interpolation_error(mesh: &Mesh, k: usize, exact: &dyn ExactSolution, degree: usize) -> Result<f64> {
    let v = build_velocity_space(mesh, k)?;
    let raw = v.interpolate(&|x| {
        let j = exact.velocity(x);
        [[j[0][0], j[0][poly::DX], j[0][poly::DY]], [j[1][0], j[1][poly::DX], j[1][poly::DY]]]
    });
    Ok(velocity_errors(mesh, &v, &raw, Some(exact), degree)?.0)
}

/// Summary of a solve for reporting.
pub fn describe_solve(report: &SolveReport) -> String {
    format!(
        "velocity dofs {}, pressure dofs {}, nnz {}, method {:?}, residual {:.3e}, pressure mean {:.3e}, {:.2}s",
        report.n_velocity, report.n_pressure, report.nnz, report.method, report.residual, report.pressure_mean, report.seconds
    )
}
