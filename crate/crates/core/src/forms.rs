//! Bilinear forms, load vector, norms and the discrete curl.
//!
//! Every velocity matrix is a linear combination of a few primitive element
//! and facet integrals (see [`FormWeights`]). All of them share one sparsity
//! pattern over the free velocity DOFs, so they can be summed entrywise.
//!
//! Conventions: on an interior facet the jump is the value on the
//! lower-indexed triangle minus the value on the higher-indexed one and the
//! normal points from the former to the latter; on a boundary facet the
//! jump and the average are the one-sided trace and the normal points out.

use std::sync::Arc;

use crate::fe_space::FeSpace;
use crate::mesh::Mesh;
use crate::par;
use crate::poly::{VectorJet, DX, DXX, DXY, DY, DYY};
use crate::problem::{convective_derivative, curl_operator, ExactSolution, OseenProblem};
use crate::quadrature::{cached_edge_rule, cached_triangle_rule, default_degree};
use crate::sparse::{CsrMatrix, Pattern, NONE};
use crate::{Error, Point, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Convection {
    /// Upwind jump penalty on every facet.
    #[default]
    Upwind,
    /// Jump penalty on boundary facets only.
    Central,
    /// No convection term at all.
    None,
}

impl std::str::FromStr for Convection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upwind" => Ok(Convection::Upwind),
            "central" => Ok(Convection::Central),
            "none" => Ok(Convection::None),
            other => Err(Error::InvalidArgument(format!(
                "unknown convection scheme '{other}' (expected upwind, central or none)"
            ))),
        }
    }
}

impl std::fmt::Display for Convection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Convection::Upwind => "upwind",
            Convection::Central => "central",
            Convection::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizationParams {
    pub k: usize,
    pub sigma: f64,
    pub delta0: f64,
    pub convection: Convection,
    pub vorticity: bool,
    /// Overrides the computed sup-norm of the advection field.
    pub b_inf: Option<f64>,
    pub volume_degree: usize,
    pub facet_degree: usize,
}

/// Default interior penalty `6 (k + 1)(k + d) / d` with `d = 2`.
pub fn default_sigma(k: usize) -> f64 {
    3.0 * ((k + 1) * (k + 2)) as f64
}

pub const DEFAULT_DELTA0: f64 = 1e-5;

impl DiscretizationParams {
    pub fn new(k: usize) -> Self {
        DiscretizationParams {
            k,
            sigma: default_sigma(k),
            delta0: DEFAULT_DELTA0,
            convection: Convection::Upwind,
            vorticity: true,
            b_inf: None,
            volume_degree: default_degree(k),
            facet_degree: default_degree(k),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidArgument(format!("velocity order must satisfy k >= 2, got k = {}", self.k)));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.delta0 >= 0.0) {
            return Err(Error::InvalidArgument(format!("delta0 must be nonnegative, got {}", self.delta0)));
        }
        if let Some(b) = self.b_inf {
            if !(b > 0.0) {
                return Err(Error::InvalidArgument(format!("b_inf must be positive, got {b}")));
            }
        }
        for d in [self.volume_degree, self.facet_degree] {
            if d == 0 || d > crate::quadrature::MAX_DEGREE {
                return Err(Error::UnsupportedQuadrature(d));
            }
        }
        Ok(())
    }
}

/// Stabilization parameter `min(1, b_inf h / nu) h^3 / b_inf`.
pub fn compute_tau(nu: f64, b_inf: f64, h: f64) -> Result<f64> {
    if !(b_inf > 0.0) {
        return Err(Error::InvalidArgument("b_inf must be positive for the vorticity stabilization".into()));
    }
    Ok((b_inf * h / nu).min(1.0) * h.powi(3) / b_inf)
}

/// Coefficients of the primitive integrals combined into one matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FormWeights {
    /// `(grad u, grad v)_h`
    pub grad: f64,
    /// `((b . grad) u, v)_h`
    pub convection: f64,
    /// `(c u, v)`
    pub reaction: f64,
    /// `(u, v)`
    pub mass: f64,
    /// `delta0 sum tau_K (curl L u, curl L v)_K`
    pub vorticity_volume: f64,
    /// Interior penalty facet terms: consistency, symmetry, `sigma / h_F` penalty.
    pub sip_facet: f64,
    /// Upwind or central facet terms of the convection form.
    pub convection_facet: f64,
    /// `delta0 sum h_F^2 <[(b . grad) u x n], [(b . grad) v x n]>`
    pub vorticity_facet: f64,
    /// `sum h_F^-1 <[u], [v]>`
    pub jump_h: f64,
    /// `sum <|b . n| [u], [v]>`
    pub jump_flux: f64,
}

impl FormWeights {
    fn needs_order3(&self) -> bool {
        self.vorticity_volume != 0.0
    }

    fn has_facets(&self) -> bool {
        self.sip_facet != 0.0
            || self.convection_facet != 0.0
            || self.vorticity_facet != 0.0
            || self.jump_h != 0.0
            || self.jump_flux != 0.0
    }
}

/// Squared terms of the energy norm.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyParts {
    /// `nu |grad v|^2`
    pub viscous: f64,
    /// `sigma nu / h_F |[v]|^2`
    pub penalty: f64,
    /// `|b . n| |[v]|^2`
    pub upwind: f64,
    pub vorticity_volume: f64,
    pub vorticity_facet: f64,
    /// `r0 |v|^2`
    pub reaction: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.viscous + self.penalty + self.upwind + self.vorticity_volume + self.vorticity_facet + self.reaction
    }
}

struct LocalBlock {
    rows: Vec<usize>,
    values: Vec<f64>,
}

const BATCH: usize = 2048;

/// Computes local blocks in parallel batches and scatters them in index
/// order, so the result does not depend on the thread count.
fn scatter_square(target: &mut CsrMatrix, n: usize, local: impl Fn(usize) -> Option<LocalBlock> + Sync) {
    let mut start = 0;
    while start < n {
        let end = (start + BATCH).min(n);
        let blocks = par::map_indexed(end - start, |i| local(start + i));
        for b in blocks.into_iter().flatten() {
            target.add_local(&b.rows, &b.rows, &b.values);
        }
        start = end;
    }
}

/// Per-element data shared by all forms.
pub struct Assembler<'a> {
    mesh: &'a Mesh,
    space: &'a FeSpace,
    problem: &'a OseenProblem,
    params: DiscretizationParams,
    b_inf: f64,
    tau: Vec<f64>,
    pattern: Arc<Pattern>,
}

/// Basis data at one point: values, gradients `grad[c][d]`, convective
/// derivative and curl of the operator.
#[derive(Clone, Copy, Default)]
struct PointData {
    val: [f64; 2],
    grad: [[f64; 2]; 2],
    conv: [f64; 2],
    curl_l: f64,
}

fn jet_of(buf: &[f64], j: usize) -> VectorJet {
    let mut w = [[0.0; 10]; 2];
    w[0].copy_from_slice(&buf[(2 * j) * 10..(2 * j) * 10 + 10]);
    w[1].copy_from_slice(&buf[(2 * j + 1) * 10..(2 * j + 1) * 10 + 10]);
    w
}

impl<'a> Assembler<'a> {
    pub fn new(mesh: &'a Mesh, space: &'a FeSpace, problem: &'a OseenProblem, params: DiscretizationParams) -> Result<Self> {
        params.validate()?;
        if space.num_elements() != mesh.num_triangles() {
            return Err(Error::InvalidArgument("space and mesh do not match".into()));
        }
        let b_inf = match params.b_inf {
            Some(b) => b,
            None => sup_advection(mesh, problem, params.volume_degree)?,
        };
        let tau = if b_inf > 0.0 {
            (0..mesh.num_triangles())
                .map(|t| compute_tau(problem.nu, b_inf, mesh.diameter(t)))
                .collect::<Result<Vec<_>>>()?
        } else if params.vorticity && params.delta0 > 0.0 {
            return Err(Error::InvalidArgument("advection field vanishes; vorticity stabilization undefined".into()));
        } else {
            vec![0.0; mesh.num_triangles()]
        };
        let pattern = velocity_pattern(mesh, space);
        Ok(Assembler {
            mesh,
            space,
            problem,
            params,
            b_inf,
            tau,
            pattern,
        })
    }

    pub fn params(&self) -> &DiscretizationParams {
        &self.params
    }

    pub fn b_inf(&self) -> f64 {
        self.b_inf
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn mesh(&self) -> &Mesh {
        self.mesh
    }

    pub fn space(&self) -> &FeSpace {
        self.space
    }

    pub fn problem(&self) -> &OseenProblem {
        self.problem
    }

    fn stab_weight(&self) -> f64 {
        if self.params.vorticity {
            self.params.delta0
        } else {
            0.0
        }
    }

    fn conv_weight(&self) -> f64 {
        if self.params.convection == Convection::None {
            0.0
        } else {
            1.0
        }
    }

    pub fn diffusion_weights(&self) -> FormWeights {
        FormWeights {
            grad: 1.0,
            sip_facet: 1.0,
            ..Default::default()
        }
    }

    pub fn convection_weights(&self) -> FormWeights {
        FormWeights {
            convection: self.conv_weight(),
            convection_facet: self.conv_weight(),
            ..Default::default()
        }
    }

    pub fn vorticity_weights(&self) -> FormWeights {
        FormWeights {
            vorticity_volume: self.stab_weight(),
            vorticity_facet: self.stab_weight(),
            ..Default::default()
        }
    }

    /// `A = nu D + C + R + S`.
    pub fn operator_weights(&self) -> FormWeights {
        let (c, s) = (self.conv_weight(), self.stab_weight());
        FormWeights {
            grad: self.problem.nu,
            sip_facet: self.problem.nu,
            convection: c,
            convection_facet: c,
            reaction: 1.0,
            vorticity_volume: s,
            vorticity_facet: s,
            ..Default::default()
        }
    }

    /// Gram matrix of the energy norm.
    pub fn energy_weights(&self) -> FormWeights {
        let s = self.stab_weight();
        FormWeights {
            grad: self.problem.nu,
            jump_h: self.params.sigma * self.problem.nu,
            jump_flux: 1.0,
            vorticity_volume: s,
            vorticity_facet: s,
            mass: self.problem.r0,
            ..Default::default()
        }
    }

    /// Gram matrix of the broken H1 norm.
    pub fn broken_h1_weights(&self) -> FormWeights {
        FormWeights {
            grad: 1.0,
            jump_h: 1.0,
            ..Default::default()
        }
    }

    pub fn assemble_diffusion(&self) -> CsrMatrix {
        self.assemble(&self.diffusion_weights())
    }

    pub fn assemble_convection(&self) -> CsrMatrix {
        self.assemble(&self.convection_weights())
    }

    pub fn assemble_reaction(&self) -> CsrMatrix {
        self.assemble(&FormWeights {
            reaction: 1.0,
            ..Default::default()
        })
    }

    pub fn assemble_vorticity_stab(&self) -> CsrMatrix {
        self.assemble(&self.vorticity_weights())
    }

    pub fn assemble_mass(&self) -> CsrMatrix {
        self.assemble(&FormWeights {
            mass: 1.0,
            ..Default::default()
        })
    }

    pub fn assemble_operator(&self) -> CsrMatrix {
        self.assemble(&self.operator_weights())
    }

    pub fn assemble_energy(&self) -> CsrMatrix {
        self.assemble(&self.energy_weights())
    }

    pub fn assemble_broken_h1(&self) -> CsrMatrix {
        self.assemble(&self.broken_h1_weights())
    }

    /// Basis data of element `t` at `x` for every local function.
    fn point_data(&self, t: usize, x: Point, order: usize, buf: &mut Vec<f64>, out: &mut Vec<PointData>) {
        let basis = self.space.basis(t);
        basis.eval_jets(x, order, buf);
        let (b, gb) = self.problem.flow.advection(x);
        let (c, gc) = self.problem.flow.reaction(x);
        out.clear();
        for j in 0..basis.dim() {
            let w = jet_of(buf, j);
            out.push(PointData {
                val: [w[0][0], w[1][0]],
                grad: [[w[0][DX], w[0][DY]], [w[1][DX], w[1][DY]]],
                conv: convective_derivative(b, &w),
                curl_l: if order >= 3 {
                    curl_operator(self.problem.nu, b, gb, c, gc, &w)
                } else {
                    0.0
                },
            });
        }
    }

    fn element_block(&self, t: usize, w: &FormWeights) -> Option<LocalBlock> {
        let rows = self.space.element_free_dofs(t).to_vec();
        if rows.iter().all(|&r| r == NONE) {
            return None;
        }
        let values = self.element_values(t, w);
        Some(LocalBlock { rows, values })
    }

    /// Row-major local matrix of element `t` over all its basis functions.
    fn element_values(&self, t: usize, w: &FormWeights) -> Vec<f64> {
        let n = self.space.basis(t).dim();
        let rule = cached_triangle_rule(self.params.volume_degree).expect("validated degree");
        let geom = self.space.basis(t).geometry();
        let area = geom.area();
        let order = if w.needs_order3() { 3 } else { 1 };
        let stab = w.vorticity_volume * self.tau[t];
        let mut values = vec![0.0; n * n];
        let (mut buf, mut pd) = (Vec::new(), Vec::new());
        for (r, q) in rule.iter() {
            let x = geom.map(*r);
            let dx = 2.0 * area * q;
            self.point_data(t, x, order, &mut buf, &mut pd);
            let c = if w.reaction != 0.0 { self.problem.flow.reaction(x).0 } else { 0.0 };
            let react = w.reaction * c + w.mass;
            for a in 0..n {
                let va = &pd[a];
                for b in 0..n {
                    let ub = &pd[b];
                    let mut s = 0.0;
                    if w.grad != 0.0 {
                        s += w.grad
                            * (ub.grad[0][0] * va.grad[0][0]
                                + ub.grad[0][1] * va.grad[0][1]
                                + ub.grad[1][0] * va.grad[1][0]
                                + ub.grad[1][1] * va.grad[1][1]);
                    }
                    if w.convection != 0.0 {
                        s += w.convection * (ub.conv[0] * va.val[0] + ub.conv[1] * va.val[1]);
                    }
                    if react != 0.0 {
                        s += react * (ub.val[0] * va.val[0] + ub.val[1] * va.val[1]);
                    }
                    if stab != 0.0 {
                        s += stab * ub.curl_l * va.curl_l;
                    }
                    values[a * n + b] += dx * s;
                }
            }
        }
        values
    }

    fn facet_block(&self, f: usize, w: &FormWeights) -> Option<LocalBlock> {
        let mut rows = Vec::new();
        for &t in self.mesh.facet(f).adjacent() {
            rows.extend_from_slice(self.space.element_free_dofs(t));
        }
        if rows.iter().all(|&r| r == NONE) {
            return None;
        }
        let (values, _) = self.facet_values(f, w, None);
        Some(LocalBlock { rows, values })
    }

    /// Local matrix of facet `f` over the basis functions of its adjacent
    /// triangles. With `data`, a boundary facet also returns the load that
    /// replaces the one-sided trace `u` by `u - g` in every jump.
    fn facet_values(&self, f: usize, w: &FormWeights, data: Option<&dyn ExactSolution>) -> (Vec<f64>, Vec<f64>) {
        let facet = self.mesh.facet(f);
        let sides: Vec<usize> = facet.adjacent().to_vec();
        let interior = sides.len() == 2;
        let n: usize = sides.iter().map(|&t| self.space.basis(t).dim()).sum();
        let data = if interior { None } else { data };
        let mut load = vec![0.0; if data.is_some() { n } else { 0 }];
        let hf = facet.length;
        let nrm = facet.normal;
        let (p0, p1) = (self.mesh.vertex(facet.vertices[0]), self.mesh.vertex(facet.vertices[1]));
        let rule = cached_edge_rule(self.params.facet_degree).expect("validated degree");
        let mut values = vec![0.0; n * n];
        let (mut buf, mut pd) = (Vec::new(), Vec::new());
        // jump, average, average normal flux of the gradient, jump of (b.grad)v x n
        let mut jump = vec![[0.0; 2]; n];
        let mut avg = vec![[0.0; 2]; n];
        let mut flux = vec![[0.0; 2]; n];
        let mut jconv = vec![0.0; n];
        let avg_w = if interior { 0.5 } else { 1.0 };
        let penalty_upwind = self.params.convection == Convection::Upwind;
        for (t, q) in rule.iter() {
            let x = [p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])];
            let ds = q * hf;
            let mut a0 = 0;
            for (s, &tri) in sides.iter().enumerate() {
                self.point_data(tri, x, 1, &mut buf, &mut pd);
                let sign = if s == 0 { 1.0 } else { -1.0 };
                for (j, p) in pd.iter().enumerate() {
                    let a = a0 + j;
                    for c in 0..2 {
                        jump[a][c] = sign * p.val[c];
                        avg[a][c] = avg_w * p.val[c];
                        flux[a][c] = avg_w * (p.grad[c][0] * nrm[0] + p.grad[c][1] * nrm[1]);
                    }
                    jconv[a] = sign * (p.conv[0] * nrm[1] - p.conv[1] * nrm[0]);
                }
                a0 += pd.len();
            }
            let (b, _) = self.problem.flow.advection(x);
            let bn = b[0] * nrm[0] + b[1] * nrm[1];
            let gamma = if interior {
                if penalty_upwind {
                    0.5
                } else {
                    0.0
                }
            } else if bn > 0.0 {
                0.0
            } else if bn < 0.0 {
                1.0
            } else {
                0.5
            };
            let jump_coef = w.sip_facet * self.params.sigma / hf
                + w.convection_facet * gamma * bn.abs()
                + w.jump_h / hf
                + w.jump_flux * bn.abs();
            let conv_avg = if interior { -w.convection_facet * bn } else { 0.0 };
            let stab = w.vorticity_facet * hf * hf;
            for a in 0..n {
                for bb in 0..n {
                    let jj = jump[bb][0] * jump[a][0] + jump[bb][1] * jump[a][1];
                    let mut s = jump_coef * jj;
                    if w.sip_facet != 0.0 {
                        s -= w.sip_facet
                            * (flux[bb][0] * jump[a][0] + flux[bb][1] * jump[a][1] + jump[bb][0] * flux[a][0] + jump[bb][1] * flux[a][1]);
                    }
                    if conv_avg != 0.0 {
                        s += conv_avg * (jump[bb][0] * avg[a][0] + jump[bb][1] * avg[a][1]);
                    }
                    if stab != 0.0 {
                        s += stab * jconv[bb] * jconv[a];
                    }
                    values[a * n + bb] += ds * s;
                }
            }
            if let Some(g) = data {
                let gj = g.velocity(x);
                let gconv = convective_derivative(b, &gj);
                let gc = gconv[0] * nrm[1] - gconv[1] * nrm[0];
                for a in 0..n {
                    let mut s = jump_coef * (gj[0][0] * jump[a][0] + gj[1][0] * jump[a][1]);
                    s -= w.sip_facet * (gj[0][0] * flux[a][0] + gj[1][0] * flux[a][1]);
                    s += stab * gc * jconv[a];
                    load[a] += ds * s;
                }
            }
        }
        (values, load)
    }

    /// Load from nonhomogeneous boundary values: `-A(lift, v)` plus the weak
    /// boundary terms, over the free DOFs. `lift` is the raw vector from
    /// [`boundary_lift`].
    pub fn assemble_boundary_rhs(&self, w: &FormWeights, lift: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.space.num_free()];
        let Some(data) = self.problem.boundary.as_deref() else {
            return out;
        };
        let touches = |t: usize| self.space.element_dofs(t).iter().any(|&d| lift[d] != 0.0);
        let scatter = |out: &mut Vec<f64>, tris: &[usize], values: &[f64], load: &[f64]| {
            let raw: Vec<usize> = tris.iter().flat_map(|&t| self.space.element_dofs(t).iter().copied()).collect();
            let free: Vec<usize> = tris.iter().flat_map(|&t| self.space.element_free_dofs(t).iter().copied()).collect();
            let n = raw.len();
            for a in 0..n {
                if free[a] == NONE {
                    continue;
                }
                let mut s = load.get(a).copied().unwrap_or(0.0);
                for b in 0..n {
                    s -= values[a * n + b] * lift[raw[b]];
                }
                out[free[a]] += s;
            }
        };
        let elems = par::map_indexed(self.mesh.num_triangles(), |t| touches(t).then(|| self.element_values(t, w)));
        for (t, v) in elems.iter().enumerate() {
            if let Some(v) = v {
                scatter(&mut out, &[t], v, &[]);
            }
        }
        let facets = par::map_indexed(self.mesh.num_facets(), |f| {
            let facet = self.mesh.facet(f);
            let adj = facet.adjacent();
            (!facet.is_interior() || adj.iter().any(|&t| touches(t))).then(|| self.facet_values(f, w, Some(data)))
        });
        for (f, v) in facets.iter().enumerate() {
            if let Some((values, load)) = v {
                scatter(&mut out, self.mesh.facet(f).adjacent(), values, load);
            }
        }
        out
    }

    /// Linear combination of the primitive forms over the free velocity DOFs.
    pub fn assemble(&self, w: &FormWeights) -> CsrMatrix {
        let mut m = CsrMatrix::zeros(self.pattern.clone());
        scatter_square(&mut m, self.mesh.num_triangles(), |t| self.element_block(t, w));
        if w.has_facets() {
            scatter_square(&mut m, self.mesh.num_facets(), |f| self.facet_block(f, w));
        }
        m
    }

    /// Load vector `(f, v) + delta0 (tau curl f, curl L v)_h` on the free DOFs.
    pub fn assemble_rhs(&self) -> Vec<f64> {
        let stab = self.stab_weight();
        let order = if stab != 0.0 { 3 } else { 1 };
        let rule = cached_triangle_rule(self.params.volume_degree).expect("validated degree");
        let locals = par::map_indexed(self.mesh.num_triangles(), |t| {
            let geom = self.space.basis(t).geometry();
            let area = geom.area();
            let n = self.space.basis(t).dim();
            let mut out = vec![0.0; n];
            let (mut buf, mut pd) = (Vec::new(), Vec::new());
            for (r, q) in rule.iter() {
                let x = geom.map(*r);
                let dx = 2.0 * area * q;
                let (f, curl_f) = (self.problem.force)(x);
                self.point_data(t, x, order, &mut buf, &mut pd);
                for (a, p) in pd.iter().enumerate() {
                    out[a] += dx * (f[0] * p.val[0] + f[1] * p.val[1] + stab * self.tau[t] * curl_f * p.curl_l);
                }
            }
            out
        });
        let mut g = vec![0.0; self.space.num_free()];
        for (t, loc) in locals.iter().enumerate() {
            for (&r, v) in self.space.element_free_dofs(t).iter().zip(loc) {
                if r != NONE {
                    g[r] += v;
                }
            }
        }
        g
    }

    /// Energy norm of `u - u_h`, with `u_h` given by raw coefficients. The
    /// exact solution, when present, is assumed continuous. Without
    /// `include_stab` the vorticity part is left out.
    pub fn triple_norm(&self, raw: &[f64], exact: Option<&dyn ExactSolution>, include_stab: bool) -> f64 {
        self.energy_parts(raw, exact, include_stab).total().sqrt()
    }

    /// Squared contributions to [`Assembler::triple_norm`].
    pub fn energy_parts(&self, raw: &[f64], exact: Option<&dyn ExactSolution>, include_stab: bool) -> EnergyParts {
        let nu = self.problem.nu;
        let delta0 = if include_stab { self.stab_weight() } else { 0.0 };
        let order = if delta0 != 0.0 { 3 } else { 1 };
        let vrule = cached_triangle_rule(self.params.volume_degree).expect("validated degree");
        let erule = cached_edge_rule(self.params.facet_degree).expect("validated degree");
        let zero = [[0.0; 10]; 2];
        let vol: Vec<[f64; 3]> = par::map_indexed(self.mesh.num_triangles(), |t| {
            let geom = self.space.basis(t).geometry();
            let area = geom.area();
            let local = self.space.local_coefficients(raw, t);
            let mut s = [0.0; 3];
            for (r, q) in vrule.iter() {
                let x = geom.map(*r);
                let uh = self.space.basis(t).eval_combination(&local, x, order);
                let u = exact.map_or(zero, |e| e.velocity(x));
                let mut e = [[0.0; 10]; 2];
                for c in 0..2 {
                    for d in 0..10 {
                        e[c][d] = u[c][d] - uh[c][d];
                    }
                }
                let grad2 = e[0][DX].powi(2) + e[0][DY].powi(2) + e[1][DX].powi(2) + e[1][DY].powi(2);
                let dx = 2.0 * area * q;
                s[0] += dx * nu * grad2;
                s[1] += dx * self.problem.r0 * (e[0][0].powi(2) + e[1][0].powi(2));
                if delta0 != 0.0 {
                    let (b, gb) = self.problem.flow.advection(x);
                    let (c, gc) = self.problem.flow.reaction(x);
                    s[2] += dx * delta0 * self.tau[t] * curl_operator(nu, b, gb, c, gc, &e).powi(2);
                }
            }
            s
        });
        let fac: Vec<[f64; 3]> = par::map_indexed(self.mesh.num_facets(), |f| {
            let facet = self.mesh.facet(f);
            let (p0, p1) = (self.mesh.vertex(facet.vertices[0]), self.mesh.vertex(facet.vertices[1]));
            let nrm = facet.normal;
            let hf = facet.length;
            let locals: Vec<Vec<f64>> = facet.adjacent().iter().map(|&t| self.space.local_coefficients(raw, t)).collect();
            let mut s = [0.0; 3];
            for (t, q) in erule.iter() {
                let x = [p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])];
                let (b, _) = self.problem.flow.advection(x);
                let bn = b[0] * nrm[0] + b[1] * nrm[1];
                let mut jump = [0.0; 2];
                let mut jconv = 0.0;
                for (side, &tri) in facet.adjacent().iter().enumerate() {
                    let sign = if side == 0 { 1.0 } else { -1.0 };
                    let uh = self.space.basis(tri).eval_combination(&locals[side], x, 1);
                    let conv = convective_derivative(b, &uh);
                    jump[0] += sign * uh[0][0];
                    jump[1] += sign * uh[1][0];
                    jconv += sign * (conv[0] * nrm[1] - conv[1] * nrm[0]);
                }
                // the exact solution is continuous, so only boundary facets see it
                if !facet.is_interior() {
                    if let Some(e) = exact {
                        let u = e.velocity(x);
                        jump[0] -= u[0][0];
                        jump[1] -= u[1][0];
                    }
                }
                let j2 = jump[0].powi(2) + jump[1].powi(2);
                s[0] += q * hf * self.params.sigma * nu / hf * j2;
                s[1] += q * hf * bn.abs() * j2;
                if delta0 != 0.0 {
                    let mut jc = -jconv;
                    if !facet.is_interior() {
                        if let Some(e) = exact {
                            let conv = convective_derivative(b, &e.velocity(x));
                            jc += conv[0] * nrm[1] - conv[1] * nrm[0];
                        }
                    }
                    s[2] += q * hf * delta0 * hf * hf * jc * jc;
                }
            }
            s
        });
        let sum = |v: &[[f64; 3]], i: usize| v.iter().map(|x| x[i]).sum::<f64>();
        EnergyParts {
            viscous: sum(&vol, 0),
            reaction: sum(&vol, 1),
            vorticity_volume: sum(&vol, 2),
            penalty: sum(&fac, 0),
            upwind: sum(&fac, 1),
            vorticity_facet: sum(&fac, 2),
        }
    }
}

/// Largest Euclidean norm of the advection field over all volume
/// quadrature points.
pub fn sup_advection(mesh: &Mesh, problem: &OseenProblem, degree: usize) -> Result<f64> {
    let rule = cached_triangle_rule(degree)?;
    let per = par::map_indexed(mesh.num_triangles(), |t| {
        let [a, b, c] = mesh.triangle_points(t);
        rule.iter().fold(0.0f64, |m, (r, _)| {
            let x = [
                a[0] + (b[0] - a[0]) * r[0] + (c[0] - a[0]) * r[1],
                a[1] + (b[1] - a[1]) * r[0] + (c[1] - a[1]) * r[1],
            ];
            let (bv, _) = problem.flow.advection(x);
            m.max((bv[0] * bv[0] + bv[1] * bv[1]).sqrt())
        })
    });
    Ok(per.into_iter().fold(0.0, f64::max))
}

fn velocity_pattern(mesh: &Mesh, space: &FeSpace) -> Arc<Pattern> {
    let n = space.num_free();
    let facet_dofs: Vec<Vec<usize>> = (0..mesh.num_facets())
        .map(|f| {
            mesh.facet(f)
                .adjacent()
                .iter()
                .flat_map(|&t| space.element_free_dofs(t).iter().copied())
                .collect()
        })
        .collect();
    let blocks = (0..mesh.num_triangles())
        .map(|t| space.element_free_dofs(t))
        .chain(facet_dofs.iter().map(|v| v.as_slice()))
        .map(|d| (d, d));
    Arc::new(Pattern::from_blocks(n, n, blocks))
}

struct NoFlow;

impl crate::problem::Flow for NoFlow {
    fn advection(&self, _: Point) -> (Point, [[f64; 2]; 2]) {
        ([0.0; 2], [[0.0; 2]; 2])
    }

    fn reaction(&self, _: Point) -> (f64, Point) {
        (0.0, [0.0; 2])
    }
}

/// Gram matrix of `|grad v|_h^2 + sum h_F^-1 |[v]|_F^2`, which needs no
/// problem data.
pub fn assemble_broken_h1(mesh: &Mesh, space: &FeSpace) -> Result<CsrMatrix> {
    let problem = OseenProblem::new(1.0, 1.0, Arc::new(NoFlow), Arc::new(|_| ([0.0; 2], 0.0)))?;
    let mut params = DiscretizationParams::new(space.order());
    params.vorticity = false;
    params.b_inf = Some(1.0);
    let asm = Assembler::new(mesh, space, &problem, params)?;
    Ok(asm.assemble_broken_h1())
}

/// Raw velocity vector holding the interpolant of the boundary values on
/// the constrained DOFs and zero elsewhere.
pub fn boundary_lift(space: &FeSpace, problem: &OseenProblem) -> Vec<f64> {
    let mut lift = vec![0.0; space.num_raw()];
    if let Some(g) = problem.boundary.as_deref() {
        let full = space.interpolate(&|x| {
            let j = g.velocity(x);
            [[j[0][0], j[0][DX], j[0][DY]], [j[1][0], j[1][DX], j[1][DY]]]
        });
        for d in space.constrained() {
            lift[d] = full[d];
        }
    }
    lift
}

/// `-B(lift)`, the pressure rows of the load for a lifted velocity.
pub fn pressure_lift_rhs(mesh: &Mesh, vspace: &FeSpace, qspace: &FeSpace, degree: usize, lift: &[f64]) -> Result<Vec<f64>> {
    let rule = cached_triangle_rule(degree)?;
    let locals = par::map_indexed(mesh.num_triangles(), |t| {
        if vspace.element_dofs(t).iter().all(|&d| lift[d] == 0.0) {
            return None;
        }
        let local = vspace.local_coefficients(lift, t);
        let vb = vspace.basis(t);
        let qb = qspace.basis(t);
        let area = vb.area();
        let mut out = vec![0.0; qb.dim()];
        let mut bq = Vec::new();
        for (r, w) in rule.iter() {
            let x = vb.geometry().map(*r);
            let u = vb.eval_combination(&local, x, 1);
            let div = u[0][DX] + u[1][DY];
            qb.eval_jets(x, 0, &mut bq);
            for (i, o) in out.iter_mut().enumerate() {
                *o += 2.0 * area * w * div * bq[i * 10];
            }
        }
        Some(out)
    });
    let mut rhs = vec![0.0; qspace.num_free()];
    for (t, loc) in locals.iter().enumerate() {
        if let Some(loc) = loc {
            for (&r, v) in qspace.element_free_dofs(t).iter().zip(loc) {
                if r != NONE {
                    rhs[r] += v;
                }
            }
        }
    }
    Ok(rhs)
}

/// Pressure coupling `B[q, v] = -(div v, q)` on free velocity DOFs.
pub fn assemble_pressure_coupling(mesh: &Mesh, vspace: &FeSpace, qspace: &FeSpace, degree: usize) -> Result<CsrMatrix> {
    let rule = cached_triangle_rule(degree)?;
    let locals = par::map_indexed(mesh.num_triangles(), |t| {
        let vb = vspace.basis(t);
        let qb = qspace.basis(t);
        let geom = vb.geometry();
        let area = geom.area();
        let (nv, nq) = (vb.dim(), qb.dim());
        let mut out = vec![0.0; nq * nv];
        let (mut bv, mut bq) = (Vec::new(), Vec::new());
        for (r, w) in rule.iter() {
            let x = geom.map(*r);
            vb.eval_jets(x, 1, &mut bv);
            qb.eval_jets(x, 0, &mut bq);
            for i in 0..nq {
                let q = bq[i * 10];
                for j in 0..nv {
                    let div = bv[(2 * j) * 10 + DX] + bv[(2 * j + 1) * 10 + DY];
                    out[i * nv + j] -= 2.0 * area * w * div * q;
                }
            }
        }
        out
    });
    let mut triplets = Vec::new();
    for (t, loc) in locals.iter().enumerate() {
        let rows = qspace.element_free_dofs(t);
        let cols = vspace.element_free_dofs(t);
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                if r != NONE && c != NONE {
                    triplets.push((r, c, loc[i * cols.len() + j]));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(qspace.num_free(), vspace.num_free(), &triplets))
}

/// Integrals of the pressure basis functions, `m[j] = (1, q_j)`.
pub fn pressure_mean_vector(qspace: &FeSpace) -> Vec<f64> {
    let mut m = vec![0.0; qspace.num_free()];
    let degree = (2 * qspace.order()).max(1);
    let rule = cached_triangle_rule(degree).expect("supported degree");
    let mut buf = Vec::new();
    for t in 0..qspace.num_elements() {
        let b = qspace.basis(t);
        let area = b.area();
        for (r, w) in rule.iter() {
            b.eval_jets(b.geometry().map(*r), 0, &mut buf);
            for (j, &g) in qspace.element_free_dofs(t).iter().enumerate() {
                m[g] += 2.0 * area * w * buf[j * 10];
            }
        }
    }
    m
}

/// Discrete curl from the potential space into the velocity space, on free
/// DOFs of both.
#[derive(Debug, Clone)]
pub struct CurlMap {
    pub matrix: CsrMatrix,
    /// Largest coefficient the curl of a free potential function puts on a
    /// constrained velocity DOF. Zero when the boundary conditions match.
    pub constraint_leak: f64,
}

pub fn curl_map(zspace: &FeSpace, vspace: &FeSpace) -> Result<CurlMap> {
    if zspace.num_elements() != vspace.num_elements() {
        return Err(Error::InvalidArgument("potential and velocity spaces live on different meshes".into()));
    }
    let locals = par::map_indexed(zspace.num_elements(), |t| {
        let zb = zspace.basis(t);
        let vb = vspace.basis(t);
        (0..zb.dim())
            .map(|j| {
                let mut unit = vec![0.0; zb.dim()];
                unit[j] = 1.0;
                let field = |x: Point| {
                    let z = zb.eval_combination(&unit, x, 2)[0];
                    [[z[DY], z[DXY], z[DYY]], [-z[DX], -z[DXX], -z[DXY]]]
                };
                vb.apply_dofs(&field)
            })
            .collect::<Vec<_>>()
    });
    let mut seen = std::collections::HashSet::new();
    let mut triplets = Vec::new();
    let mut leak: f64 = 0.0;
    for (t, cols) in locals.iter().enumerate() {
        let zdofs = zspace.element_dofs(t);
        let vdofs = vspace.element_dofs(t);
        for (j, col) in cols.iter().enumerate() {
            let Some(zc) = zspace.free_index(zdofs[j]) else { continue };
            for (i, &v) in col.iter().enumerate() {
                match vspace.free_index(vdofs[i]) {
                    Some(vr) => {
                        if seen.insert((vr, zc)) {
                            triplets.push((vr, zc, v));
                        }
                    }
                    None => leak = leak.max(v.abs()),
                }
            }
        }
    }
    Ok(CurlMap {
        matrix: CsrMatrix::from_triplets(vspace.num_free(), zspace.num_free(), &triplets),
        constraint_leak: leak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe_space::{build_potential_space, build_pressure_space, build_velocity_space};
    use crate::mesh::build_structured_mesh;
    use crate::problem::{benchmark_problem, Flow};

    struct Constant {
        b: Point,
        c: f64,
    }

    impl Flow for Constant {
        fn advection(&self, _: Point) -> (Point, [[f64; 2]; 2]) {
            (self.b, [[0.0; 2]; 2])
        }
        fn reaction(&self, _: Point) -> (f64, Point) {
            (self.c, [0.0; 2])
        }
    }

    fn constant_problem(nu: f64, b: Point, c: f64) -> OseenProblem {
        OseenProblem::new(nu, 1.0, Arc::new(Constant { b, c }), Arc::new(|_| ([1.0, 0.0], 0.0))).unwrap()
    }

    #[test]
    fn tau_formula() {
        assert!((compute_tau(1e-6, 2.0, 0.1).unwrap() - 5e-4).abs() < 1e-16);
        assert!((compute_tau(1.0, 2.0, 0.1).unwrap() - 1e-4).abs() < 1e-16);
        assert!(compute_tau(1.0, 0.0, 0.1).is_err());
        assert_eq!(default_sigma(2), 36.0);
    }

    #[test]
    fn diffusion_symmetric_and_constant_kernel() {
        let m = build_structured_mesh(3, 0.2, 4).unwrap();
        let v = build_velocity_space(&m, 2).unwrap();
        let p = benchmark_problem(1.0).unwrap();
        let asm = Assembler::new(&m, &v, &p, DiscretizationParams::new(2)).unwrap();
        let d = asm.assemble_diffusion();
        assert!(d.symmetry_defect() <= 1e-12 * d.max_abs());
        let s = asm.assemble_vorticity_stab();
        assert!(s.symmetry_defect() <= 1e-12 * s.max_abs().max(1e-300));
    }

    #[test]
    fn zero_advection_gives_zero_convection() {
        let m = build_structured_mesh(2, 0.1, 1).unwrap();
        let v = build_velocity_space(&m, 2).unwrap();
        let p = constant_problem(1.0, [0.0, 0.0], 1.0);
        let mut params = DiscretizationParams::new(2);
        params.vorticity = false;
        let asm = Assembler::new(&m, &v, &p, params).unwrap();
        assert_eq!(asm.assemble_convection().max_abs(), 0.0);
    }

    #[test]
    fn curl_map_lands_in_divergence_free_fields() {
        let m = build_structured_mesh(2, 0.2, 3).unwrap();
        let v = build_velocity_space(&m, 2).unwrap();
        let q = build_pressure_space(&m, 1).unwrap();
        let z = build_potential_space(&m, 3).unwrap();
        let c = curl_map(&z, &v).unwrap();
        assert!(c.constraint_leak < 1e-10, "leak {}", c.constraint_leak);
        let b = assemble_pressure_coupling(&m, &v, &q, 6).unwrap();
        let bc = b.mul(&c.matrix);
        assert!(bc.max_abs() < 1e-10, "{}", bc.max_abs());
    }
}
