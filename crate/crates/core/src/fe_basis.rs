//! Per-element dual bases built directly on the physical triangle.
//!
//! Each basis is obtained by evaluating the element's degrees of freedom on a
//! monomial basis in scaled local coordinates `(x - c) / s`, where `c` is the
//! bounding-box center and `s` its half-width, and inverting the resulting
//! matrix. Basis functions are then polynomials in physical coordinates, so
//! no reference map or Piola transform is involved.
//!
//! Edge functionals use the global edge parametrization (from the lower to
//! the higher vertex index) and the fixed facet normal, so both elements
//! sharing an edge see identical functionals.

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::mesh::Mesh;
use crate::poly::{self, monomial_jets, monomials, num_derivs, Jet, DX, DY};
use crate::quadrature::{cached_edge_rule, cached_triangle_rule, shifted_legendre, MAX_DEGREE};
use crate::{Error, Point, Result};

/// Value and first derivatives `(v, dv/dx, dv/dy)` of each component.
pub type FieldValue = [[f64; 3]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DofKind {
    VertexValueComponent,
    EdgeNormalMoment,
    InteriorNedelecMoment,
    HermiteVertexValue,
    HermiteVertexDerivative,
    HermiteEdgeMoment,
    HermiteInteriorMoment,
    PressureMoment,
}

/// One degree of freedom: its kind, the local vertex/edge index (0 for
/// interior functionals) and a sub-index (component, derivative direction or
/// moment number).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofSpec {
    pub kind: DofKind,
    pub entity: usize,
    pub sub: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementFamily {
    Stenberg,
    Hermite,
    Dg,
}

/// Edge in global orientation with its fixed unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeFrame {
    pub start: Point,
    pub end: Point,
    pub normal: Point,
}

impl EdgeFrame {
    pub fn length(&self) -> f64 {
        ((self.end[0] - self.start[0]).powi(2) + (self.end[1] - self.start[1]).powi(2)).sqrt()
    }

    pub fn point(&self, t: f64) -> Point {
        [
            self.start[0] + t * (self.end[0] - self.start[0]),
            self.start[1] + t * (self.end[1] - self.start[1]),
        ]
    }
}

/// Triangle geometry with the oriented frames of its three edges. Local edge
/// `i` is opposite local vertex `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub vertices: [Point; 3],
    pub edges: [EdgeFrame; 3],
}

impl ElementGeometry {
    pub fn from_mesh(mesh: &Mesh, t: usize) -> Self {
        let vertices = mesh.triangle_points(t);
        let edges = mesh.triangle_facets(t).map(|f| {
            let facet = mesh.facet(f);
            EdgeFrame {
                start: mesh.vertex(facet.vertices[0]),
                end: mesh.vertex(facet.vertices[1]),
                normal: facet.normal,
            }
        });
        ElementGeometry { vertices, edges }
    }

    /// Geometry of a standalone triangle; edges are oriented by local vertex
    /// order and normals point outward.
    pub fn standalone(vertices: [Point; 3]) -> Self {
        let edges = [0, 1, 2].map(|i| {
            let (a, b) = ((i + 1) % 3, (i + 2) % 3);
            let (lo, hi) = (a.min(b), a.max(b));
            let (p, q) = (vertices[lo], vertices[hi]);
            let d = [q[0] - p[0], q[1] - p[1]];
            let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
            let mut n = [d[1] / len, -d[0] / len];
            let opp = vertices[i];
            if n[0] * (opp[0] - p[0]) + n[1] * (opp[1] - p[1]) > 0.0 {
                n = [-n[0], -n[1]];
            }
            EdgeFrame {
                start: p,
                end: q,
                normal: n,
            }
        });
        ElementGeometry { vertices, edges }
    }

    pub fn area(&self) -> f64 {
        crate::mesh::signed_area(self.vertices[0], self.vertices[1], self.vertices[2])
    }

    /// Maps a reference-triangle point to physical coordinates.
    pub fn map(&self, r: Point) -> Point {
        let [a, b, c] = self.vertices;
        [
            a[0] + (b[0] - a[0]) * r[0] + (c[0] - a[0]) * r[1],
            a[1] + (b[1] - a[1]) * r[0] + (c[1] - a[1]) * r[1],
        ]
    }

    fn frame(&self) -> (Point, f64) {
        let xs = self.vertices.map(|v| v[0]);
        let ys = self.vertices.map(|v| v[1]);
        let (x0, x1) = (xs.iter().cloned().fold(f64::INFINITY, f64::min), xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        let (y0, y1) = (ys.iter().cloned().fold(f64::INFINITY, f64::min), ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        ([0.5 * (x0 + x1), 0.5 * (y0 + y1)], 0.5 * (x1 - x0).max(y1 - y0))
    }
}

/// Vector polynomial in scaled local coordinates, coefficients over
/// [`poly::monomials`] of the given degree.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorPoly {
    pub degree: usize,
    pub coeffs: [Vec<f64>; 2],
}

impl VectorPoly {
    pub fn eval_local(&self, xi: f64, eta: f64) -> [f64; 2] {
        let mons = monomials(self.degree);
        let mut out = [0.0; 2];
        for (m, &(a, b)) in mons.iter().enumerate() {
            let v = xi.powi(a as i32) * eta.powi(b as i32);
            out[0] += self.coeffs[0][m] * v;
            out[1] += self.coeffs[1][m] * v;
        }
        out
    }
}

/// Basis of the first-kind Nedelec space
/// `N_r = P_r^2 + {b (-y, x) : b homogeneous of degree r}` in local
/// coordinates. Its dimension is `(r + 1)(r + 3)`.
pub fn nedelec_space(r: usize) -> Vec<VectorPoly> {
    let mons = monomials(r + 1);
    let nm = mons.len();
    let index = |a: usize, b: usize| mons.iter().position(|&e| e == (a, b)).expect("monomial in range");
    let mut out = Vec::with_capacity((r + 1) * (r + 3));
    for c in 0..2 {
        for &(a, b) in monomials(r).iter() {
            let mut coeffs = [vec![0.0; nm], vec![0.0; nm]];
            coeffs[c][index(a, b)] = 1.0;
            out.push(VectorPoly { degree: r + 1, coeffs });
        }
    }
    for i in 0..=r {
        // x^i y^(r-i) * (-y, x)
        let mut coeffs = [vec![0.0; nm], vec![0.0; nm]];
        coeffs[0][index(i, r - i + 1)] = -1.0;
        coeffs[1][index(i + 1, r - i)] = 1.0;
        out.push(VectorPoly { degree: r + 1, coeffs });
    }
    out
}

/// A dual basis on one physical triangle.
#[derive(Debug, Clone)]
pub struct ElementBasis {
    family: ElementFamily,
    geometry: ElementGeometry,
    /// Polynomial degree of the local space.
    degree: usize,
    ncomp: usize,
    center: Point,
    scale: f64,
    /// Column `j` holds the monomial coefficients of basis function `j`,
    /// component-major: `coeffs[j * ncomp * nmono + c * nmono + m]`.
    coeffs: Vec<f64>,
    dofs: Vec<DofSpec>,
    condition: f64,
    dof_quad_degree: usize,
}

/// A degree of freedom written as a weighted sum of point evaluations of the
/// values and first derivatives of each component.
type Functional = Vec<(Point, FieldValue)>;

const SINGULAR_CONDITION: f64 = 1e14;

impl ElementBasis {
    pub fn family(&self) -> ElementFamily {
        self.family
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn dim(&self) -> usize {
        self.dofs.len()
    }

    pub fn dofs(&self) -> &[DofSpec] {
        &self.dofs
    }

    pub fn geometry(&self) -> &ElementGeometry {
        &self.geometry
    }

    pub fn area(&self) -> f64 {
        self.geometry.area()
    }

    /// 1-norm condition estimate of the DOF matrix that was inverted.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    fn nmono(&self) -> usize {
        poly::dim(self.degree)
    }

    /// Jets of every basis function at `x`, derivatives up to `order`
    /// (at most 3). Layout: `out[(j * ncomp + c) * 10 + d]`.
    pub fn eval_jets(&self, x: Point, order: usize, out: &mut Vec<f64>) {
        let nm = self.nmono();
        let nd = num_derivs(order);
        let mut mono = [0.0; 10 * poly::dim(MAX_DEGREE)];
        monomial_jets(self.degree, self.center, self.scale, x, order, &mut mono);
        let n = self.dim();
        out.clear();
        out.resize(n * self.ncomp * 10, 0.0);
        let stride = self.ncomp * nm;
        for j in 0..n {
            let col = &self.coeffs[j * stride..(j + 1) * stride];
            for c in 0..self.ncomp {
                let dst = &mut out[(j * self.ncomp + c) * 10..(j * self.ncomp + c) * 10 + 10];
                for (m, &coef) in col[c * nm..(c + 1) * nm].iter().enumerate() {
                    if coef == 0.0 {
                        continue;
                    }
                    let src = &mono[m * 10..m * 10 + nd];
                    for d in 0..nd {
                        dst[d] += coef * src[d];
                    }
                }
            }
        }
    }

    /// Jet of the function with the given local coefficients at `x`.
    pub fn eval_combination(&self, local: &[f64], x: Point, order: usize) -> [Jet; 2] {
        let mut buf = Vec::new();
        self.eval_jets(x, order, &mut buf);
        let mut out = [[0.0; 10]; 2];
        for (j, &a) in local.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for c in 0..self.ncomp {
                for d in 0..10 {
                    out[c][d] += a * buf[(j * self.ncomp + c) * 10 + d];
                }
            }
        }
        out
    }

    /// Applies every degree of freedom to a field given by its values and
    /// first derivatives.
    pub fn apply_dofs(&self, field: &dyn Fn(Point) -> FieldValue) -> Vec<f64> {
        match self.family {
            ElementFamily::Dg => {
                let rule = cached_triangle_rule(self.dof_quad_degree).expect("valid degree");
                let area = self.area();
                let mut out = vec![0.0; self.dim()];
                let mut buf = Vec::new();
                for (r, w) in rule.iter() {
                    let x = self.geometry.map(*r);
                    let v = field(x)[0][0];
                    self.eval_jets(x, 0, &mut buf);
                    for (j, o) in out.iter_mut().enumerate() {
                        *o += 2.0 * area * w * v * buf[j * 10];
                    }
                }
                out
            }
            _ => functionals(self.family, &self.geometry, self.degree, self.center, self.scale, self.dof_quad_degree)
                .iter()
                .map(|fun| apply(fun, field))
                .collect(),
        }
    }

    /// Matrix `DOF_i(omega_j)`, which is the identity for a dual basis.
    pub fn duality_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut local = vec![0.0; n];
            local[j] = 1.0;
            let f = |x: Point| -> FieldValue {
                let jet = self.eval_combination(&local, x, 1);
                [[jet[0][0], jet[0][DX], jet[0][DY]], [jet[1][0], jet[1][DX], jet[1][DY]]]
            };
            cols.push(self.apply_dofs(&f));
        }
        (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
    }
}

fn apply(fun: &Functional, field: &dyn Fn(Point) -> FieldValue) -> f64 {
    let mut s = 0.0;
    for (x, w) in fun {
        let v = field(*x);
        for c in 0..2 {
            for d in 0..3 {
                if w[c][d] != 0.0 {
                    s += w[c][d] * v[c][d];
                }
            }
        }
    }
    s
}

fn dof_quad_degree(degree: usize) -> usize {
    (2 * degree + 4).min(MAX_DEGREE)
}

/// The functionals of a Stenberg or Hermite element, in DOF order.
fn functionals(
    family: ElementFamily,
    geom: &ElementGeometry,
    degree: usize,
    center: Point,
    scale: f64,
    quad_degree: usize,
) -> Vec<Functional> {
    let erule = cached_edge_rule(quad_degree).expect("valid degree");
    let trule = cached_triangle_rule(quad_degree).expect("valid degree");
    let area = geom.area();
    let mut out = Vec::new();
    let unit = |c: usize, d: usize| {
        let mut w = [[0.0; 3]; 2];
        w[c][d] = 1.0;
        w
    };
    match family {
        ElementFamily::Stenberg => {
            let k = degree;
            for v in &geom.vertices {
                for c in 0..2 {
                    out.push(vec![(*v, unit(c, 0))]);
                }
            }
            for e in &geom.edges {
                for j in 0..k - 1 {
                    out.push(
                        erule
                            .iter()
                            .map(|(t, w)| {
                                let l = w * shifted_legendre(j, *t);
                                let mut wt = [[0.0; 3]; 2];
                                wt[0][0] = l * e.normal[0];
                                wt[1][0] = l * e.normal[1];
                                (e.point(*t), wt)
                            })
                            .collect(),
                    );
                }
            }
            if k >= 2 {
                for q in nedelec_space(k - 2) {
                    out.push(
                        trule
                            .iter()
                            .map(|(r, w)| {
                                let x = geom.map(*r);
                                let qv = q.eval_local((x[0] - center[0]) / scale, (x[1] - center[1]) / scale);
                                // (1/|K|) * integral = 2 * sum w_q (reference area 1/2)
                                let mut wt = [[0.0; 3]; 2];
                                wt[0][0] = 2.0 * w * qv[0];
                                wt[1][0] = 2.0 * w * qv[1];
                                (x, wt)
                            })
                            .collect(),
                    );
                }
            }
        }
        ElementFamily::Hermite => {
            for v in &geom.vertices {
                out.push(vec![(*v, unit(0, 0))]);
                out.push(vec![(*v, unit(0, 1))]);
                out.push(vec![(*v, unit(0, 2))]);
            }
            if degree >= 4 {
                for e in &geom.edges {
                    for j in 0..=degree - 4 {
                        out.push(
                            erule
                                .iter()
                                .map(|(t, w)| {
                                    let mut wt = [[0.0; 3]; 2];
                                    wt[0][0] = w * shifted_legendre(j, *t);
                                    (e.point(*t), wt)
                                })
                                .collect(),
                        );
                    }
                }
            }
            // Moments against the L2-orthonormal basis of P_{degree-3}, scaled by
            // sqrt|K| so the lowest one is the element mean.
            let ortho = dg_basis(geom, degree - 3, 0).expect("positive area");
            let mut jets = Vec::new();
            for i in 0..ortho.dim() {
                out.push(
                    trule
                        .iter()
                        .map(|(r, w)| {
                            let x = geom.map(*r);
                            ortho.eval_jets(x, 0, &mut jets);
                            let mut wt = [[0.0; 3]; 2];
                            wt[0][0] = 2.0 * w * area.sqrt() * jets[i * 10];
                            (x, wt)
                        })
                        .collect(),
                );
            }
        }
        ElementFamily::Dg => unreachable!("DG functionals depend on the basis itself"),
    }
    out
}

fn invert_dof_matrix(mut phi: Mat<f64>, element: usize) -> Result<(Mat<f64>, f64)> {
    let n = phi.nrows();
    // Derivative functionals carry a 1/h factor; equilibrate rows first.
    let row_scale: Vec<f64> = (0..n)
        .map(|i| {
            let m = (0..n).map(|j| phi[(i, j)].abs()).fold(0.0, f64::max);
            if m > 0.0 { 1.0 / m } else { 1.0 }
        })
        .collect();
    for i in 0..n {
        for j in 0..n {
            phi[(i, j)] *= row_scale[i];
        }
    }
    let norm1 = |m: &Mat<f64>| {
        (0..m.ncols())
            .map(|j| (0..m.nrows()).map(|i| m[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let lu = phi.partial_piv_lu();
    let mut inv = lu.solve(Mat::<f64>::identity(n, n));
    let condition = norm1(&phi) * norm1(&inv);
    for j in 0..n {
        for i in 0..n {
            inv[(i, j)] *= row_scale[j];
        }
    }
    if !condition.is_finite() || condition > SINGULAR_CONDITION {
        return Err(Error::SingularElement { element, condition });
    }
    Ok((inv, condition))
}

fn build_from_functionals(
    family: ElementFamily,
    geometry: ElementGeometry,
    degree: usize,
    ncomp: usize,
    dofs: Vec<DofSpec>,
    element: usize,
) -> Result<ElementBasis> {
    if geometry.area() <= 0.0 {
        return Err(Error::SingularElement {
            element,
            condition: f64::INFINITY,
        });
    }
    let (center, scale) = geometry.frame();
    let qd = dof_quad_degree(degree);
    let funs = functionals(family, &geometry, degree, center, scale, qd);
    let nm = poly::dim(degree);
    let n = ncomp * nm;
    assert_eq!(funs.len(), n, "DOF count must match polynomial dimension");
    assert_eq!(dofs.len(), n);
    let mut phi = Mat::<f64>::zeros(n, n);
    let mut mono = vec![0.0; nm * 10];
    for (i, fun) in funs.iter().enumerate() {
        for (x, w) in fun {
            monomial_jets(degree, center, scale, *x, 1, &mut mono);
            for c in 0..ncomp {
                for m in 0..nm {
                    let s = w[c][0] * mono[m * 10] + w[c][1] * mono[m * 10 + DX] + w[c][2] * mono[m * 10 + DY];
                    phi[(i, c * nm + m)] += s;
                }
            }
        }
    }
    let (inv, condition) = invert_dof_matrix(phi, element)?;
    let mut coeffs = vec![0.0; n * n];
    for j in 0..n {
        for r in 0..n {
            coeffs[j * n + r] = inv[(r, j)];
        }
    }
    Ok(ElementBasis {
        family,
        geometry,
        degree,
        ncomp,
        center,
        scale,
        coeffs,
        dofs,
        condition,
        dof_quad_degree: qd,
    })
}

/// Stenberg element of order `k >= 2`: vertex values, normal moments against
/// Legendre polynomials of degree `<= k - 2` on each edge, and moments
/// against `N_{k-2}` in the interior.
pub fn stenberg_basis(geometry: &ElementGeometry, k: usize, element: usize) -> Result<ElementBasis> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("Stenberg element needs k >= 2, got {k}")));
    }
    if 2 * k + 4 > MAX_DEGREE + 4 {
        return Err(Error::InvalidArgument(format!("Stenberg order {k} too high")));
    }
    let mut dofs = Vec::new();
    for v in 0..3 {
        for c in 0..2 {
            dofs.push(DofSpec {
                kind: DofKind::VertexValueComponent,
                entity: v,
                sub: c,
            });
        }
    }
    for e in 0..3 {
        for j in 0..k - 1 {
            dofs.push(DofSpec {
                kind: DofKind::EdgeNormalMoment,
                entity: e,
                sub: j,
            });
        }
    }
    for i in 0..(k - 1) * (k + 1) {
        dofs.push(DofSpec {
            kind: DofKind::InteriorNedelecMoment,
            entity: 0,
            sub: i,
        });
    }
    build_from_functionals(ElementFamily::Stenberg, *geometry, k, 2, dofs, element)
}

/// Hermite element of degree `degree >= 3`: value and gradient at vertices,
/// edge moments against Legendre polynomials of degree `<= degree - 4`, and
/// interior moments against `P_{degree - 3}`.
pub fn hermite_basis(geometry: &ElementGeometry, degree: usize, element: usize) -> Result<ElementBasis> {
    if degree < 3 {
        return Err(Error::InvalidArgument(format!("Hermite element needs degree >= 3, got {degree}")));
    }
    if degree > 8 {
        return Err(Error::InvalidArgument(format!("Hermite degree {degree} too high")));
    }
    let mut dofs = Vec::new();
    for v in 0..3 {
        dofs.push(DofSpec {
            kind: DofKind::HermiteVertexValue,
            entity: v,
            sub: 0,
        });
        for d in 0..2 {
            dofs.push(DofSpec {
                kind: DofKind::HermiteVertexDerivative,
                entity: v,
                sub: d,
            });
        }
    }
    if degree >= 4 {
        for e in 0..3 {
            for j in 0..=degree - 4 {
                dofs.push(DofSpec {
                    kind: DofKind::HermiteEdgeMoment,
                    entity: e,
                    sub: j,
                });
            }
        }
    }
    for i in 0..poly::dim(degree - 3) {
        dofs.push(DofSpec {
            kind: DofKind::HermiteInteriorMoment,
            entity: 0,
            sub: i,
        });
    }
    build_from_functionals(ElementFamily::Hermite, *geometry, degree, 1, dofs, element)
}

/// L2-orthonormal basis of `P_degree` on the element, obtained from the
/// Cholesky factor of the monomial Gram matrix.
pub fn dg_basis(geometry: &ElementGeometry, degree: usize, element: usize) -> Result<ElementBasis> {
    let area = geometry.area();
    if area <= 0.0 {
        return Err(Error::SingularElement {
            element,
            condition: f64::INFINITY,
        });
    }
    let (center, scale) = geometry.frame();
    let nm = poly::dim(degree);
    let qd = (2 * degree).max(1);
    let rule = cached_triangle_rule(qd)?;
    let mut gram = Mat::<f64>::zeros(nm, nm);
    let mut mono = vec![0.0; nm * 10];
    for (r, w) in rule.iter() {
        let x = geometry.map(*r);
        monomial_jets(degree, center, scale, x, 0, &mut mono);
        for i in 0..nm {
            for j in 0..nm {
                gram[(i, j)] += 2.0 * area * w * mono[i * 10] * mono[j * 10];
            }
        }
    }
    // Gram-Schmidt via Cholesky: G = L L^T, orthonormal basis = L^{-1} * monomials.
    let mut l = Mat::<f64>::zeros(nm, nm);
    for j in 0..nm {
        let mut d = gram[(j, j)];
        for p in 0..j {
            d -= l[(j, p)] * l[(j, p)];
        }
        if d <= 0.0 {
            return Err(Error::SingularElement {
                element,
                condition: f64::INFINITY,
            });
        }
        l[(j, j)] = d.sqrt();
        for i in j + 1..nm {
            let mut s = gram[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = s / l[(j, j)];
        }
    }
    // Row i of L^{-1} gives the coefficients of basis function i.
    let mut linv = Mat::<f64>::zeros(nm, nm);
    for c in 0..nm {
        for i in 0..nm {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for p in 0..i {
                s -= l[(i, p)] * linv[(p, c)];
            }
            linv[(i, c)] = s / l[(i, i)];
        }
    }
    let mut coeffs = vec![0.0; nm * nm];
    for j in 0..nm {
        for m in 0..nm {
            coeffs[j * nm + m] = linv[(j, m)];
        }
    }
    let dofs = (0..nm)
        .map(|i| DofSpec {
            kind: DofKind::PressureMoment,
            entity: 0,
            sub: i,
        })
        .collect();
    let d0 = (0..nm).map(|i| l[(i, i)]).fold(0.0, f64::max);
    let d1 = (0..nm).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
    Ok(ElementBasis {
        family: ElementFamily::Dg,
        geometry: *geometry,
        degree,
        ncomp: 1,
        center,
        scale,
        coeffs,
        dofs,
        condition: (d0 / d1).powi(2),
        dof_quad_degree: (2 * degree + 4).min(MAX_DEGREE),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reference() -> ElementGeometry {
        ElementGeometry::standalone([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    }

    fn skewed() -> ElementGeometry {
        ElementGeometry::standalone([[0.13, 0.21], [0.41, 0.18], [0.22, 0.47]])
    }

    fn max_identity_defect(b: &ElementBasis) -> f64 {
        let m = b.duality_matrix();
        let mut e: f64 = 0.0;
        for (i, row) in m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let d = if i == j { 1.0 } else { 0.0 };
                e = e.max((v - d).abs());
            }
        }
        e
    }

    #[test]
    fn nedelec_dimensions() {
        assert_eq!(nedelec_space(0).len(), 3);
        assert_eq!(nedelec_space(1).len(), 8);
        assert_eq!(nedelec_space(2).len(), 15);
    }

    #[test]
    fn nedelec_radial_component_degree() {
        // w . x has degree <= r + 1 and its top-degree part comes from P_r^2 only,
        // so every extra member satisfies w . x = 0 identically.
        for r in 0..4 {
            let space = nedelec_space(r);
            let extra = &space[2 * poly::dim(r)..];
            for w in extra {
                for &(xi, eta) in &[(0.3, -0.7), (1.1, 0.4), (-0.2, 0.9)] {
                    let v = w.eval_local(xi, eta);
                    assert!((v[0] * xi + v[1] * eta).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn stenberg_dof_layout() {
        let b = stenberg_basis(&reference(), 2, 0).unwrap();
        assert_eq!(b.dim(), 12);
        let count = |k: DofKind| b.dofs().iter().filter(|d| d.kind == k).count();
        assert_eq!(count(DofKind::VertexValueComponent), 6);
        assert_eq!(count(DofKind::EdgeNormalMoment), 3);
        assert_eq!(count(DofKind::InteriorNedelecMoment), 3);
        for k in 2..=5 {
            let b = stenberg_basis(&skewed(), k, 0).unwrap();
            assert_eq!(b.dim(), (k + 1) * (k + 2));
        }
        assert!(stenberg_basis(&reference(), 1, 0).is_err());
    }

    #[test]
    fn stenberg_duality() {
        for k in 2..=4 {
            let b = stenberg_basis(&skewed(), k, 0).unwrap();
            assert!(max_identity_defect(&b) < 1e-10, "k={k}");
        }
    }

    #[test]
    fn constant_field_dofs() {
        let g = skewed();
        let b = stenberg_basis(&g, 2, 0).unwrap();
        let vals = b.apply_dofs(&|_| [[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        for (d, v) in b.dofs().iter().zip(&vals) {
            match d.kind {
                DofKind::VertexValueComponent => assert_eq!(*v, if d.sub == 0 { 1.0 } else { 0.0 }),
                DofKind::EdgeNormalMoment => assert!((v - g.edges[d.entity].normal[0]).abs() < 1e-14),
                _ => {}
            }
        }
    }

    #[test]
    fn stenberg_reproduces_linear_field() {
        let b = stenberg_basis(&skewed(), 2, 0).unwrap();
        let f = |x: Point| [[x[0], 1.0, 0.0], [x[1], 0.0, 1.0]];
        let local = b.apply_dofs(&f);
        let rule = cached_triangle_rule(6).unwrap();
        for (r, _) in rule.iter() {
            let x = b.geometry().map(*r);
            let jet = b.eval_combination(&local, x, 1);
            assert!((jet[0][0] - x[0]).abs() < 1e-12);
            assert!((jet[1][0] - x[1]).abs() < 1e-12);
            assert!((jet[0][DX] + jet[1][DY] - 2.0).abs() < 1e-11);
        }
    }

    #[test]
    fn hermite_layout_and_reproduction() {
        let g = skewed();
        let b = hermite_basis(&g, 3, 0).unwrap();
        assert_eq!(b.dim(), 10);
        assert_eq!(hermite_basis(&g, 4, 0).unwrap().dim(), 15);
        assert!(max_identity_defect(&b) < 1e-10);
        let z = |x: Point| [[x[0].powi(3), 3.0 * x[0] * x[0], 0.0], [0.0; 3]];
        let local = b.apply_dofs(&z);
        for p in [[0.2, 0.25], [0.3, 0.3], [0.25, 0.4]] {
            let jet = b.eval_combination(&local, p, 3);
            assert!((jet[0][0] - p[0].powi(3)).abs() < 1e-12);
            // curl z = (z_y, -z_x) is a P2 field: third derivatives of z are constant
            assert!((jet[0][poly::DXXX] - 6.0).abs() < 1e-8);
        }
        assert!(hermite_basis(&g, 2, 0).is_err());
    }

    #[test]
    fn dg_orthonormal() {
        let g = skewed();
        let b = dg_basis(&g, 1, 0).unwrap();
        assert_eq!(b.dim(), 3);
        let m = b.duality_matrix();
        for i in 0..3 {
            for j in 0..3 {
                let d = if i == j { 1.0 } else { 0.0 };
                assert!((m[i][j] - d).abs() < 1e-12);
            }
        }
        // phi_0 = |K|^{-1/2}: integral is |K|^{1/2}.
        let area = g.area();
        let rule = cached_triangle_rule(4).unwrap();
        let mut buf = Vec::new();
        let mut integral = 0.0;
        for (r, w) in rule.iter() {
            let x = g.map(*r);
            b.eval_jets(x, 0, &mut buf);
            integral += 2.0 * area * w * buf[0];
        }
        assert!((integral - area.sqrt()).abs() < 1e-12);
    }

    fn random_triangle(rng: &mut ChaCha8Rng) -> ElementGeometry {
        loop {
            let s: f64 = rng.random_range(0.01..1.0);
            let o = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let v = [0, 1, 2].map(|_| [o[0] + s * rng.random_range(0.0..1.0), o[1] + s * rng.random_range(0.0..1.0)]);
            let g = ElementGeometry::standalone(v);
            let m = crate::mesh::Mesh::from_triangles(v.to_vec(), vec![[0, 1, 2]]);
            if let Ok(m) = m {
                if crate::mesh::mesh_metrics(&m).min_angle > 0.35 && g.area().abs() > 0.0 {
                    return ElementGeometry::standalone(m.triangle_points(0));
                }
            }
        }
    }

    #[test]
    fn random_triangles_duality_and_reproduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let g = random_triangle(&mut rng);
            let b = stenberg_basis(&g, 3, 0).unwrap();
            assert!(max_identity_defect(&b) < 1e-10);
            // random P3 vector polynomial is reproduced
            let p: Vec<Poly2> = (0..2)
                .map(|_| {
                    poly::monomials(3)
                        .into_iter()
                        .fold(Poly2::zero(), |acc, (a, e)| acc.add(&Poly2::monomial(rng.random_range(-1.0..1.0), a as u32, e as u32)))
                })
                .collect();
            let f = |x: Point| {
                let j0 = p[0].jet(x);
                let j1 = p[1].jet(x);
                [[j0[0], j0[DX], j0[DY]], [j1[0], j1[DX], j1[DY]]]
            };
            let local = b.apply_dofs(&f);
            let c = g.map([0.3, 0.3]);
            let jet = b.eval_combination(&local, c, 3);
            let e0 = p[0].jet(c);
            // Roundoff in derivative of order m grows like h^-m.
            let h = g.area().sqrt();
            for (d, &(i, j)) in poly::DERIVS.iter().enumerate() {
                let tol = 1e-10 * (1.0 + e0[d].abs()) / h.powi((i + j) as i32);
                assert!((jet[0][d] - e0[d]).abs() < tol, "d={d} {} {}", jet[0][d], e0[d]);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let g = skewed();
        let b = stenberg_basis(&g, 3, 0).unwrap();
        let x = g.map([0.3, 0.35]);
        let hstep = 1e-5;
        let mut buf = Vec::new();
        let mut bp = Vec::new();
        let mut bm = Vec::new();
        b.eval_jets(x, 3, &mut buf);
        for (dir, pairs) in [(0usize, [(0, 1), (1, 3), (2, 4), (3, 6), (4, 7), (5, 8)]), (1, [(0, 2), (1, 4), (2, 5), (3, 7), (4, 8), (5, 9)])] {
            let mut xp = x;
            let mut xm = x;
            xp[dir] += hstep;
            xm[dir] -= hstep;
            b.eval_jets(xp, 3, &mut bp);
            b.eval_jets(xm, 3, &mut bm);
            for j in 0..b.dim() * 2 {
                for (lo, hi) in pairs {
                    let fd = (bp[j * 10 + lo] - bm[j * 10 + lo]) / (2.0 * hstep);
                    let an = buf[j * 10 + hi];
                    assert!((fd - an).abs() <= 1e-6 * (1.0 + an.abs()), "fd {fd} vs {an}");
                }
            }
        }
    }
}
