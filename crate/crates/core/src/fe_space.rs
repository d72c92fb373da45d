//! Global degree-of-freedom numbering and strong boundary constraints.
//!
//! Raw DOFs are numbered in blocks: vertex DOFs first, then edge DOFs, then
//! element-interior DOFs. Constrained raw DOFs are dropped from the free
//! numbering used by all assembled systems.

use crate::fe_basis::{dg_basis, hermite_basis, stenberg_basis, ElementBasis, ElementGeometry, FieldValue};
use crate::mesh::Mesh;
use crate::par;
use crate::poly;
use crate::sparse::NONE;
use crate::{Error, Point, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    Velocity,
    Pressure,
    Potential,
}

#[derive(Debug, Clone)]
pub struct FeSpace {
    kind: SpaceKind,
    order: usize,
    bases: Vec<ElementBasis>,
    /// Raw global index of each local DOF, per element.
    element_dofs: Vec<Vec<usize>>,
    /// Free index of each local DOF, [`NONE`] if constrained.
    element_free: Vec<Vec<usize>>,
    num_raw: usize,
    free_of_raw: Vec<usize>,
    raw_of_free: Vec<usize>,
    vertex_offset: usize,
    edge_offset: usize,
    cell_offset: usize,
}

/// Options for the velocity space.
#[derive(Debug, Clone, Copy, Default)]
pub struct VelocityOptions {
    /// Constrain the interior moments to zero. This removes the bubbles the
    /// pressure coupling needs and serves as a negative control.
    pub drop_interior: bool,
}

impl FeSpace {
    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    /// Polynomial degree of the local space.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_raw(&self) -> usize {
        self.num_raw
    }

    pub fn num_free(&self) -> usize {
        self.raw_of_free.len()
    }

    pub fn num_elements(&self) -> usize {
        self.bases.len()
    }

    pub fn basis(&self, t: usize) -> &ElementBasis {
        &self.bases[t]
    }

    pub fn element_dofs(&self, t: usize) -> &[usize] {
        &self.element_dofs[t]
    }

    /// Free indices of the local DOFs of element `t`, [`NONE`] where
    /// constrained.
    pub fn element_free_dofs(&self, t: usize) -> &[usize] {
        &self.element_free[t]
    }

    pub fn is_constrained(&self, raw: usize) -> bool {
        self.free_of_raw[raw] == NONE
    }

    pub fn free_index(&self, raw: usize) -> Option<usize> {
        let f = self.free_of_raw[raw];
        (f != NONE).then_some(f)
    }

    pub fn raw_index(&self, free: usize) -> usize {
        self.raw_of_free[free]
    }

    pub fn constrained(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_raw).filter(|&r| self.is_constrained(r))
    }

    /// Offsets of the vertex, edge and interior blocks.
    pub fn block_offsets(&self) -> [usize; 3] {
        [self.vertex_offset, self.edge_offset, self.cell_offset]
    }

    pub fn restrict(&self, raw: &[f64]) -> Vec<f64> {
        self.raw_of_free.iter().map(|&r| raw[r]).collect()
    }

    /// Raw vector with constrained entries set to zero.
    pub fn extend(&self, free: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_raw];
        for (f, &r) in self.raw_of_free.iter().enumerate() {
            out[r] = free[f];
        }
        out
    }

    /// Local coefficients on element `t` from a raw global vector.
    pub fn local_coefficients(&self, raw: &[f64], t: usize) -> Vec<f64> {
        self.element_dofs[t].iter().map(|&r| raw[r]).collect()
    }

    /// Applies every DOF functional to `field`; returns a raw vector. DOFs
    /// shared by several elements are evaluated once, by the first owner.
    pub fn interpolate(&self, field: &(dyn Fn(Point) -> FieldValue + Sync)) -> Vec<f64> {
        let local = par::map_indexed(self.num_elements(), |t| self.bases[t].apply_dofs(field));
        let mut out = vec![f64::NAN; self.num_raw];
        for (t, vals) in local.iter().enumerate() {
            for (&r, &v) in self.element_dofs[t].iter().zip(vals) {
                if out[r].is_nan() {
                    out[r] = v;
                }
            }
        }
        out
    }

    /// Jet of the discrete function at `x` in element `t`.
    pub fn evaluate(&self, raw: &[f64], t: usize, x: Point, order: usize) -> poly::VectorJet {
        let local = self.local_coefficients(raw, t);
        self.bases[t].eval_combination(&local, x, order)
    }
}

struct Layout {
    per_vertex: usize,
    per_edge: usize,
    per_cell: usize,
}

fn number(
    mesh: &Mesh,
    kind: SpaceKind,
    order: usize,
    bases: Vec<ElementBasis>,
    layout: Layout,
    constrained: impl Fn(&crate::fe_basis::DofSpec, usize) -> bool,
) -> FeSpace {
    let vertex_offset = 0;
    let edge_offset = layout.per_vertex * mesh.num_vertices();
    let cell_offset = edge_offset + layout.per_edge * mesh.num_facets();
    let num_raw = cell_offset + layout.per_cell * mesh.num_triangles();
    let mut is_constrained = vec![false; num_raw];
    let mut element_dofs = Vec::with_capacity(bases.len());
    for (t, b) in bases.iter().enumerate() {
        let tri = mesh.triangle(t);
        let facets = mesh.triangle_facets(t);
        let mut dofs = Vec::with_capacity(b.dim());
        let mut edge_count = [0usize; 3];
        let mut cell_count = 0;
        let mut vertex_count = [0usize; 3];
        for spec in b.dofs() {
            use crate::fe_basis::DofKind::*;
            let raw = match spec.kind {
                VertexValueComponent | HermiteVertexValue | HermiteVertexDerivative => {
                    let v = tri[spec.entity];
                    let r = vertex_offset + v * layout.per_vertex + vertex_count[spec.entity];
                    vertex_count[spec.entity] += 1;
                    if constrained(spec, v) {
                        is_constrained[r] = true;
                    }
                    r
                }
                EdgeNormalMoment | HermiteEdgeMoment => {
                    let f = facets[spec.entity];
                    let r = edge_offset + f * layout.per_edge + edge_count[spec.entity];
                    edge_count[spec.entity] += 1;
                    if constrained(spec, f) {
                        is_constrained[r] = true;
                    }
                    r
                }
                InteriorNedelecMoment | HermiteInteriorMoment | PressureMoment => {
                    let r = cell_offset + t * layout.per_cell + cell_count;
                    cell_count += 1;
                    if constrained(spec, t) {
                        is_constrained[r] = true;
                    }
                    r
                }
            };
            dofs.push(raw);
        }
        element_dofs.push(dofs);
    }
    let mut free_of_raw = vec![NONE; num_raw];
    let mut raw_of_free = Vec::new();
    for r in 0..num_raw {
        if !is_constrained[r] {
            free_of_raw[r] = raw_of_free.len();
            raw_of_free.push(r);
        }
    }
    let element_free = element_dofs
        .iter()
        .map(|d| d.iter().map(|&r| free_of_raw[r]).collect())
        .collect();
    FeSpace {
        kind,
        order,
        bases,
        element_dofs,
        element_free,
        num_raw,
        free_of_raw,
        raw_of_free,
        vertex_offset,
        edge_offset,
        cell_offset,
    }
}

fn build_bases(mesh: &Mesh, f: impl Fn(&ElementGeometry, usize) -> Result<ElementBasis> + Sync) -> Result<Vec<ElementBasis>> {
    par::map_indexed(mesh.num_triangles(), |t| f(&ElementGeometry::from_mesh(mesh, t), t))
        .into_iter()
        .collect()
}

/// Stenberg velocity space of order `k` with homogeneous strong boundary
/// conditions: both components at boundary vertices and normal moments on
/// boundary edges.
pub fn build_velocity_space(mesh: &Mesh, k: usize) -> Result<FeSpace> {
    build_velocity_space_with(mesh, k, VelocityOptions::default())
}

pub fn build_velocity_space_with(mesh: &Mesh, k: usize, options: VelocityOptions) -> Result<FeSpace> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("velocity order must satisfy k >= 2, got k = {k}")));
    }
    let bases = build_bases(mesh, |g, t| stenberg_basis(g, k, t))?;
    let layout = Layout {
        per_vertex: 2,
        per_edge: k - 1,
        per_cell: (k - 1) * (k + 1),
    };
    Ok(number(mesh, SpaceKind::Velocity, k, bases, layout, |spec, entity| {
        use crate::fe_basis::DofKind::*;
        match spec.kind {
            VertexValueComponent => mesh.is_boundary_vertex(entity),
            EdgeNormalMoment => mesh.facet(entity).boundary,
            _ => options.drop_interior,
        }
    }))
}

/// Discontinuous pressure space of degree `degree` with an orthonormal basis
/// on each element. The zero-mean condition is imposed by the solver.
pub fn build_pressure_space(mesh: &Mesh, degree: usize) -> Result<FeSpace> {
    let bases = build_bases(mesh, |g, t| dg_basis(g, degree, t))?;
    let layout = Layout {
        per_vertex: 0,
        per_edge: 0,
        per_cell: poly::dim(degree),
    };
    Ok(number(mesh, SpaceKind::Pressure, degree, bases, layout, |_, _| false))
}

/// Hermite potential space of degree `degree = k + 1`. Value and gradient
/// vanish at boundary vertices, and edge moments vanish on boundary edges.
pub fn build_potential_space(mesh: &Mesh, degree: usize) -> Result<FeSpace> {
    if degree < 3 {
        return Err(Error::InvalidArgument(format!("potential degree must be >= 3 (k >= 2), got {degree}")));
    }
    let bases = build_bases(mesh, |g, t| hermite_basis(g, degree, t))?;
    let layout = Layout {
        per_vertex: 3,
        per_edge: degree - 3,
        per_cell: poly::dim(degree - 3),
    };
    Ok(number(mesh, SpaceKind::Potential, degree, bases, layout, |spec, entity| {
        use crate::fe_basis::DofKind::*;
        match spec.kind {
            HermiteVertexValue | HermiteVertexDerivative => mesh.is_boundary_vertex(entity),
            HermiteEdgeMoment => mesh.facet(entity).boundary,
            _ => false,
        }
    }))
}

/// Raw DOF count of the velocity space from mesh statistics.
pub fn velocity_dof_count(nv: usize, ne: usize, nt: usize, k: usize) -> usize {
    2 * nv + (k - 1) * ne + (k - 1) * (k + 1) * nt
}

pub fn pressure_dof_count(nt: usize, k: usize) -> usize {
    poly::dim(k - 1) * nt
}
