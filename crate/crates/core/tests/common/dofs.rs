//! Degrees of freedom evaluated from their definitions, independently of the
//! library's duality matrices.

use super::{average_on_segment, integrate_triangle, legendre01};
use oseen_core::fe_basis::{dg_basis, nedelec_space, ElementBasis, ElementGeometry};
use oseen_core::poly::{DX, DY};
use oseen_core::Point;

pub fn unit(n: usize, j: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[j] = 1.0;
    e
}

pub fn frame(v: [Point; 3]) -> (Point, f64) {
    let (x0, x1) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[0]), b.max(p[0])));
    let (y0, y1) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[1]), b.max(p[1])));
    ([0.5 * (x0 + x1), 0.5 * (y0 + y1)], 0.5 * (x1 - x0).max(y1 - y0))
}

pub fn area(v: [Point; 3]) -> f64 {
    0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]))
}

/// Degrees of freedom of a Stenberg shape function, evaluated from the
/// definitions: vertex values, edge normal moments against Legendre
/// polynomials, interior moments against the local Nedelec space.
pub fn stenberg_dofs(b: &ElementBasis, geom: &ElementGeometry, k: usize, local: &[f64]) -> Vec<f64> {
    let u = |x: Point| {
        let j = b.eval_combination(local, x, 0);
        [j[0][0], j[1][0]]
    };
    let mut out = Vec::new();
    for v in geom.vertices {
        out.extend(u(v));
    }
    for e in geom.edges {
        for j in 0..k - 1 {
            out.push(average_on_segment(e.start, e.end, k + 2, |t, x| {
                let w = u(x);
                (w[0] * e.normal[0] + w[1] * e.normal[1]) * legendre01(j, t)
            }));
        }
    }
    let (c, s) = frame(geom.vertices);
    let a = area(geom.vertices);
    for q in nedelec_space(k - 2) {
        out.push(
            integrate_triangle(geom.vertices, k + 3, |x| {
                let w = u(x);
                let qv = q.eval_local((x[0] - c[0]) / s, (x[1] - c[1]) / s);
                w[0] * qv[0] + w[1] * qv[1]
            }) / a,
        );
    }
    out
}

pub fn hermite_dofs(b: &ElementBasis, geom: &ElementGeometry, degree: usize, local: &[f64]) -> Vec<f64> {
    let u = |x: Point| b.eval_combination(local, x, 1)[0];
    let mut out = Vec::new();
    for v in geom.vertices {
        let j = u(v);
        out.extend([j[0], j[DX], j[DY]]);
    }
    if degree >= 4 {
        for e in geom.edges {
            for j in 0..=degree - 4 {
                out.push(average_on_segment(e.start, e.end, degree + 2, |t, x| u(x)[0] * legendre01(j, t)));
            }
        }
    }
    let a = area(geom.vertices);
    let ortho = dg_basis(geom, degree - 3, 0).unwrap();
    for i in 0..ortho.dim() {
        let phi = unit(ortho.dim(), i);
        out.push(
            integrate_triangle(geom.vertices, degree + 2, |x| u(x)[0] * ortho.eval_combination(&phi, x, 0)[0][0]) / a.sqrt(),
        );
    }
    out
}

pub fn identity_defect(n: usize, dofs: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
    weighted_identity_defect(n, &vec![1.0; n], dofs)
}

/// `max |w_i (DOF_i(w_j) - delta_ij) / w_j|`; with `w_i = h` on derivative
/// functionals this is the defect of the basis rescaled to unit size.
pub fn weighted_identity_defect(n: usize, weight: &[f64], dofs: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let d = dofs(&unit(n, j));
        assert_eq!(d.len(), n);
        for (i, v) in d.iter().enumerate() {
            worst = worst.max((weight[i] * (v - if i == j { 1.0 } else { 0.0 }) / weight[j]).abs());
        }
    }
    worst
}

/// `max |(phi_p, phi_q) - delta_pq|` over the DG basis of `degree` on `v`;
/// the DG functionals are the L2 moments against the basis itself.
pub fn dg_defect(v: [Point; 3], degree: usize, id: usize) -> f64 {
    let g = ElementGeometry::standalone(v);
    let b = dg_basis(&g, degree, id).unwrap();
    let n = b.dim();
    let vals = |j: usize, x: Point| b.eval_combination(&unit(n, j), x, 0)[0][0];
    let mut worst: f64 = 0.0;
    for p in 0..n {
        for q in 0..=p {
            let m = integrate_triangle(v, degree + 2, |x| vals(p, x) * vals(q, x));
            worst = worst.max((m - if p == q { 1.0 } else { 0.0 }).abs());
        }
    }
    worst
}
