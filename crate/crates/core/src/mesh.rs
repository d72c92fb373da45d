//! Conforming triangulations of the unit square with oriented facets.
//!
//! Facets store their endpoints sorted ascending, which fixes a global
//! parametrization of every edge. Interior facet normals point from the
//! lower-indexed adjacent triangle to the higher-indexed one, boundary facet
//! normals point outward. Jumps are taken as `[v] = v|lo - v|hi`.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Point, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    /// Endpoints, `vertices[0] < vertices[1]`.
    pub vertices: [usize; 2],
    /// Adjacent triangles; `elements[0] < elements[1]` for interior facets.
    pub elements: [usize; 2],
    pub boundary: bool,
    /// Fixed unit normal `n_F`.
    pub normal: Point,
    pub length: f64,
}

impl Facet {
    pub fn is_interior(&self) -> bool {
        !self.boundary
    }

    /// The adjacent triangles: one for boundary facets, two otherwise.
    pub fn adjacent(&self) -> &[usize] {
        if self.boundary {
            &self.elements[..1]
        } else {
            &self.elements[..]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    facets: Vec<Facet>,
    /// Local edge `i` of a triangle is opposite to its local vertex `i`.
    triangle_facets: Vec<[usize; 3]>,
    boundary_vertex: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshMetrics {
    /// Maximum element diameter.
    pub h: f64,
    /// Minimum interior angle in radians.
    pub min_angle: f64,
    /// Maximum of `h_K / rho_K` (diameter over inradius).
    pub max_shape_ratio: f64,
}

impl Mesh {
    /// Builds a mesh from vertex coordinates and triangles. Clockwise
    /// triangles are reoriented; degenerate ones are rejected.
    pub fn from_triangles(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        let nv = vertices.len();
        let mut triangles = triangles;
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing vertex")));
            }
            let a = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if a.abs() <= 1e-14 {
                return Err(Error::InvalidMesh(format!("triangle {t} is degenerate")));
            }
            if a < 0.0 {
                tri.swap(1, 2);
            }
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 2);
        let mut facets: Vec<Facet> = Vec::with_capacity(triangles.len() * 2);
        let mut triangle_facets = vec![[0usize; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for i in 0..3 {
                let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
                let key = (a.min(b), a.max(b));
                let f = *lookup.entry(key).or_insert_with(|| {
                    facets.push(Facet {
                        vertices: [key.0, key.1],
                        elements: [t, usize::MAX],
                        boundary: true,
                        normal: [0.0; 2],
                        length: 0.0,
                    });
                    facets.len() - 1
                });
                if facets[f].elements[0] != t {
                    if !facets[f].boundary {
                        return Err(Error::InvalidMesh(format!(
                            "edge ({}, {}) is shared by more than two triangles",
                            key.0, key.1
                        )));
                    }
                    facets[f].elements[1] = t;
                    facets[f].boundary = false;
                }
                triangle_facets[t][i] = f;
            }
        }

        for facet in &mut facets {
            let p = vertices[facet.vertices[0]];
            let q = vertices[facet.vertices[1]];
            let d = [q[0] - p[0], q[1] - p[1]];
            let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
            let mut n = [d[1] / len, -d[0] / len];
            let tri = triangles[facet.elements[0]];
            let c = centroid(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if n[0] * (c[0] - p[0]) + n[1] * (c[1] - p[1]) > 0.0 {
                n = [-n[0], -n[1]];
            }
            facet.normal = n;
            facet.length = len;
        }

        let mut boundary_vertex = vec![false; nv];
        for facet in facets.iter().filter(|f| f.boundary) {
            boundary_vertex[facet.vertices[0]] = true;
            boundary_vertex[facet.vertices[1]] = true;
        }

        Ok(Mesh {
            vertices,
            triangles,
            facets,
            triangle_facets,
            boundary_vertex,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_interior_facets(&self) -> usize {
        self.facets.iter().filter(|f| !f.boundary).count()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn facet(&self, f: usize) -> &Facet {
        &self.facets[f]
    }

    pub fn triangle_facets(&self, t: usize) -> [usize; 3] {
        self.triangle_facets[t]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    /// Element diameter `h_K` (longest edge).
    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        dist(a, b).max(dist(b, c)).max(dist(c, a))
    }

    /// Serializes to the plain-text node/triangle format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {}", self.num_vertices(), self.num_facets(), self.num_triangles());
        for (v, p) in self.vertices.iter().enumerate() {
            let _ = writeln!(s, "{:?} {:?} {}", p[0], p[1], u8::from(self.boundary_vertex[v]));
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        s
    }

    /// Parses the plain-text format: a header `nv ne_unused nt`, then `nv`
    /// lines `x y boundary_flag`, then `nt` lines `v0 v1 v2`. Facets are
    /// always derived; the boundary flags must agree with them.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty input".into()))?;
        let head: Vec<usize> = parse_fields(header, 3)?;
        let (nv, nt) = (head[0], head[2]);
        let mut vertices = Vec::with_capacity(nv);
        let mut flags = Vec::with_capacity(nv);
        for i in 0..nv {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing vertex line {i}")))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("vertex line {i}: expected 3 fields")));
            }
            let x: f64 = f[0].parse().map_err(|_| Error::Parse(format!("vertex line {i}: bad x")))?;
            let y: f64 = f[1].parse().map_err(|_| Error::Parse(format!("vertex line {i}: bad y")))?;
            let flag: u8 = f[2].parse().map_err(|_| Error::Parse(format!("vertex line {i}: bad flag")))?;
            vertices.push([x, y]);
            flags.push(flag != 0);
        }
        let mut triangles = Vec::with_capacity(nt);
        for i in 0..nt {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing triangle line {i}")))?;
            let t: Vec<usize> = parse_fields(line, 3)?;
            triangles.push([t[0], t[1], t[2]]);
        }
        let mesh = Mesh::from_triangles(vertices, triangles)?;
        if let Some(v) = (0..nv).find(|&v| flags[v] != mesh.boundary_vertex[v]) {
            return Err(Error::InvalidMesh(format!(
                "boundary flag of vertex {v} disagrees with the derived facets"
            )));
        }
        Ok(mesh)
    }
}

fn parse_fields(line: &str, n: usize) -> Result<Vec<usize>> {
    let v: Vec<usize> = line
        .split_whitespace()
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse(format!("cannot parse integers from {line:?}")))?;
    if v.len() != n {
        return Err(Error::Parse(format!("expected {n} integers in {line:?}")));
    }
    Ok(v)
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

pub(crate) fn centroid(a: Point, b: Point, c: Point) -> Point {
    [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Smallest area accepted for a perturbed grid triangle, relative to the
/// unperturbed `h^2 / 2`. Perturbations up to 0.2 never come close.
const MIN_AREA_FRACTION: f64 = 0.1;
const MAX_REDRAW_ROUNDS: usize = 1000;

/// Structured `n x n` grid of the unit square with each cell split along its
/// lower-left to upper-right diagonal. Interior vertices are displaced by at
/// most `perturb / n` per coordinate using a seeded ChaCha8 stream.
///
/// Near the top of the allowed range a displacement can fold a triangle
/// over. Vertices of any triangle below [`MIN_AREA_FRACTION`] of its nominal
/// area are redrawn from the same stream until none remain.
pub fn build_structured_mesh(n: usize, perturb: f64, seed: u64) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !(0.0..=0.3).contains(&perturb) {
        return Err(Error::InvalidArgument(format!(
            "perturb must lie in [0, 0.3], got {perturb}"
        )));
    }
    let h = 1.0 / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let interior = |v: usize| {
        let (i, j) = (v % (n + 1), v / (n + 1));
        i > 0 && i < n && j > 0 && j < n
    };
    let grid = |v: usize| [(v % (n + 1)) as f64 * h, (v / (n + 1)) as f64 * h];
    let mut draw = |v: usize| {
        let mut p = grid(v);
        if interior(v) && perturb > 0.0 {
            p[0] += rng.random_range(-1.0..=1.0) * perturb * h;
            p[1] += rng.random_range(-1.0..=1.0) * perturb * h;
        }
        p
    };
    let mut vertices: Vec<Point> = (0..(n + 1) * (n + 1)).map(&mut draw).collect();
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let floor = MIN_AREA_FRACTION * 0.5 * h * h;
    for round in 0.. {
        let bad: Vec<usize> = triangles
            .iter()
            .filter(|t| signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]) < floor)
            .flat_map(|t| t.iter().copied().filter(|&v| interior(v)))
            .collect();
        if bad.is_empty() {
            break;
        }
        if round == MAX_REDRAW_ROUNDS {
            return Err(Error::InvalidMesh("perturbation keeps folding triangles over".into()));
        }
        for v in bad {
            vertices[v] = draw(v);
        }
    }
    Mesh::from_triangles(vertices, triangles)
}

/// Red refinement: every triangle is split into four by its edge midpoints.
pub fn refine_uniform(mesh: &Mesh) -> Mesh {
    let nv = mesh.num_vertices();
    let mut vertices = mesh.vertices.clone();
    vertices.reserve(mesh.num_facets());
    for f in &mesh.facets {
        let a = mesh.vertices[f.vertices[0]];
        let b = mesh.vertices[f.vertices[1]];
        vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
    }
    let mut triangles = Vec::with_capacity(4 * mesh.num_triangles());
    for (t, &[p0, p1, p2]) in mesh.triangles.iter().enumerate() {
        let [f0, f1, f2] = mesh.triangle_facets[t];
        let (m0, m1, m2) = (nv + f0, nv + f1, nv + f2);
        triangles.push([p0, m2, m1]);
        triangles.push([m2, p1, m0]);
        triangles.push([m1, m0, p2]);
        triangles.push([m0, m1, m2]);
    }
    Mesh::from_triangles(vertices, triangles).expect("refinement of a valid mesh is valid")
}

pub fn mesh_metrics(mesh: &Mesh) -> MeshMetrics {
    let mut h: f64 = 0.0;
    let mut min_angle = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    for t in 0..mesh.num_triangles() {
        let [a, b, c] = mesh.triangle_points(t);
        let (la, lb, lc) = (dist(b, c), dist(c, a), dist(a, b));
        let hk = la.max(lb).max(lc);
        h = h.max(hk);
        let area = signed_area(a, b, c);
        let inradius = 2.0 * area / (la + lb + lc);
        max_ratio = max_ratio.max(hk / inradius);
        for (opp, s1, s2) in [(la, lb, lc), (lb, lc, la), (lc, la, lb)] {
            let cos = ((s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2)).clamp(-1.0, 1.0);
            min_angle = min_angle.min(cos.acos());
        }
    }
    MeshMetrics {
        h,
        min_angle,
        max_shape_ratio: max_ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_invariants(mesh: &Mesh) {
        let (nv, ne, nt) = (mesh.num_vertices(), mesh.num_facets(), mesh.num_triangles());
        assert_eq!(nv as i64 - ne as i64 + nt as i64, 1, "Euler relation");
        let total: f64 = (0..nt).map(|t| mesh.area(t)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for t in 0..nt {
            assert!(mesh.area(t) > 0.0);
        }
        for f in mesh.facets() {
            assert!(f.vertices[0] < f.vertices[1]);
            if f.boundary {
                assert_eq!(f.elements[1], usize::MAX);
                let m = [
                    0.5 * (mesh.vertex(f.vertices[0])[0] + mesh.vertex(f.vertices[1])[0]),
                    0.5 * (mesh.vertex(f.vertices[0])[1] + mesh.vertex(f.vertices[1])[1]),
                ];
                let on = |x: f64| x.abs() < 1e-14 || (x - 1.0).abs() < 1e-14;
                assert!(on(m[0]) || on(m[1]));
                // outward
                let c = [0.5, 0.5];
                assert!(f.normal[0] * (m[0] - c[0]) + f.normal[1] * (m[1] - c[1]) > 0.0);
            } else {
                assert!(f.elements[0] < f.elements[1]);
                let [a, b, c] = mesh.triangle_points(f.elements[0]);
                let g = centroid(a, b, c);
                let p = mesh.vertex(f.vertices[0]);
                assert!(f.normal[0] * (g[0] - p[0]) + f.normal[1] * (g[1] - p[1]) < 0.0);
            }
        }
    }

    #[test]
    fn single_cell() {
        let m = build_structured_mesh(1, 0.0, 0).unwrap();
        assert_eq!((m.num_vertices(), m.num_triangles(), m.num_facets()), (4, 2, 5));
        assert_eq!(m.num_interior_facets(), 1);
        check_invariants(&m);
        assert!((mesh_metrics(&m).h - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn two_by_two() {
        let m = build_structured_mesh(2, 0.0, 0).unwrap();
        assert_eq!((m.num_vertices(), m.num_triangles(), m.num_facets()), (9, 8, 16));
        check_invariants(&m);
    }

    #[test]
    fn perturbed_keeps_boundary() {
        let m = build_structured_mesh(4, 0.2, 42).unwrap();
        let reference = build_structured_mesh(4, 0.0, 42).unwrap();
        assert_eq!(m.num_triangles(), 32);
        check_invariants(&m);
        for v in 0..m.num_vertices() {
            let d = dist(m.vertex(v), reference.vertex(v));
            if m.is_boundary_vertex(v) {
                assert_eq!(d, 0.0);
            } else {
                assert!(d <= 0.2 * 0.25 * 2f64.sqrt() + 1e-15);
            }
        }
        // Cross-product oracle for positivity.
        for t in m.triangles() {
            let (a, b, c) = (m.vertex(t[0]), m.vertex(t[1]), m.vertex(t[2]));
            let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            assert!(cross > 0.0);
        }
        assert!(mesh_metrics(&m).min_angle > 0.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(build_structured_mesh(0, 0.0, 0).is_err());
        assert!(build_structured_mesh(2, 0.31, 0).is_err());
        assert!(build_structured_mesh(2, -0.1, 0).is_err());
    }

    #[test]
    fn refinement_counts() {
        let m = build_structured_mesh(1, 0.0, 0).unwrap();
        let r = refine_uniform(&m);
        assert_eq!((r.num_triangles(), r.num_vertices()), (8, 9));
        let p = build_structured_mesh(4, 0.2, 42).unwrap();
        let r = refine_uniform(&p);
        assert_eq!(r.num_triangles(), 4 * p.num_triangles());
        assert_eq!(r.num_facets(), 2 * p.num_facets() + 3 * p.num_triangles());
        assert_eq!(r.num_vertices(), p.num_vertices() + p.num_facets());
        check_invariants(&r);
    }

    #[test]
    fn refinement_halves_h_and_keeps_angles() {
        let m = build_structured_mesh(4, 0.0, 0).unwrap();
        let r = refine_uniform(&m);
        assert_eq!(mesh_metrics(&r).h, 0.5 * mesh_metrics(&m).h);

        let p = build_structured_mesh(4, 0.2, 42).unwrap();
        let rp = refine_uniform(&p);
        let (a, b) = (mesh_metrics(&p), mesh_metrics(&rp));
        assert!((a.min_angle - b.min_angle).abs() < 1e-12);
        assert!((a.h - 2.0 * b.h).abs() < 1e-14);
    }

    #[test]
    fn rebuild_is_bitwise_identical() {
        let a = build_structured_mesh(5, 0.25, 7).unwrap();
        let b = build_structured_mesh(5, 0.25, 7).unwrap();
        assert_eq!(a, b);
        let c = build_structured_mesh(5, 0.25, 8).unwrap();
        assert_ne!(a.vertices(), c.vertices());
    }

    #[test]
    fn text_round_trip() {
        let m = build_structured_mesh(3, 0.1, 3).unwrap();
        let back = Mesh::from_text(&m.to_text()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn text_rejects_inconsistent_flags() {
        let text = "4 5 2\n0 0 1\n1 0 1\n1 1 1\n0 1 0\n0 1 2\n0 2 3\n";
        assert!(matches!(Mesh::from_text(text), Err(Error::InvalidMesh(_))));
        let ok = "4 5 2\n0 0 1\n1 0 1\n1 1 1\n0 1 1\n0 2 1\n0 2 3\n";
        let m = Mesh::from_text(ok).unwrap();
        assert!((0..2).all(|t| m.area(t) > 0.0));
        assert!(Mesh::from_text("2 0 1\n0 0 1\n").is_err());
    }
}
