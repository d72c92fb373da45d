use oseen_core::analysis::{interpolation_error, mesh_level};
use oseen_core::fe_space::{build_potential_space, build_pressure_space, build_velocity_space};
use oseen_core::mesh::build_structured_mesh;
use oseen_core::poly::{self, DX, DY};
use oseen_core::problem::Benchmark;
use oseen_core::{Mesh, Point};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn boundary_counts(m: &Mesh) -> (usize, usize) {
    let bv = (0..m.num_vertices()).filter(|&v| m.is_boundary_vertex(v)).count();
    let bf = m.facets().iter().filter(|f| f.boundary).count();
    (bv, bf)
}

#[test]
fn dof_counts_follow_entity_counts() {
    let m = build_structured_mesh(5, 0.15, 3).unwrap();
    let (nv, ne, nt) = (m.num_vertices(), m.num_facets(), m.num_triangles());
    let (bv, bf) = boundary_counts(&m);
    for k in 2..=4 {
        let v = build_velocity_space(&m, k).unwrap();
        // Local dimension minus what sits on vertices and edges.
        let interior = (k + 1) * (k + 2) - 6 - 3 * (k - 1);
        assert_eq!(v.num_raw(), 2 * nv + (k - 1) * ne + interior * nt);
        assert_eq!(v.num_free(), v.num_raw() - 2 * bv - (k - 1) * bf);
        let q = build_pressure_space(&m, k - 1).unwrap();
        assert_eq!(q.num_raw(), nt * k * (k + 1) / 2);
    }
    for degree in 3..=4 {
        let z = build_potential_space(&m, degree).unwrap();
        let edge = if degree >= 4 { degree - 3 } else { 0 };
        assert_eq!(z.num_raw(), 3 * nv + edge * ne + poly::dim(degree - 3) * nt);
    }
}

#[test]
fn global_interpolation_reproduces_vector_polynomials() {
    let m = build_structured_mesh(4, 0.2, 9).unwrap();
    for k in 2..=3 {
        let v = build_velocity_space(&m, k).unwrap();
        let c = random_vector(2 * poly::dim(k), k as u64);
        let mons = poly::monomials(k);
        let eval = |x: Point| {
            let mut out = [[0.0; 3]; 2];
            for comp in 0..2 {
                for (i, &(a, b)) in mons.iter().enumerate() {
                    let w = c[comp * mons.len() + i];
                    let (ai, bi) = (a as i32, b as i32);
                    out[comp][0] += w * x[0].powi(ai) * x[1].powi(bi);
                    if a > 0 {
                        out[comp][1] += w * a as f64 * x[0].powi(ai - 1) * x[1].powi(bi);
                    }
                    if b > 0 {
                        out[comp][2] += w * b as f64 * x[0].powi(ai) * x[1].powi(bi - 1);
                    }
                }
            }
            out
        };
        let raw = v.interpolate(&eval);
        for t in 0..m.num_triangles() {
            let [a, b, cc] = m.triangle_points(t);
            let x = [(a[0] + 2.0 * b[0] + cc[0]) / 4.0, (a[1] + 2.0 * b[1] + cc[1]) / 4.0];
            let jet = v.evaluate(&raw, t, x, 1);
            let e = eval(x);
            for comp in 0..2 {
                assert!((jet[comp][0] - e[comp][0]).abs() < 1e-11);
                assert!((jet[comp][DX] - e[comp][1]).abs() < 1e-9);
                assert!((jet[comp][DY] - e[comp][2]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn interpolation_converges_at_the_optimal_rate() {
    for k in [2, 3] {
        let e: Vec<f64> = (1..=2)
            .map(|l| interpolation_error(&mesh_level(8, 0.2, 42, l).unwrap(), k, &Benchmark, 2 * k + 2).unwrap())
            .collect();
        let ratio = e[0] / e[1];
        let (lo, hi) = (2f64.powf(k as f64 + 0.7), 2f64.powf(k as f64 + 1.3));
        assert!(ratio >= lo && ratio <= hi, "k={k}: ratio {ratio:.3} not in [{lo:.2}, {hi:.2}]");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Normal components agree across interior facets and full values agree at
    /// shared vertices, for arbitrary coefficient vectors.
    #[test]
    fn velocity_space_is_div_conforming(seed in any::<u64>(), k in 2usize..=3, n in 1usize..5) {
        let m = build_structured_mesh(n, 0.25, seed).unwrap();
        let v = build_velocity_space(&m, k).unwrap();
        let raw = random_vector(v.num_raw(), seed ^ 0x55);
        for f in m.facets().iter().filter(|f| f.is_interior()) {
            let [a, b] = f.vertices.map(|i| m.vertex(i));
            for t in [0.0, 0.21, 0.5, 0.77, 1.0] {
                let x = lerp(a, b, t);
                let [j0, j1] = f.elements.map(|e| v.evaluate(&raw, e, x, 0));
                let n0 = j0[0][0] * f.normal[0] + j0[1][0] * f.normal[1];
                let n1 = j1[0][0] * f.normal[0] + j1[1][0] * f.normal[1];
                prop_assert!((n0 - n1).abs() < 1e-9, "normal jump {}", n0 - n1);
                if t == 0.0 || t == 1.0 {
                    prop_assert!((j0[0][0] - j1[0][0]).abs() < 1e-9 && (j0[1][0] - j1[1][0]).abs() < 1e-9);
                }
            }
        }
    }

    /// The potential space is continuous with continuous vertex gradients.
    #[test]
    fn potential_space_is_continuous(seed in any::<u64>(), degree in 3usize..=4, n in 1usize..5) {
        let m = build_structured_mesh(n, 0.25, seed).unwrap();
        let z = build_potential_space(&m, degree).unwrap();
        let raw = random_vector(z.num_raw(), seed ^ 0xaa);
        for f in m.facets().iter().filter(|f| f.is_interior()) {
            let [a, b] = f.vertices.map(|i| m.vertex(i));
            for t in [0.0, 0.33, 0.5, 0.9, 1.0] {
                let x = lerp(a, b, t);
                let [j0, j1] = f.elements.map(|e| z.evaluate(&raw, e, x, 1)[0]);
                prop_assert!((j0[0] - j1[0]).abs() < 1e-9);
                if t == 0.0 || t == 1.0 {
                    prop_assert!((j0[DX] - j1[DX]).abs() < 1e-7 && (j0[DY] - j1[DY]).abs() < 1e-7);
                }
            }
        }
    }
}
