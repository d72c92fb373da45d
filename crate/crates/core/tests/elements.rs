mod common;

use common::dofs::{dg_defect, frame, hermite_dofs, identity_defect, stenberg_dofs, unit, weighted_identity_defect};
use common::{average_on_segment, integrate_triangle, random_triangles, small_triangles};
use oseen_core::fe_basis::{dg_basis, hermite_basis, stenberg_basis, ElementGeometry};
use oseen_core::poly::{self, Poly2, DX, DY};
use oseen_core::Point;
use proptest::prelude::*;

#[test]
fn stenberg_dual_basis_on_random_triangles() {
    for k in [2, 3] {
        let mut worst: f64 = 0.0;
        for (i, v) in random_triangles(200, 7 + k as u64).into_iter().enumerate() {
            let g = ElementGeometry::standalone(v);
            let b = stenberg_basis(&g, k, i).unwrap();
            assert_eq!(b.dim(), (k + 1) * (k + 2));
            worst = worst.max(identity_defect(b.dim(), |l| stenberg_dofs(&b, &g, k, l)));
        }
        assert!(worst <= 1e-10, "Stenberg k={k}: max defect {worst:.3e}");
    }
}

#[test]
fn hermite_dual_basis_on_random_triangles() {
    for degree in [3, 4] {
        let mut worst: f64 = 0.0;
        for (i, v) in random_triangles(200, 19 + degree as u64).into_iter().enumerate() {
            let g = ElementGeometry::standalone(v);
            let b = hermite_basis(&g, degree, i).unwrap();
            assert_eq!(b.dim(), poly::dim(degree));
            worst = worst.max(identity_defect(b.dim(), |l| hermite_dofs(&b, &g, degree, l)));
        }
        assert!(worst <= 1e-10, "Hermite degree {degree}: max defect {worst:.3e}");
    }
}

#[test]
fn hermite_dual_basis_on_small_triangles() {
    for degree in [3, 4] {
        let mut worst: f64 = 0.0;
        for v in small_triangles(100, 41 + degree as u64) {
            let g = ElementGeometry::standalone(v);
            let b = hermite_basis(&g, degree, 0).unwrap();
            let h = frame(v).1;
            let weight: Vec<f64> = (0..b.dim()).map(|i| if i < 9 && i % 3 != 0 { h } else { 1.0 }).collect();
            worst = worst.max(weighted_identity_defect(b.dim(), &weight, |l| hermite_dofs(&b, &g, degree, l)));
        }
        assert!(worst <= 1e-10, "Hermite degree {degree}: scaled defect {worst:.3e}");
    }
}

#[test]
fn stenberg_dual_basis_on_small_triangles() {
    let mut worst: f64 = 0.0;
    for v in small_triangles(100, 43) {
        let g = ElementGeometry::standalone(v);
        let b = stenberg_basis(&g, 3, 0).unwrap();
        worst = worst.max(identity_defect(b.dim(), |l| stenberg_dofs(&b, &g, 3, l)));
    }
    assert!(worst <= 1e-10, "Stenberg k=3: max defect {worst:.3e}");
}

#[test]
fn dg_basis_is_orthonormal_on_random_triangles() {
    for degree in [1, 2, 3] {
        let mut worst: f64 = 0.0;
        for (i, v) in random_triangles(200, 31 + degree as u64).into_iter().enumerate() {
            worst = worst.max(dg_defect(v, degree, i));
        }
        assert!(worst <= 1e-10, "DG degree {degree}: max defect {worst:.3e}");
    }
}

#[test]
fn library_duality_matrix_agrees_with_oracle() {
    let v = [[0.1, 0.2], [1.3, 0.4], [0.5, 1.1]];
    let g = ElementGeometry::standalone(v);
    let b = stenberg_basis(&g, 3, 0).unwrap();
    let m = b.duality_matrix();
    for j in 0..b.dim() {
        let d = stenberg_dofs(&b, &g, 3, &unit(b.dim(), j));
        for i in 0..b.dim() {
            assert!((m[i][j] - d[i]).abs() < 1e-11);
        }
    }
}

#[test]
fn degenerate_triangle_is_rejected() {
    let g = ElementGeometry::standalone([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
    assert!(stenberg_basis(&g, 2, 0).is_err());
    assert!(hermite_basis(&g, 3, 0).is_err());
    assert!(dg_basis(&g, 1, 0).is_err());
    let ok = ElementGeometry::standalone([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
    assert!(stenberg_basis(&ok, 1, 0).is_err());
    assert!(hermite_basis(&ok, 2, 0).is_err());
}

fn random_poly(degree: usize, coeffs: &[f64]) -> Poly2 {
    poly::monomials(degree)
        .into_iter()
        .zip(coeffs)
        .fold(Poly2::zero(), |acc, ((a, b), &c)| acc.add(&Poly2::monomial(c, a as u32, b as u32)))
}

fn triangle_strategy() -> impl Strategy<Value = [Point; 3]> {
    (any::<u64>()).prop_map(|seed| random_triangles(1, seed)[0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Interpolating a polynomial of the element degree reproduces it.
    #[test]
    fn stenberg_reproduces_its_polynomials(
        v in triangle_strategy(),
        k in 2usize..=3,
        c in prop::collection::vec(-1.0f64..1.0, 20),
        r in (0.05f64..0.9, 0.05f64..0.9),
    ) {
        let g = ElementGeometry::standalone(v);
        let b = stenberg_basis(&g, k, 0).unwrap();
        let n = poly::dim(k);
        let p = [random_poly(k, &c[..n]), random_poly(k, &c[10..10 + n])];
        let local = b.apply_dofs(&|x| {
            let (a, d) = (p[0].jet(x), p[1].jet(x));
            [[a[0], a[DX], a[DY]], [d[0], d[DX], d[DY]]]
        });
        let x = g.map([r.0 * (1.0 - r.1), r.1]);
        let jet = b.eval_combination(&local, x, 0);
        for comp in 0..2 {
            let exact = p[comp].eval(x);
            prop_assert!((jet[comp][0] - exact).abs() < 1e-9 * (1.0 + exact.abs()));
        }
    }

    #[test]
    fn hermite_reproduces_its_polynomials(
        v in triangle_strategy(),
        degree in 3usize..=4,
        c in prop::collection::vec(-1.0f64..1.0, 15),
        r in (0.05f64..0.9, 0.05f64..0.9),
    ) {
        let g = ElementGeometry::standalone(v);
        let b = hermite_basis(&g, degree, 0).unwrap();
        let p = random_poly(degree, &c[..poly::dim(degree)]);
        let local = b.apply_dofs(&|x| {
            let a = p.jet(x);
            [[a[0], a[DX], a[DY]], [0.0; 3]]
        });
        let x = g.map([r.0 * (1.0 - r.1), r.1]);
        let exact = p.eval(x);
        prop_assert!((b.eval_combination(&local, x, 0)[0][0] - exact).abs() < 1e-9 * (1.0 + exact.abs()));
    }

    /// The divergence of a Stenberg shape function is a polynomial of one
    /// degree lower; its mean equals the boundary flux over the area.
    #[test]
    fn stenberg_divergence_theorem(v in triangle_strategy(), j in 0usize..12) {
        let g = ElementGeometry::standalone(v);
        let b = stenberg_basis(&g, 2, 0).unwrap();
        let local = unit(b.dim(), j);
        let div = integrate_triangle(v, 4, |x| {
            let jet = b.eval_combination(&local, x, 1);
            jet[0][DX] + jet[1][DY]
        });
        let flux: f64 = g
            .edges
            .iter()
            .map(|e| {
                e.length()
                    * average_on_segment(e.start, e.end, 4, |_, x| {
                        let jet = b.eval_combination(&local, x, 0);
                        jet[0][0] * e.normal[0] + jet[1][0] * e.normal[1]
                    })
            })
            .sum();
        prop_assert!((div - flux).abs() < 1e-9 * (1.0 + flux.abs()));
    }
}
