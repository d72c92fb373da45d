//! Gaussian quadrature on the reference triangle and on the unit interval.
//!
//! Triangle rules are conical products: Gauss-Jacobi (weight `1 - u`) in the
//! collapsed direction times Gauss-Legendre along the fibres. A rule with
//! `m` points per direction integrates total degree `2m - 1` exactly.

use std::sync::OnceLock;

use faer::{Mat, Side};

use crate::{Error, Point, Result};

pub const MAX_DEGREE: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule<P> {
    pub points: Vec<P>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

/// Rule on the reference triangle `{x, y >= 0, x + y <= 1}`.
pub type TriangleRule = QuadRule<Point>;
/// Rule on the unit interval `[0, 1]`.
pub type EdgeRule = QuadRule<f64>;

impl<P> QuadRule<P> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&P, f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

fn check_degree(degree: usize) -> Result<()> {
    if degree == 0 || degree > MAX_DEGREE {
        Err(Error::UnsupportedQuadrature(degree))
    } else {
        Ok(())
    }
}

pub fn edge_rule(degree: usize) -> Result<EdgeRule> {
    check_degree(degree)?;
    let n = (degree + 1).div_ceil(2);
    let (x, w) = gauss_legendre(n);
    Ok(QuadRule {
        points: x.iter().map(|&xi| 0.5 * (xi + 1.0)).collect(),
        weights: w.iter().map(|&wi| 0.5 * wi).collect(),
        exactness_degree: 2 * n - 1,
    })
}

pub fn triangle_rule(degree: usize) -> Result<TriangleRule> {
    check_degree(degree)?;
    let n = (degree + 1).div_ceil(2);
    let (xu, wu) = gauss_jacobi_10(n);
    let (xv, wv) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (&xi, &wi) in xu.iter().zip(&wu) {
        let u = 0.5 * (1.0 + xi);
        for (&yj, &wj) in xv.iter().zip(&wv) {
            let v = 0.5 * (1.0 + yj);
            points.push([u, v * (1.0 - u)]);
            weights.push(0.25 * wi * 0.5 * wj);
        }
    }
    Ok(QuadRule {
        points,
        weights,
        exactness_degree: 2 * n - 1,
    })
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[n - 1 - i] = z;
        w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Jacobi polynomial `P_n^{(1,0)}` and its derivative.
fn jacobi_10(n: usize, x: f64) -> (f64, f64) {
    let (a, b) = (1.0_f64, 0.0_f64);
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut pm = 1.0;
    let mut p = 0.5 * (a - b + (a + b + 2.0) * x);
    for k in 2..=n {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        let c0 = 2.0 * kf * (kf + a + b) * (s - 2.0);
        let c1 = (s - 1.0) * (s * (s - 2.0) * x + a * a - b * b);
        let c2 = 2.0 * (kf + a - 1.0) * (kf + b - 1.0) * s;
        let next = (c1 * p - c2 * pm) / c0;
        pm = p;
        p = next;
    }
    let nf = n as f64;
    let s = 2.0 * nf + a + b;
    let d = (nf * ((a - b) - s * x) * p + 2.0 * (nf + a) * (nf + b) * pm) / (s * (1.0 - x * x));
    (p, d)
}

/// Gauss-Jacobi rule for the weight `(1 - x)` on `[-1, 1]`: Golub-Welsch for
/// the nodes, polished by Newton, weights from the closed form.
fn gauss_jacobi_10(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (a, b) = (1.0_f64, 0.0_f64);
    let jm = Mat::from_fn(n, n, |i, j| {
        if i == j {
            let k = i as f64;
            let s = 2.0 * k + a + b;
            (b * b - a * a) / (s * (s + 2.0))
        } else if i.abs_diff(j) == 1 {
            let k = i.max(j) as f64;
            let s = 2.0 * k + a + b;
            (4.0 * k * (k + a) * (k + b) * (k + a + b) / (s * s * (s + 1.0) * (s - 1.0))).sqrt()
        } else {
            0.0
        }
    });
    let mut x = jm
        .self_adjoint_eigenvalues(Side::Lower)
        .expect("tridiagonal Jacobi matrix eigenvalues");
    let mut w = vec![0.0; n];
    for (xi, wi) in x.iter_mut().zip(w.iter_mut()) {
        for _ in 0..4 {
            let (p, d) = jacobi_10(n, *xi);
            if d == 0.0 {
                break;
            }
            *xi -= p / d;
        }
        let (_, d) = jacobi_10(n, *xi);
        *wi = 4.0 / ((1.0 - *xi * *xi) * d * d);
    }
    (x, w)
}

/// Shifted Legendre polynomial `L_j(t) = P_j(2t - 1)` on `[0, 1]`.
pub fn shifted_legendre(j: usize, t: f64) -> f64 {
    let x = 2.0 * t - 1.0;
    match j {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=j {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    }
}

/// Shared, lazily built triangle rule of the given degree.
pub fn cached_triangle_rule(degree: usize) -> Result<&'static TriangleRule> {
    static RULES: [OnceLock<TriangleRule>; MAX_DEGREE + 1] = [const { OnceLock::new() }; MAX_DEGREE + 1];
    check_degree(degree)?;
    Ok(RULES[degree].get_or_init(|| triangle_rule(degree).expect("degree checked")))
}

/// Shared, lazily built edge rule of the given degree.
pub fn cached_edge_rule(degree: usize) -> Result<&'static EdgeRule> {
    static RULES: [OnceLock<EdgeRule>; MAX_DEGREE + 1] = [const { OnceLock::new() }; MAX_DEGREE + 1];
    check_degree(degree)?;
    Ok(RULES[degree].get_or_init(|| edge_rule(degree).expect("degree checked")))
}

/// Default volume and facet rule degree for velocity order `k`.
pub fn default_degree(k: usize) -> usize {
    (2 * (k + 1) + 2).min(MAX_DEGREE)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }

    #[test]
    fn centroid_rule() {
        let r = triangle_rule(1).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r.weights[0] - 0.5).abs() < 1e-15);
        assert!((r.points[0][0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.points[0][1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn triangle_exactness_sweep() {
        for degree in 1..=MAX_DEGREE {
            let r = triangle_rule(degree).unwrap();
            assert!(r.exactness_degree >= degree);
            let sum: f64 = r.weights.iter().sum();
            assert!((sum - 0.5).abs() < 1e-14);
            for a in 0..=r.exactness_degree {
                for b in 0..=(r.exactness_degree - a) {
                    let q: f64 = r
                        .iter()
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    assert!((q - exact).abs() < 1e-13, "deg {degree} x^{a} y^{b}: {q} vs {exact}");
                }
            }
            assert!(r.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn triangle_examples() {
        let r = triangle_rule(1).unwrap();
        let ix: f64 = r.iter().map(|(p, w)| w * p[0]).sum();
        assert!((ix - 1.0 / 6.0).abs() < 1e-15);
        let r = triangle_rule(4).unwrap();
        let i: f64 = r.iter().map(|(p, w)| w * p[0] * p[0] * p[1] * p[1]).sum();
        assert!((i - 1.0 / 180.0).abs() < 1e-15);
    }

    #[test]
    fn edge_exactness_sweep() {
        for degree in 1..=MAX_DEGREE {
            let r = edge_rule(degree).unwrap();
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for a in 0..=r.exactness_degree {
                let q: f64 = r.iter().map(|(t, w)| w * t.powi(a as i32)).sum();
                assert!((q - 1.0 / (a as f64 + 1.0)).abs() < 1e-13);
            }
        }
        let r = edge_rule(3).unwrap();
        assert_eq!(r.len(), 2);
        let q: f64 = r.iter().map(|(t, w)| w * t.powi(3)).sum();
        assert!((q - 0.25).abs() < 1e-15);
        let r = edge_rule(6).unwrap();
        let q: f64 = r.iter().map(|(t, w)| w * t.powi(6)).sum();
        assert!((q - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn unsupported_degrees() {
        assert!(matches!(triangle_rule(0), Err(Error::UnsupportedQuadrature(0))));
        assert!(triangle_rule(21).is_err());
        assert!(edge_rule(0).is_err());
    }

    #[test]
    fn legendre_orthogonality() {
        let r = edge_rule(12).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let q: f64 = r
                    .iter()
                    .map(|(t, w)| w * shifted_legendre(i, *t) * shifted_legendre(j, *t))
                    .sum();
                let expect = if i == j { 1.0 / (2.0 * i as f64 + 1.0) } else { 0.0 };
                assert!((q - expect).abs() < 1e-14);
            }
        }
    }
}
