//! Helpers shared by the integration tests. The quadrature here is built
//! independently of the library (Newton iteration on Legendre polynomials and
//! a collapsed tensor rule on triangles).

#![allow(dead_code)]

pub mod dofs;

use oseen_core::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss01(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let (p, pm1) = if n == 1 { (x, 1.0) } else { (p1, p0) };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out
}

/// Integral of `f` over the triangle with vertices `v`.
pub fn integrate_triangle(v: [Point; 3], n: usize, f: impl Fn(Point) -> f64) -> f64 {
    let g = gauss01(n);
    let [a, b, c] = v;
    let jac = ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
    let mut s = 0.0;
    for &(u, wu) in &g {
        for &(t, wt) in &g {
            let (r, q) = (u, (1.0 - u) * t);
            let x = [a[0] + (b[0] - a[0]) * r + (c[0] - a[0]) * q, a[1] + (b[1] - a[1]) * r + (c[1] - a[1]) * q];
            s += wu * wt * (1.0 - u) * f(x);
        }
    }
    s * jac
}

/// Integral of `f(t, x(t))` along the segment `p -> q`, divided by its length.
pub fn average_on_segment(p: Point, q: Point, n: usize, f: impl Fn(f64, Point) -> f64) -> f64 {
    gauss01(n)
        .into_iter()
        .map(|(t, w)| w * f(t, [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]))
        .sum()
}

pub fn min_angle(v: [Point; 3]) -> f64 {
    (0..3)
        .map(|i| {
            let (p, q, r) = (v[i], v[(i + 1) % 3], v[(i + 2) % 3]);
            let (a, b) = ([q[0] - p[0], q[1] - p[1]], [r[0] - p[0], r[1] - p[1]]);
            let cos = (a[0] * b[0] + a[1] * b[1]) / ((a[0] * a[0] + a[1] * a[1]).sqrt() * (b[0] * b[0] + b[1] * b[1]).sqrt());
            cos.clamp(-1.0, 1.0).acos()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Counter-clockwise triangle with size `10^e`, `e` drawn from `exponents`,
/// random position and every angle above 15 degrees.
pub fn random_triangle(rng: &mut ChaCha8Rng, exponents: std::ops::Range<f64>) -> [Point; 3] {
    loop {
        let scale = 10f64.powf(rng.random_range(exponents.clone()));
        let shift = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let mut v = [[0.0; 2]; 3];
        for p in v.iter_mut() {
            *p = [shift[0] + scale * rng.random_range(-1.0..1.0), shift[1] + scale * rng.random_range(-1.0..1.0)];
        }
        let cross = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
        if cross < 0.0 {
            v.swap(1, 2);
        }
        if min_angle(v) > 15f64.to_radians() {
            return v;
        }
    }
}

pub fn random_triangles(count: usize, seed: u64) -> Vec<[Point; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_triangle(&mut rng, -1.0..0.5)).collect()
}

/// Triangles with diameters down to 1e-3.
pub fn small_triangles(count: usize, seed: u64) -> Vec<[Point; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_triangle(&mut rng, -3.0..-1.0)).collect()
}

/// Shifted Legendre polynomial of degree `j` on [0, 1], by the three-term
/// recurrence.
pub fn legendre01(j: usize, t: f64) -> f64 {
    let x = 2.0 * t - 1.0;
    let (mut p0, mut p1) = (1.0, x);
    if j == 0 {
        return 1.0;
    }
    for n in 1..j {
        let p2 = ((2 * n + 1) as f64 * x * p1 - n as f64 * p0) / (n + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

pub fn l2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
