//! Bivariate monomials and derivative jets.
//!
//! A jet stores a function value and its partial derivatives up to total
//! order three, indexed by [`DERIVS`].

use std::collections::BTreeMap;

use crate::Point;

/// Partial derivative multi-indices `(d/dx, d/dy)` up to total order 3.
pub const DERIVS: [(usize, usize); 10] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
];

pub const D0: usize = 0;
pub const DX: usize = 1;
pub const DY: usize = 2;
pub const DXX: usize = 3;
pub const DXY: usize = 4;
pub const DYY: usize = 5;
pub const DXXX: usize = 6;
pub const DXXY: usize = 7;
pub const DXYY: usize = 8;
pub const DYYY: usize = 9;

/// Value and partial derivatives up to order three.
pub type Jet = [f64; 10];
/// Jets of the two components of a vector field.
pub type VectorJet = [Jet; 2];

/// Number of jet entries needed for derivatives up to `order`.
pub const fn num_derivs(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

/// Dimension of the scalar polynomial space of total degree `degree`.
pub const fn dim(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Exponents `(a, b)` of `x^a y^b`, grouped by increasing total degree.
pub fn monomials(degree: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(dim(degree));
    for n in 0..=degree {
        for j in 0..=n {
            out.push((n - j, j));
        }
    }
    out
}

fn falling(a: usize, i: usize) -> f64 {
    (0..i).map(|m| (a - m) as f64).product()
}

/// Jets of all monomials `xi^a eta^b` of total degree `<= degree`, where
/// `xi = (x - center) / scale`. Derivatives are taken with respect to the
/// physical coordinates. `out[m * 10 + d]` holds derivative `d` of monomial
/// `m`; only the first `num_derivs(order)` entries of each block are written.
pub fn monomial_jets(degree: usize, center: Point, scale: f64, x: Point, order: usize, out: &mut [f64]) {
    let xi = (x[0] - center[0]) / scale;
    let eta = (x[1] - center[1]) / scale;
    let mut px = [1.0; 24];
    let mut py = [1.0; 24];
    for p in 1..=degree {
        px[p] = px[p - 1] * xi;
        py[p] = py[p - 1] * eta;
    }
    let inv = 1.0 / scale;
    let scales = [1.0, inv, inv * inv, inv * inv * inv];
    let nd = num_derivs(order);
    let mut m = 0;
    for n in 0..=degree {
        for j in 0..=n {
            let (a, b) = (n - j, j);
            let block = &mut out[m * 10..m * 10 + 10];
            for (d, &(i, k)) in DERIVS.iter().enumerate().take(nd) {
                block[d] = if i <= a && k <= b {
                    falling(a, i) * falling(b, k) * px[a - i] * py[b - k] * scales[i + k]
                } else {
                    0.0
                };
            }
            m += 1;
        }
    }
}

/// Polynomial in global coordinates with sparse coefficients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Poly2 {
    terms: BTreeMap<(u32, u32), f64>,
}

impl Poly2 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(c, 0, 0)
    }

    pub fn monomial(c: f64, a: u32, b: u32) -> Self {
        let mut p = Self::zero();
        p.add_term(c, a, b);
        p
    }

    pub fn x() -> Self {
        Self::monomial(1.0, 1, 0)
    }

    pub fn y() -> Self {
        Self::monomial(1.0, 0, 1)
    }

    fn add_term(&mut self, c: f64, a: u32, b: u32) {
        if c != 0.0 {
            *self.terms.entry((a, b)).or_insert(0.0) += c;
        }
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|&(a, b)| (a + b) as usize).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Poly2) -> Poly2 {
        let mut out = self.clone();
        for (&(a, b), &c) in &other.terms {
            out.add_term(c, a, b);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Poly2 {
        let mut out = Poly2::zero();
        for (&(a, b), &c) in &self.terms {
            out.add_term(s * c, a, b);
        }
        out
    }

    pub fn mul(&self, other: &Poly2) -> Poly2 {
        let mut out = Poly2::zero();
        for (&(a1, b1), &c1) in &self.terms {
            for (&(a2, b2), &c2) in &other.terms {
                out.add_term(c1 * c2, a1 + a2, b1 + b2);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Poly2 {
        (0..n).fold(Poly2::constant(1.0), |acc, _| acc.mul(self))
    }

    /// Partial derivative `d^i/dx^i d^j/dy^j`.
    pub fn diff(&self, i: u32, j: u32) -> Poly2 {
        let mut out = Poly2::zero();
        for (&(a, b), &c) in &self.terms {
            if a >= i && b >= j {
                let f = falling(a as usize, i as usize) * falling(b as usize, j as usize);
                out.add_term(c * f, a - i, b - j);
            }
        }
        out
    }

    pub fn eval(&self, p: Point) -> f64 {
        self.terms
            .iter()
            .map(|(&(a, b), &c)| c * p[0].powi(a as i32) * p[1].powi(b as i32))
            .sum()
    }

    pub fn jet(&self, p: Point) -> Jet {
        let mut out = [0.0; 10];
        for (d, &(i, j)) in DERIVS.iter().enumerate() {
            out[d] = self.diff(i as u32, j as u32).eval(p);
        }
        out
    }
}
