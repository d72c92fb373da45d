//! Problem data: coefficient fields, forcing and manufactured solutions.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::poly::{Poly2, VectorJet, DX, DXX, DXXX, DXXY, DXY, DXYY, DY, DYY, DYYY};
use crate::{Error, Point, Result};

/// Advection field `b` with its Jacobian `grad_b[i][j] = d b_i / d x_j`, and
/// reaction `c` with its gradient.
pub trait Flow: Send + Sync {
    fn advection(&self, x: Point) -> (Point, [[f64; 2]; 2]);
    fn reaction(&self, x: Point) -> (f64, Point);
}

/// Velocity jets to order three and pressure with gradient.
pub trait ExactSolution: Send + Sync {
    fn velocity(&self, x: Point) -> VectorJet;
    fn pressure(&self, x: Point) -> (f64, Point);
}

/// Force `f` together with its scalar curl.
pub type ForceField = Arc<dyn Fn(Point) -> (Point, f64) + Send + Sync>;

/// `(b . grad) w` from velocity jets.
pub fn convective_derivative(b: Point, w: &VectorJet) -> Point {
    [b[0] * w[0][DX] + b[1] * w[0][DY], b[0] * w[1][DX] + b[1] * w[1][DY]]
}

/// `L w = -nu lap w + (b . grad) w + c w`.
pub fn apply_operator(nu: f64, b: Point, c: f64, w: &VectorJet) -> Point {
    let conv = convective_derivative(b, w);
    [0, 1].map(|i| -nu * (w[i][DXX] + w[i][DYY]) + conv[i] + c * w[i][0])
}

/// Scalar curl of `L w`, using the product rule on `b` and `c`. The same
/// routine serves basis functions and exact solutions.
pub fn curl_operator(nu: f64, b: Point, grad_b: [[f64; 2]; 2], c: f64, grad_c: Point, w: &VectorJet) -> f64 {
    let [w1, w2] = w;
    let curl_lap = w2[DXXX] + w2[DXYY] - w1[DXXY] - w1[DYYY];
    // d/dx of (b . grad) w2 minus d/dy of (b . grad) w1
    let dx_conv2 = grad_b[0][0] * w2[DX] + grad_b[1][0] * w2[DY] + b[0] * w2[DXX] + b[1] * w2[DXY];
    let dy_conv1 = grad_b[0][1] * w1[DX] + grad_b[1][1] * w1[DY] + b[0] * w1[DXY] + b[1] * w1[DYY];
    let curl_react = grad_c[0] * w2[0] + c * w2[DX] - grad_c[1] * w1[0] - c * w1[DY];
    -nu * curl_lap + dx_conv2 - dy_conv1 + curl_react
}

#[derive(Clone)]
pub struct OseenProblem {
    pub nu: f64,
    /// Lower bound for `c - div(b) / 2`.
    pub r0: f64,
    pub flow: Arc<dyn Flow>,
    pub force: ForceField,
    pub exact: Option<Arc<dyn ExactSolution>>,
    /// Velocity boundary values; homogeneous when absent. Only the velocity
    /// jets of the field are used.
    pub boundary: Option<Arc<dyn ExactSolution>>,
}

impl std::fmt::Debug for OseenProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OseenProblem")
            .field("nu", &self.nu)
            .field("r0", &self.r0)
            .field("has_exact", &self.exact.is_some())
            .field("has_boundary_data", &self.boundary.is_some())
            .finish()
    }
}

impl OseenProblem {
    pub fn new(nu: f64, r0: f64, flow: Arc<dyn Flow>, force: ForceField) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidArgument(format!("viscosity must be positive, got {nu}")));
        }
        if !(r0 > 0.0) {
            return Err(Error::InvalidArgument(format!("r0 must be positive, got {r0}")));
        }
        Ok(OseenProblem {
            nu,
            r0,
            flow,
            force,
            exact: None,
            boundary: None,
        })
    }

    /// Problem whose force is generated from an exact solution:
    /// `f = L u + grad p`.
    pub fn manufactured(nu: f64, r0: f64, flow: Arc<dyn Flow>, exact: Arc<dyn ExactSolution>) -> Result<Self> {
        let (fl, ex) = (flow.clone(), exact.clone());
        let force: ForceField = Arc::new(move |x| {
            let w = ex.velocity(x);
            let (b, gb) = fl.advection(x);
            let (c, gc) = fl.reaction(x);
            let (_, gp) = ex.pressure(x);
            let lu = apply_operator(nu, b, c, &w);
            ([lu[0] + gp[0], lu[1] + gp[1]], curl_operator(nu, b, gb, c, gc, &w))
        });
        let mut p = Self::new(nu, r0, flow, force)?;
        p.boundary = Some(exact.clone());
        p.exact = Some(exact);
        Ok(p)
    }

    /// Same problem with `grad phi` added to the force. The exact pressure,
    /// if any, is dropped since it is no longer known up to a constant.
    pub fn with_added_gradient(&self, grad_phi: Arc<dyn Fn(Point) -> Point + Send + Sync>) -> Self {
        let base = self.force.clone();
        let force: ForceField = Arc::new(move |x| {
            let (f, cf) = base(x);
            let g = grad_phi(x);
            ([f[0] + g[0], f[1] + g[1]], cf)
        });
        OseenProblem {
            force,
            exact: None,
            ..self.clone()
        }
    }

    /// Compares the supplied derivatives of `b`, `c` and the curl of `f`
    /// with central differences at the given points.
    pub fn check_derivatives(&self, points: &[Point], rel_tol: f64) -> Result<()> {
        let h = 1e-5;
        let close = |a: f64, b: f64, scale: f64| (a - b).abs() <= rel_tol * (scale.abs() + 1.0);
        for &x in points {
            let shift = |d: usize, s: f64| {
                let mut y = x;
                y[d] += s;
                y
            };
            let (_, gb) = self.flow.advection(x);
            let (_, gc) = self.flow.reaction(x);
            let (_, curl_f) = (self.force)(x);
            for d in 0..2 {
                let (bp, _) = self.flow.advection(shift(d, h));
                let (bm, _) = self.flow.advection(shift(d, -h));
                for i in 0..2 {
                    let fd = (bp[i] - bm[i]) / (2.0 * h);
                    if !close(fd, gb[i][d], fd) {
                        return Err(Error::InvalidArgument(format!("grad b inconsistent at {x:?}: {} vs {fd}", gb[i][d])));
                    }
                }
                let fd = (self.flow.reaction(shift(d, h)).0 - self.flow.reaction(shift(d, -h)).0) / (2.0 * h);
                if !close(fd, gc[d], fd) {
                    return Err(Error::InvalidArgument(format!("grad c inconsistent at {x:?}")));
                }
            }
            let f = |y: Point| (self.force)(y).0;
            let fd = (f(shift(0, h))[1] - f(shift(0, -h))[1]) / (2.0 * h) - (f(shift(1, h))[0] - f(shift(1, -h))[0]) / (2.0 * h);
            let scale = f(x)[0].abs() + f(x)[1].abs() + fd.abs();
            if !close(fd, curl_f, scale) {
                return Err(Error::InvalidArgument(format!("curl f inconsistent at {x:?}: {curl_f} vs {fd}")));
            }
        }
        Ok(())
    }
}

/// `d^n/dt^n sin(t)`.
fn dsin(n: usize, t: f64) -> f64 {
    match n % 4 {
        0 => t.sin(),
        1 => t.cos(),
        2 => -t.sin(),
        _ => -t.cos(),
    }
}

fn dcos(n: usize, t: f64) -> f64 {
    dsin(n + 1, t)
}

/// Smooth benchmark on the unit square:
/// `u = (sin 2pi x sin 2pi y, cos 2pi x cos 2pi y)`,
/// `p = (cos 4pi x - cos 4pi y) / 4`, `b = u + (0, 1)`, `c = 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Benchmark;

impl ExactSolution for Benchmark {
    fn velocity(&self, x: Point) -> VectorJet {
        let w = 2.0 * PI;
        let (a, b) = (w * x[0], w * x[1]);
        let mut out = [[0.0; 10]; 2];
        for (d, &(i, j)) in crate::poly::DERIVS.iter().enumerate() {
            let s = w.powi((i + j) as i32);
            out[0][d] = s * dsin(i, a) * dsin(j, b);
            out[1][d] = s * dcos(i, a) * dcos(j, b);
        }
        out
    }

    fn pressure(&self, x: Point) -> (f64, Point) {
        let w = 4.0 * PI;
        (
            0.25 * ((w * x[0]).cos() - (w * x[1]).cos()),
            [-PI * (w * x[0]).sin(), PI * (w * x[1]).sin()],
        )
    }
}

impl Flow for Benchmark {
    fn advection(&self, x: Point) -> (Point, [[f64; 2]; 2]) {
        let u = self.velocity(x);
        ([u[0][0], u[1][0] + 1.0], [[u[0][DX], u[0][DY]], [u[1][DX], u[1][DY]]])
    }

    fn reaction(&self, _x: Point) -> (f64, Point) {
        (1.0, [0.0, 0.0])
    }
}

pub fn benchmark_problem(nu: f64) -> Result<OseenProblem> {
    OseenProblem::manufactured(nu, 1.0, Arc::new(Benchmark), Arc::new(Benchmark))
}

/// Polynomial data: velocity, pressure, advection and reaction.
#[derive(Debug, Clone)]
pub struct PolynomialData {
    pub u: [Poly2; 2],
    pub p: Poly2,
    pub b: [Poly2; 2],
    pub c: Poly2,
}

impl ExactSolution for PolynomialData {
    fn velocity(&self, x: Point) -> VectorJet {
        [self.u[0].jet(x), self.u[1].jet(x)]
    }

    fn pressure(&self, x: Point) -> (f64, Point) {
        let j = self.p.jet(x);
        (j[0], [j[DX], j[DY]])
    }
}

impl Flow for PolynomialData {
    fn advection(&self, x: Point) -> (Point, [[f64; 2]; 2]) {
        let (j0, j1) = (self.b[0].jet(x), self.b[1].jet(x));
        ([j0[0], j1[0]], [[j0[DX], j0[DY]], [j1[DX], j1[DY]]])
    }

    fn reaction(&self, x: Point) -> (f64, Point) {
        let j = self.c.jet(x);
        (j[0], [j[DX], j[DY]])
    }
}

/// `curl(s) = (ds/dy, -ds/dx)`.
pub fn poly_curl(s: &Poly2) -> [Poly2; 2] {
    [s.diff(0, 1), s.diff(1, 0).scale(-1.0)]
}

/// The square bubble `x (1 - x) y (1 - y)`.
pub fn bubble() -> Poly2 {
    let one = Poly2::constant(1.0);
    let omx = one.add(&Poly2::x().scale(-1.0));
    let omy = one.add(&Poly2::y().scale(-1.0));
    Poly2::x().mul(&omx).mul(&Poly2::y()).mul(&omy)
}

/// Polynomial manufactured solution exactly representable at order `k`:
/// velocity `curl(x^k y + 2 x y^k + y^(k+1))` of degree `k`, a zero-mean
/// pressure of degree at most `k - 1`, and a nonconstant advection field.
/// The velocity does not vanish on the boundary.
pub fn polynomial_mms(k: usize) -> Result<PolynomialData> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be >= 2, got {k}")));
    }
    let (x, y) = (Poly2::x(), Poly2::y());
    let one = Poly2::constant(1.0);
    // b = 4 curl(bubble) + (1/2, 1/4): divergence free, b.n != 0 on parts of the boundary.
    let cb = poly_curl(&bubble());
    let b = [
        cb[0].scale(4.0).add(&Poly2::constant(0.5)),
        cb[1].scale(4.0).add(&Poly2::constant(0.25)),
    ];
    let c = one.add(&x.scale(0.5));
    let p = match k {
        2 => x.add(&y).add(&Poly2::constant(-1.0)),
        _ => x.mul(&x).add(&y.mul(&y).scale(-1.0)).add(&x.mul(&y)).add(&Poly2::constant(-0.25)),
    };
    let stream = x.pow(k as u32).mul(&y).add(&x.mul(&y.pow(k as u32)).scale(2.0)).add(&y.pow(k as u32 + 1));
    let u = poly_curl(&stream);
    Ok(PolynomialData { u, p, b, c })
}

pub fn polynomial_problem(nu: f64, k: usize) -> Result<OseenProblem> {
    let data = Arc::new(polynomial_mms(k)?);
    // c - div(b)/2 = 1 + x/2 >= 1
    OseenProblem::manufactured(nu, 1.0, data.clone(), data)
}
