//! Stabilized H(div)-conforming finite elements for the steady Oseen equations.
//!
//! The discretization pairs the Stenberg velocity element of order `k` with
//! discontinuous pressures of order `k - 1`. Diffusion is handled by a
//! symmetric interior penalty form, convection by upwinding, and a
//! pressure-free vorticity stabilization acts on `curl(L u)`. The Hermite
//! element of order `k + 1` closes the discrete de Rham complex
//! `Z_h -> V_h -> Q_h` and is used to audit its exactness.
//!
//! Module map:
//!
//! * [`mesh`]: structured/perturbed triangulations of the unit square.
//! * [`quadrature`]: triangle and edge rules.
//! * [`fe_basis`]: per-element dual bases built on the physical element.
//! * [`fe_space`]: global numbering, boundary constraints, interpolation.
//! * [`forms`]: bilinear forms, right-hand side, norms and the curl map.
//! * [`solver`]: saddle-point solve and inf-sup estimation.
//! * [`analysis`]: errors, convergence studies and complex audits.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod fe_basis;
pub mod fe_space;
pub mod forms;
pub mod linalg;
pub mod mesh;
pub mod par;
pub mod poly;
pub mod problem;
pub mod quadrature;
pub mod solver;
pub mod sparse;

pub use analysis::{ConvergenceTable, ErrorReport, ExactnessReport, ProblemKind, StudyConfig};
pub use fe_space::FeSpace;
pub use forms::{Convection, DiscretizationParams};
pub use mesh::Mesh;
pub use problem::OseenProblem;

/// 2D point or vector.
pub type Point = [f64; 2];

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("singular degree-of-freedom matrix on element {element} (condition estimate {condition:.3e})")]
    SingularElement { element: usize, condition: f64 },
    #[error("unsupported quadrature degree {0} (supported: 1..=20)")]
    UnsupportedQuadrature(usize),
    #[error("missing data: {0}")]
    MissingData(String),
    #[error("linear solver failure: {0}")]
    Solver(String),
    #[error("solver tolerance not met: residual {residual:.3e} > {tolerance:.3e}")]
    ToleranceNotMet { residual: f64, tolerance: f64 },
    #[error("problem too large for dense path: {size} > {cap}")]
    TooLarge { size: usize, cap: usize },
    #[error("convergence study aborted at level {level}: {reason}")]
    StudyAborted {
        level: usize,
        reason: String,
        partial: Box<analysis::ConvergenceTable>,
    },
    #[error("mesh parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
