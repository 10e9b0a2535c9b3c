//! Semilinear parabolic equations with a nonlocal diffusion term,
//!
//! ```text
//! u_t = sum_ij d_i(a_ij d_j u) + int_D k(xi, y) u(t, y) dy - b u + g(t, u),
//! ```
//!
//! homogeneous Dirichlet data and a nonlocal-in-time condition
//! `u(a, .) = M(u)`, solved in mild form on `L^p(D)`.
//!
//! The crate is organized bottom-up:
//!
//! * [`grid`]: domains, nodal grid functions and discrete `L^p` norms.
//! * [`elliptic`]: the divergence-form operator `A`.
//! * [`semigroup`]: the contraction semigroup `e^{tA}` and the IMEX propagator.
//! * [`rhs`]: the nonlinearity `f(t, eta)`.
//! * [`conditions`]: the condition functionals `M`.
//! * [`solver`]: fixed-point and continuation solvers for `x(a) = M(x)`.
//! * [`bounding`]: bounding functions, the duality pairing and radius thresholds.

// `!(x > 0.0)` style checks are deliberate: NaN has to fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounding;
pub mod conditions;
pub mod elliptic;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod rhs;
pub mod semigroup;
pub mod solver;

pub use bounding::{
    duality_pairing, min_radius, pairing_bound, transversality_check, BoundingKind, BoundingSpec, RadiusVariant,
    SphereSampling, TransversalityCertificate,
};
pub use conditions::{ConditionFunctional, M0Certificate, ScalarMap, TimeWeight};
pub use elliptic::{assemble, estimate_ellipticity, CoefficientField, EllipticOperator};
pub use error::{Error, Result};
pub use grid::{Domain, DomainKind, GridFunction, Trajectory};
pub use rhs::{Kernel, Reaction, RhsModel};
pub use semigroup::{ContractionCertificate, Propagator, Scheme};
pub use solver::{invariant_ball_check, BallCertificate, Method, Problem, SolveConfig, SolveReport};
