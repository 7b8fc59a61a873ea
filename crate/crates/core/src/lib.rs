//! Lipschitz-continuous reformulations of parametric quadratic programs.
//!
//! A parametric QP projects a desired point `pi_des(x)` onto a polyhedron
//! `K(x) = { u : A(x) u <= b(x) }`. Its minimizer can jump or lose Lipschitz
//! continuity when active constraint rows become linearly dependent. This
//! crate implements a reformulation that replaces `K(x)` by an inscribed ball
//! around a Lipschitz feasible selection `pi_f(x)`, which has a closed-form,
//! provably Lipschitz solution, together with:
//!
//! - an expression language for defining problem data ([`expr`]),
//! - parametric problem models with row normalization and a registry of
//!   built-in case studies ([`problem`]),
//! - geometric primitives: ball projection, analytic center, Steiner point
//!   ([`geometry`]),
//! - the SOCP closed form, a ball-intersection QCQP solver, and an exact
//!   enumeration-based QP oracle ([`solvers`]),
//! - parameter sweeps and empirical Lipschitz-regularity analysis
//!   ([`analysis`]),
//! - closed-loop RK4 simulation ([`sim`]),
//! - the `lipsol` command-line front end ([`cli`]).
//!
//! Core numerics are generic over the scalar type via [`scalar::Scalar`];
//! the aliases below fix `f64`, which is what the CLI and the built-in
//! problems use.

pub mod analysis;
pub mod cli;
pub mod expr;
pub mod geometry;
pub mod linalg;
pub mod problem;
pub mod scalar;
pub mod sim;
pub mod solvers;

pub use scalar::Scalar;

/// Default scalar type used by the CLI and built-in problems.
pub type Real = f64;

pub type Expression = expr::Expression<Real>;
pub type ParametricProblem = problem::ParametricProblem<Real>;
pub type ProblemInstance = problem::ProblemInstance<Real>;
pub type Polytope = problem::Polytope<Real>;
pub type LipschitzMetadata = problem::LipschitzMetadata<Real>;
pub type SolveResult = solvers::SolveResult<Real>;
pub type NewtonSettings = geometry::NewtonSettings<Real>;
pub type Ball = geometry::Ball<Real>;
