//! Adaptive Heavy-ball with Polyak step-sizes for convex quadratics.
//!
//! The crate is organised around five pieces:
//!
//! * [`quadratic_model`]: problem instances with a controlled spectrum.
//! * [`solvers`]: gradient descent, Heavy-ball and conjugate gradient
//!   variants behind one stepping interface, including the adaptive
//!   Heavy-ball method that only needs `f`, `∇f` and `f⋆`.
//! * [`krylov_oracle`]: brute-force Q-optimal iterates used as ground truth.
//! * [`polynomial_view`]: residual polynomials, spectral measures and the
//!   orthogonal-polynomial recursion behind the adaptive method.
//! * [`harness`]: the `run`/`verify` experiment driver and CSV output.
//!
//! Data-parallel work (matrix-vector products at large dimension, method
//! ensembles, oracle sweeps) goes through [`par`], which uses rayon when the
//! `parallel` feature is enabled and runs sequentially otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod krylov_oracle;
pub mod par;
pub mod plot;
pub mod polynomial_view;
pub mod quadratic_model;
pub mod solvers;

pub use error::{Error, Result};
pub use quadratic_model::{make_problem, QuadraticProblem, SpectrumKind, SpectrumSpec, XStar};
pub use solvers::{run, Method, QPolynomial, RunSettings, Trajectory};
