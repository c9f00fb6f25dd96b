//! Numerical laboratory for reiterated (two-level) periodic homogenization of
//! convex integral energies with Orlicz growth.
//!
//! The crate computes effective energy densities by convex cell-problem
//! minimization over periodic correctors, checks reiterated two-scale
//! convergence statements on constructed oscillating sequences, and compares
//! direct minimizations of the oscillating functional against the
//! homogenized minimum at a decreasing list of scale parameters.
//!
//! Module map:
//! - [`nfunction`]: Orlicz generators, numerical Legendre conjugates,
//!   doubling-condition diagnostics, Luxemburg norms.
//! - [`integrand`]: the two-scale integrand f(y, z, xi), its gradient, the
//!   built-in catalog, and sampled hypothesis validation.
//! - [`fields`]: sampled periodic fields with quadrature, differentiation and
//!   mean-zero projection.
//! - [`cellsolver`]: inner and outer cell problems, effective-density tables.
//! - [`multiscale`]: pairing tests, norm convergence, recovery sequences and
//!   the order-two hessian decomposition checks.
//! - [`gammaharness`]: direct minimization of the oscillating energy and
//!   convergence studies.

// Numeric-code idioms kept on purpose: negated comparisons catch NaN inputs,
// and index loops mirror the stencil arithmetic they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]
#![allow(clippy::type_complexity)]
#![allow(clippy::manual_is_multiple_of)]

pub mod cellsolver;
pub mod error;
pub mod expr;
pub mod fields;
pub mod gammaharness;
pub mod integrand;
pub mod multiscale;
pub mod nfunction;
pub mod solver;

pub use error::{Error, Result};
