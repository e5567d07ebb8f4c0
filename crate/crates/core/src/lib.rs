//! Regular Lagrangian flows of planar Hamiltonian vector fields.
//!
//! The crate computes flows `X(t, z)` of autonomous fields `b = ∇⊥H` through the
//! level sets of `H`, checks them against an adaptive Runge–Kutta oracle, measures
//! the quantities entering BV/Sobolev regularity estimates for such flows, and builds
//! a nested Cantor-type field whose flow map has unbounded variation.
//!
//! Modules:
//! - [`field`]: scalar and vector field abstractions with analytic, grid and
//!   piecewise-affine backends.
//! - [`hamiltonian`]: streamfunction recovery, level curves as graphs, regular-level
//!   decomposition.
//! - [`flow`]: level-set flow, Runge–Kutta oracle, flow maps, crossing times.
//! - [`regularity`]: variation profiles, coarea densities, estimate verifiers, discrete
//!   TV and Sobolev norms.
//! - [`counterexample`]: the nested construction, its mollification and crossing-time
//!   ladders.

pub mod counterexample;
pub mod error;
pub mod field;
pub mod flow;
pub mod geometry;
pub mod hamiltonian;
pub mod quadrature;
pub mod regularity;

pub use error::{Error, Result};
pub use geometry::{AxisRect, Point, Vec2};
