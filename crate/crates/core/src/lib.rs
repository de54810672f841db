//! Semiconcave viscosity solutions of stationary Hamilton–Jacobi equations
//! in the plane, and the singular curves they carry.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: vectors, small convex sets, cones.
//! - [`hamiltonian`]: Tonelli Hamiltonians, Legendre transform, flow.
//! - [`action`]: fundamental solution and Lax–Oleinik operators.
//! - [`solution`]: solutions with superdifferential queries.
//! - [`characteristics`]: strict, generalized, intrinsic and mollified arcs.
//! - [`uniqueness`]: verifiers comparing arcs.

pub mod action;
pub mod characteristics;
pub mod error;
pub mod expr;
pub mod field;
pub mod geometry;
pub mod hamiltonian;
pub mod optimize;
pub mod solution;
pub mod uniqueness;

pub use error::{Error, Result};
pub use geometry::{ConeSign, ConeSpec, ConvexSet2D, Mat2, Membership, Rect, SetKind, Vec2};
pub use hamiltonian::{Family, Hamiltonian, Lagrangian, PhasePoint};
pub use solution::SolutionRep;
