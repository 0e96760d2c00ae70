//! Semilinear Hamilton-Jacobi-Bellman equations on the half-line with an
//! absorbing barrier at zero: finite-difference solvers, Picard iteration,
//! Monte Carlo verification, and two worked control problems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod consumption;
pub mod diffusion;
pub mod dividend;
pub mod error;
pub mod expr;
pub mod fixedpoint;
pub mod grid;
pub mod hamiltonian;
pub mod linear_pde;
pub mod numerics;
pub mod run;

pub use error::{Error, Result};
