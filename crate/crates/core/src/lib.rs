//! Quasistatic frictional contact between two viscoelastic bodies in 2D,
//! discretized with a symmetric Galerkin boundary element method.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod contact;
pub mod error;
pub mod evolve;
pub mod kernels;
pub mod linalg;
pub mod mesh;
pub mod output;
pub mod par;
pub mod qp;
pub mod scenario;
pub mod quadrature;
pub mod runner;
pub mod steklov;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
