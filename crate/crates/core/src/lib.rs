//! Preconditioned conjugate-gradient-like eigensolvers for the smallest
//! eigenpair of a Hermitian definite pencil `A x = λ M x`.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(a < b)` rejects NaN along with the failing comparison.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod dense;
pub mod error;
pub mod estimates;
pub mod linops;
pub mod precond;
pub mod problems;
pub mod rayleigh_ritz;
pub mod scalar;
pub mod solvers;
pub mod vecops;

pub use error::{Error, Result};
pub use linops::{m_inner, m_norm, rayleigh_quotient, residual, CsrMatrix, HermitianOperator, HermitianPencil};
pub use scalar::{Complex64, Scalar};
