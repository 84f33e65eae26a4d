//! Solvers for `A^alpha u = phi` with `A` symmetric positive definite.

pub mod cauchy;
pub mod cli;
pub mod error;
pub mod error_analysis;
pub mod exp_prod;
pub mod linalg;
pub mod operator;
pub mod quadrature;
pub mod rng;
pub mod solver;
pub mod stepping;
pub mod sum_approx;

pub use error::{Error, Result};
