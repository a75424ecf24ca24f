//! Factored formulations of Schatten quasi-norms.
//!
//! The Schatten-`p` quasi-norm of a matrix equals the minimum, over all
//! factorizations `X = U_1 ... U_M`, of the product of Schatten-`p_i` norms of
//! the factors whenever `sum_i 1/p_i = 1/p`, and also the minimum of a weighted
//! sum of their powers. This crate provides:
//!
//! * [`linalg`]: dense matrices, thin SVD, seeded random sampling;
//! * [`schatten`]: Schatten norms and quasi-norms;
//! * [`factorize`]: exponent splits, optimal factor constructors and objectives;
//! * [`verify`]: numerical certificates that no factorization beats the norm;
//! * [`solve`]: proximal operators and matrix-completion solvers;
//! * [`io`] and [`harness`]: Matrix Market / CSV I/O, synthetic problems and the
//!   experiment runner behind the `quasinorm` binary.

pub mod error;
pub mod factorize;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod schatten;
pub mod solve;
pub mod verify;

pub use error::{Error, Result};
pub use factorize::{
    equal_split, make_split, optimal_factors_m, optimal_factors_three, optimal_factors_two,
    product_objective, weighted_sum_objective, ExponentSplit, FactorSet,
};
pub use linalg::{thin_svd, DenseMatrix, SpectralDecomposition};
pub use schatten::{schatten_norm, SchattenExponent};
