//! Low-rank plus sparse tensor estimation.
//!
//! A latent tensor `T* + S*` is observed through a Gaussian, Bernoulli or
//! Poisson model; `T*` has small Tucker rank and `S*` has few nonzeros per
//! slice. The estimator alternates a Riemannian gradient step on the
//! fixed-rank manifold with a gradient-pruning update of the sparse part.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod init;
pub mod losses;
pub mod manifold;
pub mod pruning;
pub mod solver;
pub mod synth;
pub mod tensor;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use tensor::{DenseTensor, Matrix, Shape, SparseTensor, TuckerTensor};
