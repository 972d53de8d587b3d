//! Dense and Tucker tensor algebra.
//!
//! Layout is row-major with the last index varying fastest. The mode-`j`
//! unfolding flattens the remaining indices in the same order, so for an
//! order-3 tensor `M_0(t)[i0, i1 * d2 + i2] = t[i0, i1, i2]`.

mod dense;
mod diagnostics;
pub mod io;
mod linalg;
mod shape;
mod sparse;
mod tucker;

pub use dense::DenseTensor;
pub use diagnostics::{incoherence, spectral_summary, spikiness, SpectralSummary};
pub use linalg::{singular_values, truncated_svd, TruncatedSvd};
pub use shape::Shape;
pub use sparse::SparseTensor;
pub use tucker::{hosvd, tucker_to_dense, TuckerTensor};

pub(crate) use linalg::{leading_left_vectors, pseudo_inverse};
pub(crate) use shape::IndexCounter;
pub(crate) use tucker::{check_ranks, hosvd_factored};

/// Dynamically sized column-major `f64` matrix.
pub type Matrix = nalgebra::DMatrix<f64>;

/// `t` unfolded along `mode`; free-function form of [`DenseTensor::matricize`].
pub fn matricize(t: &DenseTensor, mode: usize) -> crate::Result<Matrix> {
    t.matricize(mode)
}

pub fn tensorize(mat: &Matrix, shape: &Shape, mode: usize) -> crate::Result<DenseTensor> {
    DenseTensor::tensorize(mat, shape, mode)
}

pub fn mode_product(t: &DenseTensor, w: &Matrix, mode: usize) -> crate::Result<DenseTensor> {
    t.mode_product(w, mode)
}
