use std::cmp::Ordering;

use super::{DenseTensor, Matrix};
use crate::error::{Error, Result};

/// Rank-`k` truncation `mat ≈ left · diag(singular_values) · rightᵀ`.
#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    pub left: Matrix,
    pub singular_values: Vec<f64>,
    pub right: Matrix,
}

impl TruncatedSvd {
    pub fn reconstruct(&self) -> Matrix {
        let mut scaled = self.left.clone();
        for (mut col, s) in scaled.column_iter_mut().zip(&self.singular_values) {
            col *= *s;
        }
        scaled * self.right.transpose()
    }
}

/// Dense SVD through faer, sorted non-increasing.
struct FullSvd {
    u: Matrix,
    s: Vec<f64>,
    v: Matrix,
}

fn to_faer(m: &Matrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn thin_svd(mat: &Matrix) -> FullSvd {
    let svd = to_faer(mat).thin_svd().expect("SVD of a finite matrix converges");
    let s: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let order = descending_order(&s);
    let u = from_faer(svd.U());
    let v = from_faer(svd.V());
    let pick = |src: &Matrix| Matrix::from_fn(src.nrows(), order.len(), |i, j| src[(i, order[j])]);
    FullSvd {
        u: pick(&u),
        s: order.iter().map(|&k| s[k]).collect(),
        v: pick(&v),
    }
}

/// Leading `k` singular triplets, sorted non-increasing, with the first
/// nonzero entry of every left vector made positive.
pub fn truncated_svd(mat: &Matrix, k: usize) -> Result<TruncatedSvd> {
    let (rows, cols) = mat.shape();
    let full = rows.min(cols);
    if k == 0 || k > full {
        return Err(Error::RankOutOfRange {
            mode: 0,
            rank: k,
            dim: full,
        });
    }
    if let Some(pos) = mat.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(pos));
    }
    let svd = thin_svd(mat);
    let mut left = svd.u.columns(0, k).clone_owned();
    let mut right = svd.v.columns(0, k).clone_owned();
    for (sign, mut col) in fix_column_signs(&mut left).into_iter().zip(right.column_iter_mut()) {
        if sign < 0.0 {
            col.neg_mut();
        }
    }
    Ok(TruncatedSvd {
        left,
        singular_values: svd.s[..k].to_vec(),
        right,
    })
}

/// All singular values of `mat`, non-increasing.
pub fn singular_values(mat: &Matrix) -> Vec<f64> {
    thin_svd(mat).s
}

/// Stable index order sorting `values` non-increasingly. Ties keep the
/// backend order.
fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(Ordering::Equal));
    order
}

/// Sign of the first entry that is not numerically zero.
fn leading_sign(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    v.iter()
        .find(|x| x.abs() > 1e-10 * scale)
        .map_or(1.0, |x| x.signum())
}

pub(crate) fn fix_column_signs(u: &mut Matrix) -> Vec<f64> {
    let mut signs = Vec::with_capacity(u.ncols());
    for mut col in u.column_iter_mut() {
        let s = leading_sign(col.as_slice());
        if s < 0.0 {
            col.neg_mut();
        }
        signs.push(s);
    }
    signs
}

/// Top `r` left singular vectors of `M_mode(t)`, sign-normalized.
///
/// Short, wide unfoldings go through the eigendecomposition of the
/// `d_j × d_j` Gram matrix; the rest use a thin SVD of the unfolding.
pub(crate) fn leading_left_vectors(t: &DenseTensor, mode: usize, r: usize) -> Matrix {
    let n = t.shape().dim(mode);
    let cols = t.shape().numel_except(mode);
    let mut u = if r > cols || (cols > 16 * n && n <= 512) {
        top_eigenvectors(t.mode_gram(mode), r)
    } else {
        let svd = thin_svd(&t.matricize(mode).expect("mode validated by caller"));
        svd.u.columns(0, r).clone_owned()
    };
    fix_column_signs(&mut u);
    u
}

/// Eigenvectors of a symmetric matrix for its `r` largest eigenvalues.
pub(crate) fn top_eigenvectors(sym: Matrix, r: usize) -> Matrix {
    let eig = to_faer(&sym)
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("symmetric eigendecomposition converges");
    let values: Vec<f64> = eig.S().column_vector().iter().copied().collect();
    let order = descending_order(&values);
    let vectors = eig.U();
    Matrix::from_fn(sym.nrows(), r, |i, j| vectors[(i, order[j])])
}

/// Thin QR `f = q · r` with `q` having orthonormal columns.
pub(crate) fn thin_qr(f: &Matrix) -> (Matrix, Matrix) {
    let qr = f.clone().qr();
    (qr.q(), qr.r())
}

/// Moore–Penrose pseudo-inverse treating singular values below
/// `rel_cutoff · σ_max` as zero. Returns the pseudo-inverse together with
/// `σ_min / σ_max`.
pub(crate) fn pseudo_inverse(mat: &Matrix, rel_cutoff: f64) -> (Matrix, f64) {
    let (rows, cols) = mat.shape();
    let mut pinv = Matrix::zeros(cols, rows);
    let svd = thin_svd(mat);
    let s_max = svd.s.first().copied().unwrap_or(0.0);
    if s_max == 0.0 {
        return (pinv, 0.0);
    }
    let s_min = svd.s.last().copied().unwrap_or(0.0);
    for (i, &si) in svd.s.iter().enumerate() {
        if si > rel_cutoff * s_max {
            pinv += svd.v.column(i) * svd.u.column(i).transpose() / si;
        }
    }
    (pinv, s_min / s_max)
}

/// `‖uᵀu − I‖_F`
pub(crate) fn orthonormality_defect(u: &Matrix) -> f64 {
    let gram = u.transpose() * u;
    (gram - Matrix::identity(u.ncols(), u.ncols())).norm()
}
