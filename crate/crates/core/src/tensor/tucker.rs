use super::linalg::{fix_column_signs, leading_left_vectors, orthonormality_defect, thin_qr};
use super::{DenseTensor, Matrix, Shape};
use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-10;

/// `C · [[U_1, ..., U_m]]` with orthonormal factors.
#[derive(Clone, Debug, PartialEq)]
pub struct TuckerTensor {
    core: DenseTensor,
    factors: Vec<Matrix>,
    shape: Shape,
}

impl TuckerTensor {
    pub fn new(core: DenseTensor, factors: Vec<Matrix>) -> Result<Self> {
        let order = core.shape().order();
        if factors.len() != order {
            return Err(Error::DimensionMismatch {
                expected: format!("{order} factors"),
                got: format!("{}", factors.len()),
            });
        }
        for (mode, u) in factors.iter().enumerate() {
            let r = core.shape().dim(mode);
            if u.ncols() != r {
                return Err(Error::DimensionMismatch {
                    expected: format!("{r} columns in factor {mode}"),
                    got: format!("{}", u.ncols()),
                });
            }
            if r > u.nrows() {
                return Err(Error::RankOutOfRange {
                    mode,
                    rank: r,
                    dim: u.nrows(),
                });
            }
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "factors",
                    reason: format!("factor {mode} has non-finite entries"),
                });
            }
            let deviation = orthonormality_defect(u);
            if deviation > ORTHONORMAL_TOL {
                return Err(Error::NotOrthonormal { mode, deviation });
            }
        }
        Ok(Self::from_parts(core, factors))
    }

    pub(crate) fn from_parts(core: DenseTensor, factors: Vec<Matrix>) -> Self {
        let shape = Shape::new(factors.iter().map(|u| u.nrows()).collect::<Vec<_>>())
            .expect("factor row counts form a valid shape");
        Self { core, factors, shape }
    }

    /// Zero tensor at rank `r` with leading identity columns as factors.
    pub fn zeros(shape: &Shape, r: &[usize]) -> Result<Self> {
        check_ranks(shape, r)?;
        let factors = shape
            .dims()
            .iter()
            .zip(r)
            .map(|(&d, &rj)| Matrix::identity(d, rj))
            .collect();
        Ok(Self::from_parts(DenseTensor::zeros(Shape::new(r.to_vec())?), factors))
    }

    #[inline]
    pub fn core(&self) -> &DenseTensor {
        &self.core
    }

    #[inline]
    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    /// Dimensions of the represented dense tensor.
    #[inline]
    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.core.dims().to_vec()
    }

    /// Equals the Frobenius norm of the dense form since the factors are orthonormal.
    pub fn frobenius_norm(&self) -> f64 {
        self.core.frobenius_norm()
    }

    pub fn to_dense(&self) -> DenseTensor {
        let refs: Vec<Option<&Matrix>> = self.factors.iter().map(Some).collect();
        self.core.multi_mode_product_unchecked(&refs)
    }

    /// `‖C‖_F · Π_j max_i ‖e_iᵀU_j‖`, an upper bound on the dense `ℓ∞` norm.
    pub fn linf_bound(&self) -> f64 {
        self.factors.iter().fold(self.core.frobenius_norm(), |acc, u| {
            let max_row = u.row_iter().map(|row| row.norm()).fold(0.0, f64::max);
            acc * max_row
        })
    }
}

/// Dense form `C ×_1 U_1 ⋯ ×_m U_m`.
pub fn tucker_to_dense(tk: &TuckerTensor) -> DenseTensor {
    tk.to_dense()
}

pub(crate) fn check_ranks(shape: &Shape, r: &[usize]) -> Result<()> {
    if r.len() != shape.order() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} ranks", shape.order()),
            got: format!("{}", r.len()),
        });
    }
    for (mode, (&rj, &d)) in r.iter().zip(shape.dims()).enumerate() {
        if rj == 0 || rj > d {
            return Err(Error::RankOutOfRange { mode, rank: rj, dim: d });
        }
    }
    Ok(())
}

/// Truncated higher-order SVD: per-mode leading left singular vectors and the
/// projected core.
pub fn hosvd(t: &DenseTensor, r: &[usize]) -> Result<TuckerTensor> {
    check_ranks(t.shape(), r)?;
    if t.max_abs() == 0.0 {
        return TuckerTensor::zeros(t.shape(), r);
    }
    let factors: Vec<Matrix> = r
        .iter()
        .enumerate()
        .map(|(mode, &rj)| leading_left_vectors(t, mode, rj))
        .collect();
    let refs: Vec<&Matrix> = factors.iter().collect();
    let core = t.contract_all(&refs, None);
    Ok(TuckerTensor::from_parts(core, factors))
}

/// HOSVD of `core ×_1 F_1 ⋯ ×_m F_m` for arbitrary (not necessarily
/// orthonormal) `F_j`, without forming the dense tensor when every
/// `r_j ≤ s_j ≤ d_j`. Agrees with `hosvd` of the dense form up to the
/// representation of tied singular subspaces.
pub(crate) fn hosvd_factored(core: &DenseTensor, factors: &[Matrix], r: &[usize]) -> Result<TuckerTensor> {
    let shape = Shape::new(factors.iter().map(|f| f.nrows()).collect::<Vec<_>>())?;
    check_ranks(&shape, r)?;
    let compressible = factors
        .iter()
        .zip(r)
        .all(|(f, &rj)| f.ncols() <= f.nrows() && rj <= f.ncols());
    if !compressible {
        let refs: Vec<Option<&Matrix>> = factors.iter().map(Some).collect();
        return hosvd(&core.multi_mode_product_unchecked(&refs), r);
    }
    let (qs, rs): (Vec<Matrix>, Vec<Matrix>) = factors.iter().map(thin_qr).unzip();
    let rrefs: Vec<Option<&Matrix>> = rs.iter().map(Some).collect();
    let small = core.multi_mode_product_unchecked(&rrefs);
    if small.max_abs() == 0.0 {
        return TuckerTensor::zeros(&shape, r);
    }
    let mut inner: Vec<Matrix> = r
        .iter()
        .enumerate()
        .map(|(mode, &rj)| leading_left_vectors(&small, mode, rj))
        .collect();
    let mut outer = Vec::with_capacity(r.len());
    for (q, v) in qs.iter().zip(inner.iter_mut()) {
        let mut u = q * &*v;
        let signs = fix_column_signs(&mut u);
        for (mut col, s) in v.column_iter_mut().zip(signs) {
            if s < 0.0 {
                col.neg_mut();
            }
        }
        outer.push(u);
    }
    let refs: Vec<&Matrix> = inner.iter().collect();
    let new_core = small.contract_all(&refs, None);
    Ok(TuckerTensor::from_parts(new_core, outer))
}
