use nalgebra::{DMatrixView, DMatrixViewMut};

use super::{IndexCounter, Matrix, Shape};
use crate::error::{Error, Result};

/// Order-`m` array of `f64`, row-major with the last index varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    /// Builds a tensor, rejecting wrong lengths and non-finite entries.
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values for shape {}", shape.numel(), shape),
                got: format!("{} values", data.len()),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self { shape, data })
    }

    #[inline]
    pub(crate) fn from_raw(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.numel(), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        let data = vec![value; shape.numel()];
        Self { shape, data }
    }

    /// Fills every entry from its multi-index.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(shape.numel());
        let mut counter = IndexCounter::new(&shape);
        for _ in 0..shape.numel() {
            data.push(f(counter.index()));
            counter.advance();
        }
        Self::new(shape, data)
    }

    #[inline]
    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[self.shape.ravel(index)?])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `‖t‖_ℓ∞`
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn check_same_shape(&self, other: &DenseTensor) -> Result<()> {
        if self.shape == other.shape {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.shape.to_string(),
                got: other.shape.to_string(),
            })
        }
    }

    pub fn inner(&self, other: &DenseTensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseTensor {
        DenseTensor::from_raw(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &DenseTensor, f: impl Fn(f64, f64) -> f64) -> Result<DenseTensor> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(DenseTensor::from_raw(self.shape.clone(), data))
    }

    pub fn add(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scaled(&self, factor: f64) -> DenseTensor {
        self.map(|v| v * factor)
    }

    /// `‖self − other‖_F`
    pub fn distance(&self, other: &DenseTensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// Mode-`mode` unfolding `M_j(t)`, a `d_j × d_j^-` matrix whose column index
    /// flattens the remaining indices with the last one varying fastest.
    pub fn matricize(&self, mode: usize) -> Result<Matrix> {
        self.shape.check_mode(mode)?;
        let (left, n, right) = self.shape.split(mode);
        let mut mat = Matrix::zeros(n, left * right);
        for a in 0..left {
            for i in 0..n {
                let src = &self.data[(a * n + i) * right..(a * n + i + 1) * right];
                for (b, &v) in src.iter().enumerate() {
                    mat[(i, a * right + b)] = v;
                }
            }
        }
        Ok(mat)
    }

    /// Inverse of [`DenseTensor::matricize`].
    pub fn tensorize(mat: &Matrix, shape: &Shape, mode: usize) -> Result<DenseTensor> {
        shape.check_mode(mode)?;
        let (left, n, right) = shape.split(mode);
        if mat.nrows() != n || mat.ncols() != left * right {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", n, left * right),
                got: format!("{}x{}", mat.nrows(), mat.ncols()),
            });
        }
        let mut data = vec![0.0; shape.numel()];
        for a in 0..left {
            for i in 0..n {
                let dst = &mut data[(a * n + i) * right..(a * n + i + 1) * right];
                for (b, slot) in dst.iter_mut().enumerate() {
                    *slot = mat[(i, a * right + b)];
                }
            }
        }
        DenseTensor::new(shape.clone(), data)
    }

    /// Multilinear product `t ×_mode w` for a `p × d_mode` matrix `w`.
    pub fn mode_product(&self, w: &Matrix, mode: usize) -> Result<DenseTensor> {
        self.shape.check_mode(mode)?;
        if w.ncols() != self.shape.dim(mode) || w.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: format!("p x {} matrix", self.shape.dim(mode)),
                got: format!("{}x{}", w.nrows(), w.ncols()),
            });
        }
        Ok(self.mode_product_unchecked(w, mode))
    }

    pub(crate) fn mode_product_unchecked(&self, w: &Matrix, mode: usize) -> DenseTensor {
        let (left, n, right) = self.shape.split(mode);
        let p = w.nrows();
        let shape = self
            .shape
            .with_dim(mode, p)
            .expect("shrinking or growing one mode keeps a valid shape");
        let mut out = vec![0.0; left * p * right];
        if right == 1 {
            // Row-major `left × n` is column-major `n × left`.
            let x = DMatrixView::from_slice(&self.data, n, left);
            let mut o = DMatrixViewMut::from_slice(&mut out, p, left);
            o.gemm(1.0, w, &x, 0.0);
        } else {
            let wt = w.transpose();
            for a in 0..left {
                let block = DMatrixView::from_slice(&self.data[a * n * right..(a + 1) * n * right], right, n);
                let mut o = DMatrixViewMut::from_slice(&mut out[a * p * right..(a + 1) * p * right], right, p);
                o.gemm(1.0, &block, &wt, 0.0);
            }
        }
        DenseTensor::from_raw(shape, out)
    }

    /// Applies `t ×_j mats[j]` for every mode with `Some` matrix. Shrinking
    /// products go first.
    pub fn multi_mode_product(&self, mats: &[Option<&Matrix>]) -> Result<DenseTensor> {
        if mats.len() != self.shape.order() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} mode matrices", self.shape.order()),
                got: format!("{}", mats.len()),
            });
        }
        for (mode, w) in mats.iter().enumerate() {
            if let Some(w) = w {
                if w.ncols() != self.shape.dim(mode) || w.nrows() == 0 {
                    return Err(Error::DimensionMismatch {
                        expected: format!("p x {} matrix for mode {}", self.shape.dim(mode), mode),
                        got: format!("{}x{}", w.nrows(), w.ncols()),
                    });
                }
            }
        }
        Ok(self.multi_mode_product_unchecked(mats))
    }

    pub(crate) fn multi_mode_product_unchecked(&self, mats: &[Option<&Matrix>]) -> DenseTensor {
        let mut order: Vec<(usize, &Matrix)> = mats
            .iter()
            .enumerate()
            .filter_map(|(mode, w)| w.map(|w| (mode, w)))
            .collect();
        order.sort_by(|(ma, a), (mb, b)| {
            let ra = a.nrows() as f64 / a.ncols() as f64;
            let rb = b.nrows() as f64 / b.ncols() as f64;
            ra.total_cmp(&rb).then(ma.cmp(mb))
        });
        let mut iter = order.into_iter();
        let Some((mode, w)) = iter.next() else {
            return self.clone();
        };
        let mut acc = self.mode_product_unchecked(w, mode);
        for (mode, w) in iter {
            acc = acc.mode_product_unchecked(w, mode);
        }
        acc
    }

    /// `t ×_j U_jᵀ` over the given modes, i.e. projection coordinates.
    pub(crate) fn contract_all(&self, factors: &[&Matrix], skip: Option<usize>) -> DenseTensor {
        let transposed: Vec<Option<Matrix>> = factors
            .iter()
            .enumerate()
            .map(|(j, u)| (Some(j) != skip).then(|| u.transpose()))
            .collect();
        let refs: Vec<Option<&Matrix>> = transposed.iter().map(|m| m.as_ref()).collect();
        self.multi_mode_product_unchecked(&refs)
    }

    /// `M_j(t) M_j(t)ᵀ` without materializing the unfolding.
    pub(crate) fn mode_gram(&self, mode: usize) -> Matrix {
        let (left, n, right) = self.shape.split(mode);
        let mut gram = Matrix::zeros(n, n);
        if right == 1 {
            let xt = DMatrixView::from_slice_with_strides(&self.data, left, n, n, 1);
            gram.gemm_tr(1.0, &xt, &xt, 0.0);
        } else {
            for a in 0..left {
                let block = DMatrixView::from_slice(&self.data[a * n * right..(a + 1) * n * right], right, n);
                gram.gemm_tr(1.0, &block, &block, 1.0);
            }
        }
        gram
    }

    /// Reshape keeping the row-major data layout.
    pub fn reshape(&self, shape: Shape) -> Result<DenseTensor> {
        if shape.numel() != self.shape.numel() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} entries", self.shape.numel()),
                got: format!("{} entries in {}", shape.numel(), shape),
            });
        }
        Ok(DenseTensor::from_raw(shape, self.data.clone()))
    }
}
