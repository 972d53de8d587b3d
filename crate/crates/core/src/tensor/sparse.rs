use super::{DenseTensor, Shape};
use crate::error::{Error, Result};

/// Coordinate-format tensor. Entries are kept sorted by flat row-major index.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseTensor {
    shape: Shape,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseTensor {
    pub fn empty(shape: Shape) -> Self {
        Self {
            shape,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from `(multi-index, value)` pairs in any order.
    pub fn new(shape: Shape, entries: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        let flat = entries
            .into_iter()
            .map(|(idx, v)| Ok((shape.ravel(&idx)?, v)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_flat(shape, flat)
    }

    /// Builds from `(flat index, value)` pairs in any order.
    pub fn from_flat(shape: Shape, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.sort_by_key(|&(i, _)| i);
        for (k, &(i, v)) in entries.iter().enumerate() {
            if i >= shape.numel() {
                return Err(Error::IndexOutOfBounds {
                    index: vec![i],
                    dims: shape.dims().to_vec(),
                });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite(i));
            }
            if k > 0 && entries[k - 1].0 == i {
                return Err(Error::DuplicateIndex(shape.unravel(i)));
            }
        }
        let (indices, values) = entries.into_iter().unzip();
        Ok(Self { shape, indices, values })
    }

    pub(crate) fn from_sorted_unchecked(shape: Shape, indices: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self { shape, indices, values }
    }

    #[inline]
    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Number of stored entries.
    #[inline]
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Number of stored entries that are exactly nonzero, `‖S‖_ℓ0`.
    pub fn l0_norm(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    #[inline]
    pub fn flat_indices(&self) -> &[usize] {
        &self.indices
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter_flat(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn entries(&self) -> Vec<(Vec<usize>, f64)> {
        self.iter_flat().map(|(i, v)| (self.shape.unravel(i), v)).collect()
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        let flat = self.shape.ravel(index)?;
        Ok(self.get_flat(flat))
    }

    pub(crate) fn get_flat(&self, flat: usize) -> f64 {
        self.indices.binary_search(&flat).map_or(0.0, |k| self.values[k])
    }

    pub fn to_dense(&self) -> DenseTensor {
        let mut data = vec![0.0; self.shape.numel()];
        for (i, v) in self.iter_flat() {
            data[i] = v;
        }
        DenseTensor::from_raw(self.shape.clone(), data)
    }

    /// `dense + self`
    pub fn add_to_dense(&self, dense: &DenseTensor) -> Result<DenseTensor> {
        if dense.shape() != &self.shape {
            return Err(Error::DimensionMismatch {
                expected: self.shape.to_string(),
                got: dense.shape().to_string(),
            });
        }
        let mut out = dense.clone();
        let data = out.data_mut();
        for (i, v) in self.iter_flat() {
            data[i] += v;
        }
        Ok(out)
    }

    /// Entry counts of every slice along `mode`.
    pub fn slice_counts(&self, mode: usize) -> Result<Vec<usize>> {
        self.shape.check_mode(mode)?;
        let (_, n, right) = self.shape.split(mode);
        let mut counts = vec![0; n];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            if v != 0.0 {
                counts[(i / right) % n] += 1;
            }
        }
        Ok(counts)
    }

    /// Smallest `α′` with `self ∈ S_α′`: the largest nonzero fraction over all slices.
    pub fn max_slice_fraction(&self) -> f64 {
        (0..self.shape.order())
            .map(|mode| {
                let counts = self.slice_counts(mode).expect("mode in range");
                let max = counts.into_iter().max().unwrap_or(0);
                max as f64 / self.shape.numel_except(mode) as f64
            })
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `‖self − other‖_F` over the union of both supports.
    pub fn distance(&self, other: &SparseTensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::DimensionMismatch {
                expected: self.shape.to_string(),
                got: other.shape.to_string(),
            });
        }
        let (mut a, mut b) = (0, 0);
        let mut acc = 0.0;
        while a < self.nnz() || b < other.nnz() {
            let ia = self.indices.get(a).copied().unwrap_or(usize::MAX);
            let ib = other.indices.get(b).copied().unwrap_or(usize::MAX);
            let diff = match ia.cmp(&ib) {
                std::cmp::Ordering::Less => {
                    a += 1;
                    self.values[a - 1]
                }
                std::cmp::Ordering::Greater => {
                    b += 1;
                    other.values[b - 1]
                }
                std::cmp::Ordering::Equal => {
                    a += 1;
                    b += 1;
                    self.values[a - 1] - other.values[b - 1]
                }
            };
            acc += diff * diff;
        }
        Ok(acc.sqrt())
    }

    /// Flat indices carrying a nonzero value.
    pub fn support(&self) -> Vec<usize> {
        self.iter_flat().filter(|&(_, v)| v != 0.0).map(|(i, _)| i).collect()
    }

    /// Keeps entries satisfying `keep(flat, value)`.
    pub fn filter(&self, mut keep: impl FnMut(usize, f64) -> bool) -> SparseTensor {
        let (indices, values) = self.iter_flat().filter(|&(i, v)| keep(i, v)).unzip();
        SparseTensor::from_sorted_unchecked(self.shape.clone(), indices, values)
    }
}
