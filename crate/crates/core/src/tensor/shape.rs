use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensions `(d_1, ..., d_m)` of an order-`m` tensor, `m >= 2`.
///
/// Modes are addressed 0-based throughout the crate.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Shape {
    dims: Vec<usize>,
    numel: usize,
}

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.len() < 2 {
            return Err(Error::InvalidShape {
                dims,
                reason: "order must be at least 2",
            });
        }
        if dims.contains(&0) {
            return Err(Error::InvalidShape {
                dims,
                reason: "every dimension must be positive",
            });
        }
        let numel = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n <= isize::MAX as usize / std::mem::size_of::<f64>());
        match numel {
            Some(numel) => Ok(Self { dims, numel }),
            None => Err(Error::InvalidShape {
                dims,
                reason: "total size overflows the address space",
            }),
        }
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    pub fn dim(&self, mode: usize) -> usize {
        self.dims[mode]
    }

    /// `d* = d_1 ... d_m`
    #[inline]
    pub fn numel(&self) -> usize {
        self.numel
    }

    /// `d_j^- = d* / d_j`, the column count of the mode-`j` matricization.
    #[inline]
    pub fn numel_except(&self, mode: usize) -> usize {
        self.numel / self.dims[mode]
    }

    /// Largest dimension `d̄`.
    pub fn max_dim(&self) -> usize {
        *self.dims.iter().max().unwrap()
    }

    pub fn min_dim(&self) -> usize {
        *self.dims.iter().min().unwrap()
    }

    pub(crate) fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.order() {
            Ok(())
        } else {
            Err(Error::ModeOutOfRange {
                mode,
                order: self.order(),
            })
        }
    }

    /// Splits the row-major layout around `mode` into `(left, d_mode, right)`
    /// so that flat index `= (a * d_mode + i) * right + b`.
    #[inline]
    pub(crate) fn split(&self, mode: usize) -> (usize, usize, usize) {
        let left: usize = self.dims[..mode].iter().product();
        let right: usize = self.dims[mode + 1..].iter().product();
        (left, self.dims[mode], right)
    }

    pub fn ravel(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.order() || index.iter().zip(&self.dims).any(|(&i, &d)| i >= d) {
            return Err(Error::IndexOutOfBounds {
                index: index.to_vec(),
                dims: self.dims.clone(),
            });
        }
        Ok(index
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| acc * d + i))
    }

    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        debug_assert!(flat < self.numel);
        let mut index = vec![0; self.order()];
        for (slot, &d) in index.iter_mut().zip(&self.dims).rev() {
            *slot = flat % d;
            flat /= d;
        }
        index
    }

    /// Same shape with `dims[mode]` replaced.
    pub(crate) fn with_dim(&self, mode: usize, dim: usize) -> Result<Shape> {
        let mut dims = self.dims.clone();
        dims[mode] = dim;
        Shape::new(dims)
    }
}

impl TryFrom<Vec<usize>> for Shape {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Shape::new(dims)
    }
}

impl From<Shape> for Vec<usize> {
    fn from(shape: Shape) -> Self {
        shape.dims
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

/// Odometer over the multi-indices of a shape in row-major order.
pub(crate) struct IndexCounter<'a> {
    dims: &'a [usize],
    index: Vec<usize>,
}

impl<'a> IndexCounter<'a> {
    pub(crate) fn new(shape: &'a Shape) -> Self {
        Self {
            dims: shape.dims(),
            index: vec![0; shape.order()],
        }
    }

    #[inline]
    pub(crate) fn index(&self) -> &[usize] {
        &self.index
    }

    #[inline]
    pub(crate) fn advance(&mut self) {
        for (slot, &d) in self.index.iter_mut().zip(self.dims).rev() {
            *slot += 1;
            if *slot < d {
                return;
            }
            *slot = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_shapes() {
        assert!(Shape::new(vec![3]).is_err());
        assert!(Shape::new(vec![3, 0, 2]).is_err());
        assert!(Shape::new(vec![usize::MAX, 4]).is_err());
        assert_eq!(Shape::new(vec![3, 4, 5]).unwrap().numel(), 60);
    }

    #[test]
    fn ravel_unravel_agree() {
        let shape = Shape::new(vec![3, 4, 5]).unwrap();
        let mut counter = IndexCounter::new(&shape);
        for flat in 0..shape.numel() {
            assert_eq!(shape.ravel(counter.index()).unwrap(), flat);
            assert_eq!(shape.unravel(flat), counter.index());
            counter.advance();
        }
        assert!(shape.ravel(&[3, 0, 0]).is_err());
        assert!(shape.ravel(&[0, 0]).is_err());
    }

    #[test]
    fn split_matches_row_major_layout() {
        let shape = Shape::new(vec![2, 3, 4, 5]).unwrap();
        assert_eq!(shape.split(0), (1, 2, 60));
        assert_eq!(shape.split(2), (6, 4, 5));
        assert_eq!(shape.split(3), (24, 5, 1));
        assert_eq!(shape.numel_except(1), 40);
    }
}
