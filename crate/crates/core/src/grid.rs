//! Image/volume descriptors.
//!
//! Images are stored as flat vectors with the first axis varying fastest:
//! the voxel `a[k_0, .., k_{d-1}]` (0-based) lives at `sum_n k_n * stride_n`
//! with `stride_0 = 1` and `stride_n = stride_{n-1} * dims_{n-1}`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Grid {
    dims: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl Grid {
    /// Builds a grid with 1 to 3 positive side lengths.
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.len() > 3 {
            return Err(Error::InvalidGrid(format!(
                "expected 1 to 3 dimensions, got {}",
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidGrid(format!("zero side length in {dims:?}")));
        }
        let mut strides = Vec::with_capacity(dims.len());
        let mut acc = 1usize;
        for &k in dims {
            strides.push(acc);
            acc *= k;
        }
        Ok(Self {
            dims: dims.to_vec(),
            strides,
            len: acc,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Number of spatial dimensions `d`.
    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Total voxel count `N`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Flat index of a multi-index. This is the single place where the
    /// 1-based textbook convention `1 + sum k_n K'_n` is mapped to 0-based
    /// storage: the leading `1 +` is dropped.
    pub fn flat_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.ndim());
        index.iter().zip(&self.strides).map(|(k, s)| k * s).sum()
    }

    /// Coordinate of flat index `flat` along `axis`.
    #[inline]
    pub fn coord(&self, flat: usize, axis: usize) -> usize {
        (flat / self.strides[axis]) % self.dims[axis]
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        (0..self.ndim()).map(|n| self.coord(flat, n)).collect()
    }

    pub(crate) fn check_axis(&self, axis: usize) -> Result<()> {
        if axis < self.ndim() {
            Ok(())
        } else {
            Err(Error::AxisOutOfRange {
                axis,
                ndim: self.ndim(),
            })
        }
    }
}
