//! Forward differences with Neumann boundaries, discrete total variation and
//! the dual machinery used by the TV proximal solvers.
//!
//! Axes are 0-based throughout: axis `n` of a [`Grid`] has stride
//! `grid.strides()[n]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Result};
use crate::grid::Grid;
use crate::linalg::{dot, norm, scale};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TvMode {
    /// l2 norm of the per-voxel gradient.
    #[default]
    Isotropic,
    /// l1 norm of the per-voxel gradient.
    Anisotropic,
}

/// A `d x N` stack of dual variables, one row per axis.
///
/// Rows are stored contiguously, so row `n` pairs with the difference image
/// along axis `n`; the column for voxel `k` is the strided view
/// `[values[k], values[N + k], ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualField<T> {
    ndim: usize,
    len: usize,
    values: Vec<T>,
}

impl<T: Scalar> DualField<T> {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            ndim: grid.ndim(),
            len: grid.len(),
            values: vec![T::zero(); grid.ndim() * grid.len()],
        }
    }

    /// Builds a field from `d` rows laid end to end.
    pub fn from_rows(grid: &Grid, values: Vec<T>) -> Result<Self> {
        check_len(grid.ndim() * grid.len(), values.len())?;
        Ok(Self {
            ndim: grid.ndim(),
            len: grid.len(),
            values,
        })
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }

    /// Voxels per row.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn row(&self, axis: usize) -> &[T] {
        &self.values[axis * self.len..(axis + 1) * self.len]
    }

    pub fn row_mut(&mut self, axis: usize) -> &mut [T] {
        &mut self.values[axis * self.len..(axis + 1) * self.len]
    }

    pub fn column(&self, voxel: usize) -> impl Iterator<Item = T> + '_ {
        (0..self.ndim).map(move |n| self.values[n * self.len + voxel])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    pub fn norm(&self) -> T {
        norm(&self.values)
    }

    pub fn dot(&self, other: &Self) -> T {
        dot(&self.values, &other.values)
    }

    fn matches(&self, grid: &Grid) -> Result<()> {
        check_len(grid.ndim() * grid.len(), self.values.len())
    }
}

fn diff_into<T: Scalar>(grid: &Grid, x: &[T], axis: usize, out: &mut [T]) {
    let stride = grid.strides()[axis];
    let last = grid.dims()[axis] - 1;
    for (i, o) in out.iter_mut().enumerate() {
        *o = if grid.coord(i, axis) < last {
            x[i + stride] - x[i]
        } else {
            T::zero()
        };
    }
}

/// Accumulates `(D^n)^T y` into `out`.
fn diff_adjoint_acc<T: Scalar>(grid: &Grid, y: &[T], axis: usize, out: &mut [T]) {
    let stride = grid.strides()[axis];
    let last = grid.dims()[axis] - 1;
    for (i, o) in out.iter_mut().enumerate() {
        let k = grid.coord(i, axis);
        let mut v = T::zero();
        if k < last {
            v = v - y[i];
        }
        if k > 0 {
            v = v + y[i - stride];
        }
        *o = *o + v;
    }
}

/// Forward difference `D^n x` along `axis`; the far boundary rows are zero.
pub fn apply_diff<T: Scalar>(grid: &Grid, x: &[T], axis: usize) -> Result<Vec<T>> {
    grid.check_axis(axis)?;
    check_len(grid.len(), x.len())?;
    let mut out = vec![T::zero(); grid.len()];
    diff_into(grid, x, axis, &mut out);
    Ok(out)
}

/// Exact adjoint `(D^n)^T y` of [`apply_diff`].
pub fn apply_diff_adjoint<T: Scalar>(grid: &Grid, y: &[T], axis: usize) -> Result<Vec<T>> {
    grid.check_axis(axis)?;
    check_len(grid.len(), y.len())?;
    let mut out = vec![T::zero(); grid.len()];
    diff_adjoint_acc(grid, y, axis, &mut out);
    Ok(out)
}

/// Discrete total variation of `x`.
pub fn tv_value<T: Scalar>(grid: &Grid, x: &[T], mode: TvMode) -> Result<T> {
    let grad = dual_adjoint(grid, x)?;
    let n = grid.len();
    let total = match mode {
        TvMode::Isotropic => (0..n)
            .map(|k| grad.column(k).map(|v| v * v).sum::<T>().sqrt())
            .sum(),
        TvMode::Anisotropic => grad.as_slice().iter().map(|v| v.abs()).sum(),
    };
    Ok(total)
}

/// `d(P) = sum_n (D^n)^T r_n`.
pub fn dual_divergence<T: Scalar>(grid: &Grid, p: &DualField<T>) -> Result<Vec<T>> {
    p.matches(grid)?;
    let mut out = vec![T::zero(); grid.len()];
    for axis in 0..grid.ndim() {
        diff_adjoint_acc(grid, p.row(axis), axis, &mut out);
    }
    Ok(out)
}

/// Adjoint of [`dual_divergence`]: the stack `[D^0 x; ..; D^{d-1} x]`.
pub fn dual_adjoint<T: Scalar>(grid: &Grid, x: &[T]) -> Result<DualField<T>> {
    check_len(grid.len(), x.len())?;
    let mut p = DualField::zeros(grid);
    for axis in 0..grid.ndim() {
        diff_into(grid, x, axis, p.row_mut(axis));
    }
    Ok(p)
}

/// Projects onto the dual feasible set in place: column-wise unit l2 balls
/// (isotropic) or the unit l-infinity box (anisotropic).
pub fn project_dual_in_place<T: Scalar>(p: &mut DualField<T>, mode: TvMode) {
    match mode {
        TvMode::Isotropic => {
            let (len, ndim) = (p.len, p.ndim);
            for k in 0..len {
                let nrm = (0..ndim)
                    .map(|n| p.values[n * len + k])
                    .map(|v| v * v)
                    .sum::<T>()
                    .sqrt();
                if nrm > T::one() {
                    let inv = T::one() / nrm;
                    for n in 0..ndim {
                        let v = &mut p.values[n * len + k];
                        *v = *v * inv;
                    }
                }
            }
        }
        TvMode::Anisotropic => {
            for v in p.values.iter_mut() {
                *v = v.max(-T::one()).min(T::one());
            }
        }
    }
}

pub fn project_dual<T: Scalar>(mut p: DualField<T>, mode: TvMode) -> DualField<T> {
    project_dual_in_place(&mut p, mode);
    p
}

/// Estimates `||d||^2`, the largest eigenvalue of `d o d^T` (a Neumann
/// Laplacian), by power iteration from a seeded random start.
pub fn divergence_norm_sq<T: Scalar>(grid: &Grid, iterations: usize, seed: u64) -> T {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<T> = (0..grid.len())
        .map(|_| T::lit(StandardNormal.sample(&mut rng)))
        .collect();
    let mut estimate = T::zero();
    for _ in 0..iterations {
        let nrm = norm(&x);
        if nrm == T::zero() {
            return T::zero();
        }
        scale(T::one() / nrm, &mut x);
        let p = dual_adjoint(grid, &x).expect("grid-shaped");
        let y = dual_divergence(grid, &p).expect("grid-shaped");
        estimate = dot(&x, &y);
        x = y;
    }
    estimate
}
