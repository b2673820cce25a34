//! Unitary multi-dimensional DFT on a [`Grid`], applied axis by axis.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;
use crate::Scalar;

pub struct SpectralTransform<T: Scalar> {
    grid: Grid,
    forward: Vec<Arc<dyn Fft<T>>>,
    inverse: Vec<Arc<dyn Fft<T>>>,
    norm: T,
}

impl<T: Scalar> std::fmt::Debug for SpectralTransform<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralTransform").field("grid", &self.grid).finish()
    }
}

impl<T: Scalar> SpectralTransform<T> {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = grid.dims().iter().map(|&k| planner.plan_fft_forward(k)).collect();
        let inverse = grid.dims().iter().map(|&k| planner.plan_fft_inverse(k)).collect();
        Self {
            grid: grid.clone(),
            forward,
            inverse,
            norm: T::one() / T::from_count(grid.len()).sqrt(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn transform(&self, data: &mut [Complex<T>], plans: &[Arc<dyn Fft<T>>]) {
        let grid = &self.grid;
        for (axis, plan) in plans.iter().enumerate() {
            let k = grid.dims()[axis];
            if k == 1 {
                continue;
            }
            let stride = grid.strides()[axis];
            let mut line = vec![Complex::new(T::zero(), T::zero()); k];
            let mut scratch = vec![Complex::new(T::zero(), T::zero()); plan.get_inplace_scratch_len()];
            // every line along `axis` starts at a flat index whose axis coordinate is 0
            for start in (0..grid.len()).filter(|&i| grid.coord(i, axis) == 0) {
                for (j, l) in line.iter_mut().enumerate() {
                    *l = data[start + j * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (j, l) in line.iter().enumerate() {
                    data[start + j * stride] = *l;
                }
            }
        }
        for v in data.iter_mut() {
            *v = *v * self.norm;
        }
    }

    pub fn forward_real(&self, x: &[T]) -> Vec<Complex<T>> {
        let mut data: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    pub fn forward(&self, data: &mut [Complex<T>]) {
        self.transform(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex<T>]) {
        self.transform(data, &self.inverse);
    }

    /// Signed frequency of index `k` along `axis`, in cycles per sample.
    pub fn frequency(&self, k: usize, axis: usize) -> f64 {
        let n = self.grid.dims()[axis];
        let signed = if 2 * k < n { k as f64 } else { k as f64 - n as f64 };
        signed / n as f64
    }
}
