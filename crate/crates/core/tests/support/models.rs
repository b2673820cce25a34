//! Small measurement models used only by tests.

use std::f64::consts::PI;
use std::sync::Arc;

use bqnpm::forward::{MeasurementModel, SpectralTransform, ViewProblem};
use bqnpm::Grid;
use num_complex::Complex;

/// `H = diag(w) F` with a Gaussian transfer function `w`, i.e. a periodic
/// blur observed in the unitary Fourier domain.
#[derive(Debug)]
pub struct SpectralBlur {
    transform: SpectralTransform<f64>,
    weights: Vec<f64>,
}

impl SpectralBlur {
    /// Anisotropic Gaussian with widths `(s_along, s_across)` (in samples)
    /// along direction `angle` of the first two axes.
    pub fn gaussian(grid: &Grid, s_along: f64, s_across: f64, angle: f64) -> Self {
        let transform = SpectralTransform::new(grid);
        let (c, s) = (angle.cos(), angle.sin());
        let weights = (0..grid.len())
            .map(|i| {
                let f: Vec<f64> = (0..grid.ndim()).map(|a| transform.frequency(grid.coord(i, a), a)).collect();
                let f1 = f.get(1).copied().unwrap_or(0.0);
                let u = c * f[0] + s * f1;
                let v = -s * f[0] + c * f1;
                (-2.0 * PI * PI * (s_along * s_along * u * u + s_across * s_across * v * v)).exp()
            })
            .collect();
        Self { transform, weights }
    }
}

impl MeasurementModel<f64> for SpectralBlur {
    fn input_len(&self) -> usize {
        self.weights.len()
    }

    fn output_len(&self) -> usize {
        self.weights.len()
    }

    fn forward(&self, x: &[f64]) -> Vec<Complex<f64>> {
        self.transform
            .forward_real(x)
            .into_iter()
            .zip(&self.weights)
            .map(|(c, &w)| c * w)
            .collect()
    }

    fn jacobian_apply(&self, _x: &[f64], v: &[f64]) -> Vec<Complex<f64>> {
        self.forward(v)
    }

    fn jacobian_adjoint(&self, _x: &[f64], z: &[Complex<f64>]) -> Vec<f64> {
        let mut spec: Vec<Complex<f64>> = z.iter().zip(&self.weights).map(|(&c, &w)| c * w).collect();
        self.transform.inverse(&mut spec);
        spec.into_iter().map(|c| c.re).collect()
    }

    fn is_linear(&self) -> bool {
        true
    }
}

/// `views` blurred observations of `truth` with rotating kernels.
pub fn blur_views(grid: &Grid, truth: &[f64], views: usize, s_along: f64, s_across: f64) -> Vec<ViewProblem<f64>> {
    (0..views)
        .map(|id| {
            let angle = PI * id as f64 / views as f64;
            let model = Arc::new(SpectralBlur::gaussian(grid, s_along, s_across, angle));
            let y = model.forward(truth);
            ViewProblem::new(id, model, y).unwrap()
        })
        .collect()
}

/// Piecewise-constant nonnegative test image.
pub fn blocks(grid: &Grid) -> Vec<f64> {
    (0..grid.len())
        .map(|i| {
            let p = grid.multi_index(i);
            let inside = |lo: f64, hi: f64| {
                p.iter().zip(grid.dims()).all(|(&k, &n)| {
                    let t = (k as f64 + 0.5) / n as f64;
                    t > lo && t < hi
                })
            };
            if inside(0.4, 0.6) {
                1.0
            } else if inside(0.2, 0.75) {
                0.5
            } else {
                0.0
            }
        })
        .collect()
}
