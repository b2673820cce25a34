//! Multi-view measurement models and the data-fidelity terms built on them.
//!
//! A view maps a real image to complex measurements; its fidelity is
//! `f(x) = 1/2 ||H(x) - y||^2` with the real inner product
//! `<a, b> = Re(a^H b)` on the measurement side.

mod fft;
mod phantom;
mod views;

use std::sync::Arc;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{dist_sq, dot, norm};
use crate::tv::{tv_value, TvMode};
use crate::Scalar;

pub use fft::SpectralTransform;
pub use phantom::{make_phantom, Phantom, PhantomKind, Sphere};
pub use views::{
    make_linear_views, make_nonlinear_views, smoothing_apply, MaskedSpectrum, SmoothedQuadratic,
    ViewSpec,
};

/// A (possibly nonlinear) forward operator from real images to complex data.
pub trait MeasurementModel<T: Scalar>: Send + Sync {
    fn input_len(&self) -> usize;

    fn output_len(&self) -> usize;

    fn forward(&self, x: &[T]) -> Vec<Complex<T>>;

    /// Jacobian of [`forward`](Self::forward) at `x` applied to `v`.
    fn jacobian_apply(&self, x: &[T], v: &[T]) -> Vec<Complex<T>>;

    /// Adjoint of the Jacobian at `x` applied to `z`.
    fn jacobian_adjoint(&self, x: &[T], z: &[Complex<T>]) -> Vec<T>;

    fn is_linear(&self) -> bool {
        false
    }
}

/// One data-fidelity term `f(x) = 1/2 ||H(x) - y||^2`.
#[derive(Clone)]
pub struct ViewProblem<T: Scalar> {
    pub id: usize,
    model: Arc<dyn MeasurementModel<T>>,
    y: Vec<Complex<T>>,
}

impl<T: Scalar> std::fmt::Debug for ViewProblem<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ViewProblem")
            .field("id", &self.id)
            .field("measurements", &self.y.len())
            .finish()
    }
}

impl<T: Scalar> ViewProblem<T> {
    pub fn new(id: usize, model: Arc<dyn MeasurementModel<T>>, y: Vec<Complex<T>>) -> Result<Self> {
        if y.len() != model.output_len() {
            return Err(Error::ShapeMismatch {
                expected: model.output_len(),
                actual: y.len(),
            });
        }
        Ok(Self { id, model, y })
    }

    pub fn model(&self) -> &Arc<dyn MeasurementModel<T>> {
        &self.model
    }

    pub fn measurements(&self) -> &[Complex<T>] {
        &self.y
    }

    pub fn input_len(&self) -> usize {
        self.model.input_len()
    }

    pub fn forward(&self, x: &[T]) -> Vec<Complex<T>> {
        self.model.forward(x)
    }

    pub fn adjoint(&self, x: &[T], z: &[Complex<T>]) -> Vec<T> {
        self.model.jacobian_adjoint(x, z)
    }

    fn residual(&self, x: &[T]) -> Vec<Complex<T>> {
        self.model
            .forward(x)
            .into_iter()
            .zip(&self.y)
            .map(|(h, &y)| h - y)
            .collect()
    }

    pub fn value(&self, x: &[T]) -> T {
        T::lit(0.5) * self.residual(x).iter().map(|c| c.norm_sqr()).sum::<T>()
    }

    pub fn gradient(&self, x: &[T]) -> Vec<T> {
        let r = self.residual(x);
        self.model.jacobian_adjoint(x, &r)
    }

    pub fn value_and_gradient(&self, x: &[T]) -> (T, Vec<T>) {
        let r = self.residual(x);
        let v = T::lit(0.5) * r.iter().map(|c| c.norm_sqr()).sum::<T>();
        (v, self.model.jacobian_adjoint(x, &r))
    }

    /// Adjoint test at a seeded random point: `<J v, z> = <v, J^T z>`.
    pub fn adjoint_mismatch(&self, seed: u64) -> T {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.input_len();
        let x = gaussian_vec::<T>(&mut rng, n);
        let v = gaussian_vec::<T>(&mut rng, n);
        let z: Vec<Complex<T>> = (0..self.model.output_len())
            .map(|_| Complex::new(gaussian(&mut rng), gaussian(&mut rng)))
            .collect();
        let jv = self.model.jacobian_apply(&x, &v);
        let lhs = jv.iter().zip(&z).fold(T::zero(), |acc, (a, b)| acc + a.re * b.re + a.im * b.im);
        let rhs = dot(&v, &self.model.jacobian_adjoint(&x, &z));
        let scale = norm(&v) * z.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt();
        (lhs - rhs).abs() / scale.max(T::min_positive_value())
    }

    /// Relative error of the analytic directional derivative against a
    /// central difference at a seeded random point.
    pub fn gradient_mismatch(&self, seed: u64, step: T) -> T {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.input_len();
        let x = gaussian_vec::<T>(&mut rng, n);
        let d = gaussian_vec::<T>(&mut rng, n);
        let shifted = |s: T| -> T {
            let p: Vec<T> = x.iter().zip(&d).map(|(&a, &b)| a + s * b).collect();
            self.value(&p)
        };
        let fd = (shifted(step) - shifted(-step)) / (T::lit(2.0) * step);
        let an = dot(&self.gradient(&x), &d);
        (fd - an).abs() / an.abs().max(T::lit(1e-12))
    }
}

pub(crate) fn gaussian<T: Scalar>(rng: &mut ChaCha8Rng) -> T {
    let v: f64 = StandardNormal.sample(rng);
    T::lit(v)
}

pub(crate) fn gaussian_vec<T: Scalar>(rng: &mut ChaCha8Rng, n: usize) -> Vec<T> {
    (0..n).map(|_| gaussian(rng)).collect()
}

/// Mean fidelity over the views listed in `subset`.
pub fn subset_value<T: Scalar>(views: &[ViewProblem<T>], subset: &[usize], x: &[T]) -> T {
    let total: T = subset.iter().map(|&i| views[i].value(x)).sum();
    total / T::from_count(subset.len().max(1))
}

/// Mean gradient over the views listed in `subset`, summed in index order.
pub fn subset_gradient<T: Scalar>(views: &[ViewProblem<T>], subset: &[usize], x: &[T]) -> Vec<T> {
    let mut acc = vec![T::zero(); x.len()];
    for &i in subset {
        for (a, g) in acc.iter_mut().zip(views[i].gradient(x)) {
            *a = *a + g;
        }
    }
    let inv = T::one() / T::from_count(subset.len().max(1));
    acc.iter_mut().for_each(|a| *a = *a * inv);
    acc
}

/// Full cost `mean_views f(x) + lambda TV(x)`.
pub fn full_cost<T: Scalar>(
    grid: &Grid,
    views: &[ViewProblem<T>],
    x: &[T],
    lambda: T,
    mode: TvMode,
) -> Result<T> {
    let all: Vec<usize> = (0..views.len()).collect();
    let tv = if lambda == T::zero() {
        T::zero()
    } else {
        tv_value(grid, x, mode)?
    };
    Ok(subset_value(views, &all, x) + lambda * tv)
}

/// `20 log10(||x_ref|| / ||x - x_ref||)`; `+inf` when `x == x_ref`.
pub fn snr_db<T: Scalar>(x: &[T], x_ref: &[T]) -> Result<T> {
    crate::error::check_len(x_ref.len(), x.len())?;
    let err = dist_sq(x, x_ref).sqrt();
    if err == T::zero() {
        return Ok(T::infinity());
    }
    Ok(T::lit(20.0) * (norm(x_ref) / err).log10())
}

/// Adjoint of the mean view applied to the data, `mean_v J_v(0)^T y_v`.
pub fn backprojection<T: Scalar>(views: &[ViewProblem<T>]) -> Vec<T> {
    let n = views.first().map_or(0, |v| v.input_len());
    let zero = vec![T::zero(); n];
    let mut acc = vec![T::zero(); n];
    for v in views {
        for (a, b) in acc.iter_mut().zip(v.adjoint(&zero, v.measurements())) {
            *a = *a + b;
        }
    }
    let inv = T::one() / T::from_count(views.len().max(1));
    acc.iter_mut().for_each(|a| *a = *a * inv);
    acc
}

/// Largest eigenvalue of the Gauss-Newton matrix `mean_v J_v^T J_v` at `x`,
/// by seeded power iteration.
pub fn gauss_newton_lipschitz<T: Scalar>(
    views: &[ViewProblem<T>],
    subset: &[usize],
    x: &[T],
    iterations: usize,
    seed: u64,
) -> T {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = gaussian_vec::<T>(&mut rng, x.len());
    let mut est = T::zero();
    for _ in 0..iterations.max(1) {
        let nv = norm(&v);
        if nv == T::zero() {
            return T::zero();
        }
        v.iter_mut().for_each(|e| *e = *e / nv);
        let mut acc = vec![T::zero(); x.len()];
        for &i in subset {
            let m = views[i].model();
            let jv = m.jacobian_apply(x, &v);
            for (a, b) in acc.iter_mut().zip(m.jacobian_adjoint(x, &jv)) {
                *a = *a + b;
            }
        }
        let inv = T::one() / T::from_count(subset.len().max(1));
        acc.iter_mut().for_each(|a| *a = *a * inv);
        est = dot(&v, &acc);
        v = acc;
    }
    est
}
